import struct
from typing import TYPE_CHECKING

import pytest
import torch

from geotdm.egtn.model import EgtnModel
from geotdm.entities.checkpoint import CheckpointMetadata
from geotdm.entities.config import DEFAULT_SCHEDULE_CONFIG, DEFAULT_TRAIN_CONFIG, Task, TrainMode
from geotdm.entities.training import TrainingState
from geotdm.exc import CheckpointCorrupted, CheckpointShapeMismatch, CheckpointVersionMismatch
from geotdm.repositories.checkpoint import (
    CheckpointFileRepository,
    decode_checkpoint,
    encode_checkpoint,
    metadata_from_dict,
    metadata_to_dict,
)
from geotdm.train import make_optimizer
from tests.util import randomize_parameters, TINY_CONFIG

if TYPE_CHECKING:
    from py.path import LocalPath
    from typing import Tuple

N_FRAMES = 3

METADATA = CheckpointMetadata(
    model_config=TINY_CONFIG,
    schedule_config=DEFAULT_SCHEDULE_CONFIG._replace(n_steps=10),
    n_frames=N_FRAMES,
    cond_frames=2,
    mode=TrainMode.COND,
    task=Task.FORECAST,
    state=TrainingState(step=12, epoch=4, best_valid_loss=0.5, bad_validations=1),
)


def _trained(seed=0):
    # type: (int) -> Tuple[EgtnModel, torch.optim.Adam]
    """A model with random parameters and an optimizer that has taken one step."""
    model = EgtnModel(TINY_CONFIG, N_FRAMES)
    randomize_parameters(model, seed)
    optimizer = make_optimizer(model, DEFAULT_TRAIN_CONFIG)
    for parameter in model.parameters():
        parameter.grad = torch.ones_like(parameter)
    optimizer.step()
    return model, optimizer


def test_metadata_dict():
    # type: () -> None
    assert metadata_from_dict(metadata_to_dict(METADATA)) == METADATA
    data = metadata_to_dict(METADATA)
    data["mode"] = "sideways"
    with pytest.raises(CheckpointCorrupted):
        metadata_from_dict(data)
    with pytest.raises(CheckpointCorrupted):
        metadata_from_dict({"model": {}})


def test_save_and_load(tmpdir):
    # type: (LocalPath) -> None
    path = str(tmpdir.join("model.ckpt"))
    model, optimizer = _trained()
    repository = CheckpointFileRepository()
    repository.save_checkpoint(path, model, optimizer, METADATA)
    assert tmpdir.listdir() == [tmpdir.join("model.ckpt")]

    loaded, metadata = repository.load_model(path)
    assert metadata == METADATA
    for (name, a), (_, b) in zip(loaded.state_dict().items(), model.state_dict().items()):
        assert torch.equal(a, b), name

    # Restoring into a fresh model and optimizer continues where the saved run left off.
    fresh, fresh_optimizer = _trained(seed=1)
    repository.load_into(path, fresh, fresh_optimizer)
    saved_state = optimizer.state_dict()["state"]
    restored_state = fresh_optimizer.state_dict()["state"]
    assert sorted(restored_state) == sorted(saved_state)
    for index in saved_state:
        assert float(restored_state[index]["step"]) == float(saved_state[index]["step"])
        assert torch.equal(restored_state[index]["exp_avg"], saved_state[index]["exp_avg"])


def test_load_without_optimizer(tmpdir, caplog):
    # type: (LocalPath, pytest.LogCaptureFixture) -> None
    path = str(tmpdir.join("model.ckpt"))
    model, _ = _trained()
    repository = CheckpointFileRepository()
    repository.save_checkpoint(path, model, None, METADATA)

    fresh, optimizer = _trained(seed=1)
    before = optimizer.state_dict()["state"][0]["exp_avg"].clone()
    repository.load_into(path, fresh, optimizer)
    assert torch.equal(optimizer.state_dict()["state"][0]["exp_avg"], before)
    assert "no optimizer state" in caplog.text


def test_shape_mismatch(tmpdir):
    # type: (LocalPath) -> None
    path = str(tmpdir.join("model.ckpt"))
    model, optimizer = _trained()
    CheckpointFileRepository().save_checkpoint(path, model, optimizer, METADATA)

    wider = EgtnModel(TINY_CONFIG._replace(hidden_dim=12), N_FRAMES)
    with pytest.raises(CheckpointShapeMismatch) as excinfo:
        CheckpointFileRepository().load_into(path, wider)
    assert any("but the model expects" in m for m in excinfo.value.mismatches)

    deeper = EgtnModel(TINY_CONFIG._replace(n_layers=3), N_FRAMES)
    with pytest.raises(CheckpointShapeMismatch) as excinfo:
        CheckpointFileRepository().load_into(path, deeper)
    assert any(m.endswith("is missing") for m in excinfo.value.mismatches)


def test_corrupted_checkpoints():
    # type: () -> None
    model, optimizer = _trained()
    data = encode_checkpoint(model, optimizer, METADATA)
    metadata, header, tensors = decode_checkpoint(data)
    assert metadata == METADATA
    assert "optim/gamma/exp_avg" in tensors
    assert [t["name"] for t in header["tensors"]] == list(tensors)

    with pytest.raises(CheckpointCorrupted):
        decode_checkpoint(data[:5])
    with pytest.raises(CheckpointCorrupted):
        decode_checkpoint(b"XCKP" + data[4:])
    with pytest.raises(CheckpointCorrupted):
        decode_checkpoint(data[:-8] + data[-4:])

    flipped = bytearray(data)
    flipped[len(data) // 2] ^= 0xFF
    with pytest.raises(CheckpointCorrupted):
        decode_checkpoint(bytes(flipped))

    newer = data[:4] + struct.pack("<H", 2) + data[6:]
    with pytest.raises(CheckpointVersionMismatch):
        decode_checkpoint(newer)
