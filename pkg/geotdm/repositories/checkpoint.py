"""Model checkpoint files.

Layout, little-endian throughout:

    magic "GCKP" | version u16 | header length u32 | YAML header | tensor blobs | CRC32 u32

The header echoes the model and schedule configuration, the window layout, the training state,
the optimizer hyperparameters, and the name and shape of every tensor blob, in blob order.  Blobs
are 32-bit floats.  Model parameters use their state_dict names; Adam moments are stored as
optim/<parameter>/exp_avg and optim/<parameter>/exp_avg_sq.

Files are written to a temporary name and renamed into place, and nothing is loaded into a model
until the whole file has been validated.
"""

import logging
import struct
import zlib
from collections import OrderedDict
from typing import TYPE_CHECKING

import numpy as np
import torch
import yaml

from geotdm.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from geotdm.egtn.model import EgtnModel
from geotdm.entities.checkpoint import CheckpointMetadata
from geotdm.entities.config import (
    DEFAULT_EGTN_CONFIG,
    DEFAULT_SCHEDULE_CONFIG,
    EgtnConfig,
    ScheduleConfig,
    Task,
    TrainMode,
)
from geotdm.entities.training import INITIAL_TRAINING_STATE, TrainingState
from geotdm.exc import CheckpointCorrupted, CheckpointShapeMismatch, CheckpointVersionMismatch
from geotdm.usecases.interfaces import CheckpointStoreInterface
from geotdm.util import (
    atomic_write,
    InvalidFieldsError,
    namedtuple_from_dict,
    namedtuple_to_dict,
)

if TYPE_CHECKING:
    from torch import Tensor
    from torch.optim import Optimizer
    from typing import Any, Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)

_PREFIX = struct.Struct("<4sHI")
_CHECKSUM = struct.Struct("<I")

OPTIMIZER_PREFIX = "optim/"
MOMENTS = ("exp_avg", "exp_avg_sq")


def _plain(value):
    # type: (Any) -> Any
    """Convert tuples and scalar tensors so the value can be written with yaml.safe_dump."""
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, torch.Tensor):
        return value.item()
    return value


def metadata_to_dict(metadata):
    # type: (CheckpointMetadata) -> Dict[str, Any]
    return {
        "model": namedtuple_to_dict(metadata.model_config),
        "schedule": namedtuple_to_dict(metadata.schedule_config),
        "n_frames": metadata.n_frames,
        "cond_frames": metadata.cond_frames,
        "mode": metadata.mode.value,
        "task": metadata.task.value,
        "state": namedtuple_to_dict(metadata.state),
    }


def metadata_from_dict(data):
    # type: (Dict[str, Any]) -> CheckpointMetadata
    try:
        return CheckpointMetadata(
            model_config=namedtuple_from_dict(EgtnConfig, data["model"], DEFAULT_EGTN_CONFIG),
            schedule_config=namedtuple_from_dict(
                ScheduleConfig, data["schedule"], DEFAULT_SCHEDULE_CONFIG
            ),
            n_frames=int(data["n_frames"]),
            cond_frames=int(data["cond_frames"]),
            mode=TrainMode(data["mode"]),
            task=Task(data["task"]),
            state=namedtuple_from_dict(TrainingState, data["state"], INITIAL_TRAINING_STATE),
        )
    except (KeyError, TypeError, ValueError, InvalidFieldsError) as e:
        raise CheckpointCorrupted("invalid checkpoint header: {}".format(e))


def _optimizer_tensors(model, optimizer):
    # type: (EgtnModel, Optimizer) -> Tuple[Dict[str, Any], List[Tuple[str, Tensor]]]
    names = [name for name, _ in model.named_parameters()]
    state = optimizer.state_dict()
    steps = {}
    tensors = []
    for index, entry in sorted(state["state"].items()):
        name = names[index]
        steps[name] = float(entry["step"])
        for moment in MOMENTS:
            tensors.append(("{}{}/{}".format(OPTIMIZER_PREFIX, name, moment), entry[moment]))
    header = {"param_groups": _plain(state["param_groups"]), "steps": steps}
    return header, tensors


def encode_checkpoint(model, optimizer, metadata):
    # type: (EgtnModel, Optional[Optimizer], CheckpointMetadata) -> bytes
    header = metadata_to_dict(metadata)
    tensors = [(name, tensor.detach()) for name, tensor in model.state_dict().items()]
    if optimizer is not None:
        header["optimizer"], moments = _optimizer_tensors(model, optimizer)
        tensors.extend(moments)
    header["tensors"] = [{"name": name, "shape": list(t.shape)} for name, t in tensors]
    header_bytes = yaml.safe_dump(header, default_flow_style=False).encode("utf-8")
    blobs = [np.ascontiguousarray(t.cpu().numpy(), dtype="<f4").tobytes() for _, t in tensors]
    body = b"".join(
        [_PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes)), header_bytes]
        + blobs
    )
    return body + _CHECKSUM.pack(zlib.crc32(body) & 0xFFFFFFFF)


def decode_checkpoint(data):
    # type: (bytes) -> Tuple[CheckpointMetadata, Dict[str, Any], Dict[str, Tensor]]
    """Validate and parse a checkpoint; return its metadata, raw header, and tensors by name."""
    if len(data) < _PREFIX.size + _CHECKSUM.size:
        raise CheckpointCorrupted("checkpoint is truncated")
    magic, version, header_length = _PREFIX.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointCorrupted("bad magic {!r}".format(magic))
    if version != CHECKPOINT_VERSION:
        msg = "unsupported checkpoint version {} (expected {})".format(version, CHECKPOINT_VERSION)
        raise CheckpointVersionMismatch(msg)
    end = len(data) - _CHECKSUM.size
    (expected,) = _CHECKSUM.unpack_from(data, end)
    if zlib.crc32(memoryview(data)[:end]) & 0xFFFFFFFF != expected:
        raise CheckpointCorrupted("checksum mismatch")

    start = _PREFIX.size + header_length
    if start > end:
        raise CheckpointCorrupted("header runs past the end of the file")
    try:
        header = yaml.safe_load(data[_PREFIX.size : start].decode("utf-8"))
        entries = [(str(t["name"]), tuple(int(s) for s in t["shape"])) for t in header["tensors"]]
    except (UnicodeDecodeError, yaml.YAMLError, KeyError, TypeError, ValueError) as e:
        raise CheckpointCorrupted("invalid checkpoint header: {}".format(e))
    metadata = metadata_from_dict(header)

    tensors = OrderedDict()  # type: Dict[str, Tensor]
    position = start
    for name, shape in entries:
        count = int(np.prod(shape, dtype=np.int64))
        if position + 4 * count > end:
            raise CheckpointCorrupted("tensor {} runs past the end of the file".format(name))
        array = np.frombuffer(data, dtype="<f4", count=count, offset=position)
        tensors[name] = torch.from_numpy(array.astype(np.float32).reshape(shape))
        position += 4 * count
    if position != end:
        msg = "{} unexpected bytes after the last tensor".format(end - position)
        raise CheckpointCorrupted(msg)
    return metadata, header, tensors


def check_model_tensors(model, tensors):
    # type: (EgtnModel, Dict[str, Tensor]) -> None
    """Raise CheckpointShapeMismatch naming every tensor that does not fit the model."""
    expected = {name: tuple(t.shape) for name, t in model.state_dict().items()}
    stored = {
        name: tuple(t.shape)
        for name, t in tensors.items()
        if not name.startswith(OPTIMIZER_PREFIX)
    }
    mismatches = []
    for name in sorted(set(expected) | set(stored)):
        if name not in stored:
            mismatches.append("{} is missing".format(name))
        elif name not in expected:
            mismatches.append("{} is unexpected".format(name))
        elif stored[name] != expected[name]:
            mismatches.append(
                "{} has shape {} but the model expects {}".format(
                    name, list(stored[name]), list(expected[name])
                )
            )
    if mismatches:
        raise CheckpointShapeMismatch(mismatches)


def restore_optimizer(optimizer, model, header, tensors):
    # type: (Optimizer, EgtnModel, Dict[str, Any], Dict[str, Tensor]) -> None
    saved = header.get("optimizer")
    if saved is None:
        logger.warning("checkpoint has no optimizer state; optimizer left unchanged")
        return
    state = {}
    for index, (name, _) in enumerate(model.named_parameters()):
        if name not in saved["steps"]:
            continue
        entry = {"step": torch.tensor(float(saved["steps"][name]))}
        for moment in MOMENTS:
            key = "{}{}/{}".format(OPTIMIZER_PREFIX, name, moment)
            if key not in tensors:
                raise CheckpointCorrupted("optimizer moment {} is missing".format(key))
            entry[moment] = tensors[key]
        state[index] = entry
    try:
        optimizer.load_state_dict({"state": state, "param_groups": saved["param_groups"]})
    except (KeyError, ValueError) as e:
        raise CheckpointShapeMismatch(["optimizer: {}".format(e)])


class CheckpointFileRepository(CheckpointStoreInterface):
    """Reads and writes checkpoint files, placing restored models on device."""

    def __init__(self, device="cpu"):
        # type: (str) -> None
        self.device = torch.device(device)

    def save_checkpoint(self, path, model, optimizer, metadata):
        # type: (str, EgtnModel, Optional[Optimizer], CheckpointMetadata) -> None
        atomic_write(path, encode_checkpoint(model, optimizer, metadata))
        logger.debug("wrote checkpoint %s at step %d", path, metadata.state.step)

    def load_model(self, path):
        # type: (str) -> Tuple[EgtnModel, CheckpointMetadata]
        metadata, _, tensors = self._read(path)
        model = EgtnModel(metadata.model_config, metadata.n_frames)
        check_model_tensors(model, tensors)
        model.load_state_dict(self._model_state(tensors))
        return model.to(self.device), metadata

    def load_into(self, path, model, optimizer=None):
        # type: (str, EgtnModel, Optional[Optimizer]) -> CheckpointMetadata
        metadata, header, tensors = self._read(path)
        check_model_tensors(model, tensors)
        model.load_state_dict(self._model_state(tensors))
        if optimizer is not None:
            restore_optimizer(optimizer, model, header, tensors)
        return metadata

    @staticmethod
    def _model_state(tensors):
        # type: (Dict[str, Tensor]) -> Dict[str, Tensor]
        return OrderedDict(
            (name, t) for name, t in tensors.items() if not name.startswith(OPTIMIZER_PREFIX)
        )

    @staticmethod
    def _read(path):
        # type: (str) -> Tuple[CheckpointMetadata, Dict[str, Any], Dict[str, Tensor]]
        logger.debug("reading checkpoint %s", path)
        with open(path, "rb") as f:
            data = f.read()
        return decode_checkpoint(data)
