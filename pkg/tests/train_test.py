import math
from typing import TYPE_CHECKING

import pytest
import torch
from mock import patch

from geotdm.diffusion.schedule import make_linear_schedule
from geotdm.egtn.model import EgtnModel
from geotdm.entities.config import DEFAULT_TRAIN_CONFIG, TrainMode
from geotdm.entities.trajectory import TrajectoryWindows
from geotdm.exc import NumericalError
from geotdm.plugin import get_plugin_proxy, set_global_plugin_proxy
from geotdm.plugin.proxy import PluginProxy
from geotdm.train import make_optimizer, TrainingListener, train_run, validation_loss
from plugins.test_stats_recorder import TestStatsRecorderPlugin
from tests.util import TINY_CONFIG

if TYPE_CHECKING:
    from geotdm.entities.training import MetricsLogEntry, TrainingState
    from typing import Dict, Iterator, List

T, T_C, N, D = 3, 2, 3, 3

SCHEDULE = make_linear_schedule(6, 1e-2, 0.2)

CONFIG = DEFAULT_TRAIN_CONFIG._replace(
    learning_rate=1e-2, batch_size=2, max_epochs=4, validation_interval=2, seed=3
)


class RecordingListener(TrainingListener):
    def __init__(self):
        # type: () -> None
        self.entries = []  # type: List[MetricsLogEntry]
        self.saved = []  # type: List[TrainingState]
        self.best = {}  # type: Dict[str, torch.Tensor]

    def record_metrics(self, entry):
        # type: (MetricsLogEntry) -> None
        self.entries.append(entry)

    def save_checkpoint(self, model, optimizer, state):
        # type: (EgtnModel, torch.optim.Optimizer, TrainingState) -> str
        self.saved.append(state)
        self.best = {k: v.clone() for k, v in model.state_dict().items()}
        return "checkpoint-{}".format(len(self.saved))


@pytest.fixture
def recorder():
    # type: () -> Iterator[TestStatsRecorderPlugin]
    plugin = TestStatsRecorderPlugin()
    previous = get_plugin_proxy()
    set_global_plugin_proxy(PluginProxy([plugin]))
    yield plugin
    set_global_plugin_proxy(previous)


def _windows(seed, batch):
    # type: (int, int) -> TrajectoryWindows
    generator = torch.Generator().manual_seed(seed)
    coords = torch.randn(batch, T_C + T, N, D, generator=generator)
    return TrajectoryWindows(
        target=coords[:, T_C:],
        condition=coords[:, :T_C],
        condition_times=torch.arange(T_C) - T_C,
        node_features=torch.ones(batch, N, 1),
        adjacency=(1.0 - torch.eye(N)).expand(batch, N, N),
    )


def _model(seed=0):
    # type: (int) -> EgtnModel
    torch.manual_seed(seed)
    return EgtnModel(TINY_CONFIG, T)


def test_adam_update_matches_closed_form():
    # type: () -> None
    model = _model()
    optimizer = make_optimizer(model, CONFIG)
    before = {name: p.detach().clone() for name, p in model.named_parameters()}
    gradients = {}
    for name, parameter in model.named_parameters():
        gradients[name] = torch.linspace(-1.0, 1.0, parameter.numel()).reshape(parameter.shape)
        parameter.grad = gradients[name].clone()
    optimizer.step()

    # After one step both moments are bias-corrected to g and g^2.
    for name, parameter in model.named_parameters():
        g = gradients[name]
        expected = before[name] - CONFIG.learning_rate * g / (g.abs() + CONFIG.adam_eps)
        assert torch.allclose(parameter.detach(), expected, atol=1e-6)


def test_training_reduces_loss_and_records(recorder):
    # type: (TestStatsRecorderPlugin) -> None
    train = _windows(0, 2)
    model = _model()
    config = CONFIG._replace(max_epochs=150, validation_interval=50, early_stop_patience=3)
    before = validation_loss(model, train, SCHEDULE, config)

    listener = RecordingListener()
    summary = train_run(config, train, train, model, SCHEDULE, listener)

    after = validation_loss(model, train, SCHEDULE, config)
    assert after < before
    assert summary.steps == 150
    assert summary.epochs == 150
    assert not summary.stopped_early
    assert summary.checkpoint_path.startswith("checkpoint-")
    assert summary.best_valid_loss == min(s.best_valid_loss for s in listener.saved)

    assert len(listener.entries) == 150
    validated = [e for e in listener.entries if e.valid_loss is not None]
    assert [e.epoch for e in validated] == [50, 100, 150]
    assert len(recorder.gauges["train.loss"]) == 150
    assert len(recorder.gauges["valid.loss"]) == 3
    assert all(math.isfinite(v) for v in recorder.gauges["train.grad_norm"])
    assert len(recorder.rates["train.step_seconds"]) == 150


@pytest.mark.parametrize("mode", list(TrainMode), ids=lambda m: m.value)
def test_training_is_deterministic(mode):
    # type: (TrainMode) -> None
    config = CONFIG._replace(mode=mode)
    results = []
    for _ in range(2):
        model = _model(seed=5)
        listener = RecordingListener()
        summary = train_run(config, _windows(1, 4), _windows(2, 2), model, SCHEDULE, listener)
        results.append((summary, [p.detach().clone() for p in model.parameters()]))

    (first, first_params), (second, second_params) = results
    assert first.best_valid_loss == second.best_valid_loss
    for a, b in zip(first_params, second_params):
        assert torch.equal(a, b)


@patch("geotdm.train.validation_loss")
def test_early_stopping(validation_loss_mock, caplog):
    # type: (object, pytest.LogCaptureFixture) -> None
    validation_loss_mock.side_effect = [1.0, 2.0, 3.0, 4.0]  # type: ignore
    config = CONFIG._replace(max_epochs=20, validation_interval=1, early_stop_patience=2)
    listener = RecordingListener()

    summary = train_run(config, _windows(0, 2), _windows(1, 2), _model(), SCHEDULE, listener)
    assert summary.stopped_early
    assert summary.epochs == 3
    assert summary.best_valid_loss == 1.0
    assert summary.checkpoint_path == "checkpoint-1"
    assert "stopping early" in caplog.text


def test_max_steps():
    # type: () -> None
    config = CONFIG._replace(max_epochs=10, max_steps=3, batch_size=1)
    listener = RecordingListener()
    summary = train_run(config, _windows(0, 2), _windows(1, 2), _model(), SCHEDULE, listener)
    assert summary.steps == 3
    assert summary.epochs == 2
    assert listener.entries[-1].valid_loss is not None


def test_ema_copy_is_checkpointed():
    # type: () -> None
    config = CONFIG._replace(ema_decay=0.5, max_epochs=2, validation_interval=1)
    model = _model()
    listener = RecordingListener()
    train_run(config, _windows(0, 2), _windows(1, 2), model, SCHEDULE, listener)
    live = model.state_dict()
    assert any(not torch.equal(listener.best[k], live[k]) for k in live)


def test_non_finite_loss():
    # type: () -> None
    bad = _windows(0, 2)
    bad.target[0, 0, 0, 0] = float("nan")
    with pytest.raises(NumericalError):
        train_run(CONFIG, bad, _windows(1, 2), _model(), SCHEDULE, RecordingListener())
