from typing import TYPE_CHECKING

from geotdm.entities.training import MetricsLogEntry
from geotdm.repositories.metrics_log import MetricsLogRepository

if TYPE_CHECKING:
    from py.path import LocalPath


def test_append_and_read(tmpdir):
    # type: (LocalPath) -> None
    path = str(tmpdir.join("logs", "model.metrics.jsonl"))
    repository = MetricsLogRepository()
    entries = [
        MetricsLogEntry(step=1, epoch=1, train_loss=2.5, valid_loss=None, wall_time=0.1),
        MetricsLogEntry(step=2, epoch=1, train_loss=2.0, valid_loss=1.75, wall_time=0.2),
    ]
    for entry in entries:
        repository.append(path, entry)

    assert repository.read(path) == entries
    first = tmpdir.join("logs", "model.metrics.jsonl").read().splitlines()[0]
    assert first.startswith('{"epoch": 1, "step": 1,')

    repository.clear(path)
    assert not tmpdir.join("logs", "model.metrics.jsonl").check()
    repository.clear(path)
