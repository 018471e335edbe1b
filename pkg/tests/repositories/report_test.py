from typing import TYPE_CHECKING

import yaml

from geotdm.entities.metric_report import MetricReport
from geotdm.repositories.report import ReportFileRepository

if TYPE_CHECKING:
    from py.path import LocalPath

REPORT = MetricReport(
    ade=0.5,
    fde=1.0,
    min_ade_k=0.25,
    min_fde_k=0.75,
    marginal_score=0.02,
    classification_score=None,
    prediction_score=None,
    k=2,
    bins=8,
)


def test_write_report(tmpdir):
    # type: (LocalPath) -> None
    path = str(tmpdir.join("out", "report.yaml"))
    repository = ReportFileRepository()
    repository.write_report(path, REPORT, {"samples": "out/forecast.gtrj"})

    with open(path) as f:
        data = yaml.safe_load(f)
    assert data["ade"] == 0.5
    assert data["classification_score"] is None
    assert data["k"] == 2
    assert data["samples"] == "out/forecast.gtrj"


def test_render_report():
    # type: () -> None
    text = ReportFileRepository().render_report(REPORT, "forecast")
    assert text.startswith("forecast (K = 2, 8 bins)\n")
    assert "classification score" in text
