from geotdm.entities.metric_report import MetricReport
from geotdm.templating import ReportTemplateEngine

REPORT = MetricReport(
    ade=0.123456789,
    fde=2.5,
    min_ade_k=None,
    min_fde_k=None,
    marginal_score=0.01,
    classification_score=None,
    prediction_score=1234567.0,
    k=5,
    bins=50,
)


def test_format_metric():
    # type: () -> None
    assert ReportTemplateEngine.format_metric(None) == "n/a"
    assert ReportTemplateEngine.format_metric(0.123456789) == "0.123457"
    assert ReportTemplateEngine.format_metric(1234567.0) == "1.23457e+06"
    assert ReportTemplateEngine.format_metric(0.0) == "0"


def test_render_report():
    # type: () -> None
    text = ReportTemplateEngine().render_report(REPORT, title="charged forecast")
    lines = text.splitlines()

    assert lines[0] == "charged forecast (K = 5, 50 bins)"
    assert len(lines) == 8
    assert lines[1].split() == ["ADE", "0.123457"]
    assert lines[3] == "  ADE over K samples    n/a"
    assert lines[-1].endswith("prediction score      1.23457e+06")
    assert text.endswith("\n")

    # Values line up in one column.
    columns = {line.index(line.split()[-1]) for line in lines[1:]}
    assert len(columns) == 1
