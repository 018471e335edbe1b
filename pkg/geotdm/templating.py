from typing import TYPE_CHECKING

from jinja2 import Environment, PackageLoader

if TYPE_CHECKING:
    from jinja2 import Template
    from geotdm.entities.metric_report import MetricReport
    from typing import Optional

# Metrics in report order, with the label printed for each.
REPORT_ROWS = [
    ("ade", "ADE"),
    ("fde", "FDE"),
    ("min_ade_k", "ADE over K samples"),
    ("min_fde_k", "FDE over K samples"),
    ("marginal_score", "marginal score"),
    ("classification_score", "classification score"),
    ("prediction_score", "prediction score"),
]


class ReportTemplateEngine(object):
    """Jinja2 environment for the plain-text reports printed by geotdm-ctl."""

    def __init__(self, package="geotdm"):
        # type: (str) -> None
        loader = PackageLoader(package, "templates")
        self.environment = Environment(
            loader=loader, keep_trailing_newline=True, trim_blocks=True, lstrip_blocks=True
        )
        self.environment.filters.update({"metric": self.format_metric})

    def get_template(self, name):
        # type: (str) -> Template
        return self.environment.get_template(name)

    @staticmethod
    def format_metric(value):
        # type: (Optional[float]) -> str
        if value is None:
            return "n/a"
        return "{:.6g}".format(value)

    def render_report(self, report, title="metrics"):
        # type: (MetricReport, str) -> str
        rows = [(label, getattr(report, field)) for field, label in REPORT_ROWS]
        width = max(len(label) for label, _ in rows)
        template = self.get_template("metric_report.txt")
        return template.render(title=title, rows=rows, width=width, report=report)
