import logging
import os
from typing import TYPE_CHECKING

import yaml

from geotdm.templating import ReportTemplateEngine
from geotdm.usecases.interfaces import ReportStoreInterface
from geotdm.util import namedtuple_to_dict

if TYPE_CHECKING:
    from geotdm.entities.metric_report import MetricReport
    from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


class ReportFileRepository(ReportStoreInterface):
    """Metric reports as a rendered table for people and a YAML file for scripts."""

    def __init__(self, template_engine=None):
        # type: (Optional[ReportTemplateEngine]) -> None
        self.template_engine = template_engine or ReportTemplateEngine()

    def render_report(self, report, title="metrics"):
        # type: (MetricReport, str) -> str
        return self.template_engine.render_report(report, title)

    def write_report(self, path, report, extra=None):
        # type: (str, MetricReport, Optional[Dict[str, Any]]) -> None
        data = namedtuple_to_dict(report)
        if extra:
            data.update(extra)
        directory = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(directory):
            os.makedirs(directory)
        with open(path, "w") as f:
            yaml.safe_dump(data, f, default_flow_style=False)
        logger.debug("wrote report %s", path)
