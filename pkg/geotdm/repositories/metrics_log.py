import json
import logging
import os
from typing import TYPE_CHECKING

from geotdm.entities.training import MetricsLogEntry
from geotdm.usecases.interfaces import MetricsLogInterface

if TYPE_CHECKING:
    from typing import List

logger = logging.getLogger(__name__)


class MetricsLogRepository(MetricsLogInterface):
    """Training metrics as JSON lines, one object per MetricsLogEntry."""

    def clear(self, path):
        # type: (str) -> None
        if os.path.exists(path):
            os.remove(path)

    def append(self, path, entry):
        # type: (str, MetricsLogEntry) -> None
        directory = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(directory):
            os.makedirs(directory)
        with open(path, "a") as f:
            f.write(json.dumps(entry._asdict(), sort_keys=True) + "\n")

    def read(self, path):
        # type: (str) -> List[MetricsLogEntry]
        logger.debug("reading metrics log %s", path)
        entries = []
        with open(path) as f:
            for line in f:
                if line.strip():
                    data = json.loads(line)
                    fields = {k: data[k] for k in MetricsLogEntry._fields}
                    entries.append(MetricsLogEntry(**fields))
        return entries
