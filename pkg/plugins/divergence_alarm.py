import logging
import math
from typing import TYPE_CHECKING

from geotdm.plugin.base import BasePlugin

if TYPE_CHECKING:
    from typing import Optional

# A training loss this many times its running minimum is reported as divergence.
DIVERGENCE_FACTOR = 100.0


class DivergenceAlarmPlugin(BasePlugin):
    """Warn when the training loss becomes non-finite or runs away from its best value."""

    def __init__(self):
        # type: () -> None
        self.logger = logging.getLogger(__name__)
        self.best_loss = None  # type: Optional[float]
        self.command = "geotdm-ctl"

    def configure(self, service_name):
        # type: (str) -> None
        self.command = service_name

    def log_gauge(self, key, val):
        # type: (str, float) -> None
        if key != "train.loss":
            return
        if not math.isfinite(val):
            self.logger.warning("%s: training loss is %s", self.command, val)
            return
        if self.best_loss is None or val < self.best_loss:
            self.best_loss = val
        elif self.best_loss > 0 and val > DIVERGENCE_FACTOR * self.best_loss:
            self.logger.warning(
                "%s: training loss %.4g is more than %d times its best value %.4g",
                self.command,
                val,
                DIVERGENCE_FACTOR,
                self.best_loss,
            )
