import logging
import os
from typing import TYPE_CHECKING

import yaml
from six import iteritems

from geotdm.entities.config import (
    check_egtn_config,
    check_metric_config,
    check_schedule_config,
    check_train_config,
    DEFAULT_EGTN_CONFIG,
    DEFAULT_METRIC_CONFIG,
    DEFAULT_SCHEDULE_CONFIG,
    DEFAULT_TRAIN_CONFIG,
    EgtnConfig,
    InvalidConfigException,
    MetricConfig,
    ScheduleConfig,
    TrainConfig,
)
from geotdm.entities.system import (
    check_manifest,
    check_system_spec,
    DatasetManifest,
    DEFAULT_MANIFEST,
    DEFAULT_SYSTEM_SPECS,
    InvalidSystemSpecException,
    SystemKind,
    SystemSpec,
)
from geotdm.exc import InvalidManifestError
from geotdm.util import InvalidFieldsError, namedtuple_from_dict, namedtuple_to_dict

if TYPE_CHECKING:
    from typing import Any, Dict, List, Optional


def default_settings_path():
    # type: () -> str
    return os.environ.get("GEOTDM_SETTINGS", "geotdm.yaml")


class InvalidSettingsError(Exception):
    """Raised if configuration settings are invalid."""

    pass


# Sections of the configuration file other than common, with the attribute each one sets.
SECTIONS = ("system", "dataset", "model", "schedule", "train", "metrics")


class Settings(object):
    """geotdm run configuration.

    The common section sets plain attributes.  Every other section is parsed into the value object
    of the same name, starting from the defaults for the configured system kind, so a file only
    needs to list the values it changes.  Unknown sections and keys are rejected rather than
    ignored since a silently dropped typo changes the run.

    The run seed in common.seed is also the seed of the dataset and of training unless the dataset
    or train section sets its own.
    """

    def __init__(self):
        # type: () -> None
        self._logger = logging.getLogger(__name__)

        # Keep attributes here in the same order as in config/dev.yaml.
        self.log_format = "%(asctime)-15s\t%(levelname)s\t%(message)s  [%(name)s]"
        self.plugin_dirs = []  # type: List[str]
        self.plugin_module_paths = []  # type: List[str]
        self.seed = 0
        self.device = "cpu"
        self.data_dir = "data"
        self.checkpoint_path = "model.ckpt"
        self.output_dir = "out"

        self.system = DEFAULT_SYSTEM_SPECS[SystemKind.CHARGED]  # type: SystemSpec
        self.dataset = DEFAULT_MANIFEST  # type: DatasetManifest
        self.model = DEFAULT_EGTN_CONFIG  # type: EgtnConfig
        self.schedule = DEFAULT_SCHEDULE_CONFIG  # type: ScheduleConfig
        self.train = DEFAULT_TRAIN_CONFIG  # type: TrainConfig
        self.metrics = DEFAULT_METRIC_CONFIG  # type: MetricConfig

    @staticmethod
    def from_config(filename=None):
        # type: (Optional[str]) -> Settings
        settings = Settings()
        settings.update_from_config(filename)
        return settings

    def update_from_config(self, filename=None):
        # type: (Optional[str]) -> None
        """Load a YAML configuration file and update settings.

        Raises InvalidSettingsError if the file cannot be parsed, names an unknown section or key,
        or sets values that violate the invariants of their section.
        """
        if not filename:
            filename = default_settings_path()
        self._logger.debug("Loading %s", filename)
        try:
            with open(filename) as config:
                data = yaml.safe_load(config)
        except (IOError, OSError) as e:
            raise InvalidSettingsError("cannot read {}: {}".format(filename, e))
        except yaml.YAMLError as e:
            raise InvalidSettingsError("cannot parse {}: {}".format(filename, e))
        self.update_from_dict(data or {}, filename)

    def update_from_dict(self, data, source="<dict>"):
        # type: (Dict[str, Any], str) -> None
        if not isinstance(data, dict):
            raise InvalidSettingsError("{} must hold a mapping of sections".format(source))
        unknown = sorted(set(data) - set(SECTIONS) - {"common"})
        if unknown:
            msg = "unknown sections in {}: {}".format(source, ", ".join(unknown))
            raise InvalidSettingsError(msg)
        sections = {}  # type: Dict[str, Dict[str, Any]]
        for name, values in iteritems(data):
            values = values or {}
            if not isinstance(values, dict):
                raise InvalidSettingsError("section {} must be a mapping".format(name))
            for key in values:
                if str(key).startswith("_"):
                    raise InvalidSettingsError("invalid setting {}.{}".format(name, key))
            sections[name] = values

        for key, value in iteritems(sections.get("common", {})):
            if not hasattr(self, key) or key in SECTIONS:
                raise InvalidSettingsError("unknown setting common.{} in {}".format(key, source))
            setattr(self, key, value)

        try:
            self._update_sections(sections)
        except InvalidFieldsError as e:
            raise InvalidSettingsError("{}: {}".format(source, e))
        self.validate()

    def _update_sections(self, sections):
        # type: (Dict[str, Dict[str, Any]]) -> None
        system = dict(sections.get("system", {}))
        if "kind" in system:
            kind = namedtuple_from_dict(SystemSpec, {"kind": system["kind"]}, self.system).kind
            base = DEFAULT_SYSTEM_SPECS[kind]
        else:
            base = self.system
        self.system = self._section(SystemSpec, "system", system, base)

        dataset = dict(sections.get("dataset", {}))
        dataset.setdefault("seed", self.seed)
        self.dataset = self._section(DatasetManifest, "dataset", dataset, self.dataset)

        self.model = self._section(EgtnConfig, "model", sections.get("model", {}), self.model)
        schedule = sections.get("schedule", {})
        self.schedule = self._section(ScheduleConfig, "schedule", schedule, self.schedule)

        train = dict(sections.get("train", {}))
        train.setdefault("seed", self.seed)
        self.train = self._section(TrainConfig, "train", train, self.train)

        metrics = sections.get("metrics", {})
        self.metrics = self._section(MetricConfig, "metrics", metrics, self.metrics)

    @staticmethod
    def _section(cls, name, values, defaults):
        # type: (Any, str, Dict[str, Any], Any) -> Any
        try:
            return namedtuple_from_dict(cls, values, defaults)
        except InvalidFieldsError as e:
            raise InvalidFieldsError("{}: {}".format(name, e))

    def validate(self):
        # type: () -> None
        try:
            check_system_spec(self.system)
            check_manifest(self.dataset)
            check_egtn_config(self.model)
            check_schedule_config(self.schedule)
            check_train_config(self.train)
            check_metric_config(self.metrics)
        except (InvalidConfigException, InvalidManifestError, InvalidSystemSpecException) as e:
            raise InvalidSettingsError(str(e))
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise InvalidSettingsError("common.seed must be an integer")

    def override_seed(self, seed):
        # type: (int) -> None
        """Replace the run seed everywhere it was inherited or set."""
        self.seed = seed
        self.dataset = self.dataset._replace(seed=seed)
        self.train = self.train._replace(seed=seed)

    def as_dict(self):
        # type: () -> Dict[str, Any]
        """Return the settings in the layout of the configuration file."""
        return {
            "common": {
                "log_format": self.log_format,
                "plugin_dirs": list(self.plugin_dirs),
                "plugin_module_paths": list(self.plugin_module_paths),
                "seed": self.seed,
                "device": self.device,
                "data_dir": self.data_dir,
                "checkpoint_path": self.checkpoint_path,
                "output_dir": self.output_dir,
            },
            "system": namedtuple_to_dict(self.system),
            "dataset": namedtuple_to_dict(self.dataset),
            "model": namedtuple_to_dict(self.model),
            "schedule": namedtuple_to_dict(self.schedule),
            "train": namedtuple_to_dict(self.train),
            "metrics": namedtuple_to_dict(self.metrics),
        }
