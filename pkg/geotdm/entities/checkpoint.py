from typing import NamedTuple

from geotdm.entities.config import EgtnConfig, ScheduleConfig, Task, TrainMode
from geotdm.entities.training import TrainingState

# Everything besides tensors that a checkpoint records: the configuration the model was built
# from, the window layout it was trained on, and training progress.
CheckpointMetadata = NamedTuple(
    "CheckpointMetadata",
    [
        ("model_config", EgtnConfig),
        ("schedule_config", ScheduleConfig),
        ("n_frames", int),
        ("cond_frames", int),
        ("mode", TrainMode),
        ("task", Task),
        ("state", TrainingState),
    ],
)
