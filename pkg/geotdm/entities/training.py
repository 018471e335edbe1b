from typing import NamedTuple, Optional

# Progress of a training run, stored in checkpoints so runs can be inspected or resumed.
TrainingState = NamedTuple(
    "TrainingState",
    [
        ("step", int),
        ("epoch", int),
        ("best_valid_loss", Optional[float]),
        ("bad_validations", int),
    ],
)

INITIAL_TRAINING_STATE = TrainingState(step=0, epoch=0, best_valid_loss=None, bad_validations=0)

TrainingSummary = NamedTuple(
    "TrainingSummary",
    [
        ("steps", int),
        ("epochs", int),
        ("best_valid_loss", Optional[float]),
        ("stopped_early", bool),
        ("checkpoint_path", str),
    ],
)

# One line of the metrics log.  valid_loss is None on steps without a validation pass.
MetricsLogEntry = NamedTuple(
    "MetricsLogEntry",
    [
        ("step", int),
        ("epoch", int),
        ("train_loss", float),
        ("valid_loss", Optional[float]),
        ("wall_time", float),
    ],
)
