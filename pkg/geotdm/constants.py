# GTRJ trajectory file format.
GTRJ_MAGIC = b"GTRJ"
GTRJ_VERSION = 1

# Model checkpoint container.
CHECKPOINT_MAGIC = b"GCKP"
CHECKPOINT_VERSION = 1

# Added under the square root when measuring distances so gradients stay finite at d = 0.
DISTANCE_EPSILON = 1e-8

# Base of the geometric frequency ladder in sinusoidal encodings.
SINUSOIDAL_BASE = 10000.0

# Temporal convolutions mix frames at most this many steps apart.
TEMPORAL_CONV_RADIUS = 1

# Tolerance used when checking that a matrix is a proper rotation.
ROTATION_TOLERANCE = 1e-6

# Translations drawn for symmetry checks are uniform in [-TRANSLATION_SCALE, TRANSLATION_SCALE].
TRANSLATION_SCALE = 5.0

# Closest approach allowed between unsoftened particles.
MIN_PARTICLE_SEPARATION = 1e-9

# Split names, in the order they are simulated.
SPLITS = ("train", "valid", "test")

# Name of the dataset manifest sidecar written next to the split files.
MANIFEST_FILENAME = "manifest.yaml"
