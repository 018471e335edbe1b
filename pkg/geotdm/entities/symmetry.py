from typing import NamedTuple

# Outcome of one numerical symmetry check: the largest relative deviation seen over trials random
# inputs and group elements, and whether it stayed within tolerance.
SymmetryCheck = NamedTuple(
    "SymmetryCheck",
    [
        ("name", str),
        ("max_deviation", float),
        ("tolerance", float),
        ("trials", int),
        ("passed", bool),
    ],
)
