"""Cognitive-radar time allocation lab.

A radar with a single time budget per cycle splits that budget between
tracking dwells (one per known target) and surveillance scanning. Longer
dwells sharpen measurements and shrink track error; leftover time widens
the detection horizon of the scan. The package simulates that trade-off,
trains constrained RL agents to balance it, and compares the resulting
Pareto fronts against an evolutionary baseline.
"""

__version__ = "0.1.0"
