"""Numerical tolerances and defaults shared across the package."""

import os

#: Tolerance for algebraic identities (orthogonality, group axioms).
ALGEBRAIC_TOL = 1e-10

#: Tolerance for round trips through transcendental functions.
ROUNDTRIP_TOL = 1e-9

#: Matrices within this distance of SO(3) are repaired by polar projection.
REPAIR_TOL = 1e-6

#: Default number of low-discrepancy starting rotations for global ascent.
DEFAULT_GRID_SIZE = 10_000

#: Gradient-norm stopping rule for tangent-space ascent.
DEFAULT_GTOL = 1e-10

#: Default replicate count for randomization and permutation tests.
DEFAULT_REPLICATES = 999

#: Default band limit of the averaged embedding.
DEFAULT_BAND_LIMIT = 4

#: Rejection sampling is replaced by Metropolis-Hastings below this acceptance.
MIN_REJECTION_ACCEPTANCE = 1e-3

#: Stereonet size multiplier for sample-mean markers.
MEAN_MARKER_SCALE = 2.0


def thread_limit():
    """Worker cap from ``AMBIROT_THREADS``, defaulting to the CPU count."""
    value = os.environ.get("AMBIROT_THREADS", str(os.cpu_count() or 1))
    try:
        return max(1, int(value))
    except ValueError:
        return 1
