"""Input coercion and validation."""

import warnings

import numpy as np

from ._config import REPAIR_TOL
from .rotations import (
    AmbiguousRotation,
    AmbiguousSample,
    SymmetryGroup,
    make_group,
    polar_projection,
    quaternion_to_matrix,
)

__all__ = ["check_rotations", "check_group", "check_rng", "RotationRepairWarning"]


class RotationRepairWarning(UserWarning):
    """Near-rotation input was projected onto SO(3)."""


def check_group(group):
    """Resolve a group tag or object to a :class:`SymmetryGroup`."""
    if isinstance(group, SymmetryGroup):
        return group
    if not isinstance(group, str):
        raise TypeError(f"group must be a SymmetryGroup or a tag such as 'C2', got {type(group).__name__}")
    return make_group(group)


def check_rng(random_state):
    """``numpy.random.Generator`` from ``None``, a seed or a generator."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(random_state, (int, np.integer)):
        return np.random.default_rng(random_state)
    raise TypeError("random_state must be None, an int or a numpy Generator")


def check_rotations(data, repair_tol=REPAIR_TOL, row_offset=0):
    """Coerce rotation data to an array of shape ``(n, 3, 3)``.

    Parameters
    ----------
    data : AmbiguousSample, sequence of AmbiguousRotation, or array_like
        Arrays may have shape ``(n, 3, 3)``, ``(n, 9)`` (row-major
        matrices) or ``(n, 4)`` (quaternions ``w, x, y, z``).
    repair_tol : float
        Matrices whose orthogonality defect ``max|M^T M - I|`` is at most
        this value are projected onto SO(3) with a warning; larger
        defects, improper matrices and quaternions whose norm is off by
        more than this value are rejected.
    row_offset : int
        Added to row numbers in error messages.

    Returns
    -------
    ndarray, shape (n, 3, 3)
    """
    if isinstance(data, AmbiguousSample):
        return np.array(data.reps)
    if isinstance(data, AmbiguousRotation):
        return data.rep[None].copy()
    if isinstance(data, (list, tuple)) and data and isinstance(data[0], AmbiguousRotation):
        return np.stack([x.rep for x in data])
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 2 and arr.shape == (3, 3):
        arr = arr[None]
    if arr.ndim == 1 and arr.shape[0] in (4, 9):
        arr = arr[None]
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr.reshape(len(arr), -1)))[0, 0])
        raise ValueError(f"row {bad + row_offset}: non-finite entries")
    if arr.ndim == 2 and arr.shape[1] == 4:
        norms = np.linalg.norm(arr, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > repair_tol)
        if bad.size:
            raise ValueError(f"row {bad[0] + row_offset}: quaternion norm {norms[bad[0]]:.6g} is not 1")
        return quaternion_to_matrix(arr)
    if arr.ndim == 2 and arr.shape[1] == 9:
        arr = arr.reshape(-1, 3, 3)
    if arr.ndim != 3 or arr.shape[1:] != (3, 3):
        raise ValueError(f"cannot interpret array of shape {np.shape(data)} as rotations")
    defect = np.abs(np.swapaxes(arr, 1, 2) @ arr - np.eye(3)).max(axis=(1, 2))
    det = np.linalg.det(arr)
    bad = np.flatnonzero((defect > repair_tol) | (det <= 0))
    if bad.size:
        i = bad[0]
        raise ValueError(
            f"row {i + row_offset}: not a rotation (orthogonality defect {defect[i]:.3g}, det {det[i]:.6g})"
        )
    fix = defect > 1e-12
    if np.any(fix):
        warnings.warn(
            f"{int(fix.sum())} near-rotation matrices projected onto SO(3) (max defect {defect.max():.3g})",
            RotationRepairWarning,
            stacklevel=2,
        )
        arr = arr.copy()
        arr[fix] = polar_projection(arr[fix])
    return arr
