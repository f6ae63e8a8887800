"""Rotations, finite point groups and ambiguous rotations.

An *ambiguous rotation* is an element ``[U]`` of the quotient SO(3)/K,
where K is a finite rotation group acting by right multiplication.
Rotations are stored as 3x3 matrices; quaternions (scalar first) are
converted at the boundaries.

Standard orientations
---------------------
``C_r`` and ``D_r`` have their principal axis along ``e3`` and their
planar frame vectors at angles ``2*pi*k/r`` from ``e1``. ``D_r`` adds
half-turns about the in-plane axes at angles ``pi*k/r``. ``T`` uses the
cube diagonals ``(1,1,1)/sqrt(3)``, ``(1,-1,-1)/sqrt(3)``, ...;  ``O``
the coordinate axes; ``Y`` the six axes ``(0, +-1, phi)`` and their
cyclic permutations, normalised.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import re

import numpy as np

from ._config import ALGEBRAIC_TOL
from .exceptions import GroupMismatchError, OutsideNeighbourhoodError

__all__ = [
    "skew",
    "vee",
    "exp_rotation",
    "log_rotation",
    "rotation_angle",
    "quaternion_to_matrix",
    "matrix_to_quaternion",
    "haar_rotation",
    "haar_quadrature",
    "polar_projection",
    "SymmetryGroup",
    "make_group",
    "AmbiguousRotation",
    "AmbiguousSample",
    "as_sample",
    "KFrame",
    "frame_of",
    "quotient_distance",
    "TangentCoords",
    "tangent_coords",
    "tangent_coords_array",
    "injectivity_radius",
    "symmetry_action",
]

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


# ---------------------------------------------------------------------------
# SO(3) basics
# ---------------------------------------------------------------------------


def skew(v):
    """Skew-symmetric matrix ``A(v)`` with ``A(v) @ w == cross(v, w)``.

    Parameters
    ----------
    v : array_like, shape (..., 3)

    Returns
    -------
    ndarray, shape (..., 3, 3)
    """
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(a):
    """Inverse of :func:`skew` applied to the antisymmetric part of ``a``."""
    a = np.asarray(a, dtype=float)
    return 0.5 * np.stack(
        [a[..., 2, 1] - a[..., 1, 2], a[..., 0, 2] - a[..., 2, 0], a[..., 1, 0] - a[..., 0, 1]],
        axis=-1,
    )


def exp_rotation(v):
    """Rotation ``exp(A(v))`` by angle ``|v|`` about ``v / |v|`` (Rodrigues).

    Parameters
    ----------
    v : array_like, shape (..., 3)

    Returns
    -------
    ndarray, shape (..., 3, 3)
    """
    v = np.asarray(v, dtype=float)
    theta2 = np.sum(v * v, axis=-1)
    theta = np.sqrt(theta2)
    small = theta < 1e-4
    safe = np.where(small, 1.0, theta)
    # series branches keep full precision near zero
    a = np.where(small, 1.0 - theta2 / 6.0 + theta2**2 / 120.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta2 / 24.0 + theta2**2 / 720.0, (1.0 - np.cos(safe)) / safe**2)
    k = skew(v)
    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye + a[..., None, None] * k + b[..., None, None] * (k @ k)


def rotation_angle(R):
    """Rotation angle in ``[0, pi]``, accurate at both ends of the range."""
    R = np.asarray(R, dtype=float)
    s = np.linalg.norm(vee(R), axis=-1)
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    return np.arctan2(s, c)


def _lexicographic_sign(n):
    """Sign making the first non-negligible component of ``n`` positive."""
    sign = np.ones(n.shape[:-1])
    undecided = np.ones(n.shape[:-1], dtype=bool)
    for k in range(3):
        comp = n[..., k]
        decided_here = undecided & (np.abs(comp) > 1e-12)
        sign = np.where(decided_here & (comp < 0), -1.0, sign)
        undecided &= ~decided_here
    return sign


def log_rotation(R):
    """Principal rotation vector ``v`` with ``exp_rotation(v) == R``.

    At angle ``pi`` the two branches ``+-pi*n`` coincide; the branch whose
    axis is lexicographically largest is returned.

    Parameters
    ----------
    R : array_like, shape (..., 3, 3)

    Returns
    -------
    ndarray, shape (..., 3)
    """
    R = np.asarray(R, dtype=float)
    w = vee(R)  # sin(theta) * axis
    s = np.linalg.norm(w, axis=-1)
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(s, c)
    small = s < 1e-8
    safe_s = np.where(small, 1.0, s)
    factor = np.where(theta < 1e-4, 1.0 + theta**2 / 6.0, theta / safe_s)
    v = factor[..., None] * w

    near_pi = c < -0.9
    if np.any(near_pi):
        Rn = R[near_pi]
        cn = c[near_pi]
        B = 0.5 * (Rn + np.swapaxes(Rn, -1, -2)) - cn[:, None, None] * np.eye(3)
        diag = np.diagonal(B, axis1=-2, axis2=-1)
        k = np.argmax(diag, axis=-1)
        idx = np.arange(len(k))
        col = B[idx, :, k]
        n = col / np.sqrt(np.maximum(diag[idx, k], 1e-300) * (1.0 - cn))[:, None]
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        proj = np.sum(n * w[near_pi], axis=-1)
        sign = np.where(np.abs(proj) > 1e-12, np.sign(proj), _lexicographic_sign(n))
        v[near_pi] = (sign * theta[near_pi])[:, None] * n
    return v


def quaternion_to_matrix(q):
    """Rotation matrix of a (not necessarily unit) quaternion ``(w, x, y, z)``."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = np.moveaxis(q, -1, 0)
    out = np.empty(q.shape[:-1] + (3, 3))
    out[..., 0, 0] = 1 - 2 * (y * y + z * z)
    out[..., 0, 1] = 2 * (x * y - w * z)
    out[..., 0, 2] = 2 * (x * z + w * y)
    out[..., 1, 0] = 2 * (x * y + w * z)
    out[..., 1, 1] = 1 - 2 * (x * x + z * z)
    out[..., 1, 2] = 2 * (y * z - w * x)
    out[..., 2, 0] = 2 * (x * z - w * y)
    out[..., 2, 1] = 2 * (y * z + w * x)
    out[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def matrix_to_quaternion(R):
    """Unit quaternion ``(w, x, y, z)`` with ``w >= 0`` for a rotation matrix."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R, axis1=-2, axis2=-1)
    cand = np.stack(
        [
            np.stack([1 + tr, R[..., 2, 1] - R[..., 1, 2], R[..., 0, 2] - R[..., 2, 0], R[..., 1, 0] - R[..., 0, 1]], -1),
            np.stack([R[..., 2, 1] - R[..., 1, 2], 1 + 2 * R[..., 0, 0] - tr, R[..., 0, 1] + R[..., 1, 0], R[..., 0, 2] + R[..., 2, 0]], -1),
            np.stack([R[..., 0, 2] - R[..., 2, 0], R[..., 0, 1] + R[..., 1, 0], 1 + 2 * R[..., 1, 1] - tr, R[..., 1, 2] + R[..., 2, 1]], -1),
            np.stack([R[..., 1, 0] - R[..., 0, 1], R[..., 0, 2] + R[..., 2, 0], R[..., 1, 2] + R[..., 2, 1], 1 + 2 * R[..., 2, 2] - tr], -1),
        ],
        axis=-2,
    )
    # Shepperd: use the row with the largest pivot
    pivots = np.stack([tr, R[..., 0, 0], R[..., 1, 1], R[..., 2, 2]], -1)
    k = np.argmax(pivots, axis=-1)
    q = np.take_along_axis(cand, k[..., None, None], axis=-2)[..., 0, :]
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    q *= np.where(q[..., :1] < 0, -1.0, 1.0)
    return q


def polar_projection(m):
    """Nearest rotation matrix in Frobenius norm (special orthogonal polar factor)."""
    m = np.asarray(m, dtype=float)
    u, _, vt = np.linalg.svd(m)
    d = np.sign(np.linalg.det(u @ vt))
    u = u.copy()
    u[..., :, -1] *= d[..., None]
    return u @ vt


def haar_rotation(rng, size=None):
    """Haar-uniform random rotation(s) from normalised Gaussian quaternions.

    Parameters
    ----------
    rng : numpy.random.Generator
    size : int or None
        ``None`` returns one 3x3 matrix, otherwise an array ``(size, 3, 3)``.
    """
    shape = (4,) if size is None else (int(size), 4)
    return quaternion_to_matrix(rng.standard_normal(shape))


@lru_cache(maxsize=None)
def _haar_quadrature_cached(degree):
    m = int(np.ceil((degree + 1) / 2))
    n_xi = 2 * degree + 1
    x, wx = np.polynomial.legendre.leggauss(m)
    x = 0.5 * (x + 1.0)  # x = sin^2(eta), uniform on [0, 1] under Haar
    wx = 0.5 * wx
    xi = 2.0 * np.pi * np.arange(n_xi) / n_xi
    X, XI1, XI2 = np.meshgrid(x, xi, xi, indexing="ij")
    W = np.broadcast_to(wx[:, None, None], X.shape) / n_xi**2
    ce, se = np.sqrt(1.0 - X), np.sqrt(X)
    q = np.stack([ce * np.cos(XI1), ce * np.sin(XI1), se * np.cos(XI2), se * np.sin(XI2)], -1)
    R = quaternion_to_matrix(q.reshape(-1, 4))
    R.setflags(write=False)
    w = np.ascontiguousarray(W.reshape(-1))
    w.setflags(write=False)
    return R, w


def haar_quadrature(degree):
    """Quadrature rule exact for Haar integrals of polynomials in ``U``.

    Uses Hopf coordinates on the unit quaternions: Gauss-Legendre nodes
    in ``sin^2(eta)`` and equispaced nodes in the two phase angles.

    Parameters
    ----------
    degree : int
        Total degree of the polynomial in the entries of ``U``.

    Returns
    -------
    rotations : ndarray, shape (m, 3, 3)
    weights : ndarray, shape (m,)
        Non-negative weights summing to one.
    """
    return _haar_quadrature_cached(int(degree))


# ---------------------------------------------------------------------------
# Point groups
# ---------------------------------------------------------------------------


def _axis_rotation(axis, angle):
    axis = np.asarray(axis, dtype=float)
    return exp_rotation(angle * axis / np.linalg.norm(axis))


def _closure(generators):
    elems = [np.eye(3)]
    keys = {tuple(np.round(np.eye(3), 6).ravel())}
    frontier = [np.eye(3)]
    while frontier:
        new = []
        for a in frontier:
            for g in generators:
                b = a @ g
                key = tuple(np.round(b, 6).ravel() + 0.0)
                if key not in keys:
                    keys.add(key)
                    elems.append(b)
                    new.append(b)
        frontier = new
        if len(elems) > 120:
            raise RuntimeError("group closure did not terminate")
    return np.array(elems)


def _cyclic_permutation():
    return np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class SymmetryGroup:
    """A finite rotation group in its standard orientation.

    Attributes
    ----------
    kind : {'C', 'D', 'T', 'O', 'Y'}
    order : int
        ``r`` for ``C_r`` and ``D_r``; 0 for the polyhedral groups.
    elements : ndarray, shape (|K|, 3, 3)
        Group members; the identity comes first.
    """

    kind: str
    order: int
    elements: np.ndarray = field(repr=False)

    @property
    def name(self):
        return f"{self.kind}{self.order}" if self.kind in "CD" else self.kind

    def __len__(self):
        return len(self.elements)

    def __eq__(self, other):
        return isinstance(other, SymmetryGroup) and (self.kind, self.order) == (other.kind, other.order)

    def __hash__(self):
        return hash((self.kind, self.order))

    def __str__(self):
        return self.name

    def contains(self, R, tol=1e-8):
        """Whether rotation ``R`` is a member of the group."""
        R = np.asarray(R, dtype=float)
        return bool(np.min(np.abs(self.elements - R).max(axis=(1, 2))) < tol)

    @property
    def min_angle(self):
        """Smallest non-zero rotation angle in the group (``pi`` for C1)."""
        if len(self) == 1:
            return np.pi
        return float(np.min(rotation_angle(self.elements[1:])))

    def frame_template(self):
        """Standard-orientation frame vectors and their axial flags."""
        return _frame_template(self.kind, self.order)


def _parse_kind(kind, r):
    if isinstance(kind, SymmetryGroup):
        return kind.kind, kind.order
    text = str(kind).strip().upper()
    m = re.fullmatch(r"([CD])_?(\d+)", text)
    if m:
        return m.group(1), int(m.group(2))
    if text in ("C", "D"):
        if r is None:
            raise ValueError(f"group {text} needs an order r")
        return text, int(r)
    if text in ("T", "O", "Y"):
        return text, 0
    raise ValueError(f"unknown symmetry group {kind!r}")


@lru_cache(maxsize=None)
def _make_group(kind, r):
    if kind == "C":
        if r < 1:
            raise ValueError("C_r requires r >= 1")
        elems = np.array([_axis_rotation([0, 0, 1], 2 * np.pi * k / r) for k in range(r)])
    elif kind == "D":
        if r < 2:
            raise ValueError("D_r requires r >= 2")
        rot = [_axis_rotation([0, 0, 1], 2 * np.pi * k / r) for k in range(r)]
        flips = [_axis_rotation([np.cos(np.pi * k / r), np.sin(np.pi * k / r), 0.0], np.pi) for k in range(r)]
        elems = np.array(rot + flips)
    elif kind == "T":
        elems = _closure([_cyclic_permutation(), np.diag([-1.0, -1.0, 1.0])])
    elif kind == "O":
        elems = _closure([_cyclic_permutation(), _axis_rotation([0, 0, 1], np.pi / 2)])
    elif kind == "Y":
        five = _axis_rotation([0.0, 1.0, GOLDEN], 2 * np.pi / 5)
        elems = _closure([_cyclic_permutation(), np.diag([-1.0, -1.0, 1.0]), five])
    else:  # pragma: no cover - guarded by _parse_kind
        raise ValueError(kind)
    # clean rounding noise so exact entries (0, +-1) are exact
    elems = np.where(np.abs(elems) < 1e-15, 0.0, elems)
    elems.setflags(write=False)
    return SymmetryGroup(kind, r, elems)


def make_group(kind, r=None):
    """Construct a point group of the first kind.

    Parameters
    ----------
    kind : str or SymmetryGroup
        ``'C2'``, ``'D3'``, ``'T'``, ``'O'``, ``'Y'``, or ``'C'``/``'D'``
        together with ``r``.
    r : int, optional

    Returns
    -------
    SymmetryGroup

    Examples
    --------
    >>> len(make_group("D2")), len(make_group("Y"))
    (4, 60)
    """
    kind, r = _parse_kind(kind, r)
    return _make_group(kind, r)


def _planar(r):
    ang = 2 * np.pi * np.arange(r) / r
    return np.stack([np.cos(ang), np.sin(ang), np.zeros(r)], -1)


def _icosahedral_axes():
    base = np.array([[0.0, 1.0, GOLDEN], [0.0, 1.0, -GOLDEN]])
    axes = [np.roll(base, k, axis=1) for k in range(3)]
    axes = np.concatenate(axes)
    return axes / np.linalg.norm(axes, axis=1, keepdims=True)


@lru_cache(maxsize=None)
def _frame_template(kind, r):
    e = np.eye(3)
    if kind == "C" and r == 1:
        vecs, axial = e, [False] * 3
    elif kind == "C" and r == 2:
        vecs, axial = np.array([e[2], e[0]]), [False, True]
    elif kind == "C":
        vecs, axial = _planar(r), [False] * r
    elif kind == "D" and r == 2:
        vecs, axial = e[:2], [True, True]
    elif kind == "D":
        vecs, axial = _planar(r), [False] * r
    elif kind == "T":
        vecs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / np.sqrt(3)
        axial = [False] * 4
    elif kind == "O":
        vecs, axial = e, [True] * 3
    else:
        vecs, axial = _icosahedral_axes(), [True] * 6
    vecs = np.array(vecs, dtype=float)
    vecs.setflags(write=False)
    return vecs, tuple(axial)


# ---------------------------------------------------------------------------
# Ambiguous rotations and samples
# ---------------------------------------------------------------------------


def _check_rotation(m, tol=ALGEBRAIC_TOL):
    m = np.asarray(m, dtype=float)
    if m.shape[-2:] != (3, 3):
        raise ValueError(f"expected 3x3 rotation matrices, got shape {m.shape}")
    err = np.abs(np.swapaxes(m, -1, -2) @ m - np.eye(3)).max() if m.size else 0.0
    if err > tol or (m.size and np.abs(np.linalg.det(m) - 1.0).max() > tol):
        raise ValueError("matrix is not a proper rotation")
    return m


@dataclass(frozen=True, eq=False)
class AmbiguousRotation:
    """The class ``[U]`` of a rotation modulo right multiplication by ``group``.

    Parameters
    ----------
    rep : array_like, shape (3, 3)
        Any representative rotation.
    group : SymmetryGroup or str
    """

    rep: np.ndarray
    group: SymmetryGroup

    def __post_init__(self):
        rep = np.array(_check_rotation(self.rep), dtype=float)
        rep.setflags(write=False)
        object.__setattr__(self, "rep", rep)
        if not isinstance(self.group, SymmetryGroup):
            object.__setattr__(self, "group", make_group(self.group))

    def representatives(self):
        """All ``|K|`` representatives ``rep @ R``."""
        return self.rep @ self.group.elements

    def left(self, V):
        """The class ``[V U]``."""
        return AmbiguousRotation(np.asarray(V) @ self.rep, self.group)

    def __repr__(self):
        q = np.round(matrix_to_quaternion(self.rep), 6)
        return f"AmbiguousRotation(quaternion={q.tolist()}, group={self.group.name})"


@dataclass(frozen=True, eq=False)
class AmbiguousSample:
    """A sample of ambiguous rotations sharing one symmetry group.

    Iterating yields :class:`AmbiguousRotation` objects; numerical code
    works on the stacked representatives ``reps``.
    """

    reps: np.ndarray
    group: SymmetryGroup

    def __post_init__(self):
        reps = np.array(self.reps, dtype=float).reshape(-1, 3, 3)
        _check_rotation(reps, tol=1e-8)
        reps.setflags(write=False)
        object.__setattr__(self, "reps", reps)
        if not isinstance(self.group, SymmetryGroup):
            object.__setattr__(self, "group", make_group(self.group))

    def __len__(self):
        return len(self.reps)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return AmbiguousRotation(self.reps[idx], self.group)
        return AmbiguousSample(self.reps[idx], self.group)

    def __iter__(self):
        for rep in self.reps:
            yield AmbiguousRotation(rep, self.group)

    def left(self, V):
        """The sample ``[V U_1], ..., [V U_n]``."""
        return AmbiguousSample(np.asarray(V) @ self.reps, self.group)

    def substitute(self, rng):
        """Replace each representative by ``U_i R_i`` with random ``R_i`` in K."""
        idx = rng.integers(len(self.group), size=len(self))
        return AmbiguousSample(self.reps @ self.group.elements[idx], self.group)


def as_sample(data, group=None):
    """Coerce data to an :class:`AmbiguousSample`.

    Parameters
    ----------
    data : AmbiguousSample, sequence of AmbiguousRotation, or array
        Arrays of shape ``(n, 3, 3)`` or ``(3, 3)`` need ``group``.
    group : SymmetryGroup or str, optional
    """
    if isinstance(data, AmbiguousSample):
        if group is not None and make_group(group) != data.group:
            raise GroupMismatchError(f"sample has group {data.group}, expected {make_group(group)}")
        return data
    if isinstance(data, AmbiguousRotation):
        data = [data]
    if isinstance(data, (list, tuple)) and data and isinstance(data[0], AmbiguousRotation):
        groups = {x.group for x in data}
        if len(groups) != 1:
            raise GroupMismatchError("sample mixes symmetry groups")
        (g,) = groups
        if group is not None and make_group(group) != g:
            raise GroupMismatchError(f"sample has group {g}, expected {make_group(group)}")
        return AmbiguousSample(np.stack([x.rep for x in data]), g)
    if isinstance(data, (list, tuple)) and not data:
        raise ValueError("empty sample")
    if group is None:
        raise ValueError("a symmetry group is required for array input")
    return AmbiguousSample(np.asarray(data, dtype=float), make_group(group))


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KFrame:
    """Geometric frame representing an ambiguous rotation.

    Attributes
    ----------
    vectors : ndarray, shape (m, 3)
        Unit vectors laid out as in the group's frame template.
    axial : tuple of bool
        ``True`` where the vector is an undirected axis (known up to sign).
    group : SymmetryGroup
    """

    vectors: np.ndarray
    axial: tuple
    group: SymmetryGroup

    @property
    def normal(self):
        """The directed normal ``u0`` of a cyclic frame."""
        if self.group.kind != "C" or self.group.order == 1:
            raise ValueError("only cyclic frames C_r (r >= 2) carry a normal")
        if self.group.order == 2:
            return self.vectors[0]
        r = self.group.order
        return np.cross(self.vectors[0], self.vectors[1]) / np.sin(2 * np.pi / r)

    def equals(self, other, tol=1e-9):
        """Equality as frames: unordered, with sign freedom on axes."""
        if self.group != other.group or self.vectors.shape != other.vectors.shape:
            return False
        used = set()
        for v, ax in zip(self.vectors, self.axial):
            hit = None
            for j, (w, ax2) in enumerate(zip(other.vectors, other.axial)):
                if j in used or ax != ax2:
                    continue
                d = np.linalg.norm(v - w)
                if ax:
                    d = min(d, np.linalg.norm(v + w))
                if d < tol:
                    hit = j
                    break
            if hit is None:
                return False
            used.add(hit)
        return True


def frame_of(x):
    """K-frame of an ambiguous rotation: the representative applied to the template."""
    vecs, axial = x.group.frame_template()
    return KFrame(vecs @ x.rep.T, axial, x.group)


# ---------------------------------------------------------------------------
# Quotient geometry
# ---------------------------------------------------------------------------


def _require_same_group(a, b):
    if a != b:
        raise GroupMismatchError(f"group mismatch: {a} vs {b}")


def quotient_distance(x, y):
    """Geodesic distance between classes: ``min_R angle((x.rep R)^T y.rep)``."""
    _require_same_group(x.group, y.group)
    rel = np.swapaxes(x.rep @ x.group.elements, -1, -2) @ y.rep
    return float(np.min(rotation_angle(rel)))


def injectivity_radius(group):
    """Radius of the ball on which tangent coordinates are single valued.

    Half the smallest non-zero rotation angle in the group, and ``pi``
    for the trivial group.
    """
    group = make_group(group)
    return np.pi if len(group) == 1 else 0.5 * group.min_angle


@dataclass(frozen=True, eq=False)
class TangentCoords:
    """Rotation-vector coordinates ``v`` of a point near ``base``."""

    v: np.ndarray
    base: AmbiguousRotation

    def point(self):
        """The class ``[base.rep exp(A(v))]``."""
        return AmbiguousRotation(self.base.rep @ exp_rotation(self.v), self.base.group)


def tangent_coords_array(reps, base_rep, group, check=True):
    """Vectorised tangent coordinates of representatives about ``base_rep``.

    For each ``U_i`` returns the shortest ``v_i = log(M^T U_i R)`` over
    ``R`` in the group.

    Parameters
    ----------
    reps : ndarray, shape (n, 3, 3)
    base_rep : ndarray, shape (3, 3)
    group : SymmetryGroup
    check : bool
        Raise :class:`OutsideNeighbourhoodError` for points farther than
        the injectivity radius.

    Returns
    -------
    ndarray, shape (n, 3)
    """
    rel = np.asarray(base_rep).T @ np.asarray(reps)
    # the smallest angle has the largest trace: tr(Q R) = sum_ab Q_ab R_ba
    Rt = np.swapaxes(group.elements, 1, 2).reshape(len(group), 9)
    best = np.argmax(rel.reshape(-1, 9) @ Rt.T, axis=1)
    chosen = rel @ group.elements[best]
    if check:
        bound = injectivity_radius(group)
        if np.any(rotation_angle(chosen) >= bound):
            raise OutsideNeighbourhoodError(
                f"point(s) lie outside the tangent neighbourhood of radius {bound:.4f} rad"
            )
    return log_rotation(chosen)


def tangent_coords(x, base):
    """Tangent coordinates ``p_[M]([U])`` of ``x`` about ``base``."""
    _require_same_group(x.group, base.group)
    v = tangent_coords_array(x.rep[None], base.rep, x.group)[0]
    return TangentCoords(v, base)


def symmetry_action(m0, R, x):
    """The map ``[U] -> [M0 R M0^T U]`` preserving ``[M0]``.

    Parameters
    ----------
    m0 : AmbiguousRotation
    R : array_like, shape (3, 3)
        Element of ``m0.group``.
    x : AmbiguousRotation
    """
    _require_same_group(m0.group, x.group)
    if not m0.group.contains(R):
        raise ValueError("R is not an element of the symmetry group")
    M = m0.rep
    return AmbiguousRotation(M @ np.asarray(R) @ M.T @ x.rep, x.group)
