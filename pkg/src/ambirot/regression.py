"""Regression of one ambiguous rotation on another, and misorientation.

The model is ``[V_i] ~ [A U_i]`` with ``A`` in SO(3). The link rotation
is estimated by maximising ``sum_i <t2([V_i]), t1([A U_i])>``. Both
kernels used in this package are polynomials in traces, so the
objective is ``const + sum_j q_j(<A, M_j>_F)`` and is maximised with the
same grid-plus-Newton engine as the sample mean.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np
from scipy.stats import chi2

from ._config import DEFAULT_BAND_LIMIT, DEFAULT_GRID_SIZE, DEFAULT_GTOL
from .embeddings import AveragedEmbedding, Embedding, _product_multiset, standard_embedding
from .exceptions import DegenerateSampleError
from .optimize import TraceObjective, _ascend, halton_rotations, maximize_rotation
from .rotations import (
    AmbiguousRotation,
    as_sample,
    exp_rotation,
    log_rotation,
    matrix_to_quaternion,
    polar_projection,
    quaternion_to_matrix,
    make_group,
)

__all__ = [
    "RegressionFit",
    "ResidualInference",
    "Misorientation",
    "kernel_terms",
    "regression_embeddings",
    "regression_objective",
    "fit_regression",
    "correlation",
    "rho12",
    "residual_chi2_inference",
    "misorientation",
    "mean_misorientation",
    "mean_misorientation_alt",
    "AltMisorientation",
]


# ---------------------------------------------------------------------------
# Kernels as trace polynomials
# ---------------------------------------------------------------------------


def kernel_terms(emb1, emb2):
    """Write ``<t1([X]), t2([Y])>`` as ``const + sum_j q_j(tr(Q G_j))``, ``Q = X^T Y``.

    Returns
    -------
    G : ndarray, shape (J, 3, 3)
    coefs : ndarray, shape (J, P + 1)
        Polynomial coefficients in increasing powers.
    const : float
    """
    if isinstance(emb1, AveragedEmbedding) and isinstance(emb2, AveragedEmbedding):
        if emb1.band_limit != emb2.band_limit:
            raise ValueError("band limits differ")
        prods, freq = _product_multiset(emb1.group, emb2.group)
        L = emb1.band_limit
        coefs = np.zeros((len(prods), L + 1))
        coefs[:, 1:] = freq[:, None]
        return prods, coefs, -float(np.sum(emb1.moments))
    if isinstance(emb1, Embedding) and emb1 == emb2:
        P = emb1.max_degree
        mats, rows, const = [], [], 0.0
        for block in emb1.blocks:
            const += block.constant
            for fa, wa in zip(block.vectors, block.weights):
                for fb, wb in zip(block.vectors, block.weights):
                    mats.append(np.outer(fb, fa))
                    row = np.zeros(P + 1)
                    row[block.degree] = wa * wb
                    rows.append(row)
        return np.array(mats), np.array(rows), const
    raise ValueError("these embeddings do not share an inner-product space")


def regression_embeddings(group1, group2, band_limit=DEFAULT_BAND_LIMIT):
    """Standard embedding when the groups agree, averaged embeddings otherwise."""
    if group1 == group2:
        e = standard_embedding(group1)
        return e, e
    return AveragedEmbedding(group1, band_limit), AveragedEmbedding(group2, band_limit)


class _TensorTraceObjective(TraceObjective):
    """Trace objective with all terms of one power sharing a tensor.

    ``sum_j c_jl <A, M_j>^l = <A^{(x) l}, sum_j c_jl M_j^{(x) l}>``, which
    makes grid evaluation independent of the number of terms.
    """

    def __init__(self, mats, coefs, constant=0.0):
        super().__init__(mats, coefs, constant)
        self._tensors = []
        flat = self._flat
        cur = np.ones((len(flat), 1))
        for l in range(1, self.coefs.shape[1]):
            cur = (cur[:, :, None] * flat[:, None, :]).reshape(len(flat), -1)
            self._tensors.append(self.coefs[:, l] @ cur)
        self._c0 = float(self.coefs[:, 0].sum())

    def values(self, X, chunk=256):
        X = np.asarray(X, dtype=float).reshape(-1, 9)
        out = np.empty(len(X))
        for start in range(0, len(X), chunk):
            x = X[start:start + chunk]
            cur = np.ones((len(x), 1))
            acc = np.full(len(x), self._c0)
            for T in self._tensors:
                cur = (cur[:, :, None] * x[:, None, :]).reshape(len(x), -1)
                acc += cur @ T
            out[start:start + chunk] = acc
        return out + self.constant


def _make_objective(mats, coefs, constant):
    P = coefs.shape[1] - 1
    if len(mats) * 9 > 9**P and P <= 4:
        return _TensorTraceObjective(mats, coefs, constant)
    return TraceObjective(mats, coefs, constant)


def _pairs(pairs):
    """Normalise paired data to two aligned samples."""
    if isinstance(pairs, tuple) and len(pairs) == 2 and not isinstance(pairs[0], AmbiguousRotation):
        a, b = as_sample(pairs[0]), as_sample(pairs[1])
    else:
        pairs = list(pairs)
        if not pairs:
            raise ValueError("no pairs given")
        a = as_sample([p[0] for p in pairs])
        b = as_sample([p[1] for p in pairs])
    if len(a) != len(b):
        raise ValueError("paired samples differ in length")
    if len(a) == 0:
        raise ValueError("no pairs given")
    return a, b


def regression_objective(pairs, band_limit=DEFAULT_BAND_LIMIT):
    """Objective ``A -> sum_i <t2([V_i]), t1([A U_i])>`` as a trace polynomial."""
    a, b = _pairs(pairs)
    e1, e2 = regression_embeddings(a.group, b.group, band_limit)
    G, coefs, const = kernel_terms(e1, e2)
    # tr(U^T A^T V G) = <A, V G U^T>
    mats = np.einsum("nij,gjk,nlk->ngil", b.reps, G, a.reps).reshape(-1, 3, 3)
    rows = np.tile(coefs, (len(a), 1))
    return _make_objective(mats, rows, len(a) * const)


def rho12(group1, group2, band_limit=DEFAULT_BAND_LIMIT, grid_size=DEFAULT_GRID_SIZE):
    """``max_U <t1([U]), t2([I])>``; equals ``rho^2`` when the groups agree."""
    g1, g2 = make_group(group1), make_group(group2)
    e1, e2 = regression_embeddings(g1, g2, band_limit)
    if g1 == g2:
        return float(e1.rho2)
    G, coefs, const = kernel_terms(e1, e2)
    res = maximize_rotation(_make_objective(G, coefs, const), grid_size=grid_size)
    return float(res.value)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


@dataclass
class RegressionFit:
    """Fitted regression ``[V] ~ [A U]``.

    Attributes
    ----------
    a_hat : ndarray, shape (3, 3)
    kappa_hat : float
        ``3 (n - 1) / (2 residual_sum)``; ``inf`` for a perfect fit and
        ``nan`` when ``n = 1``.
    r : float
        Sample correlation.
    rho12 : float
    residual_sum : float
        ``sum_i {rho12 - <t1([A_hat U_i]), t2([V_i])>}``.
    groups : tuple of SymmetryGroup
    objective : float
    n : int
    unique : bool
        ``False`` when the optimiser found a tying distinct maximiser.
    band_limit : int or None
        Band limit of the averaged embedding for cross-group fits.
    config : dict
    """

    a_hat: np.ndarray
    kappa_hat: float
    r: float
    rho12: float
    residual_sum: float
    groups: tuple
    objective: float
    n: int
    unique: bool = True
    band_limit: object = None
    config: dict = field(default_factory=dict)

    def to_dict(self):
        d = {
            "a_hat": matrix_to_quaternion(self.a_hat).tolist(),
            "kappa_hat": _finite_or_none(self.kappa_hat),
            "r": float(self.r),
            "rho12": float(self.rho12),
            "residual_sum": float(self.residual_sum),
            "groups": [g.name for g in self.groups],
            "n": int(self.n),
            "unique": bool(self.unique),
            "config": self.config,
        }
        if self.band_limit is not None:
            d["L"] = int(self.band_limit)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        groups = tuple(make_group(g) for g in d["groups"])
        k = d["kappa_hat"]
        n = int(d["n"])
        rho = float(d["rho12"])
        return cls(
            quaternion_to_matrix(np.array(d["a_hat"])), float("nan") if k is None else float(k), float(d["r"]),
            rho, float(d["residual_sum"]), groups, n * rho - float(d["residual_sum"]), n, bool(d["unique"]),
            d.get("L"), d.get("config", {}),
        )


def fit_regression(pairs, *, band_limit=DEFAULT_BAND_LIMIT, grid_size=DEFAULT_GRID_SIZE, n_starts=8,
                   gtol=DEFAULT_GTOL):
    """Maximum likelihood estimate of the link rotation ``A``.

    Parameters
    ----------
    pairs : sequence of (AmbiguousRotation, AmbiguousRotation), or a tuple of two samples
        Explanatory ``[U_i]`` on ``SO(3)/K1`` and responses ``[V_i]`` on ``SO(3)/K2``.
    band_limit : int
        Truncation of the averaged embedding used when ``K1 != K2``.

    Returns
    -------
    RegressionFit

    Raises
    ------
    DegenerateSampleError
        If the objective vanishes identically.
    """
    a, b = _pairs(pairs)
    n = len(a)
    cross = a.group != b.group
    obj = regression_objective((a, b), band_limit)
    cfg = {"grid_size": int(grid_size), "n_starts": int(n_starts), "gtol": float(gtol),
           "embedding": "averaged" if cross else "standard"}
    if not cross and a.group.order == 1 and a.group.kind == "C":
        # the objective is <A, sum_i V_i U_i^T>, maximised by the polar factor
        S = np.einsum("nij,nkj->ik", b.reps, a.reps)
        if np.linalg.norm(S) < 1e-12 * n:
            raise DegenerateSampleError("regression objective vanishes identically")
        sv = np.linalg.svd(S, compute_uv=False)
        gap = sv[1] + sv[2] if np.linalg.det(S) >= 0 else sv[1] - sv[2]
        A = polar_projection(S)
        value = float(obj.values(A[None])[0])
        unique = bool(gap > 1e-12 * sv[0])
        cfg["method"] = "polar"
    else:
        starts = np.einsum("nij,nkj->nik", b.reps, a.reps)[: min(n, 200)]
        res = maximize_rotation(obj, grid_size=grid_size, extra_starts=starts, n_starts=n_starts, gtol=gtol)
        grid_vals = obj.values(halton_rotations(min(grid_size, 512)))
        if np.ptp(grid_vals) < 1e-12 * max(1.0, np.abs(grid_vals).max()) and abs(res.value) < 1e-9 * n:
            raise DegenerateSampleError("regression objective vanishes identically")
        A, value, unique = polar_projection(res.x), res.value, res.unique
    rho = rho12(a.group, b.group, band_limit)
    if rho <= 1e-12:
        raise DegenerateSampleError("rho12 is not positive")
    rss = n * rho - value
    rss = max(rss, 0.0)
    if n < 2:
        kappa = float("nan")
    elif rss <= 1e-13 * n * rho:
        kappa = float("inf")
    else:
        kappa = 3.0 * (n - 1) / (2.0 * rss)
    return RegressionFit(A, kappa, value / (n * rho), rho, rss, (a.group, b.group), value, n, unique,
                         band_limit if cross else None, cfg)


def correlation(pairs, fit=None, a=None):
    """Sample correlation ``r = (n rho12)^-1 sum_i <t1([A U_i]), t2([V_i])>``.

    Evaluated at ``fit.a_hat`` unless a rotation ``a`` is given.
    """
    s1, s2 = _pairs(pairs)
    if fit is None:
        fit = fit_regression((s1, s2))
    if fit.rho12 <= 1e-12:
        raise DegenerateSampleError("rho12 is not positive")
    A = fit.a_hat if a is None else np.asarray(a, dtype=float)
    obj = regression_objective((s1, s2), fit.band_limit or DEFAULT_BAND_LIMIT)
    return float(obj.values(A[None])[0] / (len(s1) * fit.rho12))


@dataclass
class ResidualInference:
    """High-concentration inference for the link rotation.

    Attributes
    ----------
    kappa_hat : float
    residual_sum : float
    n : int
    """

    kappa_hat: float
    residual_sum: float
    n: int
    fit: RegressionFit
    _objective: object = field(repr=False, default=None)

    def excess(self, a):
        """``sum_i <t([I]), t([V_i^T A_hat U_i])> - <t([I]), t([V_i^T A U_i])>``."""
        a = np.asarray(a, dtype=float)
        return float(self.fit.objective - self._objective.values(a[None])[0])

    def decomposition(self, a):
        """``(total, residual, excess)`` with ``total = residual + excess``.

        ``total`` is ``sum_i {rho12 - <t2([V_i]), t1([A U_i])>}``.
        """
        a = np.asarray(a, dtype=float)
        total = self.n * self.fit.rho12 - float(self._objective.values(a[None])[0])
        return total, self.residual_sum, self.excess(a)

    def statistic(self, a):
        """``2 kappa_hat * excess(a)``, approximately chi-square with 3 df."""
        return 2.0 * self.kappa_hat * self.excess(a)

    def contains(self, a, alpha=0.05):
        """Whether ``a`` lies in the approximate ``100 (1 - alpha)%`` confidence region."""
        return bool(self.statistic(a) < chi2.ppf(1.0 - alpha, 3))

    def p_value(self, a):
        return float(chi2.sf(self.statistic(a), 3))


def residual_chi2_inference(pairs, fit=None, max_mean_residual=0.25):
    """Concentration estimate and confidence region for the link rotation.

    ``2 kappa sum_i {rho^2 - <...A_hat...>}`` is approximately chi-square
    with ``3 (n - 1)`` degrees of freedom, giving
    ``kappa_hat = 3 (n - 1) / (2 residual_sum)``.

    Parameters
    ----------
    max_mean_residual : float
        Warn-free limit on ``residual_sum / (n rho12)``; beyond it the data
        are not concentrated enough for the approximation and an error is
        raised.

    Returns
    -------
    ResidualInference
    """
    s1, s2 = _pairs(pairs)
    n = len(s1)
    if n < 2:
        raise ValueError("need n >= 2")
    if fit is None:
        fit = fit_regression((s1, s2))
    if fit.residual_sum <= 1e-13 * n * fit.rho12:
        raise DegenerateSampleError("perfect fit: residual sum is zero and kappa_hat is infinite")
    if fit.residual_sum / (n * fit.rho12) > max_mean_residual:
        raise DegenerateSampleError("data are not concentrated enough for high-concentration inference")
    obj = regression_objective((s1, s2), fit.band_limit or DEFAULT_BAND_LIMIT)
    kappa = 3.0 * (n - 1) / (2.0 * fit.residual_sum)
    return ResidualInference(kappa, fit.residual_sum, n, fit, obj)


# ---------------------------------------------------------------------------
# Misorientation
# ---------------------------------------------------------------------------


@dataclass
class Misorientation:
    """Minimal-angle representative of a double coset ``K1 \\ SO(3) / K2``.

    Attributes
    ----------
    p : ndarray, shape (3, 3)
        ``(U R1)^T V R2`` with the smallest rotation angle.
    angle : float
        In ``[0, pi]``.
    axis : ndarray, shape (3,)
        Unit rotation axis; ``e3`` when the angle is zero.
    groups : tuple of SymmetryGroup
    """

    p: np.ndarray
    angle: float
    axis: np.ndarray
    groups: tuple

    def to_dict(self):
        return {"p": matrix_to_quaternion(self.p).tolist(), "angle": float(self.angle),
                "angle_deg": float(np.degrees(self.angle)), "axis": self.axis.tolist(),
                "groups": [g.name for g in self.groups]}


def misorientation(u, v):
    """Misorientation between ``[U]`` and ``[V]`` by exhaustive search over ``K1 x K2``."""
    K1, K2 = u.group.elements, v.group.elements
    Q = u.rep.T @ v.rep
    left = np.swapaxes(K1, 1, 2) @ Q  # R1^T Q
    # tr(R1^T Q R2) for every pair
    tr = left.reshape(len(K1), 9) @ np.swapaxes(K2, 1, 2).reshape(len(K2), 9).T
    i, j = np.unravel_index(int(np.argmax(tr)), tr.shape)
    P = left[i] @ K2[j]
    c = np.clip((float(tr[i, j]) - 1.0) / 2.0, -1.0, 1.0)
    v_log = log_rotation(P)
    ang = float(np.linalg.norm(v_log))
    angle = float(np.arccos(c)) if ang < 1e-6 or ang > np.pi - 1e-6 else ang
    axis = v_log / ang if ang > 1e-12 else np.array([0.0, 0.0, 1.0])
    return Misorientation(P, angle, axis, (u.group, v.group))


def mean_misorientation(pairs, **kw):
    """Mean misorientation: the regression estimate ``A_hat`` in SO(3)."""
    return fit_regression(pairs, **kw).a_hat


@dataclass
class AltMisorientation:
    """Result of :func:`mean_misorientation_alt` with ``full_output=True``.

    Attributes
    ----------
    a1 : ndarray, shape (3, 3)
    a2 : ndarray, shape (3, 3)
        A representative of the right coset ``K2 A2``.
    value : float
    history : list of float
        Objective after each alternating sweep of the winning start.
    start_values : list of float
        Final objective of every start.
    """

    a1: np.ndarray
    a2: np.ndarray
    value: float
    history: list
    start_values: list


def _poly_sum(s, coefs):
    out = np.zeros_like(s)
    for k in range(coefs.shape[1] - 1, -1, -1):
        out = out * s + coefs[:, k]
    return out


def mean_misorientation_alt(pairs, *, band_limit=DEFAULT_BAND_LIMIT, n_seeds=8, tol=1e-10, max_sweeps=200,
                            full_output=False):
    """Alternative mean misorientation ``(A1, [A2])``.

    Maximises ``sum_i max_{R in K2} <t1([A1 U_i]), t2([V_i R A2])>`` by
    alternating a Newton ascent in ``A1``, an exhaustive choice of each
    ``R_i`` and a Newton ascent in ``A2``, until a sweep improves the
    objective by less than ``tol``. The best of ``n_seeds`` deterministic
    starts is returned.

    Returns
    -------
    (ndarray, AmbiguousRotation) or AltMisorientation
        ``A1`` and the coset ``K2 A2``, stored as the class of ``A2^T`` in
        ``SO(3)/K2``.
    """
    a, b = _pairs(pairs)
    n = len(a)
    e1, e2 = regression_embeddings(a.group, b.group, band_limit)
    G, coefs, const = kernel_terms(e1, e2)
    K2 = b.group.elements
    U, V = a.reps, b.reps

    def kernel_Q(Q):
        s = np.einsum("...ij,gji->...g", Q, G)
        return _poly_sum(s, coefs).sum(axis=-1) + const

    def choose_R(A1, A2):
        X = A1 @ U  # (n,3,3)
        Q = np.swapaxes(X, 1, 2)[:, None] @ V[:, None] @ K2[None] @ A2  # (n,k,3,3)
        vals = kernel_Q(Q)
        idx = np.argmax(vals, axis=1)
        return K2[idx], float(vals[np.arange(n), idx].sum())

    def a1_objective(Y):
        # Q = U^T A1^T Y: <A1, Y G U^T>
        mats = np.einsum("nij,gjk,nlk->ngil", Y, G, U).reshape(-1, 3, 3)
        return TraceObjective(mats, np.tile(coefs, (n, 1)), n * const)

    def a2_objective(X, Y):
        # Q = X^T Y A2: tr(A2 G X^T Y) = <A2, Y^T X G^T>
        mats = np.einsum("nji,njk,glk->ngil", Y, X, G).reshape(-1, 3, 3)
        return TraceObjective(mats, np.tile(coefs, (n, 1)), n * const)

    A1_init = fit_regression((a, b), band_limit=band_limit).a_hat
    # A2 = I reproduces the primary estimate; the other seeds perturb it by 0.25 rad
    dirs = log_rotation(halton_rotations(max(n_seeds - 1, 1))[: n_seeds - 1]).reshape(-1, 3)
    dirs = 0.25 * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    seeds = [np.eye(3)] + [exp_rotation(d) for d in dirs]
    results = []
    for H in seeds:
        A1, A2 = A1_init, H
        R, val = choose_R(A1, A2)
        history = [val]
        for _ in range(max_sweeps):
            A1, _, _, _ = _ascend(a1_objective(V @ R @ A2), A1, DEFAULT_GTOL, 50)
            R, _ = choose_R(A1, A2)
            A2, _, _, _ = _ascend(a2_objective(A1 @ U, V @ R), A2, DEFAULT_GTOL, 50)
            R, new = choose_R(A1, A2)
            history.append(new)
            if new - val < tol:
                val = max(val, new)
                break
            val = new
        results.append((val, polar_projection(A1), polar_projection(A2), history))
    results.sort(key=lambda r: -r[0])
    best = results[0]
    if full_output:
        return AltMisorientation(best[1], best[2], best[0], best[3], [r[0] for r in results])
    return best[1], AmbiguousRotation(best[2].T, b.group)
