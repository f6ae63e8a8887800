"""Global maximisation of smooth functions on SO(3).

Two objective families cover every estimator in the package:

* :class:`FramePolynomialObjective` -- ``F(X) = <t(X), c>`` for a fixed
  element ``c`` of an embedding space (sample means, regression targets
  with a single right-hand side).
* :class:`TraceObjective` -- ``F(X) = sum_t q_t(<X, M_t>_F)`` with
  polynomials ``q_t`` (regression and cross-group objectives).

Both provide values on batches of rotations plus the gradient and
Hessian in right-trivialised coordinates ``X exp(A(w))``. The optimiser
scores a deterministic low-discrepancy grid, then runs safeguarded
Newton ascent from the best starts.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import qmc

from . import symtensor
from ._config import DEFAULT_GRID_SIZE, DEFAULT_GTOL
from .rotations import exp_rotation, quaternion_to_matrix, rotation_angle, skew

__all__ = [
    "halton_rotations",
    "FramePolynomialObjective",
    "TraceObjective",
    "OptimizeResult",
    "maximize_rotation",
]


@lru_cache(maxsize=8)
def _halton_cached(n):
    u = qmc.Halton(d=3, scramble=False).random(n + 1)[1:]
    # Shoemake's map from the unit cube to uniform unit quaternions
    a, b, c = u.T
    q = np.stack(
        [
            np.sqrt(1 - a) * np.sin(2 * np.pi * b),
            np.sqrt(1 - a) * np.cos(2 * np.pi * b),
            np.sqrt(a) * np.sin(2 * np.pi * c),
            np.sqrt(a) * np.cos(2 * np.pi * c),
        ],
        axis=-1,
    )
    R = quaternion_to_matrix(q)
    R.setflags(write=False)
    return R


def halton_rotations(n):
    """Deterministic, evenly spread set of ``n`` rotations."""
    return _halton_cached(int(n))


class FramePolynomialObjective:
    """``F(X) = <t(X), c>`` for an embedding ``t`` and a fixed coordinate vector ``c``.

    Parameters
    ----------
    embedding : Embedding
    target : array_like, shape (embedding.dim,)
    """

    def __init__(self, embedding, target):
        self.embedding = embedding
        self.target = np.asarray(target, dtype=float)
        self._parts = embedding.split(self.target)
        self.constant = 0.0
        for block, part in zip(embedding.blocks, self._parts):
            if block.shift:
                self.constant -= block.shift * float(symtensor.identity_power(block.degree) @ part)

    def values(self, X):
        """Objective on a batch of rotations, shape (G, 3, 3) -> (G,)."""
        return self.embedding.coords(X) @ self.target

    def derivatives(self, X):
        """Value, gradient and Hessian at ``X`` in coordinates ``X exp(A(w))``."""
        value = self.constant
        grad = np.zeros(3)
        hess = np.zeros((3, 3))
        for block, coef in zip(self.embedding.blocks, self._parts):
            u = block.vectors @ X.T
            p, gp, hp = symtensor.polynomial_derivatives(u, coef, block.degree)
            g = gp @ X  # rows are X^T grad P(u_a)
            for f, wa, pa, ga, ha in zip(block.vectors, block.weights, p, g, hp):
                Af = skew(f)
                hl = X.T @ ha @ X
                fg = float(f @ ga)
                value += wa * pa
                grad += wa * np.cross(f, ga)
                hess += wa * (Af.T @ hl @ Af + 0.5 * (np.outer(f, ga) + np.outer(ga, f)) - fg * np.eye(3))
        return float(value), grad, hess


class TraceObjective:
    """``F(X) = const + sum_t sum_p C[t, p] <X, M_t>^p``.

    Parameters
    ----------
    mats : array_like, shape (T, 3, 3)
    coefs : array_like, shape (T, P + 1)
        Polynomial coefficients in increasing powers.
    constant : float
    """

    def __init__(self, mats, coefs, constant=0.0):
        self.mats = np.asarray(mats, dtype=float)
        self.coefs = np.asarray(coefs, dtype=float)
        self.constant = float(constant)
        powers = np.arange(self.coefs.shape[1])
        self._d1 = self.coefs[:, 1:] * powers[1:]
        self._d2 = self.coefs[:, 2:] * (powers[2:] * (powers[2:] - 1))
        self._flat = self.mats.reshape(len(self.mats), 9)

    def values(self, X, chunk=256):
        X = np.asarray(X, dtype=float).reshape(-1, 9)
        out = np.empty(len(X))
        for start in range(0, len(X), chunk):
            s = X[start:start + chunk] @ self._flat.T
            acc = np.zeros_like(s)
            for k in range(self.coefs.shape[1] - 1, -1, -1):
                acc = acc * s + self.coefs[:, k]
            out[start:start + chunk] = acc.sum(axis=1)
        return out + self.constant

    def derivatives(self, X):
        s = self._flat @ X.reshape(9)
        N = np.swapaxes(X, -1, -2)[None] @ self.mats  # X^T M_t
        g = 2.0 * _vee(N)
        trN = np.trace(N, axis1=1, axis2=2)
        Hs = 0.5 * (N + np.swapaxes(N, 1, 2)) - trN[:, None, None] * np.eye(3)
        q = self._eval(s, self.coefs)
        q1 = self._eval(s, self._d1) if self._d1.size else np.zeros_like(s)
        q2 = self._eval(s, self._d2) if self._d2.size else np.zeros_like(s)
        value = float(q.sum() + self.constant)
        grad = q1 @ g
        hess = np.einsum("t,ti,tj->ij", q2, g, g) + np.einsum("t,tij->ij", q1, Hs)
        return value, grad, 0.5 * (hess + hess.T)

    @staticmethod
    def _eval(s, c):
        out = np.zeros_like(s)
        for k in range(c.shape[1] - 1, -1, -1):
            out = out * s + c[:, k]
        return out


def _vee(a):
    return 0.5 * np.stack([a[..., 2, 1] - a[..., 1, 2], a[..., 0, 2] - a[..., 2, 0], a[..., 1, 0] - a[..., 0, 1]], -1)


@dataclass
class OptimizeResult:
    """Outcome of :func:`maximize_rotation`.

    Attributes
    ----------
    x : ndarray, shape (3, 3)
        Best rotation found.
    value : float
    grad_norm : float
    n_iter : int
        Newton iterations used from the winning start.
    unique : bool
        ``False`` when a distinct local maximum ties with the best value.
    runner_up : ndarray or None
        The tying maximiser when ``unique`` is False.
    maxima : list of (float, ndarray)
        Distinct local maxima found, best first.
    config : dict
    """

    x: np.ndarray
    value: float
    grad_norm: float
    n_iter: int
    unique: bool
    runner_up: object = None
    maxima: list = field(default_factory=list)
    config: dict = field(default_factory=dict)


def _ascend(objective, X, gtol, max_iter):
    f, g, H = objective.derivatives(X)
    it = 0
    for it in range(1, max_iter + 1):
        gn = np.linalg.norm(g)
        if gn < gtol:
            it -= 1
            break
        lam, vec = np.linalg.eigh(H)
        scale = max(np.abs(lam).max(), 1e-12)
        # shift curvature to be safely negative definite
        lam_mod = np.minimum(lam, -1e-3 * scale)
        step = -vec @ ((vec.T @ g) / lam_mod)
        sn = np.linalg.norm(step)
        if sn > 0.5:
            step *= 0.5 / sn
        t = 1.0
        accepted = False
        for _ in range(40):
            Xn = X @ exp_rotation(t * step)
            fn = objective.values(Xn[None])[0]
            if fn >= f - 1e-13 * (1.0 + abs(f)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        X = Xn
        f, g, H = objective.derivatives(X)
        if t * sn < 1e-15:
            break
    return X, f, float(np.linalg.norm(g)), it


def maximize_rotation(
    objective,
    *,
    grid_size=DEFAULT_GRID_SIZE,
    extra_starts=None,
    n_starts=8,
    gtol=DEFAULT_GTOL,
    max_iter=100,
    distance=None,
    tie_tol=1e-9,
):
    """Globally maximise ``objective`` over SO(3).

    Parameters
    ----------
    objective : FramePolynomialObjective or TraceObjective
    grid_size : int
        Number of low-discrepancy rotations scored to pick starts.
    extra_starts : ndarray, shape (k, 3, 3), optional
        Additional candidate starting rotations (e.g. data points).
    n_starts : int
        Number of best-scoring candidates refined by Newton ascent.
    gtol : float
        Gradient-norm stopping rule.
    distance : callable, optional
        ``distance(X, Y)`` used to decide whether two maximisers are
        distinct; defaults to the SO(3) rotation angle. Pass a quotient
        distance when the objective is invariant under a group.
    tie_tol : float
        Relative tolerance for declaring two maxima tied.

    Returns
    -------
    OptimizeResult
    """
    cands = [halton_rotations(grid_size)] if grid_size else []
    if extra_starts is not None and len(extra_starts):
        cands.append(np.asarray(extra_starts, dtype=float).reshape(-1, 3, 3))
    cand = np.concatenate(cands)
    vals = objective.values(cand)
    order = np.argsort(-vals, kind="stable")
    if distance is None:
        def distance(a, b):
            return float(rotation_angle(a.T @ b))

    # spread the starts: skip candidates too close to a chosen one
    starts = []
    for i in order:
        if len(starts) >= n_starts:
            break
        if all(distance(cand[i], cand[j]) > 0.2 for j in starts):
            starts.append(i)

    maxima = []
    best = None
    for i in starts:
        X, f, gn, it = _ascend(objective, cand[i], gtol, max_iter)
        maxima.append((f, X, gn, it))
        if best is None or f > best[0]:
            best = (f, X, gn, it)

    distinct = []
    for f, X, gn, it in sorted(maxima, key=lambda m: -m[0]):
        if all(distance(X, Y) > 1e-4 for _, Y in distinct):
            distinct.append((f, X))
    f0 = best[0]
    runner = None
    unique = True
    for f, X in distinct[1:]:
        if f0 - f <= tie_tol * (1.0 + abs(f0)):
            unique = False
            runner = X
            break
    config = {"grid_size": int(grid_size), "n_starts": int(n_starts), "gtol": float(gtol)}
    return OptimizeResult(best[1], float(f0), best[2], best[3], unique, runner, distinct, config)
