"""Compressed storage for symmetric tensors over R^3.

A symmetric tensor of rank ``r`` is stored by its components ``T_alpha``
at the monomial exponents ``alpha = (a, b, c)`` with ``a + b + c = r``.
Coordinates are scaled by ``sqrt(w_alpha)``, ``w_alpha = r!/(a! b! c!)``,
so the Euclidean inner product of coordinate vectors equals the full
tensor contraction. In these coordinates the tensor power of a vector
``x`` is ``sqrt(w_alpha) x^alpha``.
"""

from functools import lru_cache
from itertools import permutations
from math import factorial

import numpy as np

__all__ = [
    "exponents",
    "multinomial_weights",
    "power_features",
    "identity_power",
    "to_dense",
    "from_dense",
    "symmetrize",
    "polynomial_derivatives",
]


@lru_cache(maxsize=None)
def _exponents(r):
    rows = [(a, b, r - a - b) for a in range(r, -1, -1) for b in range(r - a, -1, -1)]
    out = np.array(rows, dtype=int).reshape(-1, 3)
    out.setflags(write=False)
    return out


def exponents(r):
    """Monomial exponents of degree ``r`` in a fixed (lexicographic) order."""
    return _exponents(int(r))


@lru_cache(maxsize=None)
def _weights(r):
    e = exponents(r)
    w = np.array([factorial(r) // (factorial(a) * factorial(b) * factorial(c)) for a, b, c in e], dtype=float)
    w.setflags(write=False)
    return w


def multinomial_weights(r):
    """Multiplicities ``r!/(a! b! c!)`` of each stored component."""
    return _weights(int(r))


def _powers(x, r):
    x = np.asarray(x, dtype=float)
    return x[..., None] ** np.arange(r + 1)


def power_features(x, r):
    """Scaled coordinates of ``x (x) x (x) ... (x) x`` (``r`` factors).

    Parameters
    ----------
    x : array_like, shape (..., 3)
    r : int

    Returns
    -------
    ndarray, shape (..., d) with ``d = (r + 1)(r + 2)/2``
    """
    e = exponents(r)
    pw = _powers(x, r)
    mono = pw[..., 0, e[:, 0]] * pw[..., 1, e[:, 1]] * pw[..., 2, e[:, 2]]
    return np.sqrt(multinomial_weights(r)) * mono


@lru_cache(maxsize=None)
def _identity_power(r):
    if r % 2:
        raise ValueError("identity powers exist only for even rank")
    k = r // 2
    e = exponents(r)
    out = np.zeros(len(e))
    for i, (a, b, c) in enumerate(e):
        if a % 2 == 0 and b % 2 == 0 and c % 2 == 0:
            p, q, s = a // 2, b // 2, c // 2
            # w_alpha * S_alpha = k!/(p! q! s!)
            out[i] = factorial(k) / (factorial(p) * factorial(q) * factorial(s))
    out /= np.sqrt(multinomial_weights(r))
    out.setflags(write=False)
    return out


def identity_power(r):
    """Scaled coordinates of ``symm(I (x) ... (x) I)`` with ``r/2`` factors.

    Its contraction with ``x^(x)r`` is ``|x|^r`` and its squared norm is ``r + 1``.
    """
    return _identity_power(int(r))


def to_dense(coords, r):
    """Expand scaled coordinates to a dense ``3^r`` array."""
    coords = np.asarray(coords, dtype=float)
    e = exponents(r)
    comp = coords / np.sqrt(multinomial_weights(r))
    lookup = {tuple(a): i for i, a in enumerate(e)}
    dense = np.empty((3,) * r)
    for idx in np.ndindex(*dense.shape):
        alpha = (idx.count(0), idx.count(1), idx.count(2))
        dense[idx] = comp[lookup[alpha]]
    return dense


def from_dense(tensor):
    """Scaled coordinates of a dense symmetric tensor (symmetrising first)."""
    tensor = np.asarray(tensor, dtype=float)
    r = tensor.ndim
    e = exponents(r)
    sym = symmetrize(tensor)
    comp = np.array([sym[(0,) * a + (1,) * b + (2,) * c] for a, b, c in e])
    return comp * np.sqrt(multinomial_weights(r))


def symmetrize(tensor):
    """Average of a dense tensor over all permutations of its indices."""
    tensor = np.asarray(tensor, dtype=float)
    r = tensor.ndim
    if r <= 1:
        return tensor.copy()
    perms = list(permutations(range(r)))
    out = np.zeros_like(tensor)
    for p in perms:
        out += np.transpose(tensor, p)
    return out / len(perms)


def polynomial_derivatives(x, coef, r):
    """Value, gradient and Hessian of ``P(x) = <coef, power_features(x, r)>``.

    Parameters
    ----------
    x : array_like, shape (..., 3)
    coef : array_like, shape (d,)
    r : int

    Returns
    -------
    value : ndarray, shape (...)
    grad : ndarray, shape (..., 3)
    hess : ndarray, shape (..., 3, 3)
    """
    e = exponents(r)
    a = np.asarray(coef, dtype=float) * np.sqrt(multinomial_weights(r))
    pw = _powers(x, r)
    # index -1 wraps around but always meets a zero coefficient
    p = [[pw[..., k, e[:, k] - s] for s in range(3)] for k in range(3)]
    value = (p[0][0] * p[1][0] * p[2][0]) @ a
    grad = np.empty(np.shape(x)[:-1] + (3,))
    hess = np.empty(np.shape(x)[:-1] + (3, 3))
    for k in range(3):
        shifts = [0, 0, 0]
        shifts[k] = 1
        mono = p[0][shifts[0]] * p[1][shifts[1]] * p[2][shifts[2]]
        grad[..., k] = mono @ (a * e[:, k])
        for l in range(k, 3):
            sh = [0, 0, 0]
            sh[k] += 1
            sh[l] += 1
            mono = p[0][sh[0]] * p[1][sh[1]] * p[2][sh[2]]
            fac = e[:, k] * (e[:, l] - (1 if k == l else 0))
            hess[..., k, l] = hess[..., l, k] = mono @ (a * fac)
    return value, grad, hess
