"""Parametric families on SO(3)/K.

All three families have densities with respect to the uniform measure
that depend on ``x = <t([U]), t([M])>``:

* ``watson``:   ``exp(kappa x) / c(kappa)``
* ``dlvp``:     ``(1 + x)^kappa / c(kappa)`` (zero where ``1 + x <= 0``)
* ``cardioid``: ``1 + kappa x`` with ``0 <= kappa <= rho^-2``

Normalising constants are tabulated by Monte Carlo on a grid of
``kappa`` and interpolated with monotone cubics. Sampling uses
rejection from the uniform distribution and, when its acceptance rate
would be below ``1e-3``, an independence Metropolis-Hastings sampler in
tangent coordinates with a Gaussian proposal built from the
high-concentration covariance.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import json
import math
import warnings

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from ._config import MIN_REJECTION_ACCEPTANCE
from .embeddings import rho_squared, standard_embedding
from .exceptions import DegenerateSampleError
from .inference import _checked_mean
from .optimize import FramePolynomialObjective
from .rotations import (
    AmbiguousRotation,
    AmbiguousSample,
    SymmetryGroup,
    as_sample,
    exp_rotation,
    haar_rotation,
    make_group,
    tangent_coords_array,
)

__all__ = [
    "FAMILIES",
    "DistributionSpec",
    "NormalizingConstant",
    "HighConcentrationModel",
    "SamplerInfo",
    "fit_normalizer",
    "log_density",
    "density_profile",
    "sample",
    "sample_density",
    "laplace_sigma",
    "high_conc_sigma",
    "verify_sigma_mc",
    "cardioid_moment_estimates",
    "fit_watson",
    "WatsonFit",
    "CardioidFit",
]

FAMILIES = ("watson", "dlvp", "cardioid")


def _rho2(group):
    return float(rho_squared(group))


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    """Family, mode and concentration of a distribution on SO(3)/K.

    Parameters
    ----------
    family : {'watson', 'dlvp', 'cardioid'}
    mode : AmbiguousRotation
    kappa : float
        Non-negative; the cardioid additionally needs ``kappa <= rho^-2``.
    """

    family: str
    mode: AmbiguousRotation
    kappa: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        k = float(self.kappa)
        if not np.isfinite(k) or k < 0:
            raise ValueError("kappa must be a non-negative finite number")
        if self.family == "cardioid" and k > 1.0 / _rho2(self.mode.group) * (1 + 1e-12):
            raise ValueError(f"cardioid needs kappa <= rho^-2 = {1.0 / _rho2(self.mode.group):.6g}")
        object.__setattr__(self, "kappa", k)

    @property
    def group(self):
        return self.mode.group


def density_profile(family, kappa, x):
    """Unnormalised density ``g(x)`` of a family as a function of ``x = <t, t_M>``."""
    x = np.asarray(x, dtype=float)
    return np.exp(_log_profile(family, kappa, x))


def _log_profile(family, kappa, x):
    x = np.asarray(x, dtype=float)
    if family == "watson":
        return kappa * x
    if family == "dlvp":
        with np.errstate(divide="ignore", invalid="ignore"):
            base = np.log(np.maximum(1.0 + x, 0.0))
            return np.where(1.0 + x > 0, kappa * base, -np.inf) if kappa > 0 else np.zeros_like(x)
    if family == "cardioid":
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(1.0 + kappa * x, 0.0))
    raise ValueError(family)


def _log_profile_max(family, kappa, rho2):
    return float(_log_profile(family, kappa, np.array(rho2)))


# ---------------------------------------------------------------------------
# High-concentration covariance
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _laplace_sigma(group):
    emb = standard_embedding(group)
    obj = FramePolynomialObjective(emb, emb.coords(np.eye(3)))
    _, _, H = obj.derivatives(np.eye(3))
    sigma = np.linalg.inv(-0.5 * (H + H.T))
    sigma = 0.5 * (sigma + sigma.T)
    sigma[np.abs(sigma) < 1e-14] = 0.0
    sigma.setflags(write=False)
    return sigma


def laplace_sigma(group):
    """Exact high-concentration covariance of ``sqrt(kappa) v`` for the Watson family.

    The inverse of minus the Hessian of ``<t([exp A(v)]), t([I])>`` at
    ``v = 0``, in tangent coordinates of the standard orientation.
    """
    return _laplace_sigma(make_group(group))


# Hard-coded tabulated values; C2 is stated in the order (about u1, about u0, about u0 x u1).
_TABLE5 = {
    ("C", 1): np.diag([0.5, 0.5, 0.5]),
    ("C", 2): np.diag([0.5, 1.0 / 6.0, 0.25]),
    ("D", 2): np.diag([0.25, 0.25, 0.25]),
    ("T", 0): np.diag([0.070, 0.070, 0.070]),
    ("O", 0): np.diag([0.125, 0.125, 0.125]),
    ("Y", 0): np.diag([0.026, 0.026, 0.026]),
}


@dataclass(frozen=True, eq=False)
class HighConcentrationModel:
    """Asymptotic covariance ``Sigma`` of ``sqrt(kappa) v`` near the mode.

    Attributes
    ----------
    group : SymmetryGroup
    sigma : ndarray, shape (3, 3)
    source : str
        ``'table'`` for tabulated values, ``'laplace'`` for values derived
        from the Hessian of the embedding kernel.
    frame_convention : str
    """

    group: SymmetryGroup
    sigma: np.ndarray
    source: str
    frame_convention: str = "v = log(M^T U R) in the standard orientation: v3 along e3 (u0 for C_r), v1 along e1 (u1)"


def high_conc_sigma(group):
    """High-concentration covariance for a group.

    Tabulated values are returned for C1, C2, D2, T, O and Y. For
    ``C_r`` and ``D_r`` with ``r >= 3`` no closed form is used; the
    covariance is derived from the Hessian of the embedding kernel (see
    :func:`laplace_sigma`) and can be cross-checked with
    :func:`verify_sigma_mc`.
    """
    g = make_group(group)
    key = (g.kind, g.order)
    if key in _TABLE5:
        return HighConcentrationModel(g, _TABLE5[key].copy(), "table")
    return HighConcentrationModel(g, np.array(laplace_sigma(g)), "laplace")


# ---------------------------------------------------------------------------
# Dirichlet cell of the identity and Haar density in tangent coordinates
# ---------------------------------------------------------------------------


def _haar_density_v(v):
    """Haar density in rotation-vector coordinates on the ball of radius pi."""
    th2 = np.sum(v * v, axis=-1)
    th = np.sqrt(th2)
    small = th < 1e-4
    safe = np.where(small, 1.0, th)
    ratio = np.where(small, 0.5 - th2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    return ratio / (4.0 * np.pi**2)


def _in_cell(R, group):
    """Whether the identity is the closest group element, i.e. R is canonical."""
    tr_self = np.trace(R, axis1=-2, axis2=-1)
    Rt = np.swapaxes(group.elements, 1, 2).reshape(len(group), 9)
    tr_all = R.reshape(-1, 9) @ Rt.T
    return tr_self >= tr_all.max(axis=1) - 1e-12


def _canonical_v(R, group):
    return tangent_coords_array(R, np.eye(3), group, check=False)


def _gaussian_logpdf(v, cov_inv, logdet):
    q = np.einsum("ni,ij,nj->n", v, cov_inv, v)
    return -0.5 * (q + logdet + 3 * np.log(2 * np.pi))


def _effective_kappa(family, kappa, rho2):
    if family == "dlvp":
        return kappa / (1.0 + rho2)
    if family == "cardioid":
        return kappa / (1.0 + kappa * rho2)
    return kappa


# ---------------------------------------------------------------------------
# Normalising constants
# ---------------------------------------------------------------------------


@dataclass
class NormalizingConstant:
    """Tabulated ``log c(kappa)`` with Monte Carlo standard errors.

    Attributes
    ----------
    family : str
    group : SymmetryGroup
    kappa : ndarray
        Increasing grid starting at 0.
    log_c : ndarray
    log_c_se : ndarray
        Standard errors of ``log_c``.
    mean_stat : ndarray
        ``d log c / d kappa`` at the nodes: ``E x`` for Watson and
        ``E log(1 + x)`` for dlvp.
    mean_stat_se : ndarray
    seed : int
    n_draws : ndarray
        Draw count used at each node.
    """

    family: str
    group: SymmetryGroup
    kappa: np.ndarray
    log_c: np.ndarray
    log_c_se: np.ndarray
    mean_stat: np.ndarray
    mean_stat_se: np.ndarray
    seed: int
    n_draws: np.ndarray
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self._log_c = PchipInterpolator(self.kappa, self.log_c, extrapolate=False)
        self._mean = PchipInterpolator(self.kappa, self.mean_stat, extrapolate=False)

    @property
    def kappa_max(self):
        return float(self.kappa[-1])

    def __call__(self, kappa):
        """Interpolated ``log c(kappa)``."""
        return self.log_c_at(kappa)

    def log_c_at(self, kappa):
        k = np.asarray(kappa, dtype=float)
        if np.any(k < 0) or np.any(k > self.kappa_max * (1 + 1e-12)):
            raise ValueError(f"kappa outside the tabulated range [0, {self.kappa_max}]")
        return self._log_c(np.minimum(k, self.kappa_max))

    def mean_stat_at(self, kappa):
        """Interpolated ``d log c / d kappa``."""
        k = np.asarray(kappa, dtype=float)
        if np.any(k < 0) or np.any(k > self.kappa_max * (1 + 1e-12)):
            raise ValueError(f"kappa outside the tabulated range [0, {self.kappa_max}]")
        return self._mean(np.minimum(k, self.kappa_max))

    def to_dict(self):
        return {
            "family": self.family,
            "group": self.group.name,
            "seed": int(self.seed),
            "kappa": self.kappa.tolist(),
            "log_c": self.log_c.tolist(),
            "log_c_se": self.log_c_se.tolist(),
            "mean_stat": self.mean_stat.tolist(),
            "mean_stat_se": self.mean_stat_se.tolist(),
            "n_draws": [int(n) for n in self.n_draws],
            "notes": self.notes,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["family"], make_group(d["group"]), np.array(d["kappa"]), np.array(d["log_c"]),
            np.array(d["log_c_se"]), np.array(d["mean_stat"]), np.array(d["mean_stat_se"]),
            int(d["seed"]), np.array(d["n_draws"]), d.get("notes", {}),
        )

    @classmethod
    def from_json(cls, text_or_path):
        text = text_or_path
        if not text.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


@lru_cache(maxsize=64)
def _base_block(group, seed, size, b):
    """Block ``b`` of the uniform base draws shared by every kappa node."""
    rng = np.random.default_rng([int(seed), 7, int(b)])
    U = haar_rotation(rng, size)
    z = rng.standard_normal((size, 3))
    pick = rng.random(size)
    v = _canonical_v(U, group)
    x = standard_embedding(group).kernel(U)
    hv = len(group) * _haar_density_v(v)
    out = (v, x, hv, z, pick)
    for a in out:
        a.setflags(write=False)
    return out


@lru_cache(maxsize=8)
def _base_draws(group, seed, size, n_blocks):
    blocks = [_base_block(group, seed, size, b) for b in range(n_blocks)]
    out = tuple(np.concatenate(parts) for parts in zip(*blocks))
    for a in out:
        a.setflags(write=False)
    return out


def _node_estimate(family, kappa, group, emb, rho2, sigma, base):
    """Defensive importance-sampling estimate of c(kappa) and its score mean."""
    v_haar, x_haar, hv_haar, z, pick = base
    n = len(v_haar)
    if kappa == 0:
        return 0.0, 0.0, _zero_mean_stat(family, x_haar), 0.0
    keff = _effective_kappa(family, kappa, rho2)
    w_haar = 1.0 if keff * rho2 <= 2.0 else 0.1
    cov = (1.2**2) * sigma / keff
    L = np.linalg.cholesky(cov)
    cov_inv = np.linalg.inv(cov)
    logdet = np.linalg.slogdet(cov)[1]
    gauss = pick >= w_haar
    v, x, hv = v_haar.copy(), x_haar.copy(), hv_haar.copy()
    inside = np.ones(n, dtype=bool)
    if gauss.any():
        vg = z[gauss] @ L.T
        Rg = exp_rotation(vg)
        v[gauss] = vg
        x[gauss] = emb.kernel(Rg)
        hv[gauss] = len(group) * _haar_density_v(vg)
        inside[gauss] = (np.linalg.norm(vg, axis=1) < np.pi) & _in_cell(Rg, group)
    q = w_haar * hv + (1.0 - w_haar) * np.exp(_gaussian_logpdf(v, cov_inv, logdet))
    lg = _log_profile(family, kappa, x) - _log_profile_max(family, kappa, rho2)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(inside, hv / q * np.exp(lg), 0.0)
    mean = terms.mean()
    se = terms.std(ddof=1) / math.sqrt(n)
    log_c = _log_profile_max(family, kappa, rho2) + math.log(mean)
    log_c_se = se / mean
    stat = x if family == "watson" else np.log(np.maximum(1.0 + x, 1e-300))
    wts = terms / terms.sum()
    m = float(wts @ stat)
    m_se = float(np.sqrt(np.sum(wts**2 * (stat - m) ** 2)))
    return log_c, log_c_se, m, m_se


def _zero_mean_stat(family, x_haar):
    if family == "watson":
        return 0.0  # E x = 0 exactly under uniformity
    return float(np.mean(np.log(np.maximum(1.0 + x_haar, 1e-300))))


@lru_cache(maxsize=32)
def _fit_normalizer(family, group, kappa_max, n_draws, seed, n_nodes, se_tol):
    emb = standard_embedding(group)
    rho2 = emb.rho2
    sigma = np.array(laplace_sigma(group))
    grid = kappa_max * np.linspace(0.0, 1.0, n_nodes) ** 2
    rows, draws = [], []
    for k in grid:
        for blocks in (1, 2, 4, 8, 16):
            base = _base_draws(group, seed, n_draws, blocks)
            est = _node_estimate(family, float(k), group, emb, rho2, sigma, base)
            if est[1] <= se_tol:
                break
        rows.append(est)
        draws.append(blocks * n_draws)
    rows = np.array(rows)
    log_c, log_c_se, mean_stat, mean_se = rows.T
    notes = {}
    if family == "watson":
        mono = np.maximum.accumulate(mean_stat)
        if np.any(mono != mean_stat):
            notes["monotone_repair"] = float(np.max(mono - mean_stat))
        mean_stat = mono
    return NormalizingConstant(family, group, grid, log_c, log_c_se, mean_stat, mean_se, int(seed),
                               np.array(draws), notes)


def fit_normalizer(family, group, kappa_max, n_draws=20_000, seed=0, n_nodes=33, se_tol=2e-3):
    """Tabulate ``log c(kappa)`` on ``[0, kappa_max]``.

    Each node uses defensive importance sampling over the canonical
    tangent cell of the identity: a mixture of uniform draws and a
    Gaussian fitted to the high-concentration limit. The same base draws
    are reused at every node, so the table is smooth in ``kappa``; the
    draw budget doubles at nodes whose standard error exceeds ``se_tol``.

    Parameters
    ----------
    family : {'watson', 'dlvp'}
    group : SymmetryGroup or str
    kappa_max : float
    n_draws : int
    seed : int
    n_nodes : int
        Grid nodes, spaced quadratically to resolve small ``kappa``.
    se_tol : float
        Target standard error of ``log c`` per node.

    Returns
    -------
    NormalizingConstant
    """
    if family not in ("watson", "dlvp"):
        raise ValueError("normalisers are tabulated for 'watson' and 'dlvp' only")
    if kappa_max <= 0:
        raise ValueError("kappa_max must be positive")
    return _fit_normalizer(family, make_group(group), float(kappa_max), int(n_draws), int(seed), int(n_nodes),
                           float(se_tol))


def _default_normalizer(family, group, kappa):
    kmax = 8.0
    while kmax < kappa:
        kmax *= 2
    return fit_normalizer(family, group, kmax)


def log_density(x, spec, normalizer=None):
    """Log density of ``x`` with respect to the uniform distribution.

    Parameters
    ----------
    x : AmbiguousRotation or AmbiguousSample
    spec : DistributionSpec
    normalizer : NormalizingConstant, optional
        Used for the Watson and dlvp families; tabulated on demand.

    Returns
    -------
    float or ndarray
    """
    s = as_sample(x)
    if s.group != spec.group:
        raise ValueError("point and distribution have different groups")
    emb = standard_embedding(spec.group)
    vals = emb.inner_reps(spec.mode.rep, s.reps)
    lp = _log_profile(spec.family, spec.kappa, vals)
    if spec.family != "cardioid" and spec.kappa > 0:
        norm = normalizer or _default_normalizer(spec.family, spec.group, spec.kappa)
        lp = lp - float(norm.log_c_at(spec.kappa))
    return float(lp[0]) if isinstance(x, AmbiguousRotation) else lp


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


@dataclass
class SamplerInfo:
    """Diagnostics of a call to :func:`sample`."""

    method: str
    acceptance: float
    n_proposals: int
    burn_in: int = 0
    thinning: int = 1
    n_chains: int = 0
    kappa_switch_rule: str = f"rejection acceptance < {MIN_REJECTION_ACCEPTANCE:g}"


def sample_density(group, log_g, log_gmax, n, rng, batch=None):
    """Rejection sampler for a density ``g(x) / E g`` with ``x = <t([U]), t([I])>``.

    Parameters
    ----------
    group : SymmetryGroup or str
    log_g : callable
        Vectorised log of the unnormalised density as a function of ``x``.
    log_gmax : float
        Upper bound of ``log_g``.
    n : int
    rng : numpy.random.Generator

    Returns
    -------
    reps : ndarray, shape (n, 3, 3)
    info : SamplerInfo
    """
    group = make_group(group)
    emb = standard_embedding(group)
    out = []
    got = 0
    proposals = 0
    batch = batch or max(1024, 2 * n)
    while got < n:
        U = haar_rotation(rng, batch)
        x = emb.kernel(U)
        accept = np.log(rng.random(batch)) < log_g(x) - log_gmax
        out.append(U[accept])
        got += int(accept.sum())
        proposals += batch
    reps = np.concatenate(out)[:n]
    return reps, SamplerInfo("rejection", got / proposals if proposals else 1.0, proposals)


def _mh_sample(family, kappa, group, n, rng, n_chains=None, burn_in=100, thinning=3):
    emb = standard_embedding(group)
    rho2 = emb.rho2
    keff = _effective_kappa(family, kappa, rho2)
    cov = (1.5**2) * np.array(laplace_sigma(group)) / keff
    L = np.linalg.cholesky(cov)
    cov_inv = np.linalg.inv(cov)
    logdet = np.linalg.slogdet(cov)[1]
    w_haar = 0.05
    K = len(group)
    n_chains = n_chains or min(n, 1000)
    per_chain = -(-n // n_chains)

    def propose(m):
        use_haar = rng.random(m) < w_haar
        v = rng.standard_normal((m, 3)) @ L.T
        if use_haar.any():
            v[use_haar] = _canonical_v(haar_rotation(rng, int(use_haar.sum())), group)
        R = exp_rotation(v)
        inside = use_haar | ((np.linalg.norm(v, axis=1) < np.pi) & _in_cell(R, group))
        hv = _haar_density_v(v)
        with np.errstate(divide="ignore"):
            lq = np.log(w_haar * K * hv + (1 - w_haar) * np.exp(_gaussian_logpdf(v, cov_inv, logdet)))
            lt = np.where(inside, np.log(hv) + _log_profile(family, kappa, emb.kernel(R)), -np.inf)
        return v, lt - lq

    v, lw = propose(n_chains)
    # restart chains whose initial state lies outside the support
    while np.any(~np.isfinite(lw)):
        bad = ~np.isfinite(lw)
        v[bad], lw[bad] = propose(int(bad.sum()))
    kept = []
    accepted = 0
    steps = burn_in + per_chain * thinning
    for step in range(1, steps + 1):
        v_new, lw_new = propose(n_chains)
        acc = np.log(rng.random(n_chains)) < lw_new - lw
        v[acc] = v_new[acc]
        lw[acc] = lw_new[acc]
        accepted += int(acc.sum())
        if step > burn_in and (step - burn_in) % thinning == 0:
            kept.append(v.copy())
    vs = np.stack(kept, axis=1).reshape(-1, 3)[:n]
    info = SamplerInfo("metropolis-hastings", accepted / (steps * n_chains), steps * n_chains,
                       burn_in, thinning, n_chains)
    return exp_rotation(vs), info


def _pilot_acceptance(family, kappa, group, rng, m=4000):
    emb = standard_embedding(group)
    x = emb.kernel(haar_rotation(rng, m))
    g = np.exp(_log_profile(family, kappa, x) - _log_profile_max(family, kappa, emb.rho2))
    return float(g.mean())


def sample(spec, n, rng=None, method="auto", return_info=False):
    """Draw ``n`` independent points from a distribution.

    Parameters
    ----------
    spec : DistributionSpec
    n : int
    rng : numpy.random.Generator or int, optional
    method : {'auto', 'rejection', 'mh'}
        ``'auto'`` estimates the rejection acceptance rate from a pilot
        run and switches to Metropolis-Hastings below ``1e-3``.
    return_info : bool

    Returns
    -------
    AmbiguousSample, or (AmbiguousSample, SamplerInfo)
    """
    rng = np.random.default_rng(rng)
    group = spec.group
    rho2 = _rho2(group)
    fam, kappa = spec.family, spec.kappa
    if method == "auto":
        if kappa == 0 or fam == "cardioid":
            method = "rejection"
        else:
            method = "rejection" if _pilot_acceptance(fam, kappa, group, rng) >= MIN_REJECTION_ACCEPTANCE else "mh"
    if method == "rejection":
        reps, info = sample_density(
            group, lambda x: _log_profile(fam, kappa, x), _log_profile_max(fam, kappa, rho2), n, rng
        )
    elif method == "mh":
        if fam == "cardioid":
            raise ValueError("the cardioid is always sampled by rejection")
        reps, info = _mh_sample(fam, kappa, group, n, rng)
    else:
        raise ValueError("method must be 'auto', 'rejection' or 'mh'")
    out = AmbiguousSample(spec.mode.rep @ reps, group)
    return (out, info) if return_info else out


def verify_sigma_mc(group, kappa=500.0, n=20_000, rng=None, family="watson", scale=None):
    """Empirical covariance of scaled tangent coordinates at high concentration.

    Samples ``n`` points with mode ``[I]`` and returns the covariance of
    ``sqrt(scale) v``. The default scale is ``kappa`` for Watson and
    ``kappa / (1 + rho^2)`` for dlvp, the factor under which both
    families share the asymptotic covariance ``Sigma``.

    Returns
    -------
    ndarray, shape (3, 3)
    """
    g = make_group(group)
    if scale is None:
        scale = kappa if family == "watson" else kappa / (1.0 + _rho2(g))
    spec = DistributionSpec(family, AmbiguousRotation(np.eye(3), g), kappa)
    s = sample(spec, n, rng)
    v = tangent_coords_array(s.reps, np.eye(3), g, check=False)
    return np.cov(np.sqrt(scale) * v, rowvar=False)


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------


@dataclass
class CardioidFit:
    mode: AmbiguousRotation
    kappa: float
    clamped: bool


@dataclass
class WatsonFit:
    mode: AmbiguousRotation
    kappa: float
    mean_stat: float
    method: str


def _scores(s, mean):
    emb = standard_embedding(s.group)
    return emb.inner_reps(mean.rep, s.reps)


def cardioid_moment_estimates(sample, **mean_kw):
    """Moment estimates of the cardioid mode and concentration.

    ``kappa_hat = xbar / ((1 - 1/n) s^2)`` with ``x_i = <t([U_i]), t([M_hat])>``
    and ``s^2`` their sample variance, clamped to ``[0, rho^-2]``.

    Returns
    -------
    CardioidFit
    """
    s = as_sample(sample)
    n = len(s)
    if n < 2:
        raise ValueError("need n >= 2")
    mean, _ = _checked_mean(s, **mean_kw)
    x = _scores(s, mean)
    s2 = float(np.var(x, ddof=1))
    if s2 <= 1e-14 * max(1.0, float(np.abs(x).max())):
        raise DegenerateSampleError("zero sample variance (point-mass sample)")
    k = float(x.mean() / ((1.0 - 1.0 / n) * s2))
    upper = 1.0 / _rho2(s.group)
    clamped = not (0.0 <= k <= upper)
    if clamped:
        warnings.warn(f"cardioid kappa estimate {k:.4g} clamped to [0, {upper:.4g}]", stacklevel=2)
    return CardioidFit(mean, float(np.clip(k, 0.0, upper)), clamped)


def fit_watson(sample, normalizer=None, kappa_limit=4096.0, **mean_kw):
    """Maximum likelihood fit of the Watson family.

    The mode estimate is the sample mean. ``kappa`` solves
    ``d log c / d kappa = mean_i <t([U_i]), t([M_hat])>`` on the
    tabulated, monotone score curve. Beyond the table the
    high-concentration approximation ``E x = rho^2 - 3 / (2 kappa)`` is
    used.

    Returns
    -------
    WatsonFit
    """
    s = as_sample(sample)
    if len(s) < 2:
        raise ValueError("need n >= 2")
    mean, _ = _checked_mean(s, **mean_kw)
    xbar = float(_scores(s, mean).mean())
    rho2 = _rho2(s.group)
    if xbar <= 0:
        return WatsonFit(mean, 0.0, xbar, "boundary")
    if normalizer is not None:
        tables = [normalizer]
    else:
        tables = []
        kmax = 64.0
        while kmax <= kappa_limit:
            tables.append(kmax)
            kmax *= 2
    for tab in tables:
        norm = tab if isinstance(tab, NormalizingConstant) else fit_normalizer("watson", s.group, tab)
        top = float(norm.mean_stat_at(norm.kappa_max))
        if xbar <= top:
            k = brentq(lambda k: float(norm.mean_stat_at(k)) - xbar, 0.0, norm.kappa_max, xtol=1e-10)
            return WatsonFit(mean, float(k), xbar, "table")
    return WatsonFit(mean, 1.5 / max(rho2 - xbar, 1e-300), xbar, "asymptotic")
