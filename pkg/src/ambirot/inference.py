"""Point estimation and hypothesis tests for ambiguous rotations.

Every test returns a :class:`TestReport`. Randomization tests draw
replicate ``b`` from ``numpy.random.default_rng([seed, b])``, so p-values
are reproducible for fixed ``(B, seed)`` and do not depend on how the
replicates are scheduled.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, stats

from ._config import DEFAULT_GRID_SIZE, DEFAULT_GTOL, DEFAULT_REPLICATES
from ._parallel import map_replicates, randomization_pvalue
from .embeddings import (
    AveragedEmbedding,
    EmbeddedPoint,
    embedding_dim,
    null_spectrum,
    rho_squared,
    standard_embedding,
)
from .exceptions import DegenerateSampleError, GroupMismatchError
from .optimize import FramePolynomialObjective, maximize_rotation
from .rotations import (
    AmbiguousRotation,
    AmbiguousSample,
    as_sample,
    haar_rotation,
    make_group,
    polar_projection,
    rotation_angle,
    tangent_coords_array,
)

__all__ = [
    "TestReport",
    "SampleSummary",
    "sample_mean",
    "dispersion",
    "summarize",
    "uniformity_S",
    "s_statistic",
    "rayleigh_bingham_components",
    "weighted_chi2_sf",
    "gine_TG",
    "tg_statistic",
    "one_sample_location_randomization",
    "one_sample_hotelling",
    "two_sample_test",
    "two_sample_hotelling",
    "independence_test",
]


@dataclass
class TestReport:
    """Uniform result record of a hypothesis test.

    Attributes
    ----------
    statistic : float
    p_value : float
    method : str
    reference : dict
        ``{"kind": "chi-square", "df": ...}``, ``{"kind": "F", ...}``,
        ``{"kind": "randomization", "B": ..., "seed": ...}`` or
        ``{"kind": "permutation", "B": ..., "seed": ...}``.
    components : dict
        Named sub-statistics.
    config : dict
        Settings that influenced the result.
    """

    __test__ = False  # not a pytest test class

    statistic: float
    p_value: float
    method: str
    reference: dict = field(default_factory=dict)
    components: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self):
        """Stable JSON-ready mapping."""
        out = {"method": self.method, "statistic": float(self.statistic), "p_value": float(self.p_value)}
        for key in ("df", "df1", "df2", "B", "seed"):
            if key in self.reference:
                out[key] = self.reference[key]
        if self.components:
            out["components"] = {k: float(v) for k, v in self.components.items()}
        if self.config:
            out["config"] = dict(self.config)
        return out


@dataclass
class SampleSummary:
    """Mean embedding, sample mean and dispersion of a sample."""

    n: int
    mean_embedding: EmbeddedPoint
    mean: AmbiguousRotation
    dispersion: float
    group: object
    unique: bool = True

    def to_dict(self):
        from .rotations import matrix_to_quaternion

        return {
            "n": self.n,
            "group": self.group.name,
            "mean_quaternion": matrix_to_quaternion(self.mean.rep).tolist(),
            "dispersion": float(self.dispersion),
            "rho2": float(rho_squared(self.group)),
            "mean_unique": bool(self.unique),
        }


# ---------------------------------------------------------------------------
# Sample mean and dispersion
# ---------------------------------------------------------------------------


def _quotient_metric(group):
    elems = group.elements

    def dist(X, Y):
        return float(np.min(rotation_angle(X.T @ Y @ elems)))

    return dist


def sample_mean(
    sample,
    *,
    embedding=None,
    grid_size=DEFAULT_GRID_SIZE,
    n_starts=8,
    gtol=DEFAULT_GTOL,
    full_output=False,
):
    """Sample mean ``[Ubar]``: the class maximising ``<t([U]), tbar>``.

    For the trivial group the maximiser is the special orthogonal polar
    factor of the mean matrix. Otherwise a low-discrepancy grid plus the
    data points seed a Newton ascent in tangent coordinates.

    Parameters
    ----------
    sample : AmbiguousSample or sequence of AmbiguousRotation
    embedding : Embedding, optional
    grid_size, n_starts, gtol
        Optimiser settings.
    full_output : bool
        Also return the :class:`~ambirot.optimize.OptimizeResult`.

    Returns
    -------
    AmbiguousRotation, or (AmbiguousRotation, OptimizeResult)
    """
    s = as_sample(sample)
    if len(s) == 0:
        raise ValueError("empty sample")
    emb = standard_embedding(s.group) if embedding is None else embedding
    tbar = emb.coords(s.reps).mean(axis=0)
    objective = FramePolynomialObjective(emb, tbar)

    if s.group.kind == "C" and s.group.order == 1 and embedding is None:
        mbar = s.reps.mean(axis=0)
        sv = np.linalg.svd(mbar, compute_uv=False)
        X = polar_projection(mbar)
        # the maximiser is unique iff s2 + sign(det) s3 > 0
        tol = 1e-12 * max(sv[0], 1e-300)
        gap = sv[1] + sv[2] if np.linalg.det(mbar) >= 0 else sv[1] - sv[2]
        unique = bool(gap > tol)
        from .optimize import OptimizeResult

        res = OptimizeResult(X, float(objective.values(X[None])[0]), 0.0, 0, unique,
                             config={"method": "polar"})
    else:
        n_extra = min(len(s), 200)
        step = max(1, len(s) // n_extra)
        res = maximize_rotation(
            objective,
            grid_size=grid_size,
            extra_starts=s.reps[::step][:n_extra],
            n_starts=n_starts,
            gtol=gtol,
            distance=_quotient_metric(s.group),
        )
    mean = AmbiguousRotation(polar_projection(res.x), s.group)
    return (mean, res) if full_output else mean


def _checked_mean(sample, **kw):
    mean, res = sample_mean(sample, full_output=True, **kw)
    if not res.unique:
        raise DegenerateSampleError("the sample mean is not unique; refusing to use it")
    return mean, res


def dispersion(sample, embedding=None):
    """Dispersion ``d = rho^2 - |tbar|^2``, in ``[0, rho^2]``."""
    s = as_sample(sample)
    if len(s) == 0:
        raise ValueError("empty sample")
    emb = standard_embedding(s.group) if embedding is None else embedding
    tbar = emb.coords(s.reps).mean(axis=0)
    rho2 = emb.rho2
    return float(np.clip(rho2 - tbar @ tbar, 0.0, rho2))


def summarize(sample, **kw):
    """:class:`SampleSummary` of a sample."""
    s = as_sample(sample)
    emb = standard_embedding(s.group)
    tbar = EmbeddedPoint(emb.coords(s.reps).mean(axis=0), emb)
    mean, res = sample_mean(s, full_output=True, **kw)
    return SampleSummary(len(s), tbar, mean, dispersion(s), s.group, bool(res.unique))


# ---------------------------------------------------------------------------
# Uniformity: S statistic
# ---------------------------------------------------------------------------


def s_statistic(reps, group):
    """``S = (nu / rho^2) n |tbar|^2`` for an array of representatives."""
    group = make_group(group)
    emb = standard_embedding(group)
    tbar = emb.coords(reps).mean(axis=0)
    nu = embedding_dim(group)
    return float(nu / float(rho_squared(group)) * len(reps) * (tbar @ tbar))


def _saddlepoint_sf(x, vals, counts):
    # Lugannani-Rice tail approximation for sum_j w_j chi2_1
    def K(t):
        return -0.5 * np.sum(counts * np.log1p(-2.0 * vals * t))

    def K1(t):
        return np.sum(counts * vals / (1.0 - 2.0 * vals * t))

    def K2(t):
        return np.sum(2.0 * counts * vals**2 / (1.0 - 2.0 * vals * t) ** 2)

    hi = 0.5 / vals.max() * (1.0 - 1e-15)
    lo = -1e6 / vals.max()
    from scipy.optimize import brentq

    t = brentq(lambda t: K1(t) - x, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    r = np.sign(t) * np.sqrt(max(2.0 * (t * x - K(t)), 0.0))
    u = t * np.sqrt(K2(t))
    if abs(r) < 1e-6:
        return float(stats.norm.sf(r))
    return float(stats.norm.sf(r) + stats.norm.pdf(r) * (1.0 / u - 1.0 / r))


def weighted_chi2_sf(x, weights):
    """``P(sum_j w_j Z_j^2 > x)`` for positive weights.

    Equal weights reduce to a scaled chi-square survival function.
    Otherwise Imhof's inversion formula is used, with a saddlepoint
    approximation in the far tail where the oscillatory integral is
    unreliable.
    """
    w = np.asarray(weights, dtype=float)
    if x <= 0:
        return 1.0
    if np.allclose(w, w[0], rtol=1e-8):
        return float(stats.chi2.sf(x / w[0], len(w)))
    vals, counts = np.unique(np.round(w, 12), return_counts=True)
    mean = float(np.sum(counts * vals))
    sd = float(np.sqrt(2.0 * np.sum(counts * vals**2)))
    if x > mean + 8.0 * sd:
        return _saddlepoint_sf(x, vals, counts)

    def phase(u):
        return 0.5 * np.sum(counts * np.arctan(vals * u))

    def envelope(u):
        return u * np.prod((1.0 + (vals * u) ** 2) ** (0.25 * counts))

    # plain quadrature near the origin, Fourier-weighted quadrature on the oscillatory tail
    c = 4.0 * np.pi / x
    head, _ = integrate.quad(lambda u: np.sin(phase(u) - 0.5 * x * u) / envelope(u), 0.0, c,
                             limit=200, epsabs=1e-14)
    # sin(A - xu/2) = sin(A) cos(xu/2) - cos(A) sin(xu/2)
    t1, _ = integrate.quad(lambda u: np.sin(phase(u)) / envelope(u), c, np.inf, weight="cos", wvar=0.5 * x,
                           limlst=100)
    t2, _ = integrate.quad(lambda u: np.cos(phase(u)) / envelope(u), c, np.inf, weight="sin", wvar=0.5 * x,
                           limlst=100)
    val = head + t1 - t2
    return float(np.clip(0.5 + val / np.pi, 0.0, 1.0))


def rayleigh_bingham_components(sample):
    """Rayleigh and planar-tensor parts of the S statistic for cyclic groups.

    For ``C2`` returns ``S_R = 3 n Rbar^2`` (normal ``u0``) and
    ``S_B = (15/2) n (tr(Tbar^2) - 1/3)`` (axis ``+-u1``); these satisfy
    ``n |tbar|^2 = S_R / 3 + (2/15) S_B``.

    For ``C_r`` with ``r >= 3`` returns ``S_R`` and ``S_D``, the S
    statistic of the associated ``D_r`` frames, with
    ``(rho_C^2/nu_C) S = S_R / 3 + (rho_D^2/nu_D) S_D``.

    Returns
    -------
    dict
    """
    s = as_sample(sample)
    g = s.group
    if g.kind != "C" or g.order < 2:
        raise GroupMismatchError("Rayleigh decompositions exist for C_r with r >= 2 only")
    n = len(s)
    u0 = s.reps[:, :, 2]
    rbar2 = float(np.sum(u0.mean(axis=0) ** 2))
    S_R = 3.0 * n * rbar2
    if g.order == 2:
        u1 = s.reps[:, :, 0]
        T = np.einsum("ni,nj->ij", u1, u1) / n
        S_B = 7.5 * n * (np.trace(T @ T) - 1.0 / 3.0)
        return {"S_R": S_R, "S_B": float(S_B)}
    S_D = s_statistic(s.reps, make_group("D", g.order))
    return {"S_R": S_R, "S_D": S_D}


@lru_cache(maxsize=64)
def _haar_null(statistic, group, n, B, seed):
    fn = _NULL_STATISTICS[statistic]

    def one(rng):
        return fn(haar_rotation(rng, n), group)

    out = map_replicates(one, B, seed)
    out.setflags(write=False)
    return out


def uniformity_S(sample, mode="asymptotic", B=DEFAULT_REPLICATES, seed=0):
    """Test of uniformity based on ``S = (nu / rho^2) n |tbar|^2``.

    Parameters
    ----------
    sample : AmbiguousSample or sequence of AmbiguousRotation
    mode : {'asymptotic', 'randomization'}
        ``'asymptotic'`` refers S to its large-sample null law
        ``(nu / rho^2) sum_j lambda_j chi2_1``, with ``lambda_j`` the exact
        Haar covariance spectrum of the embedding; this is ``chi2_nu``
        when the spectrum is isotropic with ``nu`` terms.
        ``'randomization'`` compares S with ``B`` replicates in which
        each ``U_i`` is replaced by ``R_i U_i`` for Haar ``R_i``.
    B, seed : int
        Replicate count and seed for randomization mode.

    Returns
    -------
    TestReport
    """
    s = as_sample(sample)
    g = s.group
    S = s_statistic(s.reps, g)
    nu = embedding_dim(g)
    rho2 = float(rho_squared(g))
    components = {}
    if g.kind == "C" and g.order >= 2:
        components = rayleigh_bingham_components(s)
    if mode == "asymptotic":
        lam = null_spectrum(standard_embedding(g))
        weights = lam * nu / rho2
        p = weighted_chi2_sf(S, weights)
        iso = bool(np.allclose(weights, weights[0], rtol=1e-8))
        ref = {"kind": "chi-square" if iso else "weighted-chi-square", "df": int(len(weights))}
        if not iso:
            ref["weights"] = [float(w) for w in weights]
        return TestReport(S, p, "uniformity-S", ref, components, {"mode": mode, "nu": nu})
    if mode == "randomization":
        null = _haar_null("S", g, len(s), int(B), int(seed))
        p = randomization_pvalue(S, null)
        ref = {"kind": "randomization", "B": int(B), "seed": int(seed)}
        return TestReport(S, p, "uniformity-S", ref, components, {"mode": mode, "nu": nu})
    raise ValueError("mode must be 'asymptotic' or 'randomization'")


# ---------------------------------------------------------------------------
# Uniformity: Gine-type T_G
# ---------------------------------------------------------------------------


def tg_statistic(reps, group):
    """``T_G = -sum_i sum_j sum_R (3 - tr(U_i^T U_j R))^{1/2}``."""
    group = make_group(group)
    reps = np.asarray(reps, dtype=float)
    n = len(reps)
    Q = np.einsum("iab,jac->ijbc", reps, reps).reshape(n * n, 9)
    # tr(Q R) = sum_ab Q_ab R_ba
    Rt = np.swapaxes(group.elements, 1, 2).reshape(len(group), 9)
    tr = Q @ Rt.T
    return float(-np.sum(np.sqrt(np.maximum(3.0 - tr, 0.0))))


_NULL_STATISTICS = {"S": s_statistic, "TG": tg_statistic}


def gine_TG(sample, B=DEFAULT_REPLICATES, seed=0):
    """Randomization test of uniformity based on the Gine-type ``T_G``.

    Consistent against all alternatives. Large values reject.
    """
    s = as_sample(sample)
    T = tg_statistic(s.reps, s.group)
    null = _haar_null("TG", s.group, len(s), int(B), int(seed))
    p = randomization_pvalue(T, null)
    return TestReport(T, p, "uniformity-TG", {"kind": "randomization", "B": int(B), "seed": int(seed)})


# ---------------------------------------------------------------------------
# Location tests
# ---------------------------------------------------------------------------


def one_sample_location_randomization(sample, m0, B=DEFAULT_REPLICATES, seed=0):
    """Randomization test of ``H0: [M] = [M0]`` using ``|tbar - t([M0])|^2``.

    Replicates replace ``[U_i]`` by ``[M0 R_i M0^T U_i]`` with ``R_i``
    uniform on K. Valid when the distribution is symmetric under this
    action, as for the Watson, cardioid and dlvp families.
    """
    s = as_sample(sample)
    if m0.group != s.group:
        raise GroupMismatchError("m0 and sample have different groups")
    emb = standard_embedding(s.group)
    t0 = emb.coords(m0.rep)
    M = m0.rep
    obs_diff = emb.coords(s.reps).mean(axis=0) - t0
    observed = float(obs_diff @ obs_diff)
    conj = M @ s.group.elements @ M.T  # M0 R M0^T for each R in K
    n = len(s)

    def one(rng):
        idx = rng.integers(len(s.group), size=n)
        d = emb.coords(conj[idx] @ s.reps).mean(axis=0) - t0
        return float(d @ d)

    null = map_replicates(one, int(B), seed)
    p = randomization_pvalue(observed, null)
    return TestReport(
        observed, p, "one-sample-randomization", {"kind": "randomization", "B": int(B), "seed": int(seed)},
        config={"assumption": "distribution symmetric under [U] -> [M0 R M0^T U], R in K"},
    )


def _tangent_sample(reps, base_rep, group):
    return tangent_coords_array(reps, base_rep, group, check=True)


def _checked_inverse(cov):
    if np.linalg.matrix_rank(cov, tol=1e-12 * max(np.abs(cov).max(), 1e-300)) < 3 or np.abs(cov).max() == 0:
        raise DegenerateSampleError("sample covariance of tangent coordinates is singular")
    return np.linalg.inv(cov)


def one_sample_hotelling(sample, m0):
    """Hotelling ``T^2`` test of ``H0: [M] = [M0]`` on tangent coordinates at ``[M0]``.

    ``F = (n - 3) T^2 / (3 (n - 1))`` is referred to ``F(3, n - 3)``.
    """
    s = as_sample(sample)
    if m0.group != s.group:
        raise GroupMismatchError("m0 and sample have different groups")
    n = len(s)
    if n < 5:
        raise ValueError("one_sample_hotelling needs n >= 5")
    v = _tangent_sample(s.reps, m0.rep, s.group)
    vbar = v.mean(axis=0)
    Sinv = _checked_inverse(np.cov(v, rowvar=False))
    T2 = float(n * vbar @ Sinv @ vbar)
    F = (n - 3) / (3.0 * (n - 1)) * T2
    p = float(stats.f.sf(F, 3, n - 3))
    return TestReport(T2, p, "one-sample-hotelling", {"kind": "F", "df1": 3, "df2": n - 3}, {"F": F})


def _pair_of_samples(sample1, sample2):
    a, b = as_sample(sample1), as_sample(sample2)
    if a.group != b.group:
        raise GroupMismatchError(f"group mismatch: {a.group} vs {b.group}")
    return a, b


def two_sample_test(sample1, sample2, B=DEFAULT_REPLICATES, seed=0):
    """Permutation test of equal means using ``|tbar_1 - tbar_2|^2``."""
    a, b = _pair_of_samples(sample1, sample2)
    n, m = len(a), len(b)
    if n < 2 or m < 2:
        raise ValueError("two_sample_test needs n, m >= 2")
    emb = standard_embedding(a.group)
    t = emb.coords(np.concatenate([a.reps, b.reps]))
    total = t.sum(axis=0)

    def stat(first):
        s1 = t[first].sum(axis=0)
        d = s1 / n - (total - s1) / m
        return float(d @ d)

    observed = stat(np.arange(n))

    def one(rng):
        return stat(rng.permutation(n + m)[:n])

    null = map_replicates(one, int(B), seed)
    p = randomization_pvalue(observed, null)
    return TestReport(observed, p, "two-sample-permutation", {"kind": "permutation", "B": int(B), "seed": int(seed)})


def two_sample_hotelling(sample1, sample2, **mean_kw):
    """Hotelling two-sample ``T^2`` on tangent coordinates at the pooled sample mean.

    ``F = (n + m - 4) T^2 / (3 (n + m - 2))`` is referred to ``F(3, n + m - 4)``.
    """
    a, b = _pair_of_samples(sample1, sample2)
    n, m = len(a), len(b)
    if n < 5 or m < 5:
        raise ValueError("two_sample_hotelling needs n, m >= 5")
    pooled = AmbiguousSample(np.concatenate([a.reps, b.reps]), a.group)
    mean, res = _checked_mean(pooled, **mean_kw)
    v1 = _tangent_sample(a.reps, mean.rep, a.group)
    v2 = _tangent_sample(b.reps, mean.rep, a.group)
    d = v1.mean(axis=0) - v2.mean(axis=0)
    Sp = ((n - 1) * np.cov(v1, rowvar=False) + (m - 1) * np.cov(v2, rowvar=False)) / (n + m - 2)
    T2 = float(n * m / (n + m) * d @ _checked_inverse(Sp) @ d)
    F = (n + m - 4) / (3.0 * (n + m - 2)) * T2
    p = float(stats.f.sf(F, 3, n + m - 4))
    return TestReport(T2, p, "two-sample-hotelling", {"kind": "F", "df1": 3, "df2": n + m - 4}, {"F": F},
                      config=dict(res.config))


# ---------------------------------------------------------------------------
# Independence
# ---------------------------------------------------------------------------


def _gram(reps, emb):
    if isinstance(emb, AveragedEmbedding):
        return emb.gram(reps)
    t = emb.coords(reps)
    return t @ t.T


def independence_test(sample1, sample2, B=DEFAULT_REPLICATES, seed=0, band_limit=4):
    """Randomization test of independence of paired ambiguous rotations.

    The statistic is ``sum_ij <t1(U_i), t1(U_j)> <t2(V_i), t2(V_j)>``;
    its null distribution is generated by permuting the pairing.
    Standard embeddings are used when both groups agree and averaged
    embeddings otherwise.

    Parameters
    ----------
    sample1, sample2 : samples of equal length ``n >= 3``
    """
    a, b = as_sample(sample1), as_sample(sample2)
    n = len(a)
    if n != len(b):
        raise ValueError("paired samples differ in length")
    if n < 3:
        raise ValueError("independence_test needs n >= 3")
    if a.group == b.group:
        e1 = e2 = standard_embedding(a.group)
        cfg = {"embedding": "standard"}
    else:
        e1, e2 = AveragedEmbedding(a.group, band_limit), AveragedEmbedding(b.group, band_limit)
        cfg = {"embedding": "averaged", "L": int(band_limit)}
    G1 = _gram(a.reps, e1)
    G2 = _gram(b.reps, e2)
    observed = float(np.sum(G1 * G2))

    def one(rng):
        p = rng.permutation(n)
        return float(np.sum(G1 * G2[np.ix_(p, p)]))

    null = map_replicates(one, int(B), seed)
    p = randomization_pvalue(observed, null)
    return TestReport(observed, p, "independence-permutation", {"kind": "permutation", "B": int(B), "seed": int(seed)},
                      config=cfg)
