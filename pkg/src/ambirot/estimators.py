"""scikit-learn style wrappers.

Inputs ``X`` are rotations in any form accepted by
:func:`~ambirot.validation.check_rotations`: arrays of shape
``(n, 3, 3)``, ``(n, 9)`` or ``(n, 4)``, or samples of ambiguous
rotations.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._config import DEFAULT_BAND_LIMIT, DEFAULT_GRID_SIZE
from .distributions import (
    DistributionSpec,
    cardioid_moment_estimates,
    fit_watson,
    log_density,
    sample,
)
from .embeddings import AveragedEmbedding, standard_embedding
from .inference import dispersion, sample_mean
from .regression import correlation, fit_regression
from .rotations import AmbiguousSample
from .validation import check_group, check_rotations

__all__ = ["FrameEmbedding", "FrameMean", "FrameWatson", "FrameCardioid", "FrameRegression"]


def _sample(X, group):
    return AmbiguousSample(check_rotations(X), check_group(group))


class FrameEmbedding(TransformerMixin, BaseEstimator):
    """Embed ambiguous rotations in a Euclidean space.

    Parameters
    ----------
    group : str
        Symmetry group tag, e.g. ``'C2'`` or ``'O'``.
    band_limit : int or None
        ``None`` uses the standard embedding of the group; an integer
        selects the averaged embedding with that band limit.
    """

    def __init__(self, group="C1", band_limit=None):
        self.group = group
        self.band_limit = band_limit

    def fit(self, X=None, y=None):
        g = check_group(self.group)
        self.embedding_ = standard_embedding(g) if self.band_limit is None else AveragedEmbedding(g, self.band_limit)
        self.n_features_out_ = int(self.embedding_.coords(np.eye(3)).shape[-1])
        return self

    def transform(self, X):
        """Embedding coordinates, shape ``(n, dim)``."""
        check_is_fitted(self, "embedding_")
        return self.embedding_.coords(check_rotations(X))


class FrameMean(BaseEstimator):
    """Sample mean and dispersion.

    Attributes
    ----------
    mean_ : AmbiguousRotation
    dispersion_ : float
    unique_ : bool
    """

    def __init__(self, group="C1", grid_size=DEFAULT_GRID_SIZE, n_starts=8):
        self.group = group
        self.grid_size = grid_size
        self.n_starts = n_starts

    def fit(self, X, y=None):
        s = _sample(X, self.group)
        self.mean_, res = sample_mean(s, grid_size=self.grid_size, n_starts=self.n_starts, full_output=True)
        self.unique_ = bool(res.unique)
        self.dispersion_ = dispersion(s)
        return self

    def score(self, X, y=None):
        """Mean inner product of the data with the fitted mean."""
        check_is_fitted(self, "mean_")
        s = _sample(X, self.group)
        emb = standard_embedding(s.group)
        return float(np.mean(emb.inner_reps(self.mean_.rep, s.reps)))


class FrameWatson(BaseEstimator):
    """Watson distribution fitted by maximum likelihood.

    Attributes
    ----------
    mode_ : AmbiguousRotation
    kappa_ : float
    """

    def __init__(self, group="C1", grid_size=DEFAULT_GRID_SIZE):
        self.group = group
        self.grid_size = grid_size

    def fit(self, X, y=None):
        fit = fit_watson(_sample(X, self.group), grid_size=self.grid_size)
        self.mode_, self.kappa_ = fit.mode, fit.kappa
        return self

    def _spec(self):
        check_is_fitted(self, "mode_")
        return DistributionSpec("watson", self.mode_, self.kappa_)

    def score_samples(self, X):
        """Log density with respect to the uniform distribution."""
        return np.atleast_1d(log_density(_sample(X, self.group), self._spec()))

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=None):
        """Representatives of draws from the fitted distribution, shape ``(n, 3, 3)``."""
        return sample(self._spec(), n_samples, random_state).reps


class FrameCardioid(BaseEstimator):
    """Cardioid distribution fitted by moments.

    Attributes
    ----------
    mode_ : AmbiguousRotation
    kappa_ : float
    clamped_ : bool
        Whether the moment estimate fell outside ``[0, rho^-2]``.
    """

    def __init__(self, group="C1", grid_size=DEFAULT_GRID_SIZE):
        self.group = group
        self.grid_size = grid_size

    def fit(self, X, y=None):
        fit = cardioid_moment_estimates(_sample(X, self.group), grid_size=self.grid_size)
        self.mode_, self.kappa_, self.clamped_ = fit.mode, fit.kappa, fit.clamped
        return self

    def _spec(self):
        check_is_fitted(self, "mode_")
        return DistributionSpec("cardioid", self.mode_, self.kappa_)

    def score_samples(self, X):
        return np.atleast_1d(log_density(_sample(X, self.group), self._spec()))

    def sample(self, n_samples=1, random_state=None):
        return sample(self._spec(), n_samples, random_state).reps


class FrameRegression(BaseEstimator):
    """Regression ``[V] ~ [A U]`` of ambiguous rotations.

    Parameters
    ----------
    group_in, group_out : str
        Groups of the explanatory and response rotations.
    band_limit : int
        Averaged-embedding band limit used when the groups differ.

    Attributes
    ----------
    a_hat_ : ndarray, shape (3, 3)
    kappa_ : float
    r_ : float
    fit_ : RegressionFit
    """

    def __init__(self, group_in="C1", group_out="C1", band_limit=DEFAULT_BAND_LIMIT, grid_size=DEFAULT_GRID_SIZE):
        self.group_in = group_in
        self.group_out = group_out
        self.band_limit = band_limit
        self.grid_size = grid_size

    def fit(self, X, y):
        pairs = (_sample(X, self.group_in), _sample(y, self.group_out))
        self.fit_ = fit_regression(pairs, band_limit=self.band_limit, grid_size=self.grid_size)
        self.a_hat_, self.kappa_, self.r_ = self.fit_.a_hat, self.fit_.kappa_hat, self.fit_.r
        return self

    def predict(self, X):
        """Representatives ``A_hat U_i`` of the predicted classes, shape ``(n, 3, 3)``."""
        check_is_fitted(self, "a_hat_")
        return self.a_hat_ @ check_rotations(X)

    def score(self, X, y):
        """Correlation ``r`` of new pairs at the fitted link rotation."""
        check_is_fitted(self, "a_hat_")
        pairs = (_sample(X, self.group_in), _sample(y, self.group_out))
        return correlation(pairs, self.fit_)
