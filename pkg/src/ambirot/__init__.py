"""Statistics for ambiguous rotations: orientation data on SO(3)/K.

The package covers symmetric-tensor embeddings of SO(3)/K for the
finite rotation groups, tests of uniformity, location and independence,
Watson, dlvp and cardioid distributions, regression of one ambiguous
rotation on another, and misorientation.
"""

from .distributions import (
    DistributionSpec,
    NormalizingConstant,
    cardioid_moment_estimates,
    fit_normalizer,
    fit_watson,
    high_conc_sigma,
    laplace_sigma,
    log_density,
    sample,
    verify_sigma_mc,
)
from .embeddings import (
    AveragedEmbedding,
    EmbeddedPoint,
    Embedding,
    embed,
    embedding_dim,
    frame_inner,
    haar_covariance,
    inner,
    mean_embedding,
    rho_squared,
    standard_embedding,
)
from .estimators import FrameCardioid, FrameEmbedding, FrameMean, FrameRegression, FrameWatson
from .exceptions import AmbirotError, DegenerateSampleError, GroupMismatchError, OutsideNeighbourhoodError
from .inference import (
    SampleSummary,
    TestReport,
    dispersion,
    gine_TG,
    independence_test,
    one_sample_hotelling,
    one_sample_location_randomization,
    sample_mean,
    summarize,
    two_sample_hotelling,
    two_sample_test,
    uniformity_S,
)
from .regression import (
    Misorientation,
    RegressionFit,
    correlation,
    fit_regression,
    mean_misorientation,
    mean_misorientation_alt,
    misorientation,
    residual_chi2_inference,
)
from .rotations import (
    AmbiguousRotation,
    AmbiguousSample,
    KFrame,
    SymmetryGroup,
    as_sample,
    exp_rotation,
    frame_of,
    haar_rotation,
    log_rotation,
    make_group,
    matrix_to_quaternion,
    quaternion_to_matrix,
    quotient_distance,
    tangent_coords,
)

__all__ = [
    "AmbiguousRotation",
    "AmbiguousSample",
    "AmbirotError",
    "as_sample",
    "AveragedEmbedding",
    "cardioid_moment_estimates",
    "correlation",
    "DegenerateSampleError",
    "dispersion",
    "DistributionSpec",
    "embed",
    "EmbeddedPoint",
    "Embedding",
    "embedding_dim",
    "exp_rotation",
    "fit_normalizer",
    "fit_regression",
    "fit_watson",
    "frame_inner",
    "frame_of",
    "FrameCardioid",
    "FrameEmbedding",
    "FrameMean",
    "FrameRegression",
    "FrameWatson",
    "gine_TG",
    "GroupMismatchError",
    "haar_covariance",
    "haar_rotation",
    "high_conc_sigma",
    "independence_test",
    "inner",
    "KFrame",
    "laplace_sigma",
    "log_density",
    "log_rotation",
    "make_group",
    "matrix_to_quaternion",
    "mean_embedding",
    "mean_misorientation",
    "mean_misorientation_alt",
    "Misorientation",
    "misorientation",
    "NormalizingConstant",
    "one_sample_hotelling",
    "one_sample_location_randomization",
    "OutsideNeighbourhoodError",
    "quaternion_to_matrix",
    "quotient_distance",
    "RegressionFit",
    "residual_chi2_inference",
    "rho_squared",
    "sample",
    "sample_mean",
    "SampleSummary",
    "standard_embedding",
    "summarize",
    "SymmetryGroup",
    "tangent_coords",
    "TestReport",
    "two_sample_hotelling",
    "two_sample_test",
    "uniformity_S",
    "verify_sigma_mc",
]

__version__ = "0.1.0"
