"""Cox (conditional Poisson) processes: simulation, arrival densities, martingale
and change-of-measure checks, and reference-probability filtering."""

from .densities import DensityKernel, chou_meyer_intensity, phi, psi
from .errors import (
    ConfigError,
    ConsistencyError,
    CoxkitError,
    DegenerateEstimateError,
    DomainError,
    RefinementError,
)
from .filtering import FilterEstimate, fn_intensity, grid_oracle, ks_filter, laplace_filter
from .girsanov import (
    ConstantMultiplier,
    InverseMultiplier,
    TableMultiplier,
    WeightedSample,
    expectation_of_z_test,
    induction_identity_test,
    reweighted_law_test,
    stochastic_exponential,
)
from .intensity import (
    CompoundPoissonPrior,
    DiscreteLaw,
    ExponentialLaw,
    FixedPrior,
    GammaLaw,
    IntensityPath,
    PointMass,
    RandomLevelPrior,
    UniformLaw,
    cumulative,
    inverse_cumulative,
    sample_prior,
)
from .simulation import PointPattern, increment_pmf, sample_cox_sequential, sample_cox_timechange
from .watanabe import compensate, martingale_test, predictable_integral_test

__version__ = "0.1.0"
