"""Coupled fractional sums modulo one: simulation, limit laws and verification tools."""

__version__ = "0.1.0"

from .core import ceil_int, floor_int, fractional_part, shifted_mean
from .errors import (BatchFailure, ContractError, DegeneracyError, DomainError, ModoneError,
                     QuadratureError, RangeError, SingularityError)
from .model import (IndexSchedule, JointLaw, ModelSpec, PhiSpec, Verdict, beta_indices,
                    check_integrability, phi_derivative, phi_eval)
from .limit_law import (GaussianLaw, LimitLaw, build_A1, gaussian_density, limit_covariance_gamma,
                        sigma_T_sq, theta)
from .fracsum import (BatchResult, FracVectorSample, sample_batch, sample_standardized,
                      sample_vector)
from .stattests import (TestReport, grid_chi_square, histogram_tv, ks_statistic, weyl_sum)
from .density import (DensityScene, limit_density, pointwise_convergence_sweep,
                      transformed_density)
from .benford import (MantissaSample, ProductModel, adapted_base, benford_cdf, mantissa,
                      mantissa_experiment)
from .resampling import (ParticleSystem, conditional_expectation, psi_k,
                         second_moment_identity_check, stratified_resample,
                         variance_decomposition_estimate)
