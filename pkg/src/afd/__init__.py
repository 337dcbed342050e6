"""Approximate functional differencing for discrete-outcome panel models.

Builds posterior predictive matrices over finite outcome spaces, iterates
score bias corrections through their spectra, solves for pseudo-true values
and method-of-moments estimates with sandwich variances, and provides the
Monte Carlo and bias-rate harnesses plus average-effect estimating
functions.
"""

__version__ = "1.0.0"

from .distributions import ErrorDistribution, error_distribution
from .exceptions import (AfdError, BracketError, ConfigError, DiagnosticsError,
                         DomainError, NumericalError, PositivityError,
                         SingularJacobianError)
from .model import (BinarySequenceModel, OutcomeModel, TwoBlockBinomialModel,
                    counts_from_binary, two_block_covariates)
from .prior import (AlphaGrid, NormalLaw, PointLaw, UniformLaw, expect,
                    heterogeneity_law, inverse_cdf_grid, point_mass,
                    uniform_grid)
from .scores import (KernelBuilder, MomentKernel, alternative_corrected_score,
                     build_q_tilde, conditional_bias, corrected_score,
                     integrated_score, limit_score, logit_exact_moment,
                     mle_alpha, profile_score, soft_threshold_score, stem_score)
from .spectral import (SpectralQ, build_q, eigen_report, polynomial_apply,
                       prior_predictive, stem_apply, zero_eig_count)
from .estimation import (EstimationReport, PanelData, TruthSpec,
                         asymptotic_variance, confidence_interval,
                         fixed_design, mm_estimate, population_moment,
                         pseudo_true, pseudo_true_table, rmse_coverage,
                         sample_moment, sandwich_variance)
from .effects import (EffectSpec, average_partial_effect,
                      baseline_effect_kernel, effect_kernel_inf,
                      effect_kernel_q, estimator_effect, population_effect)
from .simulation import (McConfig, McSummary, RateRow, generate_panel,
                         rate_bias, rate_table, run_monte_carlo)

__all__ = [name for name in dir() if not name.startswith("_")]
