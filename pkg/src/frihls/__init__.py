"""Fractional integration, heat semigroups and martingale transforms.

The most used names are re-exported here; the submodules hold the rest.
"""

from .errors import (AccuracyError, BudgetError, ConditioningError, CoverageError, DomainError, FrihlsError,
                     PreconditionError, ScalingError, SingularityError)
from .fractional import (FractionalParams, MellinQuadrature, deterministic_projection, fourier_fractional,
                         gaussian_fractional_closed_form, hls_majorization, mellin_fractional_integral,
                         riesz_convolution_oracle, sobolev_check)
from .gundy import gundy_varopoulos_pairing, pairing_exact
from .hls import HlsReport, SweepConfig, dilation_invariance_check, hls_ratio, sweep
from .kernels import (HeatKernelSpec, RieszKernelSpec, grad_bound_margin, grad_heat_kernel, heat_kernel,
                      poisson_kernel, riesz_kernel)
from .martingale import (EnsembleConfig, burkholder_gundy_ratio, conditional_projection,
                         differential_subordination_check, doob_check, martingale_transform, sample_paths)
from .mixture import GaussianMixture
from .regression import NadarayaWatson
from .semigroup import (GridField, apply_heat, apply_heat_grid, maximal_function, maximal_norm_ratio,
                        ultracontractivity_constant)
from .subordination import (StableSpec, estimate_fit, fractional_laplacian_apply, laplace_transform,
                            stable_density, subordinate_kernel)

__version__ = "0.1.0"
