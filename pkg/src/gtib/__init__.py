"""Reconstruction of Zakharov-Shabat potentials from spectral data.

The package solves the coupled Gelfand-Levitan-Marchenko integral equations
by a block-Toeplitz inner-bordering recursion that can start at an arbitrary
point, with stability-zone cuts for widely separated solitons and an
extended-window variant for starts where the signal is not small.
"""

from .cutter import (CutPlan, Method, StabilityZone, find_centers, plan,
                     recover, recover_single_direction, recover_with_sides)
from .errors import (ConfigError, CutRequiredError, GtibError,
                     InstabilityError, KernelRangeError, PlanningError,
                     RecoveryError, SpectralDataError)
from .glme import (Direction, GlmeSolution, GlmeSystem, MarchResult,
                   MarchState, StopReason, assemble, extend_start, march,
                   solve, start_march)
from .metrics import (ErrorReport, convergence_sweep, error_report,
                      fit_slope, pointwise_error, rmse)
from .oracles import (ChirpedSechParams, Dispersion, SolitonParams,
                      chirped_sech, darboux_multisoliton, dense_solve,
                      exact_soliton, forward_scatter,
                      multi_soliton_spectral_data, soliton_spectral_data)
from .signals import RecoveredSignal, TimeGrid, uniform_grid
from .spectral import (ContinuousSpectrum, DiscreteEigenvalue, KernelTable,
                       Side, SignMode, SpectralData, convert_side,
                       kernel_left, kernel_right, mirror_to_left,
                       restrict_solitons, synthesize_kernel)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
