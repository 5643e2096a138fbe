"""Saturated passivity-based control workbench.

Synthesis of bounded (tanh-shaped) set-point regulators for input-affine,
mechanical, and mixed-potential circuit models; numerical verification of
their standing hypotheses; and closed-loop fixed-step simulation.
"""

from .controllers import (
    DynamicExtensionController,
    FilteredController,
    FullyActuatedController,
    NaturalDampingController,
    OutputDampingController,
    SaturationShape,
    SteadyStateFilter,
    sat_potential,
    sat_potential_grad,
    saturation_bounds,
)
from .models import (
    BraytonMoserModel,
    InputAffineModel,
    MechanicalModel,
    bm_descriptor,
    bm_integrability_residual,
    bm_storage,
    bm_to_affine,
    equilibrium_residual,
    holding_input,
    mech_to_affine,
    passive_output,
)
from .numerics import (
    RawTrace,
    Spectrum,
    eigenvalues,
    fd_gradient,
    fd_hessian,
    integrate_fixed,
    is_positive_definite,
)
from .simulation import (
    ClosedLoop,
    Metrics,
    SimulationTrace,
    assemble,
    compute_metrics,
    metric_oscillations,
    metric_saturation_intervals,
    metric_settling_time,
    metric_steady_state_error,
    simulate,
)
from .verification import (
    CheckResult,
    SampleSpec,
    check_closed_loop_hessian,
    check_cyclo_passivity,
    check_decoupled_damping,
    check_equilibrium_gradient,
    check_output_integral,
    check_shaped_hessian,
    check_virtual_damping_psd,
    dissipation_obstacle_flag,
    linearization_stability,
    lyapunov_monitor,
    suggest_kc,
)

__version__ = "0.1.0"
