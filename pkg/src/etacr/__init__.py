"""Communication-rate analysis for event-triggered estimation loops."""

from .acr import (
    AcrSeries,
    JuryReport,
    characteristic_polynomial,
    companion_matrix,
    is_marginal,
    jury_stable,
    recursion_limit,
    recursive_acr,
    stationary_acr,
)
from .coeffs import (
    METHODS,
    CoeffSet,
    coefficients,
    error_densities,
    first_step_coefficient,
    open_loop_coefficients,
    open_loop_variance,
    particle_coefficients,
    quadrature_coefficients,
)
from .dist import (
    GridOptions,
    GridPdf,
    Moments,
    ParticleSet,
    SystemSpec,
    closed_form_e2_pdf,
    integrate,
    kde,
    kde_mass,
    make_gaussian,
    moments,
    propagate,
    truncate,
)
from .errors import AcrError, DegenerateTruncation, InvalidGrid, InvalidParameter
from .platoon import (
    PlatoonConfig,
    PlatoonResult,
    SweepRow,
    control_law,
    leader_ref,
    run_platoon,
    threshold_sweep,
)
from .sim import (
    McSummary,
    TrialTrace,
    conditional_frequencies,
    monte_carlo_acr,
    simulate_trial,
)

__version__ = "0.1.0"
