"""Boundary-integral masses and exterior mode analysis for ALF-type metrics.

Subpackages by concern:

* :mod:`alfmass.geometry` -- model metrics on exterior circle fibrations,
  adapted frames, connection coefficients, the model Laplacian, and
  finite-difference curvature of coordinate charts;
* :mod:`alfmass.zoo` -- closed-form families (flat, Schwarzschild,
  Reissner-Nordstrom, Taub-NUT) in one or more charts;
* :mod:`alfmass.mass` -- mass integrands, product quadrature on boundary
  level sets, power-law extrapolation, the mass quadratic form;
* :mod:`alfmass.modes` -- separated radial analysis: indicial roots,
  explicit right inverses, weighted norms, Hardy ratio, decay jumps;
* :mod:`alfmass.cli` -- the ``alfmass`` command-line front end.
"""

from .errors import (
    AlfMassError,
    ConfigError,
    DecayError,
    DegenerateInputError,
    DomainError,
    IllPosedWindowError,
    NonConvergenceError,
    NumericError,
    ResolutionError,
    SamplingError,
    UnsupportedModelError,
)
from .geometry import (
    CoordinateChart,
    FramePoint,
    MetricFamily,
    ModelMetric,
    Monopole,
    RicciResult,
    TrivialFlat,
    covariant_derivative_metric,
    frame_connection_coeffs,
    model_laplacian,
    ricci_fd,
)
from .mass import (
    InvarianceResult,
    MassQuadraticForm,
    MassReport,
    QuadratureSpec,
    RadiusSchedule,
    boundary_integral,
    chart_invariance_check,
    dirac_integrand_radial,
    gb_integrand_radial,
    mass_dirac,
    mass_gb,
    mass_quadratic_form,
    omega_m,
)
from .modes import (
    DecayExpansion,
    IndicialData,
    RadialGrid,
    RadialProfile,
    critical_set,
    decay_jump_expand,
    default_grid,
    fiber_mean,
    fiber_project,
    green_mid,
    green_outer,
    hardy_ratio,
    indicial_data,
    indicial_roots,
    is_critical,
    radial_apply,
    solve_k_mode,
    sphere_eigenvalue,
    weighted_norm,
)
from .zoo import (
    AREA_RADIAL,
    ISOTROPIC,
    ReissnerNordstromParams,
    SchwarzschildParams,
    TaubNutParams,
    build_family,
    flat_family,
    isotropic_radius,
    rn_family,
    schwarzschild_family,
    taubnut_family,
    warp_profile,
)

__version__ = "0.1.0"
