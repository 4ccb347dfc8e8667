"""Separated exterior Laplace analysis on a log-radial grid.

Separating the model Laplacian on the exterior of the unit ball in R^m
(times a circle of length L) by sphere harmonics and fiber Fourier modes
leaves the radial operators

    P_{j,k} u = -u'' - (m-1)/r u' + lambda_j / r^2 u + kappa^2 u,
    lambda_j = j (m - 2 + j),   kappa = 2 pi k / L.

For k = 0 the homogeneous solutions are r^{nu} with indicial roots
``nu_j^+ = j`` and ``nu_j^- = 2 - m - j``; the weighted-space theory
degenerates at the critical weights ``m/2 + j`` and ``2 - m/2 - j``.  This
module provides the radial operators, explicit antiderivative-based right
inverses for k = 0, a banded solver for k >= 1, weighted norms and a
membership classifier, a discrete Hardy-ratio check, and the extraction of
leading harmonic coefficients from a multimode field (the decay-jump
expansion).

Everything lives on grids uniform in s = log r, where the k = 0 operator
becomes ``e^{-2s} (-v'' - (m-2) v' + lambda_j v)`` and dyadic annuli are
equidistributed.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.linalg import solve_banded

from .errors import (
    DecayError,
    DegenerateInputError,
    DomainError,
    IllPosedWindowError,
    NumericError,
    ResolutionError,
    SamplingError,
)
from .geometry import FramePoint, ModelMetric, TrivialFlat, model_laplacian
from .mass import boundary_grid, QuadratureSpec

__all__ = [
    "IndicialData",
    "indicial_data",
    "sphere_eigenvalue",
    "indicial_roots",
    "critical_set",
    "is_critical",
    "RadialGrid",
    "RadialProfile",
    "default_grid",
    "fiber_project",
    "fiber_mean",
    "zonal_values",
    "radial_apply",
    "green_mid",
    "green_outer",
    "solve_k_mode",
    "weighted_norm",
    "annulus_partial_sums",
    "classify_membership",
    "hardy_ratio",
    "DecayExpansion",
    "decay_jump_expand",
]


# ---------------------------------------------------------------------------
# indicial data
# ---------------------------------------------------------------------------

def sphere_eigenvalue(j: int, m: int) -> float:
    """Eigenvalue j (m - 2 + j) of the sphere Laplacian on S^{m-1}."""
    if j < 0 or m < 3:
        raise DomainError(f"need j >= 0 and m >= 3, got j={j}, m={m}")
    return float(j * (m - 2 + j))


def indicial_roots(j: int, m: int):
    """Exponents (j, 2 - m - j) making r^nu times a j-harmonic harmonic."""
    if j < 0 or m < 3:
        raise DomainError(f"need j >= 0 and m >= 3, got j={j}, m={m}")
    return float(j), float(2 - m - j)


@dataclass(frozen=True)
class IndicialData:
    """Spectral data of one sphere mode: eigenvalue, weight, indicial roots."""

    j: int
    lambda_j: float
    delta_j: float
    nu_plus: float
    nu_minus: float

    @property
    def critical_weights(self):
        return (self.delta_j, 2.0 - self.delta_j)


def indicial_data(j: int, m: int) -> IndicialData:
    nu_p, nu_m = indicial_roots(j, m)
    return IndicialData(
        j=j,
        lambda_j=sphere_eigenvalue(j, m),
        delta_j=m / 2.0 + j,
        nu_plus=nu_p,
        nu_minus=nu_m,
    )


def critical_set(m: int, j_max: int):
    """Sorted critical weights {m/2 + j} union {2 - m/2 - j} for j <= j_max."""
    if j_max < 0:
        raise DomainError(f"j_max must be >= 0, got {j_max}")
    vals = set()
    for j in range(j_max + 1):
        vals.add(m / 2.0 + j)
        vals.add(2.0 - m / 2.0 - j)
    return sorted(vals)


def is_critical(delta: float, m: int, tol: float = 1e-9) -> bool:
    """Whether delta is within tol of a critical weight."""
    j_max = int(abs(delta) + m / 2.0 + 2)
    return any(abs(delta - c) < tol for c in critical_set(m, j_max))


# ---------------------------------------------------------------------------
# grids and profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid in s = log r."""

    s_min: float
    s_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 64:
            raise DomainError(f"radial grid needs at least 64 points, got {self.n_points}")
        if not (self.s_max > self.s_min):
            raise DomainError("s_max must exceed s_min")

    @property
    def s(self):
        return np.linspace(self.s_min, self.s_max, self.n_points)

    @property
    def r(self):
        return np.exp(self.s)

    @property
    def spacing(self) -> float:
        return (self.s_max - self.s_min) / (self.n_points - 1)


def default_grid(n_points: int = 1024) -> RadialGrid:
    return RadialGrid(math.log(2.0), math.log(2048.0), n_points)


@dataclass
class RadialProfile:
    """Mode amplitude sampled on a log-radial grid."""

    grid: RadialGrid
    values: np.ndarray
    mode: tuple = (0, 0)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_points,):
            raise DomainError("profile values must match the grid size")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("profile values must be finite")
        if self.mode[0] < 0 or self.mode[1] < 0:
            raise DomainError("mode indices must be nonnegative")


# ---------------------------------------------------------------------------
# fiber Fourier projection
# ---------------------------------------------------------------------------

def fiber_project(samples, k: int):
    """Cosine/sine amplitude of fiber wavenumber k from equispaced samples.

    Samples cover one full period.  Needs at least 4k + 4 of them; fewer
    would alias the requested mode.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if k < 0:
        raise DomainError(f"fiber wavenumber must be >= 0, got {k}")
    if n < 4 * k + 4:
        raise SamplingError(
            f"wavenumber {k} needs at least {4 * k + 4} fiber samples, got {n}"
        )
    if k == 0:
        return float(samples.mean()), 0.0
    phase = 2.0 * math.pi * k * np.arange(n) / n
    return (
        float(2.0 / n * (samples @ np.cos(phase))),
        float(2.0 / n * (samples @ np.sin(phase))),
    )


def fiber_mean(samples) -> float:
    """Average along the fiber (the zero fiber-Fourier mode)."""
    return fiber_project(samples, 0)[0]


# ---------------------------------------------------------------------------
# zonal sphere harmonics (Gegenbauer recurrence)
# ---------------------------------------------------------------------------

def zonal_values(j: int, m: int, cos_theta):
    """Axially symmetric sphere harmonic of degree j on S^{m-1}.

    Gegenbauer polynomial C_j^{(m-2)/2}(cos theta) by the three-term
    recurrence; eigenfunction of the sphere Laplacian with eigenvalue
    j (m - 2 + j).  (Legendre polynomials when m = 3.)
    """
    x = np.asarray(cos_theta, dtype=float)
    alpha = (m - 2) / 2.0
    if j == 0:
        return np.ones_like(x)
    prev = np.ones_like(x)
    cur = 2.0 * alpha * x
    for n in range(1, j):
        nxt = (2.0 * (n + alpha) * x * cur - (n + 2.0 * alpha - 1.0) * prev) / (n + 1.0)
        prev, cur = cur, nxt
    return cur


# ---------------------------------------------------------------------------
# finite differences on the log grid (fourth order)
# ---------------------------------------------------------------------------

def _fd_weights(offsets, der):
    """Weights w with sum_j w_j f(x + o_j h) = h^der f^(der)(x) + O(h^{p})."""
    offsets = np.asarray(offsets, dtype=float)
    k = offsets.size
    rhs = np.zeros(k)
    rhs[der] = math.factorial(der)
    mat = np.vander(offsets, k, increasing=True).T
    return np.linalg.solve(mat, rhs)


def _grid_derivative(values, h, der):
    """Fourth-order derivative of grid data; one-sided stencils at the edges."""
    n = values.size
    out = np.zeros(n)
    w_c = _fd_weights(np.arange(-2, 3), der)
    core = np.zeros(n - 4)
    for k in range(5):
        core += w_c[k] * values[k : k + n - 4]
    out[2 : n - 2] = core
    edge = 6 if der == 2 else 5
    for i in (0, 1):
        w = _fd_weights(np.arange(edge) - i, der)
        out[i] = w @ values[:edge]
    for i in (n - 2, n - 1):
        w = _fd_weights(np.arange(n - edge, n) - i, der)
        out[i] = w @ values[n - edge :]
    return out / h**der


# ---------------------------------------------------------------------------
# radial operator and its right inverses
# ---------------------------------------------------------------------------

def _kappa(k, fiber_length):
    if k == 0:
        return 0.0
    if fiber_length is None or not (fiber_length > 0):
        raise DomainError("fiber modes k >= 1 need a positive fiber length")
    return 2.0 * math.pi * k / fiber_length


def radial_apply(profile: RadialProfile, m: int, j=None, k=None, fiber_length=None):
    """Apply -d_rr - (m-1)/r d_r + lambda_j/r^2 + kappa^2 to a profile.

    Realized in log-radial coordinates with fourth-order stencils
    (one-sided at the grid ends).  Mode indices default to the profile's.
    """
    grid = profile.grid
    if grid.spacing > 0.05:
        raise ResolutionError(
            f"grid spacing {grid.spacing:.3g} too coarse for the stencil order"
        )
    j = profile.mode[0] if j is None else j
    k = profile.mode[1] if k is None else k
    lam = sphere_eigenvalue(j, m)
    kap = _kappa(k, fiber_length)
    s = grid.s
    v = profile.values
    h = grid.spacing
    d1 = _grid_derivative(v, h, 1)
    d2 = _grid_derivative(v, h, 2)
    out = np.exp(-2.0 * s) * (-d2 - (m - 2) * d1 + lam * v) + kap**2 * v
    return RadialProfile(grid, out, mode=(j, k))


def _window_weights(offsets):
    """Integral over [0, 1] of the Lagrange interpolant through the offsets."""
    offsets = np.asarray(offsets, dtype=float)
    k = offsets.size
    vand = np.vander(offsets, k, increasing=True).T
    moments = 1.0 / np.arange(1, k + 1)
    return np.linalg.solve(vand, moments)


def _cumulative(q, h):
    """Cumulative integral by quartic sliding-window quadrature.

    Each subinterval integral uses the degree-4 interpolant through the
    five nearest nodes (centered in the interior).  Unlike cumulative
    Simpson, the quadrature error varies smoothly from node to node, so
    differentiating the antiderivative afterwards does not lose orders.
    """
    n = q.size
    if n < 5:
        return cumulative_simpson(q, dx=h, initial=0.0)
    inc = np.empty(n - 1)
    w_int = _window_weights(np.arange(-2.0, 3.0))
    core = np.zeros(n - 4)
    for k in range(5):
        core += w_int[k] * q[k : k + n - 4]
    inc[2 : n - 2] = core
    for i, key in ((0, 0), (1, -1), (n - 2, -3)):
        w = _window_weights(np.arange(5.0) + key)
        lo = i + key
        inc[i] = w @ q[lo : lo + 5]
    out = np.empty(n)
    out[0] = 0.0
    np.cumsum(h * inc, out=out[1:])
    return out


def green_mid(m: int, j: int, f: RadialProfile):
    """Right inverse of the k = 0 radial operator, vanishing at the inner edge.

    With nu+- the indicial roots and delta_j = m/2 + j,

        u(r) = [ r^{nu+} I_{nu+}(r) - r^{nu-} I_{nu-}(r) ] / (2 (1 - delta_j)),
        I_nu(r) = integral_{R0}^r t^{1 - nu} f(t) dt,

    computed by fourth-order cumulative quadrature on the log grid
    (R0 = first grid radius).
    """
    nu_p, nu_m = indicial_roots(j, m)
    delta_j = m / 2.0 + j
    if abs(1.0 - delta_j) < 1e-12:
        raise DegenerateInputError("radial weight delta_j = 1 is degenerate")
    grid = f.grid
    s = grid.s
    h = grid.spacing
    s_mid = 0.5 * (grid.s_min + grid.s_max)
    u = np.zeros(grid.n_points)
    for nu, sign in ((nu_p, 1.0), (nu_m, -1.0)):
        q = np.exp((2.0 - nu) * (s - s_mid)) * f.values
        integral = _cumulative(q, h)
        u += sign * np.exp(nu * (s - s_mid)) * integral
    u *= math.exp(2.0 * s_mid) / (2.0 * (1.0 - delta_j))
    return RadialProfile(grid, u, mode=(j, 0))


def _check_tail_decay(q, h, scale):
    """Reject data whose weighted tail cannot be truncated at the grid end."""
    n = q.size
    tail = np.abs(q[-max(8, n // 6) :])
    if tail.max() == 0.0:
        return
    mask = tail > 0
    sigma = h * np.arange(tail.size)[mask]
    logs = np.log(tail[mask])
    if sigma.size < 3:
        return
    slope = np.polyfit(sigma, logs, 1)[0]
    est_tail = tail[-1] / max(-slope, 1e-10)
    if slope >= -0.1 or est_tail > 5e-7 * max(scale, est_tail):
        raise DecayError(
            f"tail of the weighted source decays too slowly (log-slope {slope:.3g}); "
            "the upper-limit integral does not converge on this grid"
        )


def green_outer(m: int, j: int, f: RadialProfile):
    """Right inverse with antiderivatives based at infinity.

    Same combination as :func:`green_mid` but with
    ``I_nu(r) = integral_{+infinity}^{r} t^{1-nu} f(t) dt``; this is the
    variant whose output carries no growing r^{nu+} branch.  The source
    must decay fast enough for both tail integrals to converge (checked).
    """
    nu_p, nu_m = indicial_roots(j, m)
    delta_j = m / 2.0 + j
    if abs(1.0 - delta_j) < 1e-12:
        raise DegenerateInputError("radial weight delta_j = 1 is degenerate")
    grid = f.grid
    s = grid.s
    h = grid.spacing
    s_mid = 0.5 * (grid.s_min + grid.s_max)
    u = np.zeros(grid.n_points)
    for nu, sign in ((nu_p, 1.0), (nu_m, -1.0)):
        q = np.exp((2.0 - nu) * (s - s_mid)) * f.values
        integral = _cumulative(q, h)
        _check_tail_decay(q, h, np.max(np.abs(integral)))
        integral = integral - integral[-1]
        u += sign * np.exp(nu * (s - s_mid)) * integral
    u *= math.exp(2.0 * s_mid) / (2.0 * (1.0 - delta_j))
    return RadialProfile(grid, u, mode=(j, 0))


def inversion_residual(u: RadialProfile, f: RadialProfile, m: int, j: int):
    """Backward-style residual of a right inverse: how far P u misses f.

    The pointwise residual is normalized by the local scale of the terms
    entering the operator, ``|f| + (1 + lambda_j) |u| r^{-2}``, floored at
    1e-3 of the global source magnitude so that dead zones where both u
    and f underflow do not dominate.  Boundary stencils are excluded.
    """
    lam = sphere_eigenvalue(j, m)
    s = u.grid.s
    res = radial_apply(u, m, j, 0).values - f.values
    scale = (
        np.abs(f.values)
        + (1.0 + lam) * np.abs(u.values) * np.exp(-2.0 * s)
        + 1e-3 * np.max(np.abs(f.values))
    )
    interior = slice(3, -3)
    return float(np.max(np.abs(res[interior]) / scale[interior]))


def solve_k_mode(m: int, j: int, k: int, fiber_length: float, f: RadialProfile):
    """Dirichlet solve of the k >= 1 radial problem on the profile's grid.

    Second-order banded discretization in s with zero boundary values at
    both ends (the far end is justified by the exponential decay of k >= 1
    modes).  The relative algebraic residual of the solve is stored in the
    result's ``info`` and must come out at direct-solver level.
    """
    if k < 1:
        raise DomainError(f"solve_k_mode needs a fiber wavenumber k >= 1, got {k}")
    lam = sphere_eigenvalue(j, m)
    kap = _kappa(k, fiber_length)
    grid = f.grid
    s = grid.s
    h = grid.spacing
    n = grid.n_points
    w = np.exp(-2.0 * s)
    diag = w * (2.0 / h**2 + lam) + kap**2
    upper = w * (-1.0 / h**2 - (m - 2) / (2.0 * h))
    lower = w * (-1.0 / h**2 + (m - 2) / (2.0 * h))
    rhs = f.values.copy()
    diag[0] = diag[-1] = 1.0
    rhs[0] = rhs[-1] = 0.0
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[0, 1] = 0.0
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    ab[2, -2] = 0.0
    try:
        v = solve_banded((1, 1), ab, rhs)
    except Exception as err:  # pragma: no cover - scipy raises on singular systems
        raise NumericError(f"banded solve failed: {err}") from err
    resid = (
        diag[1:-1] * v[1:-1] + upper[1:-1] * v[2:] + lower[1:-1] * v[:-2] - f.values[1:-1]
    )
    norm_f = np.linalg.norm(f.values[1:-1])
    rel = float(np.linalg.norm(resid) / norm_f) if norm_f > 0 else float(np.linalg.norm(resid))
    if rel > 1e-8:
        raise NumericError(f"k-mode solve residual {rel:.3e} exceeds 1e-8")
    return RadialProfile(grid, v, mode=(j, k), info={"residual": rel})


# ---------------------------------------------------------------------------
# weighted norms and membership
# ---------------------------------------------------------------------------

def _mode_measure_factor(mode, fiber_length):
    # unit-normalized sphere harmonic; fiber cos/sin carries L or L/2
    k = mode[1]
    return fiber_length if k == 0 else fiber_length / 2.0


def weighted_norm(profile: RadialProfile, delta: float, m: int, region=None,
                  fiber_length=2.0 * math.pi):
    """Weighted L^2 norm of a single-mode field over a radial window.

    Computes ``(factor * integral u(r)^2 r^{-2 delta} r^{m-1} dr)^{1/2}``
    over ``region = (R1, R2)`` (the whole grid by default), with the fiber
    Parseval factor for the profile's mode and a unit-normalized sphere
    harmonic.  On the log grid the radial measure is ``e^{(m-2 delta) s} ds``.
    """
    grid = profile.grid
    s = grid.s
    mask = np.ones_like(s, dtype=bool)
    if region is not None:
        r1, r2 = region
        if not (r2 > r1 > 0):
            raise DomainError(f"invalid radial window {region}")
        mask = (grid.r >= r1) & (grid.r <= r2)
        if mask.sum() < 3:
            raise DomainError("radial window contains fewer than 3 grid points")
    integrand = profile.values**2 * np.exp((m - 2.0 * delta) * s)
    val = simpson(integrand[mask], x=s[mask])
    return float(math.sqrt(max(val, 0.0) * _mode_measure_factor(profile.mode, fiber_length)))


def annulus_partial_sums(profile: RadialProfile, delta: float, m: int):
    """Weighted mass of the profile on the dyadic annuli covered by the grid."""
    grid = profile.grid
    s = grid.s
    integrand = profile.values**2 * np.exp((m - 2.0 * delta) * s)
    i_min = int(math.ceil(grid.s_min / math.log(2.0) - 1e-12))
    i_max = int(math.floor(grid.s_max / math.log(2.0) + 1e-12))
    sums = []
    for i in range(i_min, i_max):
        lo, hi = i * math.log(2.0), (i + 1) * math.log(2.0)
        mask = (s >= lo - 1e-12) & (s <= hi + 1e-12)
        if mask.sum() >= 3:
            sums.append(simpson(integrand[mask], x=s[mask]))
    return np.asarray(sums)


def classify_membership(profile: RadialProfile, delta: float, m: int, slope_tol=0.1):
    """Decide membership of the profile in the delta-weighted L^2 space.

    Fits the log of the dyadic annulus masses against the annulus index:
    a negative slope means a geometric tail (norm finite), slope at or above
    ``-slope_tol`` flags divergence, including the borderline logarithmic
    case of constant annulus mass.  Returns ``(member, slope)``.
    """
    sums = annulus_partial_sums(profile, delta, m)
    if sums.size < 3:
        raise DomainError("grid covers too few dyadic annuli to classify")
    positive = sums > 0
    if positive.sum() < 3:
        return True, -math.inf
    idx = np.arange(sums.size)[positive]
    slope = float(np.polyfit(idx, np.log(sums[positive]), 1)[0])
    return slope < -slope_tol, slope


# ---------------------------------------------------------------------------
# Hardy ratio
# ---------------------------------------------------------------------------

def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def hardy_ratio(v: RadialProfile, delta: float, m: int, cutoff):
    """Discrete ratio of the weighted Hardy inequality for a cut-off profile.

    With chi vanishing below s0 and equal to 1 above s1 (smoothstep), and
    the measure ``e^{(m - 2 delta) s} ds``, returns

        [ (m - 2 delta)^2 / 4 * integral (chi v)^2 ] / integral ((chi v)')^2,

    which the Hardy inequality bounds by 1 for admissible data.
    """
    s0, s1 = cutoff
    if not (s1 > s0):
        raise DomainError("cutoff needs s1 > s0")
    grid = v.grid
    s = grid.s
    chi = _smoothstep((s - s0) / (s1 - s0))
    w = chi * v.values
    mu = np.exp((m - 2.0 * delta) * s)
    dw = _grid_derivative(w, grid.spacing, 1)
    num = 0.25 * (m - 2.0 * delta) ** 2 * simpson(w**2 * mu, x=s)
    den = simpson(dw**2 * mu, x=s)
    if den <= 1e-300:
        raise DegenerateInputError("cutoff annihilates the profile; zero denominator")
    return float(num / den)


# ---------------------------------------------------------------------------
# decay-jump expansion
# ---------------------------------------------------------------------------

@dataclass
class DecayExpansion:
    """Leading harmonic profiles of a field between two weighted rates.

    ``coefficients`` lists ``(j, sign, c)`` for the modes whose indicial
    exponent falls in the window; ``remainder_rate`` is the fitted decay
    exponent of what is left after subtracting them.
    """

    coefficients: list
    remainder_rate: float
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "modes": [
                {"j": j, "sign": sign, "coefficient": c}
                for j, sign, c in self.coefficients
            ],
            "remainder_rate": self.remainder_rate,
            "diagnostics": {
                key: (list(val) if isinstance(val, (list, tuple, np.ndarray)) else val)
                for key, val in self.diagnostics.items()
            },
        }


def _window_slots(m, delta, delta_prime, j_max):
    slots = []
    for j in range(j_max + 1):
        data = indicial_data(j, m)
        if delta_prime < data.delta_j < delta:
            slots.append((j, "+", data.nu_plus))
        if delta_prime < 2.0 - data.delta_j < delta:
            slots.append((j, "-", data.nu_minus))
    return slots


def decay_jump_expand(field, m, delta, delta_prime, j_max, *,
                      fiber_length=2.0 * math.pi, radii=(4.0, 8.0, 16.0, 32.0),
                      quad=None, harmonic_tol=1e-4, coeff_rel_tol=1e-8,
                      check_harmonic=True):
    """Extract the leading harmonic profiles of a multimode exterior field.

    ``field(xs, ts)`` samples the field on batches of points.  Fiber means
    on spheres of the given radii are projected onto zonal harmonics; each
    admissible mode amplitude is fitted against ``(r^{nu+}, r^{nu-})`` and
    coefficients whose indicial exponent lies in the window
    ``delta_prime < . < delta`` are reported.  Fiber modes k >= 1 never
    contribute (they decay exponentially); their residual amplitude and
    fitted exponential rate are returned in the diagnostics.
    """
    if not (delta > delta_prime):
        raise DomainError("window needs delta > delta_prime")
    for name, val in (("delta", delta), ("delta_prime", delta_prime)):
        if is_critical(val, m):
            raise DomainError(f"{name} = {val} is a critical weight")
    radii = np.asarray(sorted(radii), dtype=float)
    if radii.size < 3:
        raise DomainError("need at least three radii for the amplitude fit")
    model = ModelMetric(m, fiber_length, TrivialFlat())
    quad = quad or QuadratureSpec(
        polar_nodes=max(2 * j_max + 6, 8), azimuth_nodes=8, fiber_nodes=8
    )

    amp = np.zeros((radii.size, j_max + 1))
    perp_amp = np.zeros(radii.size)
    sphere_scale = np.zeros(radii.size)
    grids = []
    for ridx, R in enumerate(radii):
        xs, ts, w, xhat = boundary_grid(model, R, quad)
        vals = np.asarray(field(xs, ts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NumericError(f"field returned non-finite values on the sphere r={R}")
        grids.append((xs, ts, w, xhat, vals))
        total_w = np.sum(w)
        # fiber mean per sphere node: nodes are ordered with the fiber last
        nf = quad.fiber_nodes
        mean_part = vals.reshape(-1, nf).mean(axis=1)
        mean_full = np.repeat(mean_part, nf)
        perp = vals - mean_full
        perp_amp[ridx] = math.sqrt(float(np.sum(w * perp**2) / total_w))
        sphere_scale[ridx] = math.sqrt(float(np.sum(w * vals**2) / total_w))
        cos_theta = xhat[:, 0]
        for j in range(j_max + 1):
            zj = zonal_values(j, m, cos_theta)
            amp[ridx, j] = float(np.sum(w * mean_full * zj) / np.sum(w * zj**2))

    if check_harmonic:
        _check_harmonicity(field, model, radii, harmonic_tol)

    scale = max(float(sphere_scale.max()), 1e-300)
    r_mid = math.exp(float(np.mean(np.log(radii))))
    coefficients = []
    fitted = {j: np.zeros(radii.size) for j in range(j_max + 1)}
    slots = _window_slots(m, delta, delta_prime, j_max)
    slot_keys = {(j, sign) for j, sign, _ in slots}
    for j in range(j_max + 1):
        nu_p, nu_m = indicial_roots(j, m)
        basis = np.column_stack(
            [(radii / r_mid) ** nu_p, (radii / r_mid) ** nu_m]
        )
        cond = np.linalg.cond(basis)
        if cond > 1e8:
            raise IllPosedWindowError(
                f"radius ladder cannot separate the two branches of mode j={j} "
                f"(condition number {cond:.3e})"
            )
        coef, *_ = np.linalg.lstsq(basis, amp[:, j], rcond=None)
        for c_scaled, sign, nu in ((coef[0], "+", nu_p), (coef[1], "-", nu_m)):
            if (j, sign) not in slot_keys:
                continue
            c = c_scaled / r_mid**nu
            if abs(c_scaled) >= coeff_rel_tol * scale:
                coefficients.append((j, sign, float(c)))
                fitted[j] = fitted[j] + c * radii**nu

    # remainder after subtracting the reported window terms
    remainder_amp = np.zeros(radii.size)
    for ridx, (xs, ts, w, xhat, vals) in enumerate(grids):
        model_vals = np.zeros_like(vals)
        cos_theta = xhat[:, 0]
        for j, sign, c in coefficients:
            nu = indicial_roots(j, m)[0 if sign == "+" else 1]
            model_vals += c * radii[ridx] ** nu * zonal_values(j, m, cos_theta)
        diff = vals - model_vals
        remainder_amp[ridx] = math.sqrt(float(np.sum(w * diff**2) / np.sum(w)))

    if remainder_amp.max() <= 1e-12 * scale:
        remainder_rate = -math.inf
    else:
        positive = remainder_amp > 0
        remainder_rate = float(
            np.polyfit(np.log(radii[positive]), np.log(remainder_amp[positive]), 1)[0]
        )
    if perp_amp.max() > 1e-13 * scale and np.all(perp_amp > 0):
        perp_rate = float(np.polyfit(radii, np.log(perp_amp), 1)[0])
    else:
        perp_rate = None
    return DecayExpansion(
        coefficients=coefficients,
        remainder_rate=remainder_rate,
        diagnostics={
            "radii": radii.tolist(),
            "zonal_amplitudes": amp.tolist(),
            "remainder_amplitudes": remainder_amp.tolist(),
            "perp_amplitudes": perp_amp.tolist(),
            "perp_exp_rate": perp_rate,
        },
    )


def _check_harmonicity(field, model, radii, tol):
    rng = np.random.default_rng(7)
    r_probe = float(np.sqrt(radii[0] * radii[-1]))
    for _ in range(4):
        direction = rng.normal(size=model.base_dim)
        direction /= np.linalg.norm(direction)
        p = FramePoint(r_probe * direction, t=rng.uniform(0, model.fiber_length))
        lap = model_laplacian(model, field, p, step=1e-3 * r_probe)
        u0 = float(np.asarray(field(p.base[None, :], np.array([p.t])))[0])
        kap = 2.0 * math.pi / model.fiber_length
        scale = (abs(u0) + 1e-12) * (1.0 + (kap * r_probe) ** 2) / r_probe**2
        if abs(lap) > tol * scale + 1e-12:
            raise NumericError(
                f"field is not harmonic near r = {r_probe:.3g} "
                f"(Laplacian residual {lap:.3e} vs scale {scale:.3e})"
            )
