"""Boundary-integral masses: integrands, product quadrature, extrapolation.

The mass of a family g relative to its model h is the large-R limit of

    (1 / (omega_m L)) * integral over r^{-1}(R) of the radial component of
    -(div_h g + d tr_h g - 1/2 d g(T,T))          (curvature-type mass)
    -(div_h g + d tr_h g)                          (spinor-type mass,
                                                    trivial fibrations only)

against the model area element, where ``div`` is the codifferential-sign
divergence ``(div g)(X) = -sum_a (nabla_{e_a} g)(e_a, X)`` and ``omega_m``
is the area of the unit (m-1)-sphere.  Boundary integrals use product
Gauss-Gegenbauer x uniform quadrature (spectrally accurate for smooth
integrands); the limit is reached by a power-law fit over a geometric
radius ladder.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.special import roots_gegenbauer

from . import kernels
from .errors import DomainError, NonConvergenceError, NumericError, UnsupportedModelError
from .geometry import (
    FramePoint,
    connection_batch,
    covariant_derivative_batch,
    plain_frame_gradient,
)

__all__ = [
    "QuadratureSpec",
    "RadiusSchedule",
    "MassReport",
    "MassQuadraticForm",
    "InvarianceResult",
    "omega_m",
    "boundary_grid",
    "boundary_integral",
    "gb_integrand_radial",
    "dirac_integrand_radial",
    "gb_boundary_field",
    "dirac_boundary_field",
    "simplified_gb_boundary_field",
    "mass_gb",
    "mass_dirac",
    "mass_quadratic_form",
    "chart_invariance_check",
    "extrapolate_power_law",
    "aitken_limit",
    "DEFAULT_SCHEDULE",
    "DEFAULT_QUAD",
]


def omega_m(m: int) -> float:
    """Area of the unit sphere S^{m-1}: 2 pi^{m/2} / Gamma(m/2)."""
    return 2.0 * math.pi ** (m / 2.0) / math.gamma(m / 2.0)


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts for the product rule on sphere x fiber.

    ``polar_nodes`` Gauss nodes per colatitude angle (there are m-2 of
    them), ``azimuth_nodes`` uniform nodes on the final periodic angle,
    ``fiber_nodes`` uniform nodes around the fiber.
    """

    polar_nodes: int = 12
    azimuth_nodes: int = 12
    fiber_nodes: int = 8

    def __post_init__(self):
        for name, val in (
            ("polar_nodes", self.polar_nodes),
            ("azimuth_nodes", self.azimuth_nodes),
            ("fiber_nodes", self.fiber_nodes),
        ):
            if val < 4:
                raise DomainError(f"{name} must be >= 4, got {val}")
        if self.azimuth_nodes % 2 or self.fiber_nodes % 2:
            raise DomainError("azimuth_nodes and fiber_nodes must be even")

    def doubled(self):
        return QuadratureSpec(
            2 * self.polar_nodes, 2 * self.azimuth_nodes, 2 * self.fiber_nodes
        )


@dataclass(frozen=True)
class RadiusSchedule:
    """Geometric radius ladder r0 * growth^i, i = 0..count-1."""

    r0: float = 16.0
    growth: float = 2.0
    count: int = 6

    def __post_init__(self):
        if not (self.r0 > 1):
            raise DomainError(f"r0 must exceed 1, got {self.r0}")
        if not (self.growth > 1):
            raise DomainError(f"growth must exceed 1, got {self.growth}")
        if self.count < 3:
            raise DomainError(f"count must be >= 3, got {self.count}")

    @property
    def radii(self):
        return self.r0 * self.growth ** np.arange(self.count)


DEFAULT_SCHEDULE = RadiusSchedule()
DEFAULT_QUAD = QuadratureSpec()


@dataclass
class MassReport:
    """Per-radius boundary values, the extrapolated mass, fit diagnostics."""

    per_radius: list
    extrapolated: float
    fit_order: float
    residual: float
    metadata: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "family": self.metadata.get("family"),
            "params": self.metadata.get("params", {}),
            "model": self.metadata.get("model", {}),
            "radii": [r for r, _ in self.per_radius],
            "values": [v for _, v in self.per_radius],
            "mass": self.extrapolated,
            "fit_order": self.fit_order,
            "residual": self.residual,
        }

    def csv_rows(self):
        yield ("R", "value")
        for r, v in self.per_radius:
            yield (r, v)


@dataclass
class MassQuadraticForm:
    """Mass quadratic form over the horizontal directions."""

    matrix: np.ndarray
    residual_matrix: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))


@dataclass
class InvarianceResult:
    value_a: float
    value_b: float
    difference: float
    report_a: MassReport
    report_b: MassReport


# ---------------------------------------------------------------------------
# quadrature grid on r^{-1}(R)
# ---------------------------------------------------------------------------

def boundary_grid(model, R, quad: QuadratureSpec):
    """Product quadrature nodes and weights on the level set r = R.

    Returns ``(xs, ts, weights, xhat)``: base points (N, m), fiber angles
    (N,), weights summing to ``omega_m R^{m-1} L``, and unit radial vectors.
    Each colatitude uses the Gauss rule for its ``sin^p`` weight (exact for
    polynomials in cos of degree <= 2*polar_nodes - 1); periodic directions
    use uniform rules (spectrally accurate).
    """
    m = model.base_dim
    if not (R > 1):
        raise DomainError(f"boundary radius must exceed 1, got {R}")
    angle_nodes = []
    angle_weights = []
    for i in range(1, m - 1):
        p = m - 1 - i
        x, w = roots_gegenbauer(quad.polar_nodes, p / 2.0)
        angle_nodes.append(np.arccos(np.clip(x, -1.0, 1.0)))
        angle_weights.append(w)
    phi = 2.0 * math.pi * np.arange(quad.azimuth_nodes) / quad.azimuth_nodes
    angle_nodes.append(phi)
    angle_weights.append(np.full(quad.azimuth_nodes, 2.0 * math.pi / quad.azimuth_nodes))
    tfib = model.fiber_length * np.arange(quad.fiber_nodes) / quad.fiber_nodes
    wfib = np.full(quad.fiber_nodes, model.fiber_length / quad.fiber_nodes)

    grids = np.meshgrid(*angle_nodes, tfib, indexing="ij")
    wgrids = np.meshgrid(*angle_weights, wfib, indexing="ij")
    shape = grids[0].size
    weight = np.ones(shape)
    for wg in wgrids:
        weight = weight * wg.ravel()

    xhat = np.empty((shape, m))
    sin_prod = np.ones(shape)
    for j in range(m - 2):
        theta = grids[j].ravel()
        xhat[:, j] = sin_prod * np.cos(theta)
        sin_prod = sin_prod * np.sin(theta)
    phi_v = grids[m - 2].ravel()
    xhat[:, m - 2] = sin_prod * np.cos(phi_v)
    xhat[:, m - 1] = sin_prod * np.sin(phi_v)
    ts = grids[-1].ravel()
    weight = weight * R ** (m - 1)
    return R * xhat, ts, weight, xhat


def boundary_integral(integrand, model, R, quad: QuadratureSpec):
    """Integrate a scalar field over the level set r = R.

    ``integrand(xs, ts)`` must return one value per node.  The reduction is
    a fixed-order pairwise sum, so results are bit-reproducible for a given
    node count.
    """
    xs, ts, w, _ = boundary_grid(model, R, quad)
    vals = np.asarray(integrand(xs, ts), dtype=float)
    if vals.shape != w.shape:
        raise NumericError("integrand returned a batch of the wrong size")
    bad = ~np.isfinite(vals)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise NumericError(
            f"integrand returned {vals[idx]} at node base={xs[idx]}, t={ts[idx]}"
        )
    return kernels.pairwise_sum(w * vals)


# ---------------------------------------------------------------------------
# mass integrands
# ---------------------------------------------------------------------------

def _frame_batch(model, family, xs, ts, step_scale=1e-4, use_exact=True):
    g0 = family.components(xs, ts)
    gamma = connection_batch(model, xs)
    covg = covariant_derivative_batch(
        model, family, xs, ts, step_scale=step_scale, use_exact=use_exact
    )
    r = np.linalg.norm(xs, axis=1)
    xhat = xs / r[:, None]
    return g0, covg, gamma, xhat


def gb_boundary_field(family, step_scale=1e-4, use_exact=True):
    """Batched radial integrand of the curvature-type mass for a family."""
    model = family.model

    def integrand(xs, ts):
        g0, covg, gamma, xhat = _frame_batch(model, family, xs, ts, step_scale, use_exact)
        gb, _ = kernels.mass_integrands(covg, g0, gamma, xhat)
        return gb

    return integrand


def dirac_boundary_field(family, step_scale=1e-4, use_exact=True):
    """Batched radial integrand of the spinor-type mass (trivial model)."""
    model = family.model
    if not model.is_trivial:
        raise UnsupportedModelError(
            "the spinor-type mass is defined only for trivial fibrations"
        )

    def integrand(xs, ts):
        g0, covg, gamma, xhat = _frame_batch(model, family, xs, ts, step_scale, use_exact)
        _, dirac = kernels.mass_integrands(covg, g0, gamma, xhat)
        return dirac

    return integrand


def simplified_gb_boundary_field(family, step_scale=1e-4):
    """Plain-derivative variant of the curvature-mass integrand.

    Uses only horizontal frame derivatives of the components, dropping the
    vertical-derivative term of the full integrand; its boundary integral
    converges to the same mass, the gap closing like R^{2-m}.
    """
    model = family.model

    def integrand(xs, ts):
        xs = np.atleast_2d(xs)
        ts = np.zeros(xs.shape[0]) if ts is None else np.asarray(ts, dtype=float)
        if family.frame_gradient is not None:
            dg = family.frame_gradient(xs, ts)
        else:
            dg, _ = plain_frame_gradient(model, family, xs, ts, step_scale)
        r = np.linalg.norm(xs, axis=1)
        xhat = xs / r[:, None]
        return kernels.simplified_gb(np.ascontiguousarray(dg), xhat)

    return integrand


def gb_integrand_radial(model, family, p: FramePoint, step_scale=1e-4, use_exact=True):
    """Radial curvature-mass integrand at a single point."""
    if model.base_dim != family.model.base_dim:
        raise DomainError("model and family base dimensions disagree")
    vals = gb_boundary_field(family, step_scale, use_exact)(p.base[None, :], np.array([p.t]))
    return float(vals[0])


def dirac_integrand_radial(model, family, p: FramePoint, step_scale=1e-4, use_exact=True):
    """Radial spinor-mass integrand at a single point (trivial model only)."""
    if not model.is_trivial:
        raise UnsupportedModelError(
            "the spinor-type mass is defined only for trivial fibrations"
        )
    vals = dirac_boundary_field(family, step_scale, use_exact)(p.base[None, :], np.array([p.t]))
    return float(vals[0])


# ---------------------------------------------------------------------------
# extrapolation
# ---------------------------------------------------------------------------

def aitken_limit(values):
    """One pass of Aitken delta-squared acceleration; returns the last entry."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return float(v[-1])
    d1 = v[2:] - v[1:-1]
    d0 = v[1:-1] - v[:-2]
    denom = d1 - d0
    acc = np.where(np.abs(denom) > 1e-300, v[2:] - d1**2 / denom, v[2:])
    return float(acc[-1])


def _richardson_fixed(radii, values, p0):
    """Repeated Richardson elimination at orders p0, p0+1, ... (known ratio).

    Returns the final estimate and the change contributed by the last
    elimination level (an internal error estimate).
    """
    ratio = radii[1] / radii[0]
    level = np.asarray(values, dtype=float)
    p = float(p0)
    change = abs(level[-1] - level[0])
    prev_last = level[-1]
    while level.size > 1:
        f = ratio**p
        level = (f * level[1:] - level[:-1]) / (f - 1.0)
        p += 1.0
        change = abs(level[-1] - prev_last)
        prev_last = level[-1]
    return float(level[0]), float(change)


def extrapolate_power_law(radii, values, m, residual_tol=1e-2, p_init=None,
                          scale_floor=0.0):
    """Extrapolate value(R) = mu + c R^{-p} over a geometric radius ladder.

    The decay order p is free within [0.5, 2(m-2)], initialized at m-2.
    Tails of the closed-form families are genuine power series in 1/R, so
    a fixed-order Richardson ladder (orders round(p), round(p)+1, ...) is
    also evaluated; whichever of the two carries the smaller internal
    error estimate supplies the limit.  Returns ``(mu, p, residual,
    diagnostics)`` with ``residual`` the selected error estimate relative
    to the value scale.  ``scale_floor`` supplies an external magnitude
    against which a series may be recognized as identically zero (e.g. an
    off-diagonal entry judged against the whole matrix).  Raises
    ``NonConvergenceError`` (carrying the table) if the tail oscillates or
    neither estimate converged.
    """
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    spread = float(values.max() - values.min())
    scale = max(float(np.max(np.abs(values))), spread, scale_floor, 1e-300)
    table = list(zip(radii.tolist(), values.tolist()))

    if spread <= 1e-13 * scale or spread == 0.0:
        return float(values.mean()), float(m - 2), 0.0, {"method": "constant"}

    p0 = float(np.clip(m - 2 if p_init is None else p_init, 0.5, 2.0 * (m - 2)))
    basis = np.column_stack([np.ones_like(radii), radii ** (-p0)])
    coef, *_ = np.linalg.lstsq(basis, values, rcond=None)
    x0 = np.array([coef[0], coef[1], p0])

    def resid(x):
        mu, c, p = x
        return mu + c * radii ** (-p) - values

    lo = [-np.inf, -np.inf, 0.5]
    hi = [np.inf, np.inf, 2.0 * (m - 2)]
    x0[2] = np.clip(x0[2], lo[2] + 1e-9, hi[2] - 1e-9)
    try:
        fit = least_squares(resid, x0, bounds=(lo, hi))
        mu_fit, _, p_fit = fit.x
        err_fit = float(np.sqrt(np.mean(fit.fun**2)))
        fit_ok = np.isfinite(mu_fit)
    except Exception:
        mu_fit, p_fit, err_fit, fit_ok = np.nan, p0, np.inf, False

    q0 = max(1, int(round(p_fit if fit_ok else p0)))
    mu_rich, err_rich = _richardson_fixed(radii, values, q0)

    if fit_ok and err_fit <= err_rich:
        mu, err, method = float(mu_fit), err_fit, "power-law"
    else:
        mu, err, method = mu_rich, err_rich, "richardson"
    rel_res = float(err / scale)
    p = float(p_fit if fit_ok else p0)

    diffs = np.diff(values)
    tail = diffs[-3:]
    oscillating = (
        tail.size >= 2
        and np.any(tail[:-1] * tail[1:] < 0)
        and np.abs(tail[-1]) > np.abs(tail[0])
        and np.abs(tail[-1]) > 10.0 * residual_tol * scale
    )
    if not np.isfinite(mu) or rel_res > residual_tol or oscillating:
        raise NonConvergenceError(
            f"mass tail did not converge (relative residual {rel_res:.3e}, "
            f"oscillation={oscillating})",
            table=table,
            diagnostics={"residual": rel_res, "method": method, "fit_order": p},
        )
    return mu, p, rel_res, {"method": method}


# ---------------------------------------------------------------------------
# mass drivers
# ---------------------------------------------------------------------------

def _model_metadata(family):
    model = family.model
    return {
        "m": model.base_dim,
        "fiber_length": model.fiber_length,
        "fibration": model.connection.kind,
        "omega_m": omega_m(model.base_dim),
    }


def _mass_from_field(family, integrand, schedule, quad, kind, residual_tol):
    model = family.model
    norm = omega_m(model.base_dim) * model.fiber_length
    radii = schedule.radii
    values = np.array(
        [boundary_integral(integrand, model, R, quad) / norm for R in radii]
    )
    try:
        mu, p, res, diag = extrapolate_power_law(
            radii, values, model.base_dim, residual_tol=residual_tol
        )
    except NonConvergenceError as err:
        err.diagnostics.setdefault("kind", kind)
        raise
    meta = {
        "family": family.name,
        "params": dict(family.params),
        "model": _model_metadata(family),
        "kind": kind,
        "method": diag["method"],
    }
    return MassReport(
        per_radius=list(zip(radii.tolist(), values.tolist())),
        extrapolated=mu,
        fit_order=p,
        residual=res,
        metadata=meta,
    )


def mass_gb(family, schedule=None, quad=None, *, step_scale=1e-4, use_exact=True,
            residual_tol=1e-2):
    """Curvature-type mass of a family, extrapolated over the schedule."""
    schedule = schedule or DEFAULT_SCHEDULE
    quad = quad or DEFAULT_QUAD
    integrand = gb_boundary_field(family, step_scale, use_exact)
    return _mass_from_field(family, integrand, schedule, quad, "gb", residual_tol)


def mass_dirac(family, schedule=None, quad=None, *, step_scale=1e-4, use_exact=True,
               residual_tol=1e-2):
    """Spinor-type mass of a family (trivial fibrations only)."""
    schedule = schedule or DEFAULT_SCHEDULE
    quad = quad or DEFAULT_QUAD
    integrand = dirac_boundary_field(family, step_scale, use_exact)
    return _mass_from_field(family, integrand, schedule, quad, "dirac", residual_tol)


def mass_quadratic_form(family, schedule=None, quad=None, *, step_scale=1e-4,
                        use_exact=True, residual_tol=1e-2):
    """Mass quadratic form over horizontal directions, by polarization.

    Diagonal entries extrapolate the boundary integrals for Z = X_i; the
    off-diagonal entries use Q(X_i, X_j) = [Q(X_i + X_j) - Q(X_i - X_j)]/4.
    The trace agrees with the scalar curvature-type mass identically at the
    integrand level.
    """
    schedule = schedule or DEFAULT_SCHEDULE
    quad = quad or DEFAULT_QUAD
    model = family.model
    m = model.base_dim
    norm = omega_m(m) * model.fiber_length
    radii = schedule.radii

    directions = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        directions.append(("diag", i, i, e))
    for i in range(m):
        for j in range(i + 1, m):
            ep = np.zeros(m)
            ep[i] = ep[j] = 1.0
            em = np.zeros(m)
            em[i], em[j] = 1.0, -1.0
            directions.append(("plus", i, j, ep))
            directions.append(("minus", i, j, em))

    series = {key[:3]: np.zeros(len(radii)) for key in directions}
    for ridx, R in enumerate(radii):
        xs, ts, w, xhat = boundary_grid(model, R, quad)
        g0, covg, gamma, xhat = _frame_batch(model, family, xs, ts, step_scale, use_exact)
        for kind, i, j, coeffs in directions:
            vals = kernels.qform_radial(covg, g0, gamma, xhat, coeffs)
            series[(kind, i, j)][ridx] = kernels.pairwise_sum(w * vals) / norm

    global_scale = max(float(np.max(np.abs(vals))) for vals in series.values())
    matrix = np.zeros((m, m))
    resid = np.zeros((m, m))
    for i in range(m):
        mu, _, res, _ = extrapolate_power_law(
            radii, series[("diag", i, i)], m, residual_tol=residual_tol,
            scale_floor=global_scale,
        )
        matrix[i, i] = mu
        resid[i, i] = res
    for i in range(m):
        for j in range(i + 1, m):
            qp = series[("plus", i, j)]
            qm = series[("minus", i, j)]
            mu, _, res, _ = extrapolate_power_law(
                radii, 0.25 * (qp - qm), m, residual_tol=residual_tol,
                scale_floor=global_scale,
            )
            matrix[i, j] = matrix[j, i] = mu
            resid[i, j] = resid[j, i] = res
    meta = {
        "family": family.name,
        "params": dict(family.params),
        "model": _model_metadata(family),
    }
    return MassQuadraticForm(matrix=matrix, residual_matrix=resid, metadata=meta)


def chart_invariance_check(family_a, family_b, schedule=None, quad=None, **kw):
    """Masses of two chart presentations of one metric, and their gap."""
    rep_a = mass_gb(family_a, schedule, quad, **kw)
    rep_b = mass_gb(family_b, schedule, quad, **kw)
    return InvarianceResult(
        value_a=rep_a.extrapolated,
        value_b=rep_b.extrapolated,
        difference=abs(rep_a.extrapolated - rep_b.extrapolated),
        report_a=rep_a,
        report_b=rep_b,
    )
