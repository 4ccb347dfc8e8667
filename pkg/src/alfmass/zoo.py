"""Closed-form metric families asymptotic to circle-fibration models.

Every family is packaged as a :class:`~alfmass.geometry.MetricFamily`: a
batched evaluator of frame components relative to its model, a closed-form
frame gradient, and coordinate charts for curvature checks.  Frame
components are always expressed in the adapted orthonormal frame
``(X_1, ..., X_m, T)`` of the model.

Families
--------
flat
    The model itself; identity components.
schwarzschild
    Euclidean Schwarzschild in total dimension ``n >= 4`` with horizon
    parameter ``gamma``; fibers close up smoothly with asymptotic length
    ``4 pi gamma / (n - 3)``.  Two charts: the area-radial presentation
    ``dr^2/W + r^2 d(omega)^2 + W dt^2`` with ``W = 1 - (gamma/r)^{n-3}``,
    and isotropic coordinates in which the base is conformally flat.
reissner-nordstrom
    The charged 4d analogue, scalar-flat, complete for nonzero charge even
    with negative mass parameter.
taub-nut
    Monopole-type asymptotics over a 3d base: ``(1 + 2km/r)`` on horizontal
    directions and its inverse on the fiber, relative to the charge-k model.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonConvergenceError
from .geometry import (
    CoordinateChart,
    FramePoint,
    MetricFamily,
    ModelMetric,
    Monopole,
    TrivialFlat,
)

__all__ = [
    "SchwarzschildParams",
    "ReissnerNordstromParams",
    "TaubNutParams",
    "AREA_RADIAL",
    "ISOTROPIC",
    "flat_family",
    "schwarzschild_family",
    "schwarzschild_components",
    "isotropic_radius",
    "rn_family",
    "rn_components",
    "rn_isotropic_radius",
    "taubnut_family",
    "taubnut_components",
    "warp_profile",
    "build_family",
    "FAMILY_NAMES",
]

AREA_RADIAL = "area-radial"
ISOTROPIC = "isotropic"


@dataclass(frozen=True)
class SchwarzschildParams:
    """Total dimension n >= 4 and horizon radius gamma > 0."""

    n: int
    gamma: float

    def __post_init__(self):
        if self.n < 4 or int(self.n) != self.n:
            raise DomainError(f"total dimension n must be an integer >= 4, got {self.n}")
        if not (self.gamma > 0):
            raise DomainError(f"gamma must be positive, got {self.gamma}")

    @property
    def m(self) -> int:
        return self.n - 1

    @property
    def fiber_length(self) -> float:
        return 4.0 * math.pi * self.gamma / (self.n - 3)


@dataclass(frozen=True)
class ReissnerNordstromParams:
    """Mass parameter (any sign) and charge; completeness needs q != 0 when m <= 0."""

    m_param: float
    q: float

    def __post_init__(self):
        if self.q == 0 and self.m_param <= 0:
            raise DomainError(
                "Reissner-Nordstrom completeness requires q != 0 when the mass "
                f"parameter is nonpositive (got m={self.m_param}, q={self.q})"
            )

    @property
    def g0(self) -> float:
        return self.m_param + math.sqrt(self.m_param**2 + self.q**2)

    @property
    def fiber_length(self) -> float:
        return 2.0 * math.pi * self.g0**2 / (self.g0 - self.m_param)


@dataclass(frozen=True)
class TaubNutParams:
    """Positive mass parameter and monopole charge k >= 1."""

    m_param: float
    k: int = 1

    def __post_init__(self):
        if not (self.m_param > 0):
            raise DomainError(f"Taub-NUT mass parameter must be positive, got {self.m_param}")
        if self.k < 1 or int(self.k) != self.k:
            raise DomainError(f"monopole charge k must be a positive integer, got {self.k}")


def _radii(xs):
    return np.linalg.norm(np.atleast_2d(xs), axis=1)


def _diagonal_radial_family(model, a_fns, name, decay_order, params, charts=()):
    """Family with g(X_i,X_j) = a(r) delta_ij, g(T,T) = b(r).

    ``a_fns = (a, b, a', b')`` are vectorized callables of the base radius.
    """
    a, b, da, db = a_fns
    m = model.base_dim
    nf = m + 1

    def components(xs, ts):
        xs = np.atleast_2d(xs)
        r = _radii(xs)
        g = np.zeros((xs.shape[0], nf, nf))
        av = a(r)
        for i in range(m):
            g[:, i, i] = av
        g[:, m, m] = b(r)
        return g

    def frame_gradient(xs, ts):
        xs = np.atleast_2d(xs)
        r = _radii(xs)
        xhat = xs / r[:, None]
        dg = np.zeros((xs.shape[0], nf, nf, nf))
        dav = da(r)
        dbv = db(r)
        for c in range(m):
            for i in range(m):
                dg[:, c, i, i] = dav * xhat[:, c]
            dg[:, c, m, m] = dbv * xhat[:, c]
        return dg

    return MetricFamily(
        name=name,
        model=model,
        decay_order=decay_order,
        components=components,
        frame_gradient=frame_gradient,
        charts=tuple(charts),
        params=params,
    )


# ---------------------------------------------------------------------------
# flat
# ---------------------------------------------------------------------------

def flat_family(m=3, fiber_length=2.0 * math.pi):
    model = ModelMetric(m, fiber_length, TrivialFlat())
    nf = m + 1

    def components(xs, ts):
        xs = np.atleast_2d(xs)
        g = np.zeros((xs.shape[0], nf, nf))
        g[:, range(nf), range(nf)] = 1.0
        return g

    def frame_gradient(xs, ts):
        xs = np.atleast_2d(xs)
        return np.zeros((xs.shape[0], nf, nf, nf))

    chart = CoordinateChart(
        name="cartesian",
        dim=nf,
        metric=lambda pts: np.broadcast_to(
            np.eye(nf), (np.atleast_2d(pts).shape[0], nf, nf)
        ).copy(),
    )
    return MetricFamily(
        name="flat",
        model=model,
        decay_order=math.inf,
        components=components,
        frame_gradient=frame_gradient,
        charts=(chart,),
        params={"m": m},
    )


# ---------------------------------------------------------------------------
# Schwarzschild
# ---------------------------------------------------------------------------

def isotropic_radius(params: SchwarzschildParams, u):
    """Area radius as a function of the isotropic radius:
    r = u [1 + (gamma/u)^{n-3}/4]^{2/(n-3)}."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise DomainError("isotropic radius must be positive")
    q = 0.25 * (params.gamma / u) ** (params.n - 3)
    return u * (1.0 + q) ** (2.0 / (params.n - 3))


def _schw_isotropic_fns(params: SchwarzschildParams):
    n, gamma = params.n, params.gamma
    k = n - 3
    u_min = gamma * 0.25 ** (1.0 / k)

    def check(u):
        if np.any(u <= u_min):
            raise DomainError(
                f"isotropic chart degenerates at u = {u_min:.6g} "
                f"(horizon radius {gamma}); got a smaller radius"
            )

    def q(u):
        return 0.25 * (gamma / u) ** k

    def a(u):
        check(u)
        return (1.0 + q(u)) ** (4.0 / k)

    def b(u):
        check(u)
        return ((1.0 - q(u)) / (1.0 + q(u))) ** 2

    def da(u):
        check(u)
        qq = q(u)
        dq = -k * qq / u
        return (4.0 / k) * (1.0 + qq) ** (4.0 / k - 1.0) * dq

    def db(u):
        check(u)
        qq = q(u)
        dq = -k * qq / u
        psi = (1.0 - qq) / (1.0 + qq)
        dpsi = -2.0 * dq / (1.0 + qq) ** 2
        return 2.0 * psi * dpsi

    return a, b, da, db


def _sphere_chart_metric(m, radial_fn, fiber_fn):
    """Polar-chart metric diag(1/W, r^2, r^2 sin^2(theta_1), ..., W).

    Coordinates: (r, theta_1, ..., theta_{m-2}, phi, t); the i-th sphere
    angle carries the factor r^2 prod_{l<i} sin^2(theta_l).
    """

    def metric(pts):
        pts = np.atleast_2d(pts)
        npts = pts.shape[0]
        nf = m + 1
        g = np.zeros((npts, nf, nf))
        r = pts[:, 0]
        g[:, 0, 0] = radial_fn(r)
        factor = r**2
        for i in range(1, m):
            g[:, i, i] = factor
            if i <= m - 2:
                factor = factor * np.sin(pts[:, i]) ** 2
        g[:, m, m] = fiber_fn(r)
        return g

    def step_scales(x):
        s = np.ones(m + 1)
        s[0] = max(abs(x[0]), 1.0)
        return s

    return metric, step_scales


def _cartesian_chart_metric(m, a_fn, b_fn):
    def metric(pts):
        pts = np.atleast_2d(pts)
        nf = m + 1
        g = np.zeros((pts.shape[0], nf, nf))
        u = np.linalg.norm(pts[:, :m], axis=1)
        av = a_fn(u)
        for i in range(m):
            g[:, i, i] = av
        g[:, m, m] = b_fn(u)
        return g

    return metric


def schwarzschild_family(params: SchwarzschildParams, chart: str = ISOTROPIC, center=None):
    """Schwarzschild as a metric family in the requested chart.

    ``center`` (isotropic chart only) displaces the center in base
    coordinates; the default is the origin.
    """
    n, gamma = params.n, params.gamma
    m = params.m
    nf = n
    model = ModelMetric(m, params.fiber_length, TrivialFlat())
    a, b, da, db = _schw_isotropic_fns(params)

    def radial_fn(r):
        w = 1.0 - (gamma / r) ** (n - 3)
        return 1.0 / w

    def fiber_fn(r):
        return 1.0 - (gamma / r) ** (n - 3)

    polar_metric, polar_scales = _sphere_chart_metric(m, radial_fn, fiber_fn)
    charts = (
        CoordinateChart("polar", nf, polar_metric, polar_scales),
        CoordinateChart("isotropic-cartesian", nf, _cartesian_chart_metric(m, a, b)),
    )

    if chart == ISOTROPIC:
        if center is None:
            fam = _diagonal_radial_family(
                model, (a, b, da, db), "schwarzschild", n - 3,
                {"n": n, "gamma": gamma, "chart": chart}, charts,
            )
            return fam
        center = np.asarray(center, dtype=float)

        def components(xs, ts):
            xs = np.atleast_2d(xs)
            u = np.linalg.norm(xs - center, axis=1)
            g = np.zeros((xs.shape[0], nf, nf))
            av = a(u)
            for i in range(m):
                g[:, i, i] = av
            g[:, m, m] = b(u)
            return g

        def frame_gradient(xs, ts):
            xs = np.atleast_2d(xs)
            rel = xs - center
            u = np.linalg.norm(rel, axis=1)
            uhat = rel / u[:, None]
            dg = np.zeros((xs.shape[0], nf, nf, nf))
            dav, dbv = da(u), db(u)
            for c in range(m):
                for i in range(m):
                    dg[:, c, i, i] = dav * uhat[:, c]
                dg[:, c, m, m] = dbv * uhat[:, c]
            return dg

        return MetricFamily(
            name="schwarzschild",
            model=model,
            decay_order=n - 3,
            components=components,
            frame_gradient=frame_gradient,
            charts=charts,
            params={"n": n, "gamma": gamma, "chart": chart, "center": tuple(center)},
        )

    if chart != AREA_RADIAL:
        raise DomainError(f"unknown Schwarzschild chart {chart!r}")

    def components(xs, ts):
        xs = np.atleast_2d(xs)
        r = _radii(xs)
        if np.any(r <= gamma):
            raise DomainError(
                f"area-radial chart is only valid outside the horizon radius {gamma}"
            )
        xhat = xs / r[:, None]
        w = fiber_fn(r)
        c_r = 1.0 / w - 1.0
        g = np.zeros((xs.shape[0], nf, nf))
        for i in range(m):
            g[:, i, i] = 1.0
        g[:, :m, :m] += c_r[:, None, None] * xhat[:, :, None] * xhat[:, None, :]
        g[:, m, m] = w
        return g

    def frame_gradient(xs, ts):
        xs = np.atleast_2d(xs)
        r = _radii(xs)
        if np.any(r <= gamma):
            raise DomainError(
                f"area-radial chart is only valid outside the horizon radius {gamma}"
            )
        xhat = xs / r[:, None]
        w = fiber_fn(r)
        dw = (n - 3) * gamma ** (n - 3) * r ** (2 - n)
        c_r = 1.0 / w - 1.0
        dc = -dw / w**2
        dg = np.zeros((xs.shape[0], nf, nf, nf))
        # d_k (xhat_i xhat_j) = [(delta_ki - xhat_k xhat_i) xhat_j + sym] / r
        eye = np.eye(m)
        proj = (eye[None, :, :] - xhat[:, :, None] * xhat[:, None, :]) / r[:, None, None]
        for c in range(m):
            dg[:, c, :m, :m] = (
                (dc * xhat[:, c])[:, None, None] * xhat[:, :, None] * xhat[:, None, :]
                + c_r[:, None, None]
                * (proj[:, c, :, None] * xhat[:, None, :] + xhat[:, :, None] * proj[:, c, None, :])
            )
            dg[:, c, m, m] = dw * xhat[:, c]
        return dg

    return MetricFamily(
        name="schwarzschild",
        model=model,
        decay_order=n - 3,
        components=components,
        frame_gradient=frame_gradient,
        charts=charts,
        params={"n": n, "gamma": gamma, "chart": chart},
    )


def schwarzschild_components(params: SchwarzschildParams, chart: str, p: FramePoint):
    """Frame components of the Schwarzschild metric at one point."""
    return schwarzschild_family(params, chart).components_at(p)


# ---------------------------------------------------------------------------
# Reissner-Nordstrom
# ---------------------------------------------------------------------------

def rn_isotropic_radius(params: ReissnerNordstromParams, u):
    """r = u [1 + m/u + (m^2 + q^2) / (4 u^2)]."""
    u = np.asarray(u, dtype=float)
    e = params.m_param**2 + params.q**2
    return u * (1.0 + params.m_param / u + e / (4.0 * u**2))


def _rn_isotropic_fns(params: ReissnerNordstromParams):
    mp, e = params.m_param, params.m_param**2 + params.q**2
    u_min = math.sqrt(e) / 2.0

    def check(u):
        if np.any(u <= u_min):
            raise DomainError(
                f"isotropic chart degenerates at u = {u_min:.6g} "
                f"(bolt radius {params.g0:.6g}); got a smaller radius"
            )

    def P(u):
        return 1.0 + mp / u + e / (4.0 * u**2)

    def dP(u):
        return -mp / u**2 - e / (2.0 * u**3)

    def N(u):
        return 1.0 - e / (4.0 * u**2)

    def dN(u):
        return e / (2.0 * u**3)

    def a(u):
        check(u)
        return P(u) ** 2

    def b(u):
        check(u)
        return (N(u) / P(u)) ** 2

    def da(u):
        check(u)
        return 2.0 * P(u) * dP(u)

    def db(u):
        check(u)
        psi = N(u) / P(u)
        dpsi = (dN(u) * P(u) - N(u) * dP(u)) / P(u) ** 2
        return 2.0 * psi * dpsi

    return a, b, da, db


def rn_family(params: ReissnerNordstromParams, chart: str = ISOTROPIC):
    m = 3
    nf = 4
    model = ModelMetric(m, params.fiber_length, TrivialFlat())
    mp, q = params.m_param, params.q
    g0 = params.g0
    a, b, da, db = _rn_isotropic_fns(params)

    def w_fn(r):
        return 1.0 - 2.0 * mp / r - q**2 / r**2

    polar_metric, polar_scales = _sphere_chart_metric(m, lambda r: 1.0 / w_fn(r), w_fn)
    charts = (
        CoordinateChart("polar", nf, polar_metric, polar_scales),
        CoordinateChart("isotropic-cartesian", nf, _cartesian_chart_metric(m, a, b)),
    )

    if chart == ISOTROPIC:
        return _diagonal_radial_family(
            model, (a, b, da, db), "reissner-nordstrom", 1,
            {"m_param": mp, "q": q, "chart": chart}, charts,
        )
    if chart != AREA_RADIAL:
        raise DomainError(f"unknown Reissner-Nordstrom chart {chart!r}")

    def components(xs, ts):
        xs = np.atleast_2d(xs)
        r = _radii(xs)
        if np.any(r <= g0):
            raise DomainError(f"area-radial chart is only valid outside r = G0 = {g0:.6g}")
        xhat = xs / r[:, None]
        w = w_fn(r)
        c_r = 1.0 / w - 1.0
        g = np.zeros((xs.shape[0], nf, nf))
        for i in range(m):
            g[:, i, i] = 1.0
        g[:, :m, :m] += c_r[:, None, None] * xhat[:, :, None] * xhat[:, None, :]
        g[:, m, m] = w
        return g

    def frame_gradient(xs, ts):
        xs = np.atleast_2d(xs)
        r = _radii(xs)
        if np.any(r <= g0):
            raise DomainError(f"area-radial chart is only valid outside r = G0 = {g0:.6g}")
        xhat = xs / r[:, None]
        w = w_fn(r)
        dw = 2.0 * mp / r**2 + 2.0 * q**2 / r**3
        c_r = 1.0 / w - 1.0
        dc = -dw / w**2
        dg = np.zeros((xs.shape[0], nf, nf, nf))
        eye = np.eye(m)
        proj = (eye[None, :, :] - xhat[:, :, None] * xhat[:, None, :]) / r[:, None, None]
        for c in range(m):
            dg[:, c, :m, :m] = (
                (dc * xhat[:, c])[:, None, None] * xhat[:, :, None] * xhat[:, None, :]
                + c_r[:, None, None]
                * (proj[:, c, :, None] * xhat[:, None, :] + xhat[:, :, None] * proj[:, c, None, :])
            )
            dg[:, c, m, m] = dw * xhat[:, c]
        return dg

    return MetricFamily(
        name="reissner-nordstrom",
        model=model,
        decay_order=1,
        components=components,
        frame_gradient=frame_gradient,
        charts=charts,
        params={"m_param": mp, "q": q, "chart": chart},
    )


def rn_components(params: ReissnerNordstromParams, p: FramePoint, chart: str = AREA_RADIAL):
    return rn_family(params, chart).components_at(p)


# ---------------------------------------------------------------------------
# Taub-NUT
# ---------------------------------------------------------------------------

def taubnut_family(params: TaubNutParams, fiber_length=None):
    """Taub-NUT asymptotics relative to the charge-k monopole model.

    Frame-diagonal: ``1 + 2km/r`` horizontally, its inverse on the fiber.
    The fiber length does not enter the mass (it cancels against the
    normalization); the default ``2 pi / k`` matches a unit-speed vertical
    field on the k-fold quotient and is recorded in the family parameters.
    """
    mp, k = params.m_param, params.k
    L = 2.0 * math.pi / k if fiber_length is None else fiber_length
    model = ModelMetric(3, L, Monopole(k))

    def V(r):
        return 1.0 + 2.0 * k * mp / r

    def dV(r):
        return -2.0 * k * mp / r**2

    def a(r):
        return V(r)

    def b(r):
        return 1.0 / V(r)

    def da(r):
        return dV(r)

    def db(r):
        return -dV(r) / V(r) ** 2

    def gh_metric(pts):
        # Gibbons-Hawking chart: V dx^2 + V^{-1} (dt + A)^2 with dA = -*dV,
        # in the two-patch gauge A = -2km (-y, x, 0) / (r (r +- z)).
        pts = np.atleast_2d(pts)
        xyz = pts[:, :3]
        r = np.linalg.norm(xyz, axis=1)
        v = V(r)
        x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
        north = z >= 0
        denom = np.where(north, r * (r + z), -r * (r - z))
        A = np.zeros_like(xyz)
        A[:, 0] = 2.0 * k * mp * y / denom
        A[:, 1] = -2.0 * k * mp * x / denom
        g = np.zeros((pts.shape[0], 4, 4))
        for i in range(3):
            g[:, i, i] = v
        g[:, :3, :3] += A[:, :, None] * A[:, None, :] / v[:, None, None]
        g[:, :3, 3] = A / v[:, None]
        g[:, 3, :3] = A / v[:, None]
        g[:, 3, 3] = 1.0 / v
        return g

    charts = (CoordinateChart("gibbons-hawking", 4, gh_metric),)
    return _diagonal_radial_family(
        model, (a, b, da, db), "taub-nut", 1,
        {"m_param": mp, "k": k, "fiber_length": L}, charts,
    )


def taubnut_components(params: TaubNutParams, p: FramePoint):
    return taubnut_family(params).components_at(p)


# ---------------------------------------------------------------------------
# warp profile
# ---------------------------------------------------------------------------

def warp_profile(params: SchwarzschildParams, rho_max, steps):
    """Integrate the radial warp G' = sqrt(1 - (gamma/G)^{n-3}), G(0) = gamma.

    The square-root degeneracy at the bolt is handled with the series start
    ``G = gamma + (n-3) rho^2 / (4 gamma)``; RK4 takes over after.  Returns
    a (steps+1, 2) table of (rho, G) beginning at (0, gamma).
    """
    if steps < 100:
        raise DomainError(f"warp profile needs at least 100 steps, got {steps}")
    n, gamma = params.n, params.gamma

    def rhs(G):
        val = 1.0 - (gamma / G) ** (n - 3)
        return math.sqrt(max(val, 0.0))

    rho0 = 1e-4 * gamma
    rho = np.linspace(rho0, rho_max, steps)
    h = rho[1] - rho[0]
    G = np.empty(steps)
    G[0] = gamma + (n - 3) * rho0**2 / (4.0 * gamma)
    for i in range(steps - 1):
        g = G[i]
        k1 = rhs(g)
        k2 = rhs(g + 0.5 * h * k1)
        k3 = rhs(g + 0.5 * h * k2)
        k4 = rhs(g + h * k3)
        G[i + 1] = g + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    table = np.column_stack([np.concatenate([[0.0], rho]), np.concatenate([[gamma], G])])
    if np.any(np.diff(table[:, 1]) < 0):
        raise NonConvergenceError(
            "warp profile integration lost monotonicity; refine the step size",
            table=table,
        )
    return table


# ---------------------------------------------------------------------------
# family registry (string-keyed; used by the CLI)
# ---------------------------------------------------------------------------

def _build_flat(params):
    m = int(params.get("m", 3))
    return flat_family(m=m, fiber_length=float(params.get("fiber_length", 2.0 * math.pi)))


def _build_schwarzschild(params):
    missing = [key for key in ("n", "gamma") if key not in params]
    if missing:
        raise DomainError(f"schwarzschild requires parameter {missing[0]!r}")
    return schwarzschild_family(
        SchwarzschildParams(int(params["n"]), float(params["gamma"])),
        chart=params.get("chart", ISOTROPIC),
    )


def _build_rn(params):
    missing = [key for key in ("mass_param", "charge") if key not in params]
    if missing:
        raise DomainError(f"reissner-nordstrom requires parameter {missing[0]!r}")
    return rn_family(
        ReissnerNordstromParams(float(params["mass_param"]), float(params["charge"])),
        chart=params.get("chart", ISOTROPIC),
    )


def _build_taubnut(params):
    if "mass_param" not in params:
        raise DomainError("taub-nut requires parameter 'mass_param'")
    return taubnut_family(
        TaubNutParams(float(params["mass_param"]), int(params.get("monopole_k", 1)))
    )


_REGISTRY = {
    "flat": _build_flat,
    "schwarzschild": _build_schwarzschild,
    "reissner-nordstrom": _build_rn,
    "taub-nut": _build_taubnut,
}

FAMILY_NAMES = tuple(sorted(_REGISTRY))


def build_family(name, params=None):
    """Construct a registered family from a plain parameter mapping."""
    if name not in _REGISTRY:
        raise DomainError(f"unknown family {name!r}; known: {', '.join(FAMILY_NAMES)}")
    return _REGISTRY[name](dict(params or {}))
