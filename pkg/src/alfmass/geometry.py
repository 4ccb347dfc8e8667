"""Model metrics on exterior circle fibrations and their calculus.

The model metric lives on the total space of a principal circle fibration
over the exterior domain ``{r > 1}`` in R^m.  It is ``dx^2 + eta^2`` for a
connection one-form ``eta`` normalized so that ``eta(T) = 1`` on the unit
vertical field ``T``; fibers have constant length ``L``.  The adapted
orthonormal frame is ``(X_1, ..., X_m, T)`` and every tensor in this module
is expressed in that frame, in that order.

Two fibration types are supported: the trivial product (any ``m >= 3``,
flat connection) and, for ``m = 3``, a magnetic-monopole-type connection of
integer charge ``k`` whose curvature is ``k`` times the solid-angle two-form
(the pullback of the unit-sphere area form).  The monopole gauge potential
needs two coordinate patches; both are provided and callers never see the
patch seam.
"""

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
import scipy.linalg

from . import kernels
from .errors import DomainError, NumericError

__all__ = [
    "TrivialFlat",
    "Monopole",
    "ModelMetric",
    "FramePoint",
    "CoordinateChart",
    "MetricFamily",
    "frame_connection_coeffs",
    "connection_batch",
    "curvature_two_form",
    "monopole_potential",
    "covariant_derivative_metric",
    "covariant_derivative_batch",
    "plain_frame_gradient",
    "model_laplacian",
    "ricci_fd",
    "RicciResult",
]

# five-point, fourth-order central stencils (offsets in units of the step)
_D1_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_D1_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_D2_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
_D2_WEIGHTS = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


@dataclass(frozen=True)
class TrivialFlat:
    """Trivial fibration: flat connection, d(eta) = 0."""

    kind: str = "trivial"


@dataclass(frozen=True)
class Monopole:
    """Charge-k monopole connection over R^3 minus a ball.

    The curvature two-form is ``k`` times the solid-angle form, i.e. the
    pullback of the unit two-sphere area form under radial projection.
    """

    charge: int = 1
    kind: str = "hopf"

    def __post_init__(self):
        if self.charge < 1 or int(self.charge) != self.charge:
            raise DomainError(f"monopole charge must be a positive integer, got {self.charge}")


@dataclass(frozen=True)
class ModelMetric:
    """Asymptotic model: base dimension m, fiber length L, connection data."""

    base_dim: int
    fiber_length: float
    connection: object = field(default_factory=TrivialFlat)

    def __post_init__(self):
        if self.base_dim < 3:
            raise DomainError(f"base dimension must be >= 3, got {self.base_dim}")
        if not (self.fiber_length > 0):
            raise DomainError(f"fiber length must be positive, got {self.fiber_length}")
        if isinstance(self.connection, Monopole) and self.base_dim != 3:
            raise DomainError("monopole connections are only defined over a 3-dimensional base")

    @property
    def frame_dim(self) -> int:
        return self.base_dim + 1

    @property
    def is_trivial(self) -> bool:
        return isinstance(self.connection, TrivialFlat)


@dataclass
class FramePoint:
    """A point of the exterior total space: base coordinates plus fiber angle."""

    base: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        if self.base.ndim != 1:
            raise DomainError("base coordinates must be a flat vector")
        if not np.all(np.isfinite(self.base)):
            raise DomainError("base coordinates must be finite")
        if self.r <= 1.0:
            raise DomainError(f"point with r = {self.r} outside the exterior domain r > 1")

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.base))


@dataclass(frozen=True)
class CoordinateChart:
    """Coordinate components of a metric, for coordinate-based curvature.

    ``metric`` maps an ``(N, dim)`` array of coordinate points to the
    ``(N, dim, dim)`` array of metric components in those coordinates.
    ``step_scales``, when given, returns per-axis characteristic lengths
    used to scale finite-difference steps (e.g. ``r`` for a radial axis).
    """

    name: str
    dim: int
    metric: Callable[[np.ndarray], np.ndarray]
    step_scales: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True)
class MetricFamily:
    """An evaluatable metric asymptotic to a model at a declared rate.

    ``components(xs, ts)`` returns frame components ``g(e_a, e_b)`` for a
    batch of points, shape ``(N, m+1, m+1)``.  ``frame_gradient``, when
    present, returns the plain frame-directional derivatives
    ``e_c . g(e_a, e_b)`` with shape ``(N, m+1, m+1, m+1)`` indexed
    ``[node, c, a, b]``; covariant derivatives are assembled from it.
    ``decay_order`` is the ``a`` in ``g - h = O(r^-a)``.
    """

    name: str
    model: ModelMetric
    decay_order: float
    components: Callable[[np.ndarray, np.ndarray], np.ndarray]
    frame_gradient: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    charts: tuple = ()
    params: Mapping = field(default_factory=dict)

    def chart(self, name: str) -> CoordinateChart:
        for ch in self.charts:
            if ch.name == name:
                return ch
        raise DomainError(f"family {self.name!r} has no chart named {name!r}")

    def components_at(self, p: FramePoint) -> np.ndarray:
        return self.components(p.base[None, :], np.array([p.t]))[0]


# ---------------------------------------------------------------------------
# connection data
# ---------------------------------------------------------------------------

def curvature_two_form(model: ModelMetric, xs: np.ndarray) -> np.ndarray:
    """Frame components ``d(eta)(X_i, X_j)`` at base points ``xs`` (N, m)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    n_pts, m = xs.shape
    omega = np.zeros((n_pts, m, m))
    if isinstance(model.connection, Monopole):
        k = float(model.connection.charge)
        r3 = np.linalg.norm(xs, axis=1) ** 3
        f = k * xs / r3[:, None]
        # omega_ij = k eps_{ijl} x_l / r^3
        omega[:, 0, 1] = f[:, 2]
        omega[:, 1, 0] = -f[:, 2]
        omega[:, 1, 2] = f[:, 0]
        omega[:, 2, 1] = -f[:, 0]
        omega[:, 2, 0] = f[:, 1]
        omega[:, 0, 2] = -f[:, 1]
    return omega


def monopole_potential(model: ModelMetric, xs: np.ndarray) -> np.ndarray:
    """Gauge potential A with dA equal to the connection curvature.

    Two patches, switched at the equator: for ``z >= 0`` the potential
    ``k (1 - z/r) d(phi)`` (singular only on the negative z-axis), written
    in the cancellation-free form ``k (-y, x, 0) / (r (r + z))``; for
    ``z < 0`` its southern counterpart.  Points never need the patch they
    are singular on, so no seam error can reach the caller.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    n_pts, m = xs.shape
    A = np.zeros((n_pts, m))
    if isinstance(model.connection, TrivialFlat):
        return A
    k = float(model.connection.charge)
    x, y, z = xs[:, 0], xs[:, 1], xs[:, 2]
    r = np.linalg.norm(xs, axis=1)
    north = z >= 0
    denom = np.where(north, r * (r + z), -r * (r - z))
    A[:, 0] = -k * y / denom
    A[:, 1] = k * x / denom
    return A


def connection_batch(model: ModelMetric, xs: np.ndarray) -> np.ndarray:
    """Connection coefficients ``Gamma[a, b, c] = h(nabla_{e_a} e_b, e_c)``.

    Only three slots are populated: ``Gamma(X_i, T, X_j) = Gamma(T, X_i, X_j)
    = -Gamma(X_i, X_j, T) = d(eta)(X_i, X_j) / 2``.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    n_pts, m = xs.shape
    nf = m + 1
    r = np.linalg.norm(xs, axis=1)
    if np.any(r <= 1.0):
        raise DomainError("connection coefficients requested at r <= 1")
    gamma = np.zeros((n_pts, nf, nf, nf))
    if isinstance(model.connection, Monopole):
        half = 0.5 * curvature_two_form(model, xs)
        gamma[:, :m, m, :m] = half  # Gamma[i, T, j]
        gamma[:, m, :m, :m] = half  # Gamma[T, i, j]
        gamma[:, :m, :m, m] = -half  # Gamma[i, j, T]
    return gamma


def frame_connection_coeffs(model: ModelMetric, p: FramePoint) -> np.ndarray:
    """Connection coefficients of the model at a single point, (m+1)^3."""
    if p.base.shape[0] != model.base_dim:
        raise DomainError("point dimension does not match the model base dimension")
    return connection_batch(model, p.base[None, :])[0]


# ---------------------------------------------------------------------------
# covariant derivative of a metric family
# ---------------------------------------------------------------------------

def _default_step(r):
    return 1e-4 * np.maximum(r, 1.0)


def plain_frame_gradient(model, family, xs, ts, step_scale=1e-4):
    """Plain frame derivatives ``e_c . g(e_a, e_b)`` by central differences.

    Steps along ``X_i`` displace the base by ``+-h e_i`` and the fiber angle
    by ``-+ h A_i`` (the horizontal lift in the working gauge); steps along
    ``T`` displace the fiber angle only.  Returns ``(N, n, n, n)`` indexed
    ``[node, c, a, b]`` together with the steps used.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    n_pts, m = xs.shape
    nf = m + 1
    ts = np.zeros(n_pts) if ts is None else np.asarray(ts, dtype=float)
    r = np.linalg.norm(xs, axis=1)
    h = step_scale * np.maximum(r, 1.0)
    A = monopole_potential(model, xs)

    xs_all = np.empty((2 * nf, n_pts, m))
    ts_all = np.empty((2 * nf, n_pts))
    for c in range(m):
        offset = np.zeros((n_pts, m))
        offset[:, c] = h
        xs_all[2 * c] = xs + offset
        xs_all[2 * c + 1] = xs - offset
        ts_all[2 * c] = ts - h * A[:, c]
        ts_all[2 * c + 1] = ts + h * A[:, c]
    xs_all[2 * m] = xs
    xs_all[2 * m + 1] = xs
    ts_all[2 * m] = ts + h
    ts_all[2 * m + 1] = ts - h

    vals = family.components(xs_all.reshape(-1, m), ts_all.reshape(-1))
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        raise NumericError(
            f"non-finite metric value near base point {xs_all.reshape(-1, m)[bad[0]]}"
        )
    vals = vals.reshape(2 * nf, n_pts, nf, nf)
    dg = (vals[0::2] - vals[1::2]) / (2.0 * h[None, :, None, None])
    return np.ascontiguousarray(np.transpose(dg, (1, 0, 2, 3))), h


def covariant_derivative_batch(model, family, xs, ts=None, step_scale=1e-4, use_exact=True):
    """Covariant derivative (nabla^h g) for a batch of points.

    Uses the family's closed-form frame gradient when available (and
    requested), otherwise central differences.  Returns ``(N, n, n, n)``
    indexed ``[node, a, b, c] = (nabla_{e_c} g)(e_a, e_b)``.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    n_pts = xs.shape[0]
    ts = np.zeros(n_pts) if ts is None else np.asarray(ts, dtype=float)
    g0 = family.components(xs, ts)
    gamma = connection_batch(model, xs)
    if use_exact and family.frame_gradient is not None:
        dg = family.frame_gradient(xs, ts)
    else:
        dg, _ = plain_frame_gradient(model, family, xs, ts, step_scale)
    return kernels.cov_deriv_batch(dg, g0, gamma)


def covariant_derivative_metric(model, family, p: FramePoint, step=None):
    """Covariant derivative tensor at one point, with FD/exact cross-check.

    Always evaluates the central-difference value; if the family carries a
    closed-form gradient the two are compared (a mismatch beyond the
    truncation scale raises ``NumericError``) and the closed form is
    returned.
    """
    step_scale = 1e-4 if step is None else step / max(p.r, 1.0)
    if step is not None and not (step > 0):
        raise DomainError(f"step must be positive, got {step}")
    xs = p.base[None, :]
    ts = np.array([p.t])
    fd = covariant_derivative_batch(model, family, xs, ts, step_scale, use_exact=False)[0]
    if family.frame_gradient is None:
        return fd
    exact = covariant_derivative_batch(model, family, xs, ts, use_exact=True)[0]
    scale = max(1.0, float(np.max(np.abs(exact))))
    h = step_scale * max(p.r, 1.0)
    tol = 1e3 * h**2 * scale + 1e-9
    if np.max(np.abs(fd - exact)) > tol:
        raise NumericError(
            f"finite-difference covariant derivative disagrees with the closed form "
            f"at base point {p.base} (max diff {np.max(np.abs(fd - exact)):.3e})"
        )
    return exact


# ---------------------------------------------------------------------------
# model Laplacian
# ---------------------------------------------------------------------------

def model_laplacian(model, u, p: FramePoint, step=None):
    """Nonnegative model Laplacian of a scalar sampler at one point.

    In gauge coordinates (x, t) with eta = dt + A_k dx_k, the operator is
    ``-d_kk - d_tt + 2 A_k d_kt - A_k^2 d_tt + (d_k A_k) d_t`` (sum over k),
    realized with fourth-order central stencils.  ``u`` must accept batched
    ``(xs, ts)`` arrays.
    """
    m = model.base_dim
    x0, t0 = p.base, p.t
    h = _default_step(p.r) if step is None else float(step)
    if not (h > 0) or np.any(x0 + h == x0):
        raise NumericError(f"step {h} underflows at base point {x0}")

    A = monopole_potential(model, x0[None, :])[0]
    # div A by fourth-order differences of the potential
    div_a = 0.0
    if not model.is_trivial:
        for k_ax in range(m):
            pts = np.repeat(x0[None, :], 4, axis=0)
            pts[:, k_ax] += _D1_OFFSETS * h
            div_a += float(_D1_WEIGHTS @ monopole_potential(model, pts)[:, k_ax]) / h

    # assemble the full set of sample points in one batch
    pts = [x0[None, :]]
    tvals = [np.array([t0])]
    for k_ax in range(m):
        block = np.repeat(x0[None, :], 5, axis=0)
        block[:, k_ax] += _D2_OFFSETS * h
        pts.append(block)
        tvals.append(np.full(5, t0))
    pts.append(np.repeat(x0[None, :], 5, axis=0))
    tvals.append(t0 + _D2_OFFSETS * h)
    if not model.is_trivial:
        for k_ax in range(m):
            block = np.repeat(x0[None, :], 16, axis=0)
            ox, ot = np.meshgrid(_D1_OFFSETS, _D1_OFFSETS, indexing="ij")
            block[:, k_ax] += ox.ravel() * h
            pts.append(block)
            tvals.append(t0 + ot.ravel() * h)
    all_pts = np.concatenate(pts, axis=0)
    all_ts = np.concatenate(tvals)
    vals = np.asarray(u(all_pts, all_ts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericError("non-finite scalar sample in Laplacian stencil")

    idx = 1
    lap = 0.0
    inv_h2 = 1.0 / (h * h)
    for k_ax in range(m):
        lap -= float(_D2_WEIGHTS @ vals[idx : idx + 5]) * inv_h2
        idx += 5
    d2t = float(_D2_WEIGHTS @ vals[idx : idx + 5]) * inv_h2
    idx += 5
    a_sq = float(A @ A)
    lap -= (1.0 + a_sq) * d2t
    if not model.is_trivial:
        # cross derivatives d_k d_t u
        for k_ax in range(m):
            block = vals[idx : idx + 16].reshape(4, 4)
            cross = float(_D1_WEIGHTS @ block @ _D1_WEIGHTS) * inv_h2
            lap += 2.0 * A[k_ax] * cross
            idx += 16
        # first t-derivative from the 5-point block above
        d1t_weights = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
        d1t = float(d1t_weights @ vals[1 + 5 * m : 1 + 5 * m + 5]) / h
        lap += div_a * d1t
    return lap


# ---------------------------------------------------------------------------
# coordinate curvature by finite differences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RicciResult:
    ricci: np.ndarray
    metric: np.ndarray
    eigenvalues: np.ndarray
    scalar: float


def _coordinate_derivs(chart: CoordinateChart, x, h_vec):
    """Metric, first and second coordinate derivatives at x, all by FD."""
    n = chart.dim
    pts = [x[None, :]]
    for mu in range(n):
        for sgn in (+1.0, -1.0):
            q = x.copy()
            q[mu] += sgn * h_vec[mu]
            pts.append(q[None, :])
    for mu in range(n):
        for nu in range(mu + 1, n):
            for s1 in (+1.0, -1.0):
                for s2 in (+1.0, -1.0):
                    q = x.copy()
                    q[mu] += s1 * h_vec[mu]
                    q[nu] += s2 * h_vec[nu]
                    pts.append(q[None, :])
    vals = chart.metric(np.concatenate(pts, axis=0))
    if not np.all(np.isfinite(vals)):
        raise NumericError(f"non-finite metric components near coordinates {x}")
    g0 = vals[0]
    dg = np.empty((n, n, n))
    ddg = np.empty((n, n, n, n))
    i = 1
    for mu in range(n):
        gp, gm = vals[i], vals[i + 1]
        i += 2
        dg[mu] = (gp - gm) / (2.0 * h_vec[mu])
        ddg[mu, mu] = (gp - 2.0 * g0 + gm) / h_vec[mu] ** 2
    for mu in range(n):
        for nu in range(mu + 1, n):
            gpp, gpm, gmp, gmm = vals[i], vals[i + 1], vals[i + 2], vals[i + 3]
            i += 4
            cross = (gpp - gpm - gmp + gmm) / (4.0 * h_vec[mu] * h_vec[nu])
            ddg[mu, nu] = cross
            ddg[nu, mu] = cross
    return g0, dg, ddg


def ricci_fd(family, chart, point, step=None):
    """Ricci tensor of a coordinate chart at a point, Richardson-improved.

    ``chart`` is a chart name of the family or a ``CoordinateChart``.
    Central second differences at steps h and h/2 are combined as
    ``(4 R_{h/2} - R_h)/3``, giving O(h^4) truncation.  Returns a
    ``RicciResult`` with the Ricci components, the metric, the eigenvalues
    of the Ricci endomorphism, and the scalar curvature.
    """
    if isinstance(chart, str):
        chart = family.chart(chart)
    x = np.asarray(point, dtype=float)
    if x.shape != (chart.dim,):
        raise DomainError(f"point must have {chart.dim} coordinates for chart {chart.name!r}")
    if chart.step_scales is not None:
        scales = np.asarray(chart.step_scales(x), dtype=float)
    else:
        scales = np.maximum(np.abs(x), 1.0)
    h_vec = (1e-4 if step is None else float(step)) * scales

    g0 = chart.metric(x[None, :])[0]
    cond = np.linalg.cond(g0)
    if not np.isfinite(cond) or cond > 1e12:
        raise DomainError(f"singular metric matrix at coordinates {x}")

    out = []
    for hh in (h_vec, 0.5 * h_vec):
        g, dg, ddg = _coordinate_derivs(chart, x, hh)
        out.append(np.asarray(kernels.ricci_from_derivs(g, dg, ddg)))
    ric = (4.0 * out[1] - out[0]) / 3.0
    ric = 0.5 * (ric + ric.T)
    eigvals = np.sort(scipy.linalg.eigh(ric, g0)[0])
    scalar = float(np.trace(np.linalg.solve(g0, ric)))
    return RicciResult(ricci=ric, metric=g0, eigenvalues=eigvals, scalar=scalar)
