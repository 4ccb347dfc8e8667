"""Radial mode analysis: indicial data, inverses, norms, decay jumps."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import kv

from alfmass.errors import (
    DecayError,
    DegenerateInputError,
    DomainError,
    IllPosedWindowError,
    NumericError,
    ResolutionError,
    SamplingError,
)
from alfmass.modes import (
    RadialGrid,
    RadialProfile,
    annulus_partial_sums,
    classify_membership,
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
    inversion_residual,
    is_critical,
    radial_apply,
    solve_k_mode,
    sphere_eigenvalue,
    weighted_norm,
    zonal_values,
)
from helpers import random_interior_profile


# ---------------------------------------------------------------------------
# spectral data
# ---------------------------------------------------------------------------

def test_sphere_eigenvalues():
    assert sphere_eigenvalue(0, 3) == 0.0
    assert sphere_eigenvalue(1, 3) == 2.0
    assert sphere_eigenvalue(2, 5) == 10.0
    with pytest.raises(DomainError):
        sphere_eigenvalue(-1, 3)


def test_indicial_roots_values():
    assert indicial_roots(0, 3) == (0.0, -1.0)
    assert indicial_roots(1, 3) == (1.0, -2.0)
    assert indicial_roots(2, 5) == (2.0, -5.0)


@given(st.integers(0, 12), st.integers(3, 9))
@settings(max_examples=60, deadline=None)
def test_indicial_data_identities(j, m):
    d = indicial_data(j, m)
    assert d.nu_plus + d.nu_minus == 2 - m
    assert d.delta_j - 1 == (d.nu_plus - d.nu_minus) / 2
    assert d.lambda_j == d.nu_plus * (d.nu_plus + m - 2)
    assert d.critical_weights == (d.delta_j, 2 - d.delta_j)


def test_critical_set_values():
    cs = critical_set(3, 2)
    assert 1.5 in cs and 0.5 in cs and 2.5 in cs and -0.5 in cs
    assert is_critical(1.5, 3)
    assert is_critical(-1.0, 4)  # 2 - (m/2 + 1) with m = 4
    assert not is_critical(1.0, 3)
    assert not is_critical(2.0, 3)
    # midpoints between consecutive critical values are never critical
    cs = critical_set(5, 6)
    for a, b in zip(cs[:-1], cs[1:]):
        if b > a:
            assert not is_critical(0.5 * (a + b), 5)


def test_zonal_values_are_sphere_eigenfunctions():
    # -f'' - (m-2) cot(theta) f' = lambda_j f, via central differences
    theta = np.linspace(0.4, math.pi - 0.4, 2001)
    h = theta[1] - theta[0]
    for m in (3, 4, 5):
        for j in range(4):
            f = zonal_values(j, m, np.cos(theta))
            lap = -(f[2:] - 2 * f[1:-1] + f[:-2]) / h**2 - (m - 2) / np.tan(
                theta[1:-1]
            ) * (f[2:] - f[:-2]) / (2 * h)
            lam = sphere_eigenvalue(j, m)
            scale = np.max(np.abs(f)) * max(lam, 1.0)
            np.testing.assert_allclose(lap, lam * f[1:-1], atol=1e-5 * scale)


# ---------------------------------------------------------------------------
# fiber projection
# ---------------------------------------------------------------------------

def test_fiber_project_examples():
    t = np.arange(32) / 32.0
    assert fiber_mean(np.full(32, 4.2)) == pytest.approx(4.2)
    assert fiber_project(np.full(32, 4.2), 1) == pytest.approx((0.0, 0.0), abs=1e-14)
    assert fiber_mean(np.sin(2 * math.pi * t)) == pytest.approx(0.0, abs=1e-14)
    samples = 3.0 + np.cos(4 * math.pi * t)
    assert fiber_mean(samples) == pytest.approx(3.0)
    cos_amp, sin_amp = fiber_project(samples, 2)
    assert cos_amp == pytest.approx(1.0)
    assert sin_amp == pytest.approx(0.0, abs=1e-14)


def test_fiber_project_aliasing_guard():
    with pytest.raises(SamplingError):
        fiber_project(np.zeros(10), 2)  # needs 4k+4 = 12


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=6))
@settings(max_examples=50, deadline=None)
def test_fiber_projection_idempotent(coeffs):
    # projecting twice changes nothing; mean + complement reconstructs
    n = 64
    t = np.arange(n) / n
    samples = sum(
        c * np.cos(2 * math.pi * (k + 1) * t) for k, c in enumerate(coeffs)
    ) + 1.7
    mean = fiber_mean(samples)
    perp = samples - mean
    assert fiber_mean(np.full(n, mean)) == pytest.approx(mean, rel=1e-12, abs=1e-12)
    assert fiber_mean(perp) == pytest.approx(0.0, abs=1e-10)
    np.testing.assert_allclose(mean + perp, samples, rtol=0, atol=1e-12)


# ---------------------------------------------------------------------------
# radial operator
# ---------------------------------------------------------------------------

def test_radial_apply_annihilates_indicial_profiles():
    grid = default_grid()
    r = grid.r
    interior = slice(3, -3)
    for m in (3, 4, 5):
        for j in range(4):
            for nu in indicial_roots(j, m):
                prof = RadialProfile(grid, r**nu, mode=(j, 0))
                out = radial_apply(prof, m).values
                scale = np.max(np.abs(prof.values[interior] * r[interior] ** -2.0))
                assert np.max(np.abs(out[interior])) / scale < 1e-6, (m, j, nu)


def test_radial_apply_power_oracle():
    grid = default_grid()
    r = grid.r
    m, j, a = 4, 2, 0.7
    lam = sphere_eigenvalue(j, m)
    out = radial_apply(RadialProfile(grid, r**a), m, j, 0).values
    expect = (lam - a * (a + m - 2)) * r ** (a - 2)
    interior = slice(3, -3)
    np.testing.assert_allclose(out[interior], expect[interior], rtol=1e-9)


def test_radial_apply_fiber_mass_term():
    grid = default_grid()
    L = 3.0
    out = radial_apply(RadialProfile(grid, np.ones(grid.n_points)), 3, 0, 1, fiber_length=L)
    kap = 2 * math.pi / L
    interior = slice(3, -3)
    np.testing.assert_allclose(out.values[interior], kap**2, rtol=1e-12)


def test_radial_apply_convergence_order():
    # at least second order: quartering the residual under grid doubling
    m, j = 5, 3
    nu = indicial_roots(j, m)[1]
    errs = []
    for n in (512, 1024):
        grid = default_grid(n)
        r = grid.r
        out = radial_apply(RadialProfile(grid, r**nu, mode=(j, 0)), m).values
        interior = slice(3, -3)
        scale = np.max(np.abs(r[interior] ** (nu - 2.0)))
        errs.append(np.max(np.abs(out[interior])) / scale)
    assert errs[0] / errs[1] > 3.5


def test_radial_apply_rejects_coarse_grid():
    grid = RadialGrid(math.log(2.0), math.log(2048.0), 64)
    with pytest.raises(ResolutionError):
        radial_apply(RadialProfile(grid, np.ones(64)), 3)


# ---------------------------------------------------------------------------
# explicit right inverses
# ---------------------------------------------------------------------------

def test_green_mid_zero_source():
    grid = default_grid()
    u = green_mid(3, 0, RadialProfile(grid, np.zeros(grid.n_points)))
    assert np.all(u.values == 0.0)


def test_green_mid_inverts_and_vanishes_at_inner_edge():
    grid = default_grid()
    r = grid.r
    for m in (3, 4, 5):
        for j in range(4):
            f = RadialProfile(grid, r ** (0.3 - 2.0), mode=(j, 0))
            u = green_mid(m, j, f)
            assert u.values[0] == 0.0
            assert inversion_residual(u, f, m, j) < 1e-6, (m, j)


def test_green_mid_particular_solution_structure():
    # u minus r^a/(lambda_j - a(a+m-2)) is a combination of the two
    # homogeneous branches
    grid = default_grid()
    r = grid.r
    m, j, a = 3, 1, 0.3
    lam = sphere_eigenvalue(j, m)
    u = green_mid(m, j, RadialProfile(grid, r ** (a - 2.0))).values
    diff = u - r**a / (lam - a * (a + m - 2))
    nu_p, nu_m = indicial_roots(j, m)
    basis = np.column_stack([r**nu_p, r**nu_m])
    coef, *_ = np.linalg.lstsq(basis, diff, rcond=None)
    assert np.max(np.abs(diff - basis @ coef)) / np.max(np.abs(u)) < 1e-9


def test_green_outer_inverts_without_growth():
    grid = default_grid()
    s, r = grid.s, grid.r
    smid = 0.5 * (grid.s_min + grid.s_max)
    bump = np.exp(-((s - smid) ** 2) / (2 * 0.3**2))
    for m in (3, 4, 5):
        for j in range(4):
            f = RadialProfile(grid, bump, mode=(j, 0))
            u = green_outer(m, j, f)
            assert inversion_residual(u, f, m, j) < 1e-6, (m, j)
    # the growing branch is absent: fitted growth exponent < nu_plus - 0.5
    m, j = 3, 1
    u = green_outer(m, j, RadialProfile(grid, bump, mode=(j, 0)))
    tail = slice(-250, None)
    mask = np.abs(u.values[tail]) > 0
    slope = np.polyfit(np.log(r[tail][mask]), np.log(np.abs(u.values[tail][mask])), 1)[0]
    assert slope < indicial_roots(j, m)[0] - 0.5


def test_green_outer_zero_source():
    grid = default_grid()
    u = green_outer(4, 1, RadialProfile(grid, np.zeros(grid.n_points)))
    assert np.all(u.values == 0.0)


def test_green_outer_rejects_slow_decay():
    grid = default_grid()
    with pytest.raises(DecayError):
        green_outer(5, 3, RadialProfile(grid, grid.r ** (-2.0)))


# ---------------------------------------------------------------------------
# nonzero fiber modes
# ---------------------------------------------------------------------------

def _kmode_setup(k, fiber_length=2 * math.pi):
    grid = RadialGrid(math.log(2.0), math.log(64.0), 1024)
    s = grid.s
    fsrc = np.exp(-((s - math.log(4.0)) ** 2) / (2 * 0.15**2))
    return grid, RadialProfile(grid, fsrc, mode=(0, k))


def test_solve_k_mode_zero_source():
    grid, f = _kmode_setup(1)
    u = solve_k_mode(3, 0, 1, 2 * math.pi, RadialProfile(grid, np.zeros(grid.n_points)))
    assert np.all(u.values == 0.0)


def test_solve_k_mode_residual_and_bessel_tail():
    m, k, L = 3, 1, 2 * math.pi
    kap = 2 * math.pi * k / L
    grid, f = _kmode_setup(k, L)
    u = solve_k_mode(m, 0, k, L, f)
    assert u.info["residual"] < 1e-8
    # beyond the source the solution is proportional to the decaying
    # modified-Bessel profile r^{1-m/2} K_{m/2-1}(kappa r)
    r = grid.r
    oracle = r ** (1 - m / 2) * kv(m / 2 - 1, kap * r)
    lo, hi = np.searchsorted(r, 8.0), np.searchsorted(r, 25.0)
    ratio = u.values[lo:hi] / oracle[lo:hi]
    assert np.std(ratio) / abs(np.mean(ratio)) < 1e-3


def test_solve_k_mode_tail_slope_within_five_percent():
    m, k, L = 3, 2, 2 * math.pi
    kap = 2 * math.pi * k / L
    grid, f = _kmode_setup(k, L)
    u = solve_k_mode(m, 0, k, L, f)
    r = grid.r
    lo, hi = np.searchsorted(r, 10.0), np.searchsorted(r, 30.0)
    slope = np.polyfit(r[lo:hi], np.log(np.abs(u.values[lo:hi])), 1)[0]
    assert abs(slope + kap) / kap < 0.05


def test_solve_k_mode_rates_ordered():
    m, L = 3, 2 * math.pi
    grid, f = _kmode_setup(1, L)
    rates = []
    for k in (1, 2, 3):
        u = solve_k_mode(m, 0, k, L, RadialProfile(grid, f.values, mode=(0, k)))
        r = grid.r
        lo, hi = np.searchsorted(r, 6.0), np.searchsorted(r, 12.0)
        rates.append(np.polyfit(r[lo:hi], np.log(np.abs(u.values[lo:hi])), 1)[0])
    assert rates[0] > rates[1] > rates[2]


def test_solve_k_mode_requires_positive_k():
    grid, f = _kmode_setup(1)
    with pytest.raises(DomainError):
        solve_k_mode(3, 0, 0, 2 * math.pi, f)


# ---------------------------------------------------------------------------
# weighted norms and membership
# ---------------------------------------------------------------------------

def test_weighted_norm_zero_and_closed_form():
    # 1025 points put the dyadic radii exactly on grid nodes
    grid = default_grid(1025)
    assert weighted_norm(RadialProfile(grid, np.zeros(grid.n_points)), 1.0, 3) == 0.0
    # u = r^{-1}, m = 3, delta = 0: integrand r^{-2} r^{2} dr over [2, 64]
    prof = RadialProfile(grid, grid.r ** (-1.0))
    got = weighted_norm(prof, 0.0, 3, region=(2.0, 64.0), fiber_length=1.0)
    assert got == pytest.approx(math.sqrt(62.0), rel=1e-8)
    # k >= 1 modes carry the half Parseval factor
    prof_k = RadialProfile(grid, grid.r ** (-1.0), mode=(0, 2))
    got_k = weighted_norm(prof_k, 0.0, 3, region=(2.0, 64.0), fiber_length=1.0)
    assert got_k == pytest.approx(math.sqrt(31.0), rel=1e-8)


@pytest.mark.parametrize("m", [3, 4, 5])
def test_membership_grid(m):
    # r^a lies in the delta-weighted space iff delta > m/2 + a; 40 cases
    grid = default_grid()
    r = grid.r
    for a in (-3.0, -2.0, -1.0, 0.0, 1.0):
        prof = RadialProfile(grid, r**a)
        for off in (-1.5, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 1.5):
            delta = m / 2.0 + a + off
            member, slope = classify_membership(prof, delta, m)
            assert member == (delta > m / 2.0 + a), (a, off)


def test_membership_boundary_is_log_divergent():
    grid = default_grid()
    prof = RadialProfile(grid, grid.r ** (-1.0))
    member, slope = classify_membership(prof, 0.5, 3)  # delta = m/2 + a exactly
    assert not member
    assert abs(slope) < 0.02  # constant annulus mass up to node truncation
    sums = annulus_partial_sums(prof, 0.5, 3)
    assert sums.max() / sums.min() < 1.05


# ---------------------------------------------------------------------------
# Hardy ratio
# ---------------------------------------------------------------------------

def test_hardy_exponential_family_approaches_one():
    # long grid so the transition and truncation are negligible; the ratio
    # tracks (m-2 delta)^2 / (m - 2 delta + 2 eps)^2 from below and rises
    # toward 1 as eps shrinks
    grid = RadialGrid(math.log(2.0), 60 * math.log(2.0), 4096)
    m, delta = 3, 0.5
    beta = m - 2 * delta
    ratios = []
    for eps in (0.4, 0.2, 0.1):
        v = RadialProfile(grid, np.exp((-beta / 2.0 - eps) * grid.s))
        ratio = hardy_ratio(v, delta, m, cutoff=(grid.s[0] + 0.5, grid.s[0] + 1.5))
        pred = beta**2 / (beta + 2 * eps) ** 2
        assert ratio < 1.0
        assert ratio < pred
        assert pred - ratio < 0.12 * pred
        ratios.append(ratio)
    assert ratios == sorted(ratios)


def test_hardy_against_dense_analytic_oracle():
    # same data, derivative taken in closed form on an 8x denser grid
    from scipy.integrate import simpson

    grid = default_grid()
    m, delta = 4, 0.75
    beta = m - 2 * delta
    s0, s1 = grid.s[0] + 0.5, grid.s[0] + 1.5
    alpha = -beta / 2.0 - 0.3
    v = RadialProfile(grid, np.exp(alpha * grid.s))
    got = hardy_ratio(v, delta, m, cutoff=(s0, s1))

    sd = np.linspace(grid.s_min, grid.s_max, 8 * grid.n_points)
    x = np.clip((sd - s0) / (s1 - s0), 0.0, 1.0)
    chi = x**3 * (10 - 15 * x + 6 * x**2)
    dchi = np.where((sd > s0) & (sd < s1), (30 * x**2 - 60 * x**3 + 30 * x**4) / (s1 - s0), 0.0)
    w = chi * np.exp(alpha * sd)
    dw = dchi * np.exp(alpha * sd) + alpha * w
    mu = np.exp(beta * sd)
    oracle = 0.25 * beta**2 * simpson(w**2 * mu, x=sd) / simpson(dw**2 * mu, x=sd)
    assert got == pytest.approx(oracle, rel=1e-5)


def test_hardy_compact_bump_below_one():
    grid = default_grid()
    s = grid.s
    smid = 0.5 * (grid.s_min + grid.s_max)
    v = RadialProfile(grid, np.exp(-((s - smid) ** 2) / (2 * 0.5**2)))
    assert hardy_ratio(v, 1.0, 3, cutoff=(s[0] + 0.3, s[0] + 1.0)) < 1.0


def test_hardy_randomized_never_exceeds_one():
    grid = default_grid()
    rng = np.random.default_rng(42)
    count = 0
    while count < 100:
        v = RadialProfile(grid, random_interior_profile(rng, grid))
        delta = rng.uniform(-2.0, 3.5)
        m = int(rng.integers(3, 6))
        try:
            ratio = hardy_ratio(v, delta, m, cutoff=(grid.s[0] + 0.3, grid.s[0] + 1.0))
        except DegenerateInputError:
            continue
        assert ratio <= 1.0 + 1e-6
        count += 1


def test_hardy_degenerate_input():
    grid = default_grid()
    with pytest.raises(DegenerateInputError):
        hardy_ratio(
            RadialProfile(grid, np.zeros(grid.n_points)), 1.0, 3, cutoff=(1.0, 2.0)
        )


# ---------------------------------------------------------------------------
# decay-jump expansion
# ---------------------------------------------------------------------------

def test_decay_jump_recovers_decaying_branch():
    m = 3

    def field(xs, ts):
        r = np.linalg.norm(xs, axis=1)
        return 5.0 * r ** (2.0 - m)

    exp = decay_jump_expand(field, m, 1.6, 0.4, j_max=3)
    assert len(exp.coefficients) == 1
    j, sign, c = exp.coefficients[0]
    assert (j, sign) == (0, "-")
    assert c == pytest.approx(5.0, rel=1e-6)
    assert exp.remainder_rate == -math.inf


def test_decay_jump_recovers_growing_branch():
    m = 3

    def field(xs, ts):
        r = np.linalg.norm(xs, axis=1)
        return r * zonal_values(1, m, xs[:, 0] / r)

    exp = decay_jump_expand(field, m, 2.7, 2.2, j_max=3)
    assert [(j, s) for j, s, _ in exp.coefficients] == [(1, "+")]
    assert exp.coefficients[0][2] == pytest.approx(1.0, rel=1e-6)


def test_decay_jump_mixture_and_window_filtering():
    m = 3

    def field(xs, ts):
        r = np.linalg.norm(xs, axis=1)
        ct = xs[:, 0] / r
        return (
            5.0 * r ** (-1.0)
            + 0.25 * r * zonal_values(1, m, ct)
            + 2.0 * r ** (-3.0) * zonal_values(2, m, ct)
        )

    exp = decay_jump_expand(field, m, 2.7, 0.3, j_max=3)
    got = {(j, s): c for j, s, c in exp.coefficients}
    assert set(got) == {(0, "-"), (1, "+")}  # the j=2 branch is below the window
    assert got[(0, "-")] == pytest.approx(5.0, rel=1e-5)
    assert got[(1, "+")] == pytest.approx(0.25, rel=1e-5)


def test_decay_jump_pure_fiber_modes_yield_empty_expansion():
    m, L = 3, 2 * math.pi
    kap = 2 * math.pi / L

    def field(xs, ts):
        r = np.linalg.norm(xs, axis=1)
        w = r ** (1 - m / 2) * kv(m / 2 - 1, kap * r)
        return w * np.cos(2 * math.pi * ts / L)

    exp = decay_jump_expand(
        field, m, 1.6, 0.4, j_max=2, fiber_length=L, radii=(3.0, 6.0, 12.0, 24.0)
    )
    assert exp.coefficients == []
    assert exp.diagnostics["perp_exp_rate"] <= -kap * 0.95
    assert exp.remainder_rate < -6.0  # faster than any tested polynomial rate


def test_decay_jump_rejects_critical_window():
    def field(xs, ts):
        return np.linalg.norm(xs, axis=1) ** (-1.0)

    with pytest.raises(DomainError, match="critical"):
        decay_jump_expand(field, 3, 1.5, 0.4, j_max=2)


def test_decay_jump_rejects_non_harmonic_field():
    def field(xs, ts):
        return np.linalg.norm(xs, axis=1) ** (-0.77)

    with pytest.raises(NumericError, match="harmonic"):
        decay_jump_expand(field, 3, 1.6, 0.4, j_max=2)


def test_decay_jump_ill_posed_radii():
    def field(xs, ts):
        return np.linalg.norm(xs, axis=1) ** (-1.0)

    radii = tuple(8.0 * (1.0 + 1e-8 * i) for i in range(4))
    with pytest.raises(IllPosedWindowError):
        decay_jump_expand(field, 3, 1.6, 0.4, j_max=2, radii=radii, check_harmonic=False)


def test_decay_jump_serialization():
    def field(xs, ts):
        return 5.0 * np.linalg.norm(xs, axis=1) ** (-1.0)

    exp = decay_jump_expand(field, 3, 1.6, 0.4, j_max=1)
    doc = exp.to_json_dict()
    assert doc["modes"][0]["sign"] == "-"
    assert "remainder_rate" in doc
