"""Kernel-level checks: deterministic reduction, dual-build agreement."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alfmass import kernels
from alfmass._accel import NUMBA_AVAILABLE


@given(st.lists(st.floats(-1e12, 1e12, allow_nan=False), max_size=200))
@settings(max_examples=80, deadline=None)
def test_pairwise_sum_matches_fsum(values):
    got = kernels.pairwise_sum_numpy(np.asarray(values, dtype=float))
    want = math.fsum(values)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-3)


def test_pairwise_sum_deterministic():
    rng = np.random.default_rng(3)
    x = rng.normal(size=12345)
    assert kernels.pairwise_sum(x) == kernels.pairwise_sum(x.copy())


def test_pairwise_sum_empty_and_single():
    assert kernels.pairwise_sum_numpy(np.array([])) == 0.0
    assert kernels.pairwise_sum_numpy(np.array([2.5])) == 2.5


@pytest.mark.skipif(not NUMBA_AVAILABLE, reason="numba not importable")
def test_dual_builds_agree():
    rng = np.random.default_rng(11)
    n_pts, nf = 37, 4
    g0 = rng.normal(size=(n_pts, nf, nf))
    g0 = g0 + np.transpose(g0, (0, 2, 1)) + 4.0 * np.eye(nf)
    dg = rng.normal(size=(n_pts, nf, nf, nf))
    dg = dg + np.transpose(dg, (0, 1, 3, 2))
    gamma = rng.normal(size=(n_pts, nf, nf, nf)) * 0.1
    xhat = rng.normal(size=(n_pts, nf - 1))
    xhat /= np.linalg.norm(xhat, axis=1, keepdims=True)
    coeffs = rng.normal(size=nf - 1)

    x = rng.normal(size=1001)
    assert kernels.pairwise_sum_numba(x) == pytest.approx(
        kernels.pairwise_sum_numpy(x), rel=1e-15
    )

    covg_a = kernels.cov_deriv_batch_numba(dg, g0, gamma)
    covg_b = kernels.cov_deriv_batch_numpy(dg, g0, gamma)
    np.testing.assert_allclose(covg_a, covg_b, rtol=1e-12, atol=1e-12)

    gb_a, di_a = kernels.mass_integrands_numba(covg_a, g0, gamma, xhat)
    gb_b, di_b = kernels.mass_integrands_numpy(covg_a, g0, gamma, xhat)
    np.testing.assert_allclose(gb_a, gb_b, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(di_a, di_b, rtol=1e-12, atol=1e-12)

    q_a = kernels.qform_radial_numba(covg_a, g0, gamma, xhat, coeffs)
    q_b = kernels.qform_radial_numpy(covg_a, g0, gamma, xhat, coeffs)
    np.testing.assert_allclose(q_a, q_b, rtol=1e-12, atol=1e-12)

    s_a = kernels.simplified_gb_numba(np.ascontiguousarray(dg), xhat)
    s_b = kernels.simplified_gb_numpy(dg, xhat)
    np.testing.assert_allclose(s_a, s_b, rtol=1e-12, atol=1e-12)

    g = g0[0]
    ddg = rng.normal(size=(nf, nf, nf, nf))
    ddg = ddg + np.transpose(ddg, (1, 0, 2, 3))
    ddg = ddg + np.transpose(ddg, (0, 1, 3, 2))
    r_a = kernels.ricci_from_derivs_numba(g, dg[0], ddg)
    r_b = kernels.ricci_from_derivs_numpy(g, dg[0], ddg)
    np.testing.assert_allclose(r_a, r_b, rtol=1e-10, atol=1e-10)


def test_qform_trace_is_gb_integrand():
    # summing the quadratic-form integrand over the frame directions must
    # reproduce the scalar integrand exactly, connection terms included
    rng = np.random.default_rng(5)
    n_pts, nf = 23, 4
    m = nf - 1
    g0 = rng.normal(size=(n_pts, nf, nf)) * 0.1
    g0 = g0 + np.transpose(g0, (0, 2, 1)) + 2.0 * np.eye(nf)
    dg = rng.normal(size=(n_pts, nf, nf, nf))
    dg = dg + np.transpose(dg, (0, 1, 3, 2))
    gamma = np.zeros((n_pts, nf, nf, nf))
    om = rng.normal(size=(n_pts, m, m))
    om = om - np.transpose(om, (0, 2, 1))
    gamma[:, :m, m, :m] = 0.5 * om
    gamma[:, m, :m, :m] = 0.5 * om
    gamma[:, :m, :m, m] = -0.5 * om
    xhat = rng.normal(size=(n_pts, m))
    xhat /= np.linalg.norm(xhat, axis=1, keepdims=True)
    covg = kernels.cov_deriv_batch(dg, g0, gamma)
    gb, _ = kernels.mass_integrands(covg, g0, gamma, xhat)
    total = np.zeros(n_pts)
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        total += kernels.qform_radial(covg, g0, gamma, xhat, e)
    np.testing.assert_allclose(total, gb, rtol=1e-11, atol=1e-11)
