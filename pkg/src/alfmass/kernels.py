"""Hot numeric kernels with numba and pure-numpy builds.

Frame-tensor index conventions used throughout:

* the adapted orthonormal frame is ordered ``(X_1, ..., X_m, T)``, so frame
  index ``m`` (0-based) is the fiber direction;
* ``gamma[c, a, d]`` is the connection coefficient ``h(nabla_{e_c} e_a, e_d)``;
* ``covg[a, b, c]`` is the covariant derivative ``(nabla_{e_c} g)(e_a, e_b)``;
* ``dg[c, a, b]`` is the plain directional derivative ``e_c . g(e_a, e_b)``.

The divergence of a symmetric 2-tensor follows the codifferential sign,
``(div g)(X) = -sum_a (nabla_{e_a} g)(e_a, X)``, which is the convention
that makes the boundary-integral mass of the Euclidean Schwarzschild
metric positive.

Each public kernel is exported under its bare name, bound to either the
``*_numba`` or the ``*_numpy`` build according to :mod:`alfmass._accel`.
Both builds remain importable for benchmarking; they implement the same
reduction orders, so results agree to the last few ulps.
"""

import numpy as np

from ._accel import NUMBA_AVAILABLE, NUMBA_ENABLED, njit

__all__ = [
    "pairwise_sum",
    "cov_deriv_batch",
    "mass_integrands",
    "qform_radial",
    "simplified_gb",
    "ricci_from_derivs",
    "ACTIVE_BUILD",
]


# ---------------------------------------------------------------------------
# pure-numpy builds
# ---------------------------------------------------------------------------

def pairwise_sum_numpy(values):
    """Sum in a fixed pairwise order, independent of BLAS/numpy internals.

    Adjacent elements are added level by level (odd tail carried through),
    so the result is bit-reproducible for a given input length.
    """
    x = np.ascontiguousarray(values, dtype=np.float64).ravel().copy()
    n = x.size
    if n == 0:
        return 0.0
    while n > 1:
        half = n // 2
        y = x[0 : 2 * half : 2] + x[1 : 2 * half : 2]
        if n % 2:
            y = np.append(y, x[n - 1])
        x = y
        n = x.size
    return float(x[0])


def cov_deriv_batch_numpy(dgplain, g0, gamma):
    """Covariant derivative of the metric at a batch of points.

    ``dgplain[n, c, a, b]`` holds the plain directional derivative
    ``e_c . g(e_a, e_b)`` (from central differences or a closed form); the
    connection corrections ``-gamma[c,a,d] g(d,b) - gamma[c,b,d] g(a,d)``
    complete it to the covariant derivative.

    Returns ``covg`` of shape ``(N, n, n, n)`` indexed ``[node, a, b, c]``.
    """
    corr = np.einsum("ncad,ndb->ncab", gamma, g0)
    corr += np.einsum("ncbd,nad->ncab", gamma, g0)
    return np.ascontiguousarray(np.transpose(dgplain - corr, (0, 2, 3, 1)))


def mass_integrands_numpy(covg, g0, gamma, xhat):
    """Radial components of the two mass one-forms at a batch of points.

    Both are components along the unit radial direction ``sum_i xhat_i X_i``:

    * ``gb``    = -(div g + d tr g - 1/2 d g(T,T))(e_r)
    * ``dirac`` = -(div g + d tr g)(e_r)

    where d g(T,T) is the plain differential of the scalar g(T,T), expanded
    through covg and the connection.
    """
    nf = g0.shape[1]
    m = nf - 1
    div = -np.einsum("nada->nd", covg)
    dtr = np.einsum("naac->nc", covg)
    dgtt = covg[:, m, m, :] + 2.0 * np.einsum("ncd,nd->nc", gamma[:, :, m, :], g0[:, :, m])
    base = div + dtr
    dirac = -np.einsum("ni,ni->n", base[:, :m], xhat)
    gb = -np.einsum("ni,ni->n", (base - 0.5 * dgtt)[:, :m], xhat)
    return gb, dirac


def qform_radial_numpy(covg, g0, gamma, xhat, coeffs):
    """Radial component of the mass one-form for Z = sum_i coeffs[i] X_i.

    Evaluates -(div g)(Z) h(Z, e_r) - 1/2 [ (d tr g)(Z) h(Z, e_r)
    + (d g(Z,Z))(e_r) ] per node.
    """
    nf = g0.shape[1]
    m = nf - 1
    div = -np.einsum("nada->nd", covg)
    dtr = np.einsum("naac->nc", covg)
    cz = xhat @ coeffs
    divz = div[:, :m] @ coeffs
    dtrz = dtr[:, :m] @ coeffs
    # e_r . g(Z,Z) = c_i c_j [ covg[i,j,r] + 2 gamma[r,i,d] g(d,j) ]
    covg_r = np.einsum("nijk,nk->nij", covg[:, :m, :m, :m], xhat)
    gamma_r = np.einsum("nkad,nk->nad", gamma[:, :m, :, :], xhat)
    corr = 2.0 * np.einsum("nid,ndj->nij", gamma_r[:, :m, :], g0[:, :, :m])
    dgzz = np.einsum("nij,i,j->n", covg_r + corr, coeffs, coeffs)
    return -divz * cz - 0.5 * (dtrz * cz + dgzz)


def simplified_gb_numpy(dgplain, xhat):
    """Simplified boundary-mass integrand built from plain frame derivatives.

    ``sum_i xhat_i [ sum_j X_j.g(X_i,X_j) - X_i.(sum_j g(X_j,X_j)) ]
    - 1/2 sum_k xhat_k X_k.g(T,T)`` with horizontal sums only.  This drops
    the vertical-derivative term of the full integrand; the two boundary
    integrals converge to the same limit.
    """
    nf = dgplain.shape[1]
    m = nf - 1
    term1 = np.einsum("njij->ni", dgplain[:, :m, :m, :m])
    term2 = np.einsum("nijj->ni", dgplain[:, :m, :m, :m])
    dgtt = dgplain[:, :m, m, m]
    return np.einsum("ni,ni->n", term1 - term2 - 0.5 * dgtt, xhat)


def ricci_from_derivs_numpy(g, dg, ddg):
    """Ricci tensor from metric value and its first/second derivatives.

    ``dg[mu, a, b] = d_mu g_ab`` and ``ddg[mu, nu, a, b] = d_mu d_nu g_ab``
    in a coordinate chart.  Standard convention: the round sphere has
    positive Ricci.
    """
    ginv = np.linalg.inv(g)
    # brace[mu, nu, lam] = dg[mu,nu,lam] + dg[nu,mu,lam] - dg[lam,mu,nu]
    brace = (
        dg + np.einsum("nml->mnl", dg) - np.einsum("lmn->mnl", dg)
    )
    gam = 0.5 * np.einsum("rl,mnl->rmn", ginv, brace)
    dginv = -np.einsum("ra,mab,bl->mrl", ginv, dg, ginv)
    # dbrace[sig, mu, nu, lam] = d_sig brace[mu, nu, lam]
    dbrace = (
        ddg + np.einsum("snml->smnl", ddg) - np.einsum("slmn->smnl", ddg)
    )
    dgam = 0.5 * (
        np.einsum("srl,mnl->srmn", dginv, brace) + np.einsum("rl,smnl->srmn", ginv, dbrace)
    )
    ric = (
        np.einsum("rrmn->mn", dgam)
        - np.einsum("nrrm->mn", dgam)
        + np.einsum("rrl,lmn->mn", gam, gam)
        - np.einsum("rnl,lrm->mn", gam, gam)
    )
    return ric


# ---------------------------------------------------------------------------
# numba builds
# ---------------------------------------------------------------------------

if NUMBA_AVAILABLE:

    @njit(cache=True)
    def pairwise_sum_numba(values):
        x = values.ravel().copy().astype(np.float64)
        n = x.size
        if n == 0:
            return 0.0
        while n > 1:
            half = n // 2
            for i in range(half):
                x[i] = x[2 * i] + x[2 * i + 1]
            if n % 2:
                x[half] = x[n - 1]
                n = half + 1
            else:
                n = half
        return x[0]

    @njit(cache=True)
    def cov_deriv_batch_numba(dgplain, g0, gamma):
        npts, nf = g0.shape[0], g0.shape[1]
        covg = np.empty((npts, nf, nf, nf))
        for n in range(npts):
            for c in range(nf):
                for a in range(nf):
                    for b in range(nf):
                        val = dgplain[n, c, a, b]
                        for d in range(nf):
                            val -= gamma[n, c, a, d] * g0[n, d, b]
                            val -= gamma[n, c, b, d] * g0[n, a, d]
                        covg[n, a, b, c] = val
        return covg

    @njit(cache=True)
    def mass_integrands_numba(covg, g0, gamma, xhat):
        npts, nf = g0.shape[0], g0.shape[1]
        m = nf - 1
        gb = np.empty(npts)
        dirac = np.empty(npts)
        for n in range(npts):
            acc_gb = 0.0
            acc_d = 0.0
            for i in range(m):
                div_i = 0.0
                dtr_i = 0.0
                for a in range(nf):
                    div_i -= covg[n, a, i, a]
                    dtr_i += covg[n, a, a, i]
                dgtt_i = covg[n, m, m, i]
                for d in range(nf):
                    dgtt_i += 2.0 * gamma[n, i, m, d] * g0[n, d, m]
                acc_d += (div_i + dtr_i) * xhat[n, i]
                acc_gb += (div_i + dtr_i - 0.5 * dgtt_i) * xhat[n, i]
            gb[n] = -acc_gb
            dirac[n] = -acc_d
        return gb, dirac

    @njit(cache=True)
    def qform_radial_numba(covg, g0, gamma, xhat, coeffs):
        npts, nf = g0.shape[0], g0.shape[1]
        m = nf - 1
        out = np.empty(npts)
        for n in range(npts):
            cz = 0.0
            for i in range(m):
                cz += coeffs[i] * xhat[n, i]
            divz = 0.0
            dtrz = 0.0
            for d in range(m):
                div_d = 0.0
                dtr_d = 0.0
                for a in range(nf):
                    div_d -= covg[n, a, d, a]
                    dtr_d += covg[n, a, a, d]
                divz += coeffs[d] * div_d
                dtrz += coeffs[d] * dtr_d
            dgzz = 0.0
            for i in range(m):
                for j in range(m):
                    cij = coeffs[i] * coeffs[j]
                    if cij == 0.0:
                        continue
                    val = 0.0
                    for k in range(m):
                        term = covg[n, i, j, k]
                        for d in range(nf):
                            term += 2.0 * gamma[n, k, i, d] * g0[n, d, j]
                        val += term * xhat[n, k]
                    dgzz += cij * val
            out[n] = -divz * cz - 0.5 * (dtrz * cz + dgzz)
        return out

    @njit(cache=True)
    def simplified_gb_numba(dgplain, xhat):
        npts, nf = dgplain.shape[0], dgplain.shape[1]
        m = nf - 1
        out = np.empty(npts)
        for n in range(npts):
            acc = 0.0
            for i in range(m):
                t1 = 0.0
                t2 = 0.0
                for j in range(m):
                    t1 += dgplain[n, j, i, j]
                    t2 += dgplain[n, i, j, j]
                acc += (t1 - t2 - 0.5 * dgplain[n, i, m, m]) * xhat[n, i]
            out[n] = acc
        return out

    @njit(cache=True)
    def ricci_from_derivs_numba(g, dg, ddg):
        nf = g.shape[0]
        ginv = np.linalg.inv(np.ascontiguousarray(g))
        gam = np.empty((nf, nf, nf))
        for r in range(nf):
            for mu in range(nf):
                for nu in range(nf):
                    s = 0.0
                    for lam in range(nf):
                        s += ginv[r, lam] * (
                            dg[mu, nu, lam] + dg[nu, mu, lam] - dg[lam, mu, nu]
                        )
                    gam[r, mu, nu] = 0.5 * s
        dginv = np.empty((nf, nf, nf))
        for mu in range(nf):
            for r in range(nf):
                for l in range(nf):
                    s = 0.0
                    for a in range(nf):
                        for b in range(nf):
                            s -= ginv[r, a] * dg[mu, a, b] * ginv[b, l]
                    dginv[mu, r, l] = s
        dgam = np.empty((nf, nf, nf, nf))
        for sig in range(nf):
            for r in range(nf):
                for mu in range(nf):
                    for nu in range(nf):
                        s = 0.0
                        for lam in range(nf):
                            s += dginv[sig, r, lam] * (
                                dg[mu, nu, lam] + dg[nu, mu, lam] - dg[lam, mu, nu]
                            )
                            s += ginv[r, lam] * (
                                ddg[sig, mu, nu, lam]
                                + ddg[sig, nu, mu, lam]
                                - ddg[sig, lam, mu, nu]
                            )
                        dgam[sig, r, mu, nu] = 0.5 * s
        ric = np.empty((nf, nf))
        for mu in range(nf):
            for nu in range(nf):
                s = 0.0
                for r in range(nf):
                    s += dgam[r, r, mu, nu] - dgam[nu, r, r, mu]
                    for lam in range(nf):
                        s += gam[r, r, lam] * gam[lam, mu, nu]
                        s -= gam[r, nu, lam] * gam[lam, r, mu]
                ric[mu, nu] = s
        return ric


if NUMBA_ENABLED:
    ACTIVE_BUILD = "numba"
    pairwise_sum = pairwise_sum_numba
    cov_deriv_batch = cov_deriv_batch_numba
    mass_integrands = mass_integrands_numba
    qform_radial = qform_radial_numba
    simplified_gb = simplified_gb_numba
    ricci_from_derivs = ricci_from_derivs_numba
else:
    ACTIVE_BUILD = "numpy"
    pairwise_sum = pairwise_sum_numpy
    cov_deriv_batch = cov_deriv_batch_numpy
    mass_integrands = mass_integrands_numpy
    qform_radial = qform_radial_numpy
    simplified_gb = simplified_gb_numpy
    ricci_from_derivs = ricci_from_derivs_numpy
