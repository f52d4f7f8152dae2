"""Real spherical harmonics on Gauss-Legendre x uniform-azimuth grids.

The grid of order L has ``L + 1`` colatitudes (Gauss-Legendre in cos(theta))
and ``2L + 2`` equispaced azimuths.  The basis used for nodal data is the
rectangular truncation: azimuthal modes ``m = 0..L+1`` (cosine type) and
``m = 1..L`` (sine type), each with degrees ``l = m..m+L``.  It has exactly
as many members as the grid has nodes, so collocation on the grid is
invertible.
"""

from functools import lru_cache

import numpy as np


def grid_shape(L):
    return L + 1, 2 * L + 2


def gauss_grid(L):
    """Colatitudes, azimuths and unit-sphere weights of the order-L grid.

    Arrays are flattened colatitude-major.
    """
    nt, nphi = grid_shape(L)
    x, wx = np.polynomial.legendre.leggauss(nt)
    # north to south
    x, wx = x[::-1], wx[::-1]
    theta = np.arccos(x)
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    W = np.repeat(wx, nphi).reshape(nt, nphi) * (2.0 * np.pi / nphi)
    return T.ravel(), P.ravel(), W.ravel()


def directions(theta, phi):
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def to_angles(dirs):
    dirs = np.asarray(dirs, dtype=float)
    r = np.linalg.norm(dirs, axis=-1)
    z = np.clip(dirs[..., 2] / np.where(r == 0, 1.0, r), -1.0, 1.0)
    return np.arccos(z), np.mod(np.arctan2(dirs[..., 1], dirs[..., 0]), 2.0 * np.pi)


def rectangular_index(L):
    """(degree, order, kind) for each basis member, kind +1 cosine, -1 sine.

    Members are sorted by degree so that Gram-Schmidt on the columns keeps
    every lower-degree harmonic untouched.
    """
    idx = []
    for m in range(L + 2):
        for l in range(m, m + L + 1):
            idx.append((l, m, 1))
    for m in range(1, L + 1):
        for l in range(m, m + L + 1):
            idx.append((l, m, -1))
    idx.sort(key=lambda t: (t[0], t[1], t[2]))
    return np.array(idx, dtype=int)


def _legendre_table(lmax, mmax, theta, with_derivative):
    """Orthonormal associated Legendre functions p[m][l] (no Condon-Shortley).

    Normalised so that p_l^m(cos t) * {sqrt2 cos, 1, sqrt2 sin}(m phi) is
    orthonormal on the unit sphere.  Also returns d/dtheta when requested.
    """
    ct, st = np.cos(theta), np.sin(theta)
    p = [dict() for _ in range(mmax + 2)]
    pmm = np.full_like(theta, 1.0 / np.sqrt(4.0 * np.pi))
    for m in range(mmax + 2):
        if m > 0:
            pmm = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * st * pmm
        if m > lmax + 1:
            break
        p[m][m] = pmm
        if m + 1 <= lmax + 1:
            p[m][m + 1] = np.sqrt(2.0 * m + 3.0) * ct * pmm
        for l in range(m + 2, lmax + 2):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            p[m][l] = a * (ct * p[m][l - 1] - b * p[m][l - 2])
    if not with_derivative:
        return p, None
    zero = np.zeros_like(theta)
    dp = [dict() for _ in range(mmax + 1)]
    for m in range(mmax + 1):
        for l in range(m, lmax + 1):
            up = p[m + 1].get(l, zero) if m + 1 <= l else zero
            if m == 0:
                dp[m][l] = -np.sqrt(l * (l + 1.0)) * up
            else:
                down = p[m - 1][l]
                dp[m][l] = 0.5 * (np.sqrt((l + m) * (l - m + 1.0)) * down
                                  - np.sqrt((l + m + 1.0) * (l - m)) * up)
    return p, dp


def real_harmonics(index, theta, phi, derivatives=False):
    """Evaluate real orthonormal harmonics at points (theta, phi).

    Returns Y with shape (npoints, nbasis); with ``derivatives`` also
    dY/dtheta and dY/dphi.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    phi = np.asarray(phi, dtype=float).ravel()
    lmax = int(index[:, 0].max())
    mmax = int(index[:, 1].max())
    p, dp = _legendre_table(lmax, mmax, theta, derivatives)
    n = len(index)
    Y = np.empty((theta.size, n))
    if derivatives:
        Yt = np.empty_like(Y)
        Yp = np.empty_like(Y)
    for k, (l, m, kind) in enumerate(index):
        if m == 0:
            ang, dang = 1.0, 0.0
        elif kind > 0:
            ang = np.sqrt(2.0) * np.cos(m * phi)
            dang = -np.sqrt(2.0) * m * np.sin(m * phi)
        else:
            ang = np.sqrt(2.0) * np.sin(m * phi)
            dang = np.sqrt(2.0) * m * np.cos(m * phi)
        Y[:, k] = p[m][l] * ang
        if derivatives:
            Yt[:, k] = dp[m][l] * ang
            Yp[:, k] = p[m][l] * dang
    if derivatives:
        return Y, Yt, Yp
    return Y


def _trig_index(L):
    """(order, kind) of the 2L+2 real azimuthal modes resolved by the grid."""
    modes = [(0, 1)]
    for m in range(1, L + 1):
        modes += [(m, 1), (m, -1)]
    modes.append((L + 1, 1))
    return modes


def parity_basis(L, theta, phi, derivatives=False):
    """Interpolation basis sin(t)^(m%2) P_k(cos t) trig(m phi), k = 0..L.

    Spans every harmonic of degree <= L and, unlike the rectangular harmonic
    set, is well conditioned at Gauss-Legendre colatitudes.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    phi = np.asarray(phi, dtype=float).ravel()
    x, st = np.cos(theta), np.sin(theta)
    V = np.polynomial.legendre.legvander(x, L)
    cols, dcols_t, dcols_p = [], [], []
    if derivatives:
        # dP_k/dx via the derivative Vandermonde
        dV = np.stack([np.polynomial.legendre.legval(x, np.polynomial.legendre.legder(np.eye(L + 1)[k]))
                       for k in range(L + 1)], axis=1)
    for m, kind in _trig_index(L):
        if kind > 0:
            ang, dang = np.cos(m * phi), -m * np.sin(m * phi)
        else:
            ang, dang = np.sin(m * phi), m * np.cos(m * phi)
        if m % 2:
            rad = st[:, None] * V
        else:
            rad = V
        cols.append(rad * ang[:, None])
        if derivatives:
            if m % 2:
                drad = x[:, None] * V - (st * st)[:, None] * dV
            else:
                drad = -st[:, None] * dV
            dcols_t.append(drad * ang[:, None])
            dcols_p.append(rad * dang[:, None])
    E = np.concatenate(cols, axis=1)
    if derivatives:
        return E, np.concatenate(dcols_t, axis=1), np.concatenate(dcols_p, axis=1)
    return E


def parity_project(L, theta, phi, k):
    """k @ parity_basis(L, theta, phi) for a stack of row vectors k, without
    forming the basis matrix."""
    theta = np.asarray(theta, dtype=float).ravel()
    phi = np.asarray(phi, dtype=float).ravel()
    k = np.atleast_2d(k)
    V0 = np.polynomial.legendre.legvander(np.cos(theta), L)
    V1 = np.sin(theta)[:, None] * V0
    modes = _trig_index(L)
    ang = np.stack([np.cos(m * phi) if kind > 0 else np.sin(m * phi) for m, kind in modes], axis=1)
    odd = np.array([m % 2 == 1 for m, _ in modes])
    out = np.empty((k.shape[0], len(modes), L + 1))
    for j in range(k.shape[0]):
        ka = ang * k[j][:, None]
        out[j, ~odd] = ka[:, ~odd].T @ V0
        out[j, odd] = ka[:, odd].T @ V1
    return out.reshape(k.shape[0], -1)


class GridBasis:
    """Nodal bases for the order-L grid.

    ``Qn`` satisfies ``Qn.T @ diag(w) @ Qn = I`` with ``w`` the unit-sphere
    weights; column k is a combination of true harmonics of degree at most
    ``degrees[k]``, and equals the harmonic itself whenever ``degrees[k] <= L``.
    Interpolation and differentiation use the parity basis instead.
    """

    def __init__(self, L):
        self.L = L
        self.theta, self.phi, self.w = gauss_grid(L)
        self.index = rectangular_index(L)
        self.degrees = self.index[:, 0].copy()
        B = real_harmonics(self.index, self.theta, self.phi)
        sw = np.sqrt(self.w)
        Q, R = np.linalg.qr(sw[:, None] * B)
        s = np.sign(np.diag(R))
        self.Qn = (Q * s) / sw[:, None]
        E, Et, Ep = parity_basis(L, self.theta, self.phi, derivatives=True)
        self.Einv = np.linalg.inv(E)
        self._dtheta = Et @ self.Einv
        self._dphi = Ep @ self.Einv

    @property
    def size(self):
        return len(self.w)

    def analysis(self):
        """Nodal values -> coefficients in the orthonormal basis."""
        return self.Qn.T * self.w

    def spectral_operator(self, eigen):
        """Nodal matrix of the operator acting as eigen(l) on degree l."""
        lam = np.asarray(eigen(self.degrees), dtype=float)
        return (self.Qn * lam) @ self.analysis()

    def interpolation(self, theta, phi):
        """Matrix mapping nodal values to values at arbitrary (theta, phi)."""
        return parity_basis(self.L, theta, phi) @ self.Einv

    def angular_derivatives(self):
        """Nodal matrices of d/dtheta and d/dphi of the interpolant."""
        return self._dtheta, self._dphi


@lru_cache(maxsize=16)
def grid_basis(L):
    return GridBasis(L)


def rotation_to(d):
    """Rotation matrix taking the north pole (0, 0, 1) to unit vector d."""
    d = np.asarray(d, dtype=float)
    d = d / np.linalg.norm(d)
    z = np.array([0.0, 0.0, 1.0])
    c = float(d @ z)
    if c > 1.0 - 1e-15:
        return np.eye(3)
    if c < -1.0 + 1e-15:
        return np.diag([1.0, -1.0, -1.0])
    v = np.cross(z, d)
    s = np.linalg.norm(v)
    k = v / s
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)
