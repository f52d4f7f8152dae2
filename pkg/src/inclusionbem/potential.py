"""Laplace layer potentials in R^3 and their boundary operators.

Conventions (S the fundamental solution):

    S(x)      = -1 / (4 pi |x|)
    v[mu](x)  =  int S(x - y) mu(y) dsigma_y
    w[mu](x)  = -int nu(y) . grad S(x - y) mu(y) dsigma_y
    W[mu]     = -int nu(y) . grad S(x - y) mu(y)       (x on the surface)
    W*[mu]    =  int nu(x) . grad S(x - y) mu(y)
    D[mu]     =  nu . grad w[mu]                         (same from both sides)

Off-surface values use smooth quadrature on a refined copy of the surface
with the density interpolated spectrally.  On spheres the on-surface
operators are spectral; on star surfaces they use quadrature on grids
rotated so that their pole sits on the target.
"""

import numpy as np

from . import sph
from .errors import ClearanceError
from .geometry import ScaledSurface
from .parallel import map_rows

FOUR_PI = 4.0 * np.pi
CLEARANCE_FACTOR = 3.0
# native-grid error decays like rho^(2L + 2), times (2L + 2)^2 for Hessians;
# targets where that is below exp(-FAR_DIGITS) skip the refined grid
FAR_DIGITS = 36.0
_PAIR_BUDGET = 400_000


def fundamental_solution(x):
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise ValueError("fundamental solution is singular at the origin")
    return -1.0 / (FOUR_PI * r)


def grad_fundamental_solution(x):
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise ValueError("fundamental solution is singular at the origin")
    return x / (FOUR_PI * r[..., None] ** 3)


class BoundaryField:
    """Nodal values of a scalar function on a surface."""

    def __init__(self, surface, values, mean_zero=False):
        values = np.asarray(values, dtype=float)
        if values.shape != (surface.size,):
            raise ValueError(f"field has shape {values.shape}, surface has {surface.size} nodes")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.surface = surface
        self.values = values
        self.mean_zero = mean_zero

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _values(mu, s):
    v = np.asarray(mu.values if isinstance(mu, BoundaryField) else mu, dtype=float)
    if v.ndim == 0:
        v = np.full(s.size, float(v))
    if v.shape[0] != s.size:
        raise ValueError(f"density has {v.shape[0]} values, surface has {s.size} nodes")
    return v


class OperatorMatrix:
    """Dense discrete operator, rows indexed by target nodes."""

    def __init__(self, matrix, kind, source=None, target=None):
        self.matrix = np.asarray(matrix, dtype=float)
        self.matrix.setflags(write=False)
        self.kind = kind
        self.source = source
        self.target = target

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, x):
        return self.matrix @ np.asarray(x, dtype=float)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def to_csv(self, path):
        np.savetxt(path, self.matrix, fmt="%.17g", delimiter=",")


# kernels ----------------------------------------------------------------------

def _kernel(x, y, ny, kind, order):
    """Kernel, gradient and Hessian in x for a block of targets and sources.

    kind "S": S(x - y); kind "D": -nu(y) . grad S(x - y).  Returns a list of
    length order + 1 with shapes (m, n), (m, n, 3), (m, n, 3, 3).
    """
    z = x[:, None, :] - y[None, :, :]
    r2 = np.einsum("mnk,mnk->mn", z, z)
    inv = 1.0 / np.sqrt(r2)
    inv2 = inv * inv
    inv3 = inv * inv2
    c = 1.0 / FOUR_PI
    out = []
    if kind == "S":
        out.append(-c * inv)
        if order >= 1:
            out.append(c * z * inv3[..., None])
        if order >= 2:
            eye = np.eye(3)
            h = eye * inv3[..., None, None] - 3.0 * z[..., :, None] * z[..., None, :] * (inv3 * inv2)[..., None, None]
            out.append(c * h)
        return out
    nz = np.einsum("nk,mnk->mn", ny, z)
    out.append(-c * nz * inv3)
    if order >= 1:
        inv5 = inv3 * inv2
        out.append(-c * (ny[None, :, :] * inv3[..., None] - 3.0 * (nz * inv5)[..., None] * z))
    if order >= 2:
        inv7 = inv5 * inv2
        nzT = ny[None, :, :, None] * z[..., None, :]
        h = (-3.0 * (nzT + np.swapaxes(nzT, -1, -2)) * inv5[..., None, None]
             - 3.0 * (nz * inv5)[..., None, None] * np.eye(3)
             + 15.0 * (nz * inv7)[..., None, None] * z[..., :, None] * z[..., None, :])
        out.append(-c * h)
    return out


def _block(n_src, order):
    per = _PAIR_BUDGET // (max(n_src, 1) * (1 + 3 * (order >= 1) + 9 * (order >= 2)))
    return max(per, 1)


def _points(x):
    x = np.asarray(x, dtype=float)
    return x.reshape(1, 3) if x.ndim == 1 else x


def check_clearance(s, x, quad_order=None):
    """Raise ClearanceError if any point is within the accuracy band of s."""
    fine, _ = s.quadrature(quad_order)
    thr = CLEARANCE_FACTOR * fine.mean_spacing
    d = s.distance(x)
    if len(d) and d.min() < thr:
        k = int(np.argmin(d))
        raise ClearanceError(f"point {np.round(x[k], 6).tolist()} is {d[k]:.3g} from the surface, "
                             f"below the clearance {thr:.3g}")


def _far(s, x):
    """Targets whose expansion ratio rho about the centre makes the native rule exact."""
    rad = np.linalg.norm(s.nodes - s.center, axis=1)
    r = np.linalg.norm(x - s.center, axis=1)
    lo, hi = rad.min(), rad.max()
    rho = np.where(r < lo, r / lo, np.where(r > hi, hi / np.maximum(r, hi), 1.0))
    with np.errstate(divide="ignore"):
        n = 2 * s.L + 2
        return n * -np.log(rho) >= FAR_DIGITS + 2.0 * np.log(n)


def _groups(s, x, quad_order):
    """Split targets into (indices, quadrature order) groups.

    With the default order, targets far from s use the native grid directly.
    """
    if quad_order is not None or len(x) == 0:
        return [(np.arange(len(x)), quad_order)]
    far = _far(s, x)
    return [(np.flatnonzero(g), o) for g, o in ((far, s.L), (~far, None)) if g.any()]


def _layer_eval(s, mu, x, kind, order, quad_order, check):
    x = _points(x)
    if check:
        check_clearance(s, x, quad_order)
    mu = _values(mu, s)
    out = np.empty((len(x), 1 + 3 * (order >= 1) + 9 * (order >= 2)))
    for idx, qo in _groups(s, x, quad_order):
        fine, P = s.quadrature(qo)
        dens = mu if P is None else P @ mu
        wd = fine.weights * dens
        ny = fine.normals if kind == "D" else None
        xs = x[idx]

        def rows(sl):
            ks = _kernel(xs[sl], fine.nodes, ny, kind, order)
            parts = [ks[0] @ wd]
            if order >= 1:
                parts.append(np.einsum("mnj,n->mj", ks[1], wd))
            if order >= 2:
                parts.append(np.einsum("mnij,n->mij", ks[2], wd).reshape(-1, 9))
            return np.concatenate([p.reshape(len(p), -1) for p in parts], axis=1)

        out[idx] = map_rows(rows, len(xs), _block(fine.size, order))
    res = [out[:, 0]]
    if order >= 1:
        res.append(out[:, 1:4])
    if order >= 2:
        res.append(out[:, 4:13].reshape(-1, 3, 3))
    return res


def single_layer_eval(s, mu, x, order=0, quad_order=None, check=True):
    """v[mu] at points x away from s; with order 1 or 2 also gradient and Hessian."""
    res = _layer_eval(s, mu, x, "S", order, quad_order, check)
    return res[0] if order == 0 else tuple(res)


def double_layer_eval(s, mu, x, order=0, quad_order=None, check=True):
    """w[mu] at points x away from s; with order 1 or 2 also gradient and Hessian."""
    res = _layer_eval(s, mu, x, "D", order, quad_order, check)
    return res[0] if order == 0 else tuple(res)


def layer_matrix(s, x, kind, normals=None, quad_order=None, check=True):
    """Matrix taking nodal densities on s to layer-potential values at x, or
    to directional derivatives along ``normals`` when given."""
    x = _points(x)
    if check:
        check_clearance(s, x, quad_order)
    order = 0 if normals is None else 1
    out = np.empty((len(x), s.size))
    for idx, qo in _groups(s, x, quad_order):
        fine, P = s.quadrature(qo)
        ny = fine.normals if kind == "D" else None
        xs = x[idx]
        nr = None if normals is None else normals[idx]

        def rows(sl):
            ks = _kernel(xs[sl], fine.nodes, ny, kind, order)
            K = ks[0] if nr is None else np.einsum("mnj,mj->mn", ks[1], nr[sl])
            K = K * fine.weights
            return K if P is None else K @ P

        out[idx] = map_rows(rows, len(xs), _block(fine.size, order))
    return out


# on-surface operators ----------------------------------------------------------

def _sphere_eigen(kind, R):
    if kind == "V":
        return lambda l: -R / (2.0 * l + 1.0)
    if kind in ("W", "Wstar"):
        return lambda l: 1.0 / (2.0 * (2.0 * l + 1.0))
    if kind == "D":
        return lambda l: l * (l + 1.0) / ((2.0 * l + 1.0) * R)
    raise ValueError(kind)


ROTATED_FACTOR = 2


def _rotated_rule(Lr):
    """Product rule on the unit sphere, Gauss-Legendre in theta (not cos theta)
    so that 1/|x - y| singularities at the pole are integrated smoothly."""
    nt, nphi = Lr + 1, 2 * Lr + 2
    x, w = np.polynomial.legendre.leggauss(nt)
    th = 0.5 * np.pi * (x + 1.0)
    wt = 0.5 * np.pi * w * np.sin(th)
    # irrational azimuth offset keeps rotated nodes off the parameter poles
    ph = 2.0 * np.pi * (np.arange(nphi) + 0.5 * (np.sqrt(5.0) - 1.0)) / nphi
    T, P = np.meshgrid(th, ph, indexing="ij")
    W = np.repeat(wt, nphi).reshape(nt, nphi) * (2.0 * np.pi / nphi)
    return sph.directions(T.ravel(), P.ravel()), W.ravel()


def _star_operators(s):
    """V, W, W* on a star surface by rotated-grid quadrature."""
    dirs0, w0 = _rotated_rule(ROTATED_FACTOR * s.L)
    s_hat = sph.directions(s.theta, s.phi)
    x, nx = s.nodes, s.normals
    L = s.L

    def rows(sl):
        out = np.empty((sl.stop - sl.start, 3, s.size))
        for k, i in enumerate(range(sl.start, sl.stop)):
            R = sph.rotation_to(s_hat[i])
            th, ph = sph.to_angles(dirs0 @ R.T)
            y, ny, jac = s.evaluate(th, ph)
            z = x[i] - y
            r = np.linalg.norm(z, axis=1)
            inv3 = 1.0 / (FOUR_PI * r ** 3)
            jw = jac * w0
            ks = np.stack([-jw / (FOUR_PI * r),
                           -np.einsum("nk,nk->n", ny, z) * inv3 * jw,
                           (z @ nx[i]) * inv3 * jw])
            out[k] = sph.parity_project(L, th, ph, ks)
        return out

    blocks = map_rows(rows, s.size, 16)
    Einv = s.basis.Einv
    return [blocks[:, k, :] @ Einv for k in range(3)]


def _operator(s, kind):
    def build():
        if s.kind == "sphere":
            return s.basis.spectral_operator(_sphere_eigen(kind, s.radius))
        if kind == "D":
            return _star_hypersingular(s)
        V, W, Ws = s.cached("star-ops", lambda: _star_operators(s))
        return {"V": V, "W": W, "Wstar": Ws}[kind]
    tag = {"D": "grad-coupling"}.get(kind, kind)
    return s.cached(("op", kind), lambda: OperatorMatrix(build(), tag, s, s))


def _star_hypersingular(s):
    """nu . grad w[mu] = div_G((V[nu x grad_G mu]) x nu).

    Multiplying by the normal raises the degree, so the composition runs on
    a grid two orders finer and the result is interpolated back.
    """
    fine, P = s.quadrature(s.L + 2)
    V = assemble_V(fine).matrix
    G = fine.surface_gradient()
    n = fine.normals
    # g = nu x grad mu, componentwise
    g = [n[:, (j + 1) % 3, None] * G[(j + 2) % 3] - n[:, (j + 2) % 3, None] * G[(j + 1) % 3]
         for j in range(3)]
    A = [V @ (gj @ P) for gj in g]
    B = [A[(k + 1) % 3] * n[:, (k + 2) % 3, None] - A[(k + 2) % 3] * n[:, (k + 1) % 3, None]
         for k in range(3)]
    back = fine.interpolation(s.theta, s.phi)
    return back @ sum(G[k] @ B[k] for k in range(3))


def assemble_V(s):
    return _operator(s, "V")


def assemble_W(s):
    return _operator(s, "W")


def assemble_Wstar(s):
    return _operator(s, "Wstar")


def assemble_hypersingular(s):
    return _operator(s, "D")


def double_layer_trace(s, mu, side):
    """Boundary value of w[mu] from inside (side +1) or outside (side -1)."""
    mu = _values(mu, s)
    return 0.5 * side * mu + assemble_W(s) @ mu


def single_layer_normal_trace(s, mu, side):
    """nu . grad v[mu] from inside (side +1) or outside (side -1)."""
    mu = _values(mu, s)
    return -0.5 * side * mu + assemble_Wstar(s) @ mu


# couplings between surfaces -----------------------------------------------------

def _target_points(tgt):
    return tgt.nodes if hasattr(tgt, "nodes") else _points(tgt)


def cross_double_layer(src, mu, tgt, quad_order=None):
    """w_src[mu] at the nodes of tgt.  A scaled source eps * S carrying
    mu(. / eps) is evaluated through w_{eps S}[mu(./eps)](x) = w_S[mu](x / eps)."""
    x = _target_points(tgt)
    if isinstance(src, ScaledSurface):
        return double_layer_eval(src.base, mu, x / src.epsilon, quad_order=quad_order)
    return double_layer_eval(src, mu, x, quad_order=quad_order)


def cross_double_layer_matrix(src, tgt, quad_order=None):
    x = _target_points(tgt)
    base, scale = (src.base, src.epsilon) if isinstance(src, ScaledSurface) else (src, 1.0)
    return OperatorMatrix(layer_matrix(base, x / scale, "D", quad_order=quad_order),
                          "cross-double", src, tgt)


def normal_derivative_coupling(src, mu, tgt, kind="D", side=None, quad_order=None):
    """nu_tgt . grad of the layer potential of mu on src, at tgt nodes.

    For src is tgt the on-surface rules apply: the double layer needs no
    side, the single layer needs side = +1 (inside) or -1 (outside).
    """
    if src is tgt:
        if kind == "D":
            return assemble_hypersingular(src) @ _values(mu, src)
        if side not in (1, -1):
            raise ValueError("single-layer normal derivative on the surface needs a side")
        return single_layer_normal_trace(src, mu, side)
    x, nrm = tgt.nodes, tgt.normals
    scale = 1.0
    if isinstance(src, ScaledSurface):
        src, scale = src.base, src.epsilon
    _, g = _layer_eval(src, mu, x / scale, kind, 1, quad_order, True)
    # the scaled single layer is scale * v(x / scale), the double layer w(x / scale)
    factor = 1.0 / scale if kind == "D" else 1.0
    return factor * np.einsum("mj,mj->m", g, nrm)
