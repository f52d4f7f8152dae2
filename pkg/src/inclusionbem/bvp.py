"""Linear boundary value problems built from layer potentials."""

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import potential as pot
from .errors import ClearanceError, SolveError
from .expr import tau_rule


def _factor(A, what):
    lu = lu_factor(A, check_finite=True)
    d = np.abs(np.diag(lu[0]))
    if d.min() <= 1e-14 * d.max():
        raise SolveError(f"{what}: discrete operator is numerically singular")
    return lu


def _nodal(s, g):
    if callable(g):
        g = g(s.nodes)
    return pot._values(g, s)


class HarmonicRep:
    """coef * (layer potential of ``density`` on ``surface``) + xi * S.

    ``layer`` is "single" or "double"; ``side`` is +1 when the represented
    function lives inside the surface and -1 when it lives outside.
    """

    def __init__(self, layer, surface, density, side, coef=1.0, xi=0.0):
        self.layer = layer
        self.surface = surface
        self.density = np.asarray(density, dtype=float)
        self.side = side
        self.coef = float(coef)
        self.xi = float(xi)

    def __repr__(self):
        where = "interior" if self.side > 0 else "exterior"
        return f"HarmonicRep({where} {self.layer} layer, xi={self.xi:g})"

    def __call__(self, x, order=0):
        return self.evaluate(x, order)

    def evaluate(self, x, order=0):
        """Value (order 0) or tuple (value, gradient[, Hessian]) at points x."""
        x = pot._points(x)
        inside = self.surface.contains(x)
        if np.any(inside != (self.side > 0)):
            k = int(np.argmax(inside != (self.side > 0)))
            raise ClearanceError(f"point {x[k].tolist()} is on the wrong side of the surface")
        kind = "S" if self.layer == "single" else "D"
        res = pot._layer_eval(self.surface, self.density, x, kind, order, None, True)
        res = [self.coef * r for r in res]
        if self.xi:
            res[0] = res[0] + self.xi * pot.fundamental_solution(x)
            if order >= 1:
                res[1] = res[1] + self.xi * pot.grad_fundamental_solution(x)
            if order >= 2:
                r = np.linalg.norm(x, axis=1)
                h = (np.eye(3) / r[:, None, None] ** 3
                     - 3.0 * x[:, :, None] * x[:, None, :] / r[:, None, None] ** 5) / pot.FOUR_PI
                res[2] = res[2] + self.xi * h
        return res[0] if order == 0 else tuple(res)

    def trace(self):
        s = self.surface
        if self.layer == "single":
            t = pot.assemble_V(s) @ self.density
        else:
            t = pot.double_layer_trace(s, self.density, self.side)
        t = self.coef * t
        if self.xi:
            t = t + self.xi * pot.fundamental_solution(s.nodes)
        return t

    def normal_trace(self):
        s = self.surface
        if self.layer == "single":
            t = pot.single_layer_normal_trace(s, self.density, self.side)
        else:
            t = pot.assemble_hypersingular(s) @ self.density
        t = self.coef * t
        if self.xi:
            t = t + self.xi * np.einsum("ij,ij->i", s.normals, pot.grad_fundamental_solution(s.nodes))
        return t


def _dirichlet_lu(s):
    A = 0.5 * np.eye(s.size) + pot.assemble_W(s).matrix
    return s.cached("dirichlet-lu", lambda: _factor(A, "interior Dirichlet"))


def solve_interior_dirichlet(s, g):
    """u = w+[mu] with (1/2 I + W)[mu] = g."""
    mu = lu_solve(_dirichlet_lu(s), _nodal(s, g))
    return HarmonicRep("double", s, mu, +1)


def interior_density(s, g):
    """Density mu with w+[mu] = g on s (shared factorization)."""
    return lu_solve(_dirichlet_lu(s), _nodal(s, g))


def hessian_u_o(rep, x):
    return rep.evaluate(x, order=2)[2]


def u_tilde(rep, eps, t):
    """int_0^1 (1 - tau) t^T Hess u(tau eps t) t dtau by 16-point Gauss-Legendre."""
    t = pot._points(t)
    tau, w = tau_rule()
    pts = (tau[:, None, None] * eps) * t[None, :, :]
    H = hessian_u_o(rep, pts.reshape(-1, 3)).reshape(len(tau), len(t), 3, 3)
    q = np.einsum("mi,kmij,mj->km", t, H, t)
    return ((1.0 - tau) * w) @ q


def solve_auxiliary_transmission(s, lam, f1, f2):
    """(u-, u+) harmonic outside / inside s with u- = lam u+ + f1,
    nu.grad u- - nu.grad u+ = f2 on s and u- -> 0 at infinity."""
    if not lam > 0:
        raise ValueError(f"transmission coefficient must be positive, got {lam}")
    f1 = _nodal(s, f1)
    f2 = _nodal(s, f2)
    V = pot.assemble_V(s).matrix
    Ws = pot.assemble_Wstar(s).matrix
    n = s.size
    # u- = lam u+ + f1 with u- = lam v[phi], u+ = v[phi + mu] forces V mu = -f1 / lam
    mu = lu_solve(_factor(V, "single layer"), -f1 / lam)
    A = 0.5 * np.eye(n) + (lam - 1.0) / (lam + 1.0) * Ws
    rhs = (f2 + (-0.5 * mu + Ws @ mu)) / (lam + 1.0)
    phi = lu_solve(_factor(A, "transmission"), rhs)
    return HarmonicRep("single", s, phi, -1, coef=lam), HarmonicRep("single", s, phi + mu, +1)


def j_matrix(s):
    """Bordered matrix [(-1/2 I + W), S|s ; weights, 0]."""
    def build():
        n = s.size
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = -0.5 * np.eye(n) + pot.assemble_W(s).matrix
        M[:n, n] = pot.fundamental_solution(s.nodes)
        M[n, :n] = s.weights
        return M
    return s.cached("J", build)


def solve_J(s, h):
    """Mean-zero mu and xi with (-1/2 I + W)[mu] + xi S = h on s."""
    h = _nodal(s, h)
    lu = s.cached("J-lu", lambda: _factor(j_matrix(s), "J operator"))
    sol = lu_solve(lu, np.append(h, 0.0))
    return sol[:-1], float(sol[-1])


def apply_J(s, mu, xi):
    return j_matrix(s)[:-1] @ np.append(mu, xi)
