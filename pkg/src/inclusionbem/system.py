"""The nonlinear integral system for the densities and its solution in eps.

Unknowns are (phi_o, phi_i, zeta, psi): densities on the outer surface, a
mean-zero density on the inclusion boundary, a scalar and a second density
on the inclusion boundary.  ``assemble_M`` evaluates the three residual
blocks; the discrete system appends the mean-zero row so it is square.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import bvp
from . import potential as pot
from .errors import AdmissibilityError, ConfigError, NewtonError
from .expr import DEFAULT_VARIABLES, ExprFn, eval_with_partials, f_tilde, find_zeta_i, parse_expr
from .geometry import check_admissible


@dataclass
class DensityQuadruple:
    phi_o: np.ndarray
    phi_i: np.ndarray
    zeta: float
    psi: np.ndarray

    def to_vector(self):
        return np.concatenate([self.phi_o, self.phi_i, [self.zeta], self.psi])

    @classmethod
    def from_vector(cls, v, n_o, n_i):
        v = np.asarray(v, dtype=float)
        return cls(v[:n_o].copy(), v[n_o:n_o + n_i].copy(), float(v[n_o + n_i]),
                   v[n_o + n_i + 1:].copy())

    @classmethod
    def zeros(cls, n_o, n_i):
        return cls(np.zeros(n_o), np.zeros(n_i), 0.0, np.zeros(n_i))

    def mean_defect(self, inner):
        """|int phi_i| relative to ||phi_i||_inf * area."""
        scale = max(np.max(np.abs(self.phi_i)), 1e-300) * inner.area
        return abs(inner.weights @ self.phi_i) / scale


@dataclass
class MResidual:
    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray

    def norm(self):
        return max(np.max(np.abs(self.r1)), np.max(np.abs(self.r2)), np.max(np.abs(self.r3)))


@dataclass
class SolverOptions:
    tol: float = 1e-11
    maxit: int = 20
    damping: bool = False


class ProblemSpec:
    """Geometry, data and the derived unperturbed solution."""

    def __init__(self, outer, inner, f_o, F, G, epsilons=(), options=None):
        self.outer = outer
        self.inner = inner
        self.f_o = f_o if isinstance(f_o, ExprFn) else parse_expr(f_o, ("x1", "x2", "x3"))
        self.F = F if isinstance(F, ExprFn) else parse_expr(F, DEFAULT_VARIABLES)
        self.G = G if isinstance(G, ExprFn) else parse_expr(G, DEFAULT_VARIABLES)
        self.epsilons = [float(e) for e in epsilons]
        self.options = options or SolverOptions()
        if any(b <= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError("epsilon grid must be strictly increasing")
        if not outer.contains(np.zeros((1, 3)))[0] or outer.distance(np.zeros((1, 3)))[0] <= 0:
            raise AdmissibilityError("the origin must lie inside the outer surface")
        bad = [e for e in self.epsilons if not check_admissible(outer, inner, e)]
        if bad:
            raise AdmissibilityError(f"epsilon grid inadmissible: {bad}")
        x = outer.nodes
        self.u_o = bvp.solve_interior_dirichlet(outer, self.f_o(x1=x[:, 0], x2=x[:, 1], x3=x[:, 2]))
        v0, g0 = self.u_o.evaluate(np.zeros(3), order=1)
        self.u_o0 = float(v0[0])
        self.grad_u_o0 = g0[0]
        self.zeta_i, self.dzF0 = find_zeta_i(self.F, self.u_o0, inner.nodes)
        self._eps_cache = {}

    @property
    def sizes(self):
        return self.outer.size, self.inner.size

    def f_o_at(self, x):
        x = pot._points(x)
        return self.f_o(x1=x[:, 0], x2=x[:, 1], x3=x[:, 2])

    def eps_data(self, eps):
        """Everything in M that depends on eps alone, cached per eps."""
        eps = float(eps)
        if eps not in self._eps_cache:
            self._eps_cache[eps] = _EpsData(self, eps)
        return self._eps_cache[eps]


class _EpsData:
    def __init__(self, p, eps):
        o, i = p.outer, p.inner
        t, nu = i.nodes, i.normals
        self.eps = eps
        pts = eps * t
        _, grad = p.u_o.evaluate(pts, order=1)
        self.dn_u_o = np.einsum("ij,ij->i", grad, nu)
        self.u_tilde = bvp.u_tilde(p.u_o, eps, t)
        self.t_grad0 = t @ p.grad_u_o0
        # outer double layer (and its normal derivative) at eps t
        self.E = pot.layer_matrix(o, pts, "D")
        self.En = pot.layer_matrix(o, pts, "D", normals=nu)
        # inner double layer seen from the outer surface, rescaled
        if eps > 0:
            self.C = pot.layer_matrix(i, o.nodes / eps, "D")
        else:
            self.C = np.zeros((o.size, i.size))
        self.S_o = pot.fundamental_solution(o.nodes)
        self.S_i = pot.fundamental_solution(t)
        self.dnS_i = np.einsum("ij,ij->i", nu, pot.grad_fundamental_solution(t))
        _, dF0, _, _, _, _ = eval_with_partials(p.F, 0.0, t, np.full(i.size, p.zeta_i))
        self.dF0_eps = dF0


def _ops(p):
    o, i = p.outer, p.inner
    return (pot.assemble_W(o).matrix, pot.assemble_W(i).matrix, pot.assemble_hypersingular(i).matrix)


def assemble_M(eps, q, p):
    """Residual blocks (M1 on the outer nodes, M2 and M3 on the inner nodes)."""
    d = p.eps_data(eps)
    Wo, Wi, Di = _ops(p)
    t = p.inner.nodes
    b = 0.5 * q.psi + Wi @ q.psi
    zi = p.zeta_i
    r1 = 0.5 * q.phi_o + Wo @ q.phi_o + d.C @ q.phi_i + eps * q.zeta * d.S_o
    _, _, dzF0, _, _, _ = eval_with_partials(p.F, 0.0, t, np.full(len(t), zi))
    r2 = (d.t_grad0 + eps * d.u_tilde + (-0.5 * q.phi_i + Wi @ q.phi_i) + q.zeta * d.S_i
          + d.E @ q.phi_o - d.dF0_eps - dzF0 * b - eps * f_tilde(p.F, eps, t, zi, b))
    G = p.G(eps=eps, zeta=eps * b + zi, t1=t[:, 0], t2=t[:, 1], t3=t[:, 2])
    r3 = (d.dn_u_o + eps * (d.En @ q.phi_o) + Di @ q.phi_i + q.zeta * d.dnS_i
          - Di @ q.psi - G)
    return MResidual(r1, r2, r3)


def residual_vector(eps, q, p):
    r = assemble_M(eps, q, p)
    return np.concatenate([r.r1, r.r2, r.r3, [p.inner.weights @ q.phi_i]])


def jacobian(eps, q, p):
    """Exact Jacobian of the bordered residual at (eps, q)."""
    d = p.eps_data(eps)
    Wo, Wi, Di = _ops(p)
    n_o, n_i = p.sizes
    t = p.inner.nodes
    I_o, I_i = np.eye(n_o), np.eye(n_i)
    B = 0.5 * I_i + Wi
    b = B @ q.psi
    # differential of the superposition terms multiplies by d_zeta
    _, _, dzF, _, _, _ = eval_with_partials(p.F, eps, t, p.zeta_i + eps * b)
    _, _, dzG, _, _, _ = eval_with_partials(p.G, eps, t, p.zeta_i + eps * b)
    n = n_o + 2 * n_i + 1
    J = np.zeros((n, n))
    o_, i_, z_, s_ = slice(0, n_o), slice(n_o, n_o + n_i), n_o + n_i, slice(n_o + n_i + 1, n)
    r1, r2, r3 = slice(0, n_o), slice(n_o, n_o + n_i), slice(n_o + n_i, n_o + 2 * n_i)
    J[r1, o_] = 0.5 * I_o + Wo
    J[r1, i_] = d.C
    J[r1, z_] = eps * d.S_o
    J[r2, o_] = d.E
    J[r2, i_] = -0.5 * I_i + Wi
    J[r2, z_] = d.S_i
    J[r2, s_] = -dzF[:, None] * B
    J[r3, o_] = eps * d.En
    J[r3, i_] = Di
    J[r3, z_] = d.dnS_i
    J[r3, s_] = -Di - eps * dzG[:, None] * B
    J[n - 1, i_] = p.inner.weights
    return J


def jacobian_at_zero(p):
    """Differential at eps = 0 built from its block formulas:

        M1: (1/2 I + W_o)[phi_o]
        M2: (-1/2 I + W_i)[phi_i] + zeta S + w_o[phi_o](0) - lam (1/2 I + W_i)[psi]
        M3: D_i[phi_i] + zeta nu.grad S - D_i[psi]
    """
    o, i = p.outer, p.inner
    n_o, n_i = p.sizes
    Wo, Wi, Di = _ops(p)
    t, nu = i.nodes, i.normals
    w0 = pot.layer_matrix(o, np.zeros(3), "D")[0]
    S = pot.fundamental_solution(t)[:, None]
    dnS = np.einsum("ij,ij->i", nu, pot.grad_fundamental_solution(t))[:, None]
    Z_oi = np.zeros((n_o, n_i))
    Z_io = np.zeros((n_i, n_o))
    rows = [
        np.hstack([0.5 * np.eye(n_o) + Wo, Z_oi, np.zeros((n_o, 1)), Z_oi]),
        np.hstack([np.tile(w0, (n_i, 1)), -0.5 * np.eye(n_i) + Wi, S, -p.dzF0 * (0.5 * np.eye(n_i) + Wi)]),
        np.hstack([Z_io, Di, dnS, -Di]),
        np.hstack([np.zeros(n_o), i.weights, [0.0], np.zeros(n_i)])[None, :],
    ]
    return np.vstack(rows)


def solve_limiting(p):
    """Solution of the system at eps = 0 through the auxiliary transmission problem."""
    i = p.inner
    t, nu = i.nodes, i.normals
    zi = np.full(i.size, p.zeta_i)
    _, dFe, _, _, _, _ = eval_with_partials(p.F, 0.0, t, zi)
    G0 = p.G(eps=0.0, zeta=zi, t1=t[:, 0], t2=t[:, 1], t3=t[:, 2])
    f1 = dFe - t @ p.grad_u_o0
    f2 = G0 - nu @ p.grad_u_o0
    v_minus, v_plus = bvp.solve_auxiliary_transmission(i, p.dzF0, f1, f2)
    phi_i, zeta = bvp.solve_J(i, v_minus.trace())
    psi = bvp.interior_density(i, v_plus.trace())
    return DensityQuadruple(np.zeros(p.outer.size), phi_i, zeta, psi)


@dataclass
class NewtonTrace:
    epsilon: float
    rows: list = field(default_factory=list)

    def add(self, it, res, step):
        self.rows.append((self.epsilon, it, res, step))


def newton_solve(eps, q0, p, tol=None, maxit=None, damping=None):
    """Newton iteration on the bordered system; returns (quadruple, trace)."""
    opts = p.options
    tol = opts.tol if tol is None else tol
    maxit = opts.maxit if maxit is None else maxit
    damping = opts.damping if damping is None else damping
    n_o, n_i = p.sizes
    x = q0.to_vector()
    q = q0
    F = residual_vector(eps, q, p)
    res = float(np.max(np.abs(F)))
    trace = NewtonTrace(eps)
    trace.add(0, res, 0.0)
    rises = 0
    for it in range(1, maxit + 1):
        # at least one step, so a good predictor still gets a Newton correction
        if res <= tol and it > 1:
            break
        J = jacobian(eps, q, p)
        lu = lu_factor(J)
        piv = np.abs(np.diag(lu[0]))
        if piv.min() <= 1e-14 * piv.max():
            raise NewtonError(f"singular Jacobian at epsilon = {eps}", trace.rows)
        step = -lu_solve(lu, F)
        lam = 1.0
        x_new = x + step
        q_new = DensityQuadruple.from_vector(x_new, n_o, n_i)
        F_new = residual_vector(eps, q_new, p)
        new = float(np.max(np.abs(F_new)))
        if damping:
            halvings = 0
            while new > res and halvings < 8:
                lam *= 0.5
                halvings += 1
                x_new = x + lam * step
                q_new = DensityQuadruple.from_vector(x_new, n_o, n_i)
                F_new = residual_vector(eps, q_new, p)
                new = float(np.max(np.abs(F_new)))
        rises = rises + 1 if new > res else 0
        x, q, F, res = x_new, q_new, F_new, new
        trace.add(it, res, float(np.max(np.abs(lam * step))))
        if rises >= 3:
            raise NewtonError(f"residual increased for 3 consecutive steps at epsilon = {eps}",
                              trace.rows)
    if res > tol or maxit < 1:
        raise NewtonError(f"maxit exceeded at epsilon = {eps} (residual {res:.3e})", trace.rows)
    return q, trace


def continuation(p, epsilons=None):
    """Follow the branch from eps = 0 over the eps grid.

    Returns (branch, traces) with branch a list of (eps, quadruple) starting
    at (0, limiting quadruple).
    """
    epsilons = p.epsilons if epsilons is None else list(epsilons)
    q0 = solve_limiting(p)
    branch = [(0.0, q0)]
    traces = []
    n_o, n_i = p.sizes
    for eps in epsilons:
        if len(branch) >= 2:
            (e0, a), (e1, b) = branch[-2], branch[-1]
            s = (eps - e1) / (e1 - e0)
            guess = DensityQuadruple.from_vector(b.to_vector() + s * (b.to_vector() - a.to_vector()), n_o, n_i)
        else:
            guess = branch[-1][1]
        try:
            q, tr = newton_solve(eps, guess, p)
        except NewtonError as err:
            err.branch = branch
            err.trace = [row for t in traces for row in t.rows] + err.trace
            raise
        branch.append((eps, q))
        traces.append(tr)
    return branch, traces


def zeta_identity_defect(eps, q, p):
    """|zeta - int G(eps, t, eps (1/2 I + W)[psi] + zeta_i)|."""
    i = p.inner
    b = 0.5 * q.psi + pot.assemble_W(i).matrix @ q.psi
    t = i.nodes
    G = p.G(eps=eps, zeta=eps * b + p.zeta_i, t1=t[:, 0], t2=t[:, 1], t3=t[:, 2])
    return abs(q.zeta - i.weights @ G)
