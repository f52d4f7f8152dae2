"""Named invariant checks, shared by ``verify`` and the test suite.

Each check returns a :class:`Check`; a suite is a list of them.
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import bvp
from . import potential as pot
from . import sph
from .expr import eval_with_partials, f_tilde, nemytskii, nemytskii_dzeta, parse_expr
from .geometry import integrate
from .system import (DensityQuadruple, assemble_M, jacobian, jacobian_at_zero, residual_vector,
                     solve_limiting, zeta_identity_defect)

TAUS = (-0.9, -0.5, 0.0, 0.5, 0.9)


@dataclass
class Check:
    name: str
    value: float
    tol: float
    op: str = "<="

    @property
    def passed(self):
        if not np.isfinite(self.value):
            return False
        return self.value <= self.tol if self.op == "<=" else self.value > self.tol

    def as_dict(self):
        return {**asdict(self), "passed": bool(self.passed)}


def _tol(s, sphere_tol, star_tol):
    return sphere_tol if s.kind == "sphere" else star_tol


def _probes(s, scale, n=12, seed=0):
    """Points at ``scale`` times the boundary radius along random directions."""
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n, 3))
    th, ph = sph.to_angles(d)
    b, _, _ = s.evaluate(th, ph)
    return s.center + scale * (b - s.center)


def _smooth_field(s, rng):
    """Random combination of harmonics of degree <= L/2 sampled at the nodes."""
    b = s.basis
    keep = b.degrees <= s.L // 2
    return b.Qn[:, keep] @ rng.standard_normal(int(keep.sum()))


def potential_suite(s, seed=0):
    rng = np.random.default_rng(seed)
    n = s.size
    one = np.ones(n)
    W = pot.assemble_W(s).matrix
    Ws = pot.assemble_Wstar(s).matrix
    out = [Check(f"{s.kind}: W[1] = 1/2", float(np.max(np.abs(W @ one - 0.5))), _tol(s, 1e-10, 1e-4))]
    if s.kind == "sphere":
        V1 = pot.assemble_V(s) @ one
        out.append(Check("sphere: V[1] = -R", float(np.max(np.abs(V1 + s.radius))), 1e-10))
    inside, outside = _probes(s, 0.4, seed=seed), _probes(s, 2.5, seed=seed)
    g_in = pot.double_layer_eval(s, one, inside) - 1.0
    g_out = pot.double_layer_eval(s, one, outside)
    out.append(Check(f"{s.kind}: Gauss identity", float(max(np.abs(g_in).max(), np.abs(g_out).max())),
                     _tol(s, 1e-10, 1e-4)))
    # Green representation of u = 1 + x1 (relative to the centre)
    x = s.nodes - s.center
    u, du = 1.0 + x[:, 0], s.normals[:, 0]
    rep_in = (pot.double_layer_eval(s, u, inside) - pot.single_layer_eval(s, du, inside)
              - (1.0 + inside[:, 0] - s.center[0]))
    rep_out = pot.double_layer_eval(s, u, outside) - pot.single_layer_eval(s, du, outside)
    rep_on = W @ u - pot.assemble_V(s) @ du - 0.5 * u
    out.append(Check(f"{s.kind}: Green representation",
                     float(max(np.abs(rep_in).max(), np.abs(rep_out).max(), np.abs(rep_on).max())),
                     _tol(s, 1e-8, 1e-4)))
    w = s.weights
    a, b = _smooth_field(s, rng), _smooth_field(s, rng)
    lhs, rhs = (W @ a) @ (w * b), a @ (w * (Ws @ b))
    out.append(Check(f"{s.kind}: adjointness <Wa,b> = <a,W*b>", abs(lhs - rhs) / max(abs(lhs), 1e-300),
                     1e-9))
    if s.kind == "sphere":
        ent = np.abs(w[:, None] * W - (w[:, None] * Ws).T).max() / np.abs(w[:, None] * W).max()
        out.append(Check("sphere: adjointness entrywise", float(ent), 1e-9))
    smin = min(np.linalg.svd(0.5 * np.eye(n) + tau * Ws, compute_uv=False).min() for tau in TAUS)
    out.append(Check(f"{s.kind}: min singular value of 1/2 I + tau W*", float(smin), 1e-6, ">"))
    D1 = pot.assemble_hypersingular(s) @ one
    out.append(Check(f"{s.kind}: normal derivative of w[1] vanishes", float(np.abs(D1).max()),
                     _tol(s, 1e-10, 1e-4)))
    return out


def expr_suite(seed=0):
    rng = np.random.default_rng(seed)
    out = []
    f = parse_expr("zeta^2 + eps*t1")
    out.append(Check("expr: zeta^2 + eps*t1 at (0, e1, 2)", abs(f(eps=0.0, zeta=2.0, t1=1.0, t2=0.0, t3=0.0) - 4.0),
                     0.0))
    g = parse_expr("exp(eps*zeta) + sin(zeta)*eps^2 + log(2 + zeta^2)/(3 + eps)")
    worst = 0.0
    h, h2 = 1e-5, 1e-4
    for _ in range(20):
        e, z = rng.uniform(-0.5, 0.5, 2)
        t = rng.standard_normal(3)
        v, de, dz, dee, dez, dzz = eval_with_partials(g, e, t, z)

        def fv(a, b):
            return eval_with_partials(g, a, t, b)[0]
        fd = ((fv(e + h, z) - fv(e - h, z)) / (2 * h), (fv(e, z + h) - fv(e, z - h)) / (2 * h),
              (fv(e + h2, z) - 2 * v + fv(e - h2, z)) / h2 ** 2,
              (fv(e + h2, z + h2) - fv(e + h2, z - h2) - fv(e - h2, z + h2) + fv(e - h2, z - h2)) / (4 * h2 * h2),
              (fv(e, z + h2) - 2 * v + fv(e, z - h2)) / h2 ** 2)
        for exact, approx in zip((de, dz, dee, dez, dzz), fd):
            worst = max(worst, abs(exact - approx) / max(abs(exact), 1.0))
    out.append(Check("expr: partials vs finite differences", worst, 1e-6))
    F = parse_expr("eps^2*zeta + eps*zeta^3 + cos(zeta)")
    tt = rng.standard_normal((8, 3))
    a, b = rng.standard_normal(8), rng.standard_normal(8)
    e = 0.07
    lhs = F(eps=e, zeta=a + e * b, t1=tt[:, 0], t2=tt[:, 1], t3=tt[:, 2])
    _, de, dz, *_ = eval_with_partials(F, 0.0, tt, a)
    rhs = eval_with_partials(F, 0.0, tt, a)[0] + e * de + e * b * dz + e * e * f_tilde(F, e, tt, a, b)
    out.append(Check("expr: second-order Taylor identity", float(np.abs(lhs - rhs).max()), 1e-8))
    v, dv = rng.standard_normal(8), rng.standard_normal(8)
    fd = (nemytskii(F, e, tt, v + h * dv) - nemytskii(F, e, tt, v - h * dv)) / (2 * h)
    out.append(Check("expr: superposition differential", float(np.abs(fd - nemytskii_dzeta(F, e, tt, v) * dv).max()),
                     1e-6))
    return out


def bvp_suite(s, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    c = s.center
    rep = bvp.solve_interior_dirichlet(s, lambda x: (x[:, 0] - c[0]) ** 2 - (x[:, 1] - c[1]) ** 2)
    y = _probes(s, 0.4, seed=seed)
    v, g, H = rep.evaluate(y, order=2)
    z = y - c
    err = max(np.abs(v - (z[:, 0] ** 2 - z[:, 1] ** 2)).max(),
              np.abs(g - np.stack([2 * z[:, 0], -2 * z[:, 1], 0 * z[:, 0]], axis=1)).max(),
              np.abs(H - np.diag([2.0, -2.0, 0.0])).max())
    out.append(Check(f"{s.kind}: Dirichlet reproduces x1^2 - x2^2", float(err), _tol(s, 1e-8, 1e-4)))
    h = rng.standard_normal(s.size)
    mu, xi = bvp.solve_J(s, h)
    out.append(Check(f"{s.kind}: J round trip", float(np.abs(bvp.apply_J(s, mu, xi) - h).max() / np.abs(h).max()),
                     1e-10))
    out.append(Check(f"{s.kind}: J density mean zero",
                     abs(s.weights @ mu) / (np.abs(mu).max() * s.area), 1e-12))
    # manufactured transmission pair: u- = S outside, u+ = 0 inside, lambda = 1
    x = s.nodes
    f1 = pot.fundamental_solution(x)
    f2 = np.einsum("ij,ij->i", s.normals, pot.grad_fundamental_solution(x))
    if s.kind == "sphere" and np.allclose(c, 0):
        um, up = bvp.solve_auxiliary_transmission(s, 1.0, f1, f2)
        far = np.array([[2.0, 0.0, 0.0], [0.0, -3.0, 1.0]])
        err = max(np.abs(um(far) - pot.fundamental_solution(far)).max(), np.abs(up(_probes(s, 0.4))).max())
        out.append(Check("sphere: auxiliary transmission recovers (S, 0)", float(err), 1e-10))
    return out


def system_suite(p, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    q0 = solve_limiting(p)
    out.append(Check("system: limiting residual", assemble_M(0.0, q0, p).norm(), 1e-8))
    i = p.inner
    t = i.nodes
    G0 = p.G(eps=0.0, zeta=p.zeta_i, t1=t[:, 0], t2=t[:, 1], t3=t[:, 2])
    out.append(Check("system: zeta_0 identity", abs(q0.zeta - integrate(i, G0)), 1e-10))
    n_o, n_i = p.sizes
    n = n_o + 2 * n_i + 1
    q = DensityQuadruple.from_vector(0.1 * rng.standard_normal(n), n_o, n_i)
    J0 = jacobian_at_zero(p)
    out.append(Check("system: Jacobian at zero, two constructions", float(np.abs(J0 - jacobian(0.0, q, p)).max()),
                     1e-12))
    out.append(Check("system: Jacobian at zero invertible", float(np.linalg.svd(J0, compute_uv=False).min()),
                     0.0, ">"))
    # directional derivative against central differences
    worst = 0.0
    for e in (0.0, 0.5 * (p.epsilons[-1] if p.epsilons else 0.1)):
        J = jacobian(e, q, p)
        x = q.to_vector()
        for _ in range(3):
            d = rng.standard_normal(n)
            hs = 1e-6
            fd = (residual_vector(e, DensityQuadruple.from_vector(x + hs * d, n_o, n_i), p)
                  - residual_vector(e, DensityQuadruple.from_vector(x - hs * d, n_o, n_i), p)) / (2 * hs)
            worst = max(worst, np.abs(J @ d - fd).max() / max(np.abs(J @ d).max(), 1e-300))
    out.append(Check("system: Jacobian vs finite differences", float(worst), 1e-6))
    out.append(Check("system: zeta identity at the limit", zeta_identity_defect(0.0, q0, p), 1e-8))
    return out
