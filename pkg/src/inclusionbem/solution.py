"""Solutions of the transmission problem and their expansions in eps.

With densities q = (phi_o, phi_i, zeta, psi) at eps,

    u_o_eps(x) = u_o(x) + eps w_o[phi_o](x) + eps w_i[phi_i](x / eps) + eps^2 zeta S(x)
    u_i_eps(x) = eps w_i[psi](x / eps) + zeta_i

where w_i is the double layer of the unscaled inclusion boundary; a double
layer is invariant under the rescaling x -> x / eps, so no integral over the
scaled surface is ever formed.
"""

from dataclasses import dataclass, field

import numpy as np

from . import potential as pot
from . import sph
from .errors import ClearanceError, InsufficientDataError
from .system import continuation


def _check_in_outer(p, x):
    if not np.all(p.outer.contains(x)):
        raise ClearanceError("probe outside the outer domain")


class SolutionBundle:
    """Converged densities at one eps and the two reconstructed functions."""

    def __init__(self, eps, q, p, residual=None):
        if not eps > 0:
            raise ValueError("reconstruction needs eps > 0")
        self.eps = float(eps)
        self.q = q
        self.p = p
        self.diagnostics = {"newton_residual": residual}

    def u_o_eps(self, x):
        x = pot._points(x)
        p, q, e = self.p, self.q, self.eps
        if np.any(p.inner.contains(x / e)):
            raise ClearanceError("probe lies inside the inclusion")
        val = (p.u_o(x) + e * pot.double_layer_eval(p.outer, q.phi_o, x)
               + e * pot.double_layer_eval(p.inner, q.phi_i, x / e)
               + e * e * q.zeta * pot.fundamental_solution(x))
        return val

    def u_i_eps(self, x):
        x = pot._points(x)
        t = x / self.eps
        if not np.all(self.p.inner.contains(t)):
            raise ClearanceError("probe lies outside the inclusion")
        return self.p.zeta_i + self.eps * pot.double_layer_eval(self.p.inner, self.q.psi, t)

    # traces on the interface, at arbitrary parameters of the inclusion boundary
    def interface_traces(self, theta, phi):
        """u_o_eps, u_i_eps and their normal derivatives at eps * t(theta, phi).

        Layer-potential jumps are taken from the nodal on-surface operators
        and interpolated; smooth terms are evaluated directly.
        """
        p, q, e = self.p, self.q, self.eps
        i = p.inner
        t, nu, _ = i.evaluate(theta, phi)
        P = i.interpolation(theta, phi)
        Wi = pot.assemble_W(i).matrix
        Di = pot.assemble_hypersingular(i).matrix
        x = e * t
        u_smooth, g_smooth = p.u_o.evaluate(x, order=1)
        wo, gwo = pot.double_layer_eval(p.outer, q.phi_o, x, order=1)
        S = pot.fundamental_solution(t)
        dS = np.einsum("ij,ij->i", nu, pot.grad_fundamental_solution(t))
        u_o = u_smooth + e * wo + e * (P @ (-0.5 * q.phi_i + Wi @ q.phi_i)) + e * q.zeta * S
        dn_u_o = (np.einsum("ij,ij->i", nu, g_smooth + e * gwo) + P @ (Di @ q.phi_i) + q.zeta * dS)
        u_i = p.zeta_i + e * (P @ (0.5 * q.psi + Wi @ q.psi))
        dn_u_i = P @ (Di @ q.psi)
        return {"t": t, "u_o": u_o, "dn_u_o": dn_u_o, "u_i": u_i, "dn_u_i": dn_u_i}

    def outer_trace(self, theta, phi):
        """u_o_eps at points of the outer boundary (jump terms interpolated)."""
        p, q, e = self.p, self.q, self.eps
        o = p.outer
        x, _, _ = o.evaluate(theta, phi)
        P = o.interpolation(theta, phi)
        Wo = pot.assemble_W(o).matrix
        mu = p.u_o.density
        val = (P @ (0.5 * mu + Wo @ mu) + e * (P @ (0.5 * q.phi_o + Wo @ q.phi_o))
               + e * pot.double_layer_eval(p.inner, q.phi_i, x / e)
               + e * e * q.zeta * pot.fundamental_solution(x))
        return x, val


def reconstruct(eps, q, p, residual=None):
    return SolutionBundle(eps, q, p, residual)


def rescaled_inner(eps, q, p, t):
    """zeta_i + eps U^i_m[eps](t), i.e. u_i_eps(eps t)."""
    return p.zeta_i + eps * inner_family(q, p, t)


def inner_family(q, p, t):
    """U^i_m[eps](t) = w_i[psi](t) for t inside the inclusion."""
    t = pot._points(t)
    if not np.all(p.inner.contains(t)):
        raise ClearanceError("inner probe outside the inclusion")
    return pot.double_layer_eval(p.inner, q.psi, t)


def macro_expansion(eps, q, p, x):
    """U^o_M[eps](x), with u_o_eps = u_o + eps U^o_M[eps] away from the inclusion."""
    x = pot._points(x)
    _check_in_outer(p, x)
    val = pot.double_layer_eval(p.outer, q.phi_o, x)
    if eps > 0:
        if np.any(p.inner.contains(x / eps)):
            raise ClearanceError("macro probe lies inside the inclusion for this eps")
        val = val + pot.double_layer_eval(p.inner, q.phi_i, x / eps)
    return val + eps * q.zeta * pot.fundamental_solution(x)


def micro_expansion(eps, q, p, t):
    """U^o_m[eps](t), with u_o_eps(eps t) = u_o(0) + eps U^o_m[eps](t)."""
    t = pot._points(t)
    if np.any(p.inner.contains(t)):
        raise ClearanceError("micro probe lies inside the inclusion")
    _check_in_outer(p, eps * t)
    if eps > 0:
        quotient = (p.u_o(eps * t) - p.u_o0) / eps
    else:
        quotient = t @ p.grad_u_o0
    return (quotient + pot.double_layer_eval(p.outer, q.phi_o, eps * t)
            + pot.double_layer_eval(p.inner, q.phi_i, t) + q.zeta * pot.fundamental_solution(t))


def check_probes(p, probes, epsilons):
    """Raise ClearanceError unless every probe is usable at every eps.

    inner: inside the inclusion; omega_M: in Omega(eps) away from eps times the
    inclusion; omega_m: outside the inclusion with eps t inside the outer surface.
    """
    pts_i = pot._points(probes.get("inner", np.zeros((0, 3))))
    pts_M = pot._points(probes.get("omega_M", np.zeros((0, 3))))
    pts_m = pot._points(probes.get("omega_m", np.zeros((0, 3))))
    if len(pts_i):
        if not np.all(p.inner.contains(pts_i)):
            raise ClearanceError("inner probe outside the inclusion")
        pot.check_clearance(p.inner, pts_i)
    for e in epsilons:
        if len(pts_M):
            _check_in_outer(p, pts_M)
            pot.check_clearance(p.outer, pts_M)
            if np.any(p.inner.contains(pts_M / e)):
                raise ClearanceError(f"omega_M probe inside the inclusion at eps = {e}")
            pot.check_clearance(p.inner, pts_M / e)
        if len(pts_m):
            _check_in_outer(p, e * pts_m)
            pot.check_clearance(p.outer, e * pts_m)
    if len(pts_m):
        if np.any(p.inner.contains(pts_m)):
            raise ClearanceError("omega_m probe inside the inclusion")
        pot.check_clearance(p.inner, pts_m)


# probe grids and the boundary value problem residuals ---------------------------

def probe_parameters(L):
    """Grid of order L rotated by half a node spacing in both angles."""
    th, ph, _ = sph.gauss_grid(L)
    d = sph.directions(th, ph + np.pi / (2 * L + 2))
    a = 0.5 * np.pi / (L + 1)
    R = np.array([[np.cos(a), 0.0, np.sin(a)], [0.0, 1.0, 0.0], [-np.sin(a), 0.0, np.cos(a)]])
    return sph.to_angles(d @ R.T)


def _laplacian_fd(f, x, h):
    """Fourth-order central-difference Laplacian of f at points x with steps h."""
    x = pot._points(x)
    h = np.broadcast_to(np.asarray(h, dtype=float), (len(x),))
    f0 = f(x)
    acc = -90.0 * f0
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        for s, c in ((-2, -1.0), (-1, 16.0), (1, 16.0), (2, -1.0)):
            acc = acc + c * f(x + s * h[:, None] * e)
    return acc / (12.0 * h * h)


def harmonic_probes(p, eps, n=24, seed=0):
    """Points of Omega(eps) and of eps * Omega^i for the Laplacian checks,
    each with a finite-difference step.  Assumes both surfaces are star-shaped
    about the origin."""
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    th, ph = sph.to_angles(d)
    r_o = np.linalg.norm(p.outer.evaluate(th, ph)[0], axis=1)
    ti = p.inner.evaluate(th, ph)[0]
    r_i = np.linalg.norm(ti, axis=1)
    lo, hi = 2.0 * eps * r_i, 0.5 * r_o
    r = lo + rng.uniform(0.0, 1.0, n) * (hi - lo)
    shell = d * r[:, None]
    # steps for terms singular outside the outer surface and inside the inclusion
    h_shell = (0.02 * (r_o - r), 0.005 * (r - eps * r_i))
    inner = eps * ti * rng.uniform(0.1, 0.5, n)[:, None]
    h_inner = np.full(n, 0.02 * eps)
    return shell, h_shell, inner, h_inner


def boundary_residuals(bundle, L_probe=None):
    """Sup-norm residuals of the five conditions of the transmission problem,
    at probe grids rotated away from the quadrature nodes."""
    p, e = bundle.p, bundle.eps
    q = bundle.q
    Lp = L_probe or p.inner.L
    th, ph = probe_parameters(Lp)
    tr = bundle.interface_traces(th, ph)
    t = tr["t"]
    F = p.F(eps=e, zeta=tr["u_i"], t1=t[:, 0], t2=t[:, 1], t3=t[:, 2])
    G = p.G(eps=e, zeta=tr["u_i"], t1=t[:, 0], t2=t[:, 1], t3=t[:, 2])
    tho, pho = probe_parameters(p.outer.L if L_probe is None else L_probe)
    x, u_outer = bundle.outer_trace(tho, pho)
    shell, hs, inner, hi = harmonic_probes(p, e)

    # the smooth part and the inclusion-scale part are differenced with their own steps
    far = lambda y: p.u_o(y) + e * pot.double_layer_eval(p.outer, q.phi_o, y)
    near = lambda y: e * (pot.double_layer_eval(p.inner, q.phi_i, y / e)
                          + e * q.zeta * pot.fundamental_solution(y))
    lap_o = _laplacian_fd(far, shell, hs[0]) + _laplacian_fd(near, shell, hs[1])
    lap_i = _laplacian_fd(lambda y: e * pot.double_layer_eval(p.inner, q.psi, y / e), inner, hi)
    if np.any(p.inner.contains(shell / e)) or not np.all(p.inner.contains(inner / e)):
        raise ClearanceError("harmonicity probe on the wrong side of the interface")

    return {
        "laplace_outer": float(np.max(np.abs(lap_o))),
        "laplace_inner": float(np.max(np.abs(lap_i))),
        "dirichlet_outer": float(np.max(np.abs(u_outer - p.f_o_at(x)))),
        "interface_value": float(np.max(np.abs(tr["u_o"] - F))),
        "interface_flux": float(np.max(np.abs(tr["dn_u_o"] - tr["dn_u_i"] - G))),
    }


# sweeps and fits ----------------------------------------------------------------

FAMILIES = ("inner", "U_i_m", "U_o_M", "U_o_m")


@dataclass
class SweepResult:
    epsilons: np.ndarray
    probes: dict
    values: dict
    fits: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    norms: dict = field(default_factory=dict)

    def rows(self):
        """(family, probe_index, epsilon, value) records."""
        out = []
        for fam in FAMILIES:
            vals = self.values[fam]
            for j in range(vals.shape[1]):
                for k, e in enumerate(self.epsilons):
                    out.append((fam, j, float(e), float(vals[k, j])))
        return out


def fit_polynomial(eps, values, degree):
    """Least-squares fit in s = eps / max(eps); returns (coefficients in eps, rms residual)."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(eps) < degree + 1:
        raise InsufficientDataError(f"insufficient samples: degree {degree} needs {degree + 1} "
                                    f"epsilon values, have {len(eps)}")
    scale = eps.max()
    A = np.vander(eps / scale, degree + 1, increasing=True)
    c, *_ = np.linalg.lstsq(A, values, rcond=None)
    res = float(np.sqrt(np.mean((A @ c - values) ** 2)))
    return c / scale ** np.arange(degree + 1), res


def loglog_slope(eps, norms):
    eps = np.asarray(eps, dtype=float)
    return float(np.polyfit(np.log(eps), np.log(np.asarray(norms, dtype=float)), 1)[0])


def sweep(p, probes, branch=None):
    """Evaluate the expansion families at every converged positive eps.

    ``probes`` maps "inner" (points of the closed inclusion), "omega_M" and
    "omega_m" to point arrays.
    """
    if branch is None:
        branch, _ = continuation(p)
    q0 = branch[0][1]
    pts_i = pot._points(probes["inner"])
    pts_M = pot._points(probes["omega_M"])
    pts_m = pot._points(probes["omega_m"])
    Ui0 = inner_family(q0, p, pts_i)
    eps_list, vals = [], {f: [] for f in FAMILIES}
    dev_i, rem_i, dev_M = [], [], []
    u_o_M = p.u_o(pts_M)
    for e, q in branch:
        if e <= 0:
            continue
        Ui = inner_family(q, p, pts_i)
        inner_vals = p.zeta_i + e * Ui
        UM = macro_expansion(e, q, p, pts_M)
        vals["inner"].append(inner_vals)
        vals["U_i_m"].append(Ui)
        vals["U_o_M"].append(UM)
        vals["U_o_m"].append(micro_expansion(e, q, p, pts_m))
        eps_list.append(e)
        dev_i.append(np.max(np.abs(inner_vals - p.zeta_i)))
        rem_i.append(np.max(np.abs(inner_vals - p.zeta_i - e * Ui0)))
        dev_M.append(np.max(np.abs(SolutionBundle(e, q, p).u_o_eps(pts_M) - u_o_M)))
    eps_arr = np.array(eps_list)
    res = SweepResult(eps_arr, {"inner": pts_i, "omega_M": pts_M, "omega_m": pts_m},
                      {f: np.array(v).reshape(len(eps_list), -1) for f, v in vals.items()})
    res.norms = {"inner_deviation": np.array(dev_i), "inner_remainder": np.array(rem_i),
                 "macro_deviation": np.array(dev_M)}
    if len(eps_arr) >= 2:
        res.slopes = {k: loglog_slope(eps_arr, v) for k, v in res.norms.items()}
    return res


def sweep_and_fit(p, probes, degrees, branch=None):
    degrees = sorted(int(d) for d in degrees)
    res = sweep(p, probes, branch)
    if degrees and len(res.epsilons) < degrees[-1] + 1:
        raise InsufficientDataError(f"insufficient samples: degree {degrees[-1]} needs "
                                    f"{degrees[-1] + 1} epsilon values, have {len(res.epsilons)}")
    for fam in FAMILIES:
        V = res.values[fam]
        for j in range(V.shape[1]):
            for d in degrees:
                c, r = fit_polynomial(res.epsilons, V[:, j], d)
                res.fits.append({"family": fam, "probe": j, "degree": d,
                                 "coefficients": c.tolist(), "residual": r})
    return res


def residual_table(res, family, probe):
    """Fit residuals of one (family, probe) ordered by degree."""
    rows = sorted((f["degree"], f["residual"]) for f in res.fits
                  if f["family"] == family and f["probe"] == probe)
    return [r for _, r in rows]
