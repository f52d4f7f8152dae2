import numpy as np
import pytest
from conftest import oracle_problem

from inclusionbem import (DensityQuadruple, ProblemSpec, macro_expansion, micro_expansion, reconstruct,
                          rescaled_inner, sweep_and_fit)
from inclusionbem.config import DEFAULT_CONFIG, probes
from inclusionbem.errors import ClearanceError, InsufficientDataError
from inclusionbem.solution import (boundary_residuals, check_probes, fit_polynomial, loglog_slope,
                                   probe_parameters, residual_table)

PROBES = probes(DEFAULT_CONFIG)


def _at(branch, eps):
    return next(q for e, q in branch if e == eps)


def test_oracle_reconstruction(oracle_p, oracle_branch):
    branch, _ = oracle_branch
    for e, q in branch[1:]:
        b = reconstruct(e, q, oracle_p)
        x = PROBES["omega_M"]
        r = np.linalg.norm(x, axis=1)
        assert np.abs(b.u_o_eps(x) - (1 + e ** 2 - e ** 2 / r)).max() < 1e-10
        a = 0.5 * (1 + e ** 2 - e)
        assert np.abs(b.u_i_eps(e * PROBES["inner"]) - a).max() < 1e-10
        assert np.abs(macro_expansion(e, q, oracle_p, x) - e * (1 - 1 / r)).max() < 1e-10
    q = _at(branch, 0.1)
    assert np.abs(rescaled_inner(0.1, q, oracle_p, PROBES["inner"]) - 0.455).max() < 1e-10


def test_expansion_identities(default_p, default_branch):
    p = default_p
    branch, _ = default_branch
    for e, q in branch[-3:]:
        b = reconstruct(e, q, p)
        x, t = PROBES["omega_M"], PROBES["omega_m"]
        assert np.abs(p.u_o(x) + e * macro_expansion(e, q, p, x) - b.u_o_eps(x)).max() <= 1e-12
        assert np.abs(p.u_o0 + e * micro_expansion(e, q, p, t) - b.u_o_eps(e * t)).max() <= 1e-12
        ti = PROBES["inner"]
        assert np.array_equal(rescaled_inner(e, q, p, ti), b.u_i_eps(e * ti))


def test_limits_at_zero(default_p, default_branch):
    p = default_p
    q0 = default_branch[0][0][1]
    assert np.abs(macro_expansion(0.0, q0, p, PROBES["omega_M"])).max() == 0.0
    assert np.array_equal(rescaled_inner(0.0, q0, p, PROBES["inner"]), np.full(len(PROBES["inner"]), p.zeta_i))


def test_micro_quotient_at_zero(sphere8):
    p = ProblemSpec(sphere8, sphere8, "1 + 2*x1 - x3", "2*zeta", "1")
    n_o, n_i = p.sizes
    t = PROBES["omega_m"]
    got = micro_expansion(0.0, DensityQuadruple.zeros(n_o, n_i), p, t)
    assert np.array_equal(got, t @ p.grad_u_o0)


def test_zero_densities(sphere8):
    p = ProblemSpec(sphere8, sphere8, "0", "zeta - 1", "0", [0.1])
    b = reconstruct(0.1, DensityQuadruple.zeros(*p.sizes), p)
    assert np.abs(b.u_o_eps(PROBES["omega_M"])).max() < 1e-12
    assert np.abs(b.u_i_eps(0.1 * PROBES["inner"]) - 1.0).max() == 0.0


def test_reconstruction_checks_regions(oracle_p, oracle_branch):
    q = _at(oracle_branch[0], 0.1)
    b = reconstruct(0.1, q, oracle_p)
    with pytest.raises(ClearanceError):
        b.u_o_eps([0.05, 0, 0])
    with pytest.raises(ClearanceError):
        b.u_i_eps([0.5, 0, 0])
    with pytest.raises(ValueError):
        reconstruct(0.0, q, oracle_p)


def test_check_probes(oracle_p):
    check_probes(oracle_p, PROBES, oracle_p.epsilons)
    with pytest.raises(ClearanceError):
        check_probes(oracle_p, {"inner": [[1.5, 0, 0]]}, [0.1])
    with pytest.raises(ClearanceError):
        check_probes(oracle_p, {"omega_M": [[0.05, 0, 0]]}, [0.1])


def test_probe_grid_avoids_nodes(sphere8):
    th, ph = probe_parameters(8)
    x, _, _ = sphere8.evaluate(th, ph)
    d = np.linalg.norm(x[:, None, :] - sphere8.nodes[None, :, :], axis=2).min(axis=1)
    assert len(th) == sphere8.size and d.min() > 0.02


def test_boundary_residuals(default_p, default_branch):
    e, q = default_branch[0][-1]
    r = boundary_residuals(reconstruct(e, q, default_p))
    assert set(r) == {"laplace_outer", "laplace_inner", "dirichlet_outer", "interface_value", "interface_flux"}
    assert max(r.values()) <= 1e-5


def test_fit_polynomial():
    eps = np.linspace(0.01, 0.1, 6)
    c, res = fit_polynomial(eps, 2 - 3 * eps + 5 * eps ** 2, 2)
    assert np.allclose(c, [2, -3, 5], atol=1e-9) and res < 1e-13
    with pytest.raises(InsufficientDataError, match="insufficient samples"):
        fit_polynomial(eps[:3], eps[:3], 3)
    assert loglog_slope(eps, 7 * eps ** 2) == pytest.approx(2.0)


def test_oracle_inner_family_is_quadratic(oracle_p, oracle_branch):
    res = sweep_and_fit(oracle_p, PROBES, [2], oracle_branch[0])
    for j in range(len(PROBES["inner"])):
        (r,) = residual_table(res, "inner", j)
        assert r <= 1e-10
    c = [f["coefficients"] for f in res.fits if f["family"] == "inner"][0]
    assert np.allclose(c, [0.5, -0.5, 0.5], atol=1e-9)


def test_sweep_shapes(default_p, default_branch):
    res = sweep_and_fit(default_p, PROBES, [0, 1, 2], default_branch[0])
    assert len(res.epsilons) == len(default_p.epsilons)
    assert res.values["U_o_m"].shape == (len(res.epsilons), len(PROBES["omega_m"]))
    assert len(res.rows()) == len(res.epsilons) * sum(len(v) for k, v in PROBES.items()) + \
        len(res.epsilons) * len(PROBES["inner"])
    assert set(res.slopes) == {"inner_deviation", "inner_remainder", "macro_deviation"}
    with pytest.raises(InsufficientDataError):
        sweep_and_fit(oracle_problem(), PROBES, [6])
