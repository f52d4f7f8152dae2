import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inclusionbem import eval_with_partials, f_tilde, find_zeta_i, parse_expr
from inclusionbem.errors import AssumptionError, ExprDomainError, ExprSyntaxError, NoRootError
from inclusionbem.expr import nemytskii, nemytskii_dzeta

E1 = np.array([1.0, 0.0, 0.0])


def test_evaluation():
    assert parse_expr("zeta^2 + eps*t1")(eps=0.0, zeta=2.0, t1=1.0, t2=0.0, t3=0.0) == 4.0
    assert parse_expr("1/(4*pi)")() == pytest.approx(0.0795774715459477)
    assert parse_expr("2^3 - -1")() == 9.0


def test_syntax_errors():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("zeta ++ 2")
    assert err.value.offset == 6
    assert "offset 6" in str(err.value)
    for bad in ("foo + 1", "zeta^0.5", "sin(zeta", "2 *", "zeta $ 1"):
        with pytest.raises(ExprSyntaxError):
            parse_expr(bad)


def test_domain_error_names_subexpression():
    f = parse_expr("1 + log(zeta - 1)")
    with pytest.raises(ExprDomainError, match="log"):
        f(zeta=0.5)


def test_partials_examples():
    _, de, dz, dee, dez, dzz = eval_with_partials(parse_expr("3*zeta + 7"), 0.2, E1, 1.5)
    assert (dz, dzz, de) == (3.0, 0.0, 0.0)
    _, de, dz, dee, dez, dzz = eval_with_partials(parse_expr("eps*zeta"), 0.2, E1, 1.5)
    assert (dez, dee, dzz) == (1.0, 0.0, 0.0)
    v, _, dz, _, _, dzz = eval_with_partials(parse_expr("exp(zeta)"), 0.0, E1, 0.0)
    assert v == dz == dzz == 1.0


def test_partials_vectorized():
    t = np.random.default_rng(0).standard_normal((5, 3))
    v, *_ = eval_with_partials(parse_expr("t1*zeta + eps"), 0.1, t, np.ones(5))
    assert np.allclose(v, t[:, 0] + 0.1)


EXPRS = ["exp(eps*zeta) + sin(zeta)*eps^2", "zeta^3/(2 + eps^2) + cos(eps*t2)",
         "log(3 + zeta^2)*sqrt(4 + eps)", "tanh(zeta - eps*t1)^2"]


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(EXPRS), st.floats(-0.5, 0.5), st.floats(-1.5, 1.5),
       st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_partials_match_finite_differences(text, e, z, t):
    f = parse_expr(text)
    t = np.array(t)
    v, de, dz, dee, dez, dzz = eval_with_partials(f, e, t, z)

    def g(a, b):
        return eval_with_partials(f, a, t, b)[0]
    h, h2 = 1e-5, 1e-4
    fd = [(g(e + h, z) - g(e - h, z)) / (2 * h), (g(e, z + h) - g(e, z - h)) / (2 * h),
          (g(e + h2, z) - 2 * v + g(e - h2, z)) / h2 ** 2,
          (g(e + h2, z + h2) - g(e + h2, z - h2) - g(e - h2, z + h2) + g(e - h2, z - h2)) / (4 * h2 ** 2),
          (g(e, z + h2) - 2 * v + g(e, z - h2)) / h2 ** 2]
    for exact, approx in zip((de, dz, dee, dez, dzz), fd):
        assert abs(exact - approx) <= 1e-6 * max(1.0, abs(exact))


def test_find_zeta_i():
    nodes = np.random.default_rng(1).standard_normal((10, 3))
    assert find_zeta_i(parse_expr("2*zeta"), 1.0, nodes) == (0.5, 2.0)
    z, d = find_zeta_i(parse_expr("zeta^3 + zeta"), 10.0, nodes)
    assert z == pytest.approx(2.0, abs=1e-13) and d == pytest.approx(13.0)
    with pytest.raises(AssumptionError) as err:
        find_zeta_i(parse_expr("t1*zeta"), 1.0, nodes)
    assert err.value.code == "zetai-nonconstant"
    with pytest.raises(AssumptionError) as err:
        find_zeta_i(parse_expr("-zeta"), 1.0, nodes)
    assert err.value.code == "zetai-nonpositive"
    with pytest.raises(NoRootError):
        find_zeta_i(parse_expr("zeta^2 + 1"), 0.0, nodes)
    with pytest.raises(AssumptionError) as err:
        find_zeta_i(parse_expr("zeta + t1^2"), 1.0, nodes)
    assert err.value.code == "zetai-mismatch"


def test_f_tilde_examples():
    t = np.array([0.3, -0.2, 0.9])
    assert f_tilde(parse_expr("eps^2"), 0.37, t, 0.4, -1.1) == pytest.approx(1.0, abs=1e-14)
    assert f_tilde(parse_expr("3*eps - 2*zeta + 1"), 0.37, t, 0.4, -1.1) == 0.0
    F = parse_expr("eps^2*zeta")
    for e in (1e-3, 0.1, 0.7):
        assert f_tilde(F, e, t, 1.0, 0.0) == pytest.approx(1.0, abs=1e-14)
    e = 1e-3
    v0, de, dz, *_ = eval_with_partials(F, 0.0, t, 1.0)
    assert (F(eps=e, zeta=1.0) - v0 - e * de) / e ** 2 == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.1, 0.1), st.floats(-2, 2), st.floats(-2, 2))
def test_taylor_identity(e, a, b):
    t = np.array([0.6, 0.0, -0.8])
    for text, tol in (("eps^2*zeta^3 + eps*zeta - zeta^2 + eps^4", 1e-10), ("exp(eps*zeta)*cos(zeta)", 1e-8)):
        F = parse_expr(text)
        v0, de, dz, *_ = eval_with_partials(F, 0.0, t, a)
        lhs = F(eps=e, zeta=a + e * b, t1=t[0], t2=t[1], t3=t[2])
        rhs = v0 + e * de + e * b * dz + e * e * f_tilde(F, e, t, a, b)
        assert abs(lhs - rhs) <= tol * (1 + abs(lhs))


def test_nemytskii_differential():
    rng = np.random.default_rng(2)
    H = parse_expr("zeta^2*t1 + sin(eps*zeta)")
    t, v, dv = rng.standard_normal((6, 3)), rng.standard_normal(6), rng.standard_normal(6)
    h = 1e-6
    fd = (nemytskii(H, 0.1, t, v + h * dv) - nemytskii(H, 0.1, t, v - h * dv)) / (2 * h)
    assert np.abs(fd - nemytskii_dzeta(H, 0.1, t, v) * dv).max() < 1e-6
