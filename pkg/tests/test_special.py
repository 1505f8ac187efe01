import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy.special import eval_jacobi

from partialwave.errors import DomainError
from partialwave.special import (
    JacobiParams,
    PaperConstants,
    angular_weight,
    bessel_j,
    bessel_j_lommel,
    ck_constant,
    harmonic_dim,
    jacobi_at_zero_paper,
    jacobi_deriv,
    jacobi_eval,
    kbracket,
    q_poly_eval,
    sonine_eval,
)


# ---------------------------------------------------------------- jacobi


def rodrigues_value(k, a, b, x):
    """Independent oracle: symbolic Rodrigues formula."""
    xs = sp.Symbol("x")
    expr = (
        (-1) ** k
        / (2**k * sp.factorial(k))
        * (1 - xs) ** (-sp.Rational(a).limit_denominator() if a == int(a) else -sp.nsimplify(a))
        * (1 + xs) ** (-sp.nsimplify(b))
        * sp.diff((1 - xs) ** (sp.nsimplify(a) + k) * (1 + xs) ** (sp.nsimplify(b) + k), xs, k)
    )
    return float(expr.subs(xs, sp.nsimplify(x)).evalf(30))


def test_degree_zero_is_one():
    assert jacobi_eval(JacobiParams(0, 1.3, -0.2), 0.3) == 1.0


def test_p1_p2_legendre():
    x = np.linspace(-1, 1, 7)
    assert np.allclose(jacobi_eval(JacobiParams(1, 0, 0), x), x, atol=1e-15)
    assert jacobi_eval(JacobiParams(2, 0, 0), 0.0) == pytest.approx(-0.5, abs=1e-15)


@pytest.mark.parametrize("k", range(1, 6))
@pytest.mark.parametrize("a,b", [(0.0, 0.0), (0.5, 0.5), (1.0, 2.0)])
def test_rodrigues_oracle(k, a, b):
    for x in (-0.7, 0.0, 0.31, 0.9):
        got = float(jacobi_eval(JacobiParams(k, a, b), x))
        want = rodrigues_value(k, a, b, x)
        assert got == pytest.approx(want, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    k=st.integers(0, 40),
    a=st.floats(-0.9, 3.0),
    b=st.floats(-0.9, 3.0),
    x=st.floats(-1.0, 1.0),
)
def test_matches_scipy_recurrence(k, a, b, x):
    got = float(jacobi_eval(JacobiParams(k, a, b), x))
    want = float(eval_jacobi(k, a, b, x))
    assert got == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_parameter_domain():
    with pytest.raises(DomainError):
        JacobiParams(2, -1.0, 0.0)
    with pytest.raises(DomainError):
        JacobiParams(-1, 0.0, 0.0)


def test_derivative_against_finite_differences():
    h = 1e-6
    for k, a in ((3, 0.5), (7, 1.5)):
        p = JacobiParams(k, a, a)
        x = 0.37
        fd = (jacobi_eval(p, x + h) - jacobi_eval(p, x - h)) / (2 * h)
        assert float(jacobi_deriv(p, x)) == pytest.approx(float(fd), rel=1e-7)


# ------------------------------------------------------- value at zero


def test_at_zero_examples():
    assert jacobi_at_zero_paper(2, 0.0) == pytest.approx(0.5, abs=1e-14)
    assert jacobi_at_zero_paper(0, 0.0) == pytest.approx(1.0, abs=1e-14)
    want = abs(float(jacobi_eval(JacobiParams(4, 0.5, 0.5), 0.0)))
    assert jacobi_at_zero_paper(4, 0.5) == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("a", [0.0, 0.5, 1.5])
def test_at_zero_moduli_match_recurrence(a):
    for k in range(0, 31):
        formula = jacobi_at_zero_paper(k, a)
        if k % 2 == 0:
            ref = abs(float(jacobi_eval(JacobiParams(k, a, a), 0.0)))
        else:
            ref = abs(float(jacobi_deriv(JacobiParams(k, a, a), 0.0)))
        assert formula == pytest.approx(ref, rel=1e-10)


def test_stirling_consistency():
    v100 = jacobi_at_zero_paper(100, 0.0) * np.sqrt(100)
    v200 = jacobi_at_zero_paper(200, 0.0) * np.sqrt(200)
    assert abs(v200 / v100 - 1.0) < 0.05
    # the limit constant is sqrt(2/pi)
    assert v200 == pytest.approx(np.sqrt(2 / np.pi), rel=0.02)


# -------------------------------------------------------------- Q_k


def q_symbolic(k, n, x):
    xs = sp.Symbol("x")
    expr = sp.diff((1 - xs**2) ** (k + sp.Rational(n - 3, 2)), xs, k) / (
        2**k * sp.gamma(k + sp.Rational(n - 1, 2))
    )
    return float(expr.subs(xs, sp.nsimplify(x)).evalf(30))


def test_q_trivial_and_linear():
    assert q_poly_eval(0, 3, 0.7) == pytest.approx(1.0, abs=1e-15)
    x = np.linspace(-1, 1, 5)
    assert np.allclose(q_poly_eval(1, 3, x), -x, atol=1e-14)


def test_q_reduces_to_legendre_modulus():
    got = abs(float(q_poly_eval(5, 3, 0.3)))
    want = abs(float(eval_jacobi(5, 0, 0, 0.3)))
    assert got == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("k", range(0, 5))
def test_q_symbolic_oracle(n, k):
    for x in (-0.6, 0.15, 0.8):
        assert float(q_poly_eval(k, n, x)) == pytest.approx(q_symbolic(k, n, x), abs=1e-12)


def test_q_lemma_bound_n3_sample():
    x = np.linspace(-1, 1, 2049)
    for k in (0, 1, 5, 20, 50):
        assert np.max(np.abs(q_poly_eval(k, 3, x))) <= 1.0 + 1e-12


# ------------------------------------------------------------- Sonine


def test_sonine_direct_value():
    # T_a = (1-x^2)^{1/2} P_1^{(1/2,1/2)}, P_1 = (a+1) x = 1.5 x
    # S(0) = T(0)^2 + T'(0)^2 / ((k+1)(2a+k)) = 0 + 1.5^2 / 4
    assert float(sonine_eval(1, 0.5, 0.0)) == pytest.approx(0.5625, abs=1e-14)


def test_sonine_derivative_identity():
    # finite-difference S' against -2(2a-1)/((k+1)(2a+k)) x T'^2
    k, a = 2, 0.0
    x = 0.5
    h = 1e-5
    fd = (float(sonine_eval(k, a, x + h)) - float(sonine_eval(k, a, x - h))) / (2 * h)
    p = JacobiParams(k, a, a)
    tp = float(jacobi_deriv(p, x))  # a = 0 so T' = P'
    want = -2.0 * (2 * a - 1.0) / ((k + 1.0) * (2 * a + k)) * x * tp**2
    assert fd == pytest.approx(want, abs=1e-6)


def test_sonine_max_at_zero_and_monotone():
    x = np.linspace(-0.999, 0.999, 1001)
    for k in (1, 3, 10, 50):
        for a in (0.5, 1.0):
            s = sonine_eval(k, a, x)
            s0 = float(sonine_eval(k, a, 0.0))
            assert np.max(s) <= s0 + 1e-12
            right = s[x >= 0.0]
            assert np.all(np.diff(right) <= 1e-12)


def test_sonine_t_bound_scaling():
    # sqrt(S_a(0)) * sqrt(k) stays bounded for a >= 1/2
    vals = [np.sqrt(float(sonine_eval(k, 0.5, 0.0))) * np.sqrt(k) for k in range(2, 201)]
    assert max(vals) <= 2.0 * vals[0]


def test_sonine_domain():
    with pytest.raises(DomainError):
        sonine_eval(0, 0.5, 0.0)
    with pytest.raises(DomainError):
        sonine_eval(2, 0.5, 1.0)


# ------------------------------------------------------------- Bessel


def test_bessel_half_integer_closed_form():
    y = np.linspace(0.2, 40.0, 57)
    want = np.sqrt(2.0 / (np.pi * y)) * np.sin(y)
    assert np.max(np.abs(bessel_j(0.5, y) - want)) < 1e-12


def test_bessel_trivial():
    assert bessel_j(0.0, 0.0) == pytest.approx(1.0)
    assert bessel_j_lommel(2.5, 0.0) == 0.0


def test_lommel_examples():
    assert abs(bessel_j_lommel(0.5, np.pi, 64)) < 1e-10
    assert bessel_j_lommel(1.5, 2.0, 128) == pytest.approx(float(bessel_j(1.5, 2.0)), abs=1e-8)
    assert bessel_j_lommel(3.5, 5.0, 128) == pytest.approx(float(bessel_j(3.5, 5.0)), abs=1e-8)


def test_lommel_converges_in_m():
    errs = [abs(bessel_j_lommel(2.5, 30.0, m) - float(bessel_j(2.5, 30.0))) for m in (24, 48, 96)]
    assert errs[2] < 1e-10 and errs[2] <= errs[0]


def test_lommel_domain():
    with pytest.raises(DomainError):
        bessel_j_lommel(-0.6, 1.0)


def test_two_routes_agree_half_integers():
    ys = np.linspace(0.5, 100.0, 9)
    for nu2 in range(1, 42, 2):
        nu = nu2 / 2.0
        diff = np.max(np.abs(bessel_j(nu, ys) - bessel_j_lommel(nu, ys, 160)))
        assert diff < 1e-8, (nu, diff)


# ------------------------------------------------ constants and dims


def test_harmonic_dim_values():
    assert harmonic_dim(0, 3) == 1
    assert harmonic_dim(1, 3) == 3
    assert harmonic_dim(2, 3) == 5
    assert harmonic_dim(2, 4) == 9


@settings(max_examples=40, deadline=None)
@given(k=st.integers(2, 60), n=st.integers(2, 8))
def test_harmonic_dim_formula(k, n):
    from math import comb

    assert harmonic_dim(k, n) == comb(n + k - 1, k) - comb(n + k - 3, k - 2)


def test_ck_values():
    assert ck_constant(0, 3) == pytest.approx(1.0 / np.sqrt(2 * np.pi))
    assert ck_constant(1, 3) == pytest.approx(1j / (2.0 * np.sqrt(2 * np.pi)))
    for k in range(6):
        ratio = ck_constant(k + 1, 3) / ck_constant(k, 3)
        assert ratio.real == pytest.approx(0.0, abs=1e-15)
        assert ratio.imag > 0.0  # phase advances by i per unit k


def test_ck_large_degree_finite():
    val = ck_constant(250, 4)
    assert np.isfinite(val.real) and np.isfinite(val.imag)


def test_angular_weight_values():
    assert angular_weight(17, 3) == 1.0
    assert angular_weight(0, 5) == 1.0
    assert angular_weight(3, 4) == pytest.approx(10.0**-0.5)


def test_paper_constants_invariants():
    for n in (3, 4, 5):
        assert PaperConstants.for_channel(0, n).d_k == 1
        assert PaperConstants.for_channel(1, n).d_k == n
        pc = PaperConstants.for_channel(4, n)
        assert pc.omega_k == pytest.approx(angular_weight(4, n))
        assert pc.c_k == ck_constant(4, n)
    assert kbracket(0) == 1.0
