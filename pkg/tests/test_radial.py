import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from partialwave.errors import DomainError, ResolutionError
from partialwave.radial import (
    RadialProfile,
    WeightSpec,
    build_frequency_grid,
    build_radial_grid,
    channel_sobolev_norm,
    derivative_values,
    fourier_factor,
    hankel_inverse,
    hankel_transform,
    radial_derivative,
    weight_eval,
)


# ------------------------------------------------------------- grids


def test_default_grid_shape_and_quadrature():
    g = build_radial_grid(1e-4, 50.0, 200, 400)
    assert g.n == 600
    assert g.nodes[0] == pytest.approx(1e-4)
    assert g.nodes[-1] == pytest.approx(50.0)
    assert np.all(np.diff(g.nodes) > 0)
    assert np.all(g.weights > 0)
    assert abs(g.integrate(np.exp(-g.nodes)) - 1.0) < 1e-6
    assert abs(g.integrate(g.nodes * np.exp(-g.nodes**2 / 2)) - 1.0) < 1e-6


def test_grid_domain_errors():
    with pytest.raises(DomainError):
        build_radial_grid(0.0, 50.0, 100, 100)
    with pytest.raises(DomainError):
        build_radial_grid(2.0, 50.0, 100, 100)
    with pytest.raises(DomainError):
        build_frequency_grid(0.0, 100)


# ------------------------------------------------------------ weights


def test_weight_examples():
    for sigma in (1.0, 1.5, 3.0):
        assert float(weight_eval(WeightSpec("w_sigma", sigma=sigma), 1.0)) == 1.0
    assert float(weight_eval(WeightSpec("w_sigma", sigma=2.0), np.e)) == pytest.approx(4.0 * np.e)
    assert float(weight_eval(WeightSpec("tau_eps", eps=0.1), 1.0)) == pytest.approx(2.0)
    assert float(weight_eval(WeightSpec("jap_bracket_pow", p=3.0), 2.0)) == pytest.approx(5.0**1.5)
    assert float(weight_eval(WeightSpec("power", p=-1.0), 4.0)) == pytest.approx(0.25)
    # v_sigma at r = 1: log term vanishes, bracket term is 2^{(1+sigma)/2}
    assert float(weight_eval(WeightSpec("v_sigma", sigma=2.0), 1.0)) == pytest.approx(2.0**1.5)


def test_weight_tails_and_domain():
    w = WeightSpec("w_sigma", sigma=2.0)
    r = np.array([1e-8, 1e-4, 1.0, 1e4, 1e8])
    vals = weight_eval(w, r)
    assert vals[0] < vals[1] < vals[2] < vals[3] < vals[4]
    assert vals[0] < 1e-4 and vals[-1] > 1e6
    with pytest.raises(DomainError):
        weight_eval(w, 0.0)


@settings(max_examples=30, deadline=None)
@given(r=st.floats(1e-6, 1e4), sigma=st.floats(1.0, 3.0))
def test_weights_positive(r, sigma):
    for kind in ("w_sigma", "v_sigma", "tau_eps"):
        assert float(weight_eval(WeightSpec(kind, sigma=sigma, eps=0.1), r)) > 0.0


# ------------------------------------------------------------- Hankel


def test_hankel_gaussian_closed_form(rgrid, fgrid_wide):
    c = RadialProfile(fgrid_wide, np.exp(-fgrid_wide.nodes**2 / 2.0), "frequency")
    g = hankel_transform(c, 0, 3, rgrid)
    exact = fourier_factor(3) * np.exp(-rgrid.nodes**2 / 2.0)
    assert np.max(np.abs(g.values - exact)) / np.max(exact) < 1e-6
    assert g.side == "position"


def test_hankel_zero_profile(rgrid, fgrid):
    z = RadialProfile(fgrid, np.zeros(fgrid.n), "frequency")
    out = hankel_transform(z, 2, 3, rgrid)
    assert np.all(out.values == 0.0)


@pytest.mark.parametrize("k,n", [(0, 3), (1, 3), (4, 3), (2, 4)])
def test_hankel_roundtrip_and_plancherel(rgrid, fgrid, bump, k, n):
    c = bump(fgrid, center=2.5, width=0.5, phase=1.1)
    g = hankel_transform(c, k, n, rgrid)
    back = hankel_inverse(g, k, n, fgrid)
    scale = np.max(np.abs(c.values))
    assert np.max(np.abs(back.values - c.values)) / scale < 1e-6
    lhs = np.sqrt(np.real(rgrid.integrate(np.abs(g.values) ** 2 * rgrid.nodes ** (n - 1))))
    rhs = fourier_factor(n) * np.sqrt(
        np.real(fgrid.integrate(np.abs(c.values) ** 2 * fgrid.nodes ** (n - 1)))
    )
    assert abs(lhs - rhs) / rhs < 1e-6


def test_hankel_resolution_guard(bump):
    coarse = build_frequency_grid(8.0, 24)
    wide = build_radial_grid(1e-4, 50.0, 100, 200)
    c = bump(coarse, center=4.0, width=1.0)
    with pytest.raises(ResolutionError):
        hankel_transform(c, 0, 3, wide)


# --------------------------------------------------------- derivative


def test_derivative_constant_and_linearity(rgrid, fgrid):
    c = RadialProfile(rgrid, np.full(rgrid.n, 2.3 + 0.5j), "position")
    assert np.max(np.abs(radial_derivative(c).values)) < 1e-12
    # linearity is exact up to roundoff; on a uniform grid that is < 1e-12
    f = RadialProfile(fgrid, np.sin(fgrid.nodes), "frequency")
    g = RadialProfile(fgrid, np.exp(-fgrid.nodes), "frequency")
    lin = radial_derivative(RadialProfile(fgrid, 2.0 * f.values + 3.0 * g.values, "frequency"))
    ref = 2.0 * radial_derivative(f).values + 3.0 * radial_derivative(g).values
    assert np.max(np.abs(lin.values - ref)) < 1e-12


def test_derivative_second_order_convergence():
    errs = []
    for scale in (1, 2, 4):
        g = build_radial_grid(1e-4, 12.0, 80 * scale, 160 * scale)
        f = np.exp(-g.nodes**2 / 2.0)
        want = -g.nodes * np.exp(-g.nodes**2 / 2.0)
        got = derivative_values(g, f)
        errs.append(np.max(np.abs(got - want)))
    order1 = np.log2(errs[0] / errs[1])
    order2 = np.log2(errs[1] / errs[2])
    assert order1 > 1.8 and order2 > 1.8


# ------------------------------------------------- channel Sobolev norm


def test_channel_sobolev_single_channel(fgrid, bump):
    c = bump(fgrid)
    got = channel_sobolev_norm({(0, 1): c}, 0.0, 0.0, 3)
    want = fourier_factor(3) * np.sqrt(
        np.real(fgrid.integrate(np.abs(c.values) ** 2 * fgrid.nodes**2))
    )
    assert got == pytest.approx(want, rel=1e-13)


def test_channel_sobolev_sigma_scaling(fgrid, bump):
    c = bump(fgrid)
    base = channel_sobolev_norm({(1, 1): c}, 0.0, 1.0, 3)
    doubled = channel_sobolev_norm({(1, 1): c}, 0.0, 2.0, 3)
    assert doubled / base == pytest.approx(2.0**0.5, rel=1e-12)


def test_channel_sobolev_gradient_crosscheck(fgrid, bump):
    # |D| form vs position-side gradient identity on a k = 1 channel;
    # the finite-difference side needs spacing fine against the band limit
    fine = build_radial_grid(1e-4, 16.0, 200, 520)
    c = bump(fgrid, center=1.4, width=0.35)
    k = 1
    got = channel_sobolev_norm({(k, 1): c}, 1.0, 0.0, 3)
    g = hankel_transform(c, k, 3, fine)
    dg = derivative_values(fine, g.values)
    grad_sq = np.real(
        fine.integrate(np.abs(dg) ** 2 * fine.nodes**2 + k * (k + 1.0) * np.abs(g.values) ** 2)
    )
    assert got == pytest.approx(np.sqrt(grad_sq), rel=0.02)


def test_channel_sobolev_requires_frequency_side(rgrid):
    pos = RadialProfile(rgrid, np.exp(-rgrid.nodes), "position")
    with pytest.raises(DomainError):
        channel_sobolev_norm({(0, 1): pos}, 0.0, 0.0, 3)


def test_hardy_inequality_witness(rgrid):
    for width in (0.6, 1.0, 1.7):
        f = np.exp(-rgrid.nodes**2 / (2 * width**2))
        df = derivative_values(rgrid, f)
        lhs = np.sqrt(np.real(rgrid.integrate(np.abs(f / rgrid.nodes) ** 2 * rgrid.nodes**2)))
        rhs = 2.0 * np.sqrt(np.real(rgrid.integrate(np.abs(df) ** 2 * rgrid.nodes**2)))
        assert lhs <= rhs
