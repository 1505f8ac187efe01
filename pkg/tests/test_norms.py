import numpy as np
import pytest

from partialwave.errors import DomainError
from partialwave.norms import (
    DiracTrajectory,
    NormReport,
    WaveTrajectory,
    dirac_frame_h1,
    dirac_frame_l2,
    dirac_gradient_smoothing_norm,
    frame_spacing_ok,
    mixed_endpoint_norm,
    running_x_norm,
    smoothing_norm,
    weighted_transfer_check,
    x_norm,
    x_norm_parts,
)
from partialwave.propagators import ChannelSpectrum
from partialwave.radial import (
    RadialProfile,
    WeightSpec,
    build_frequency_grid,
    derivative_values,
)
from partialwave.sphere import DiracChannelIndex, lambda_eigenvalue, spinor_reconstruct, ylm_values


def _stationary_wave_traj(rgrid, g_values, T=4.0, n_frames=33, key=(2, 1)):
    times = np.linspace(0.0, T, n_frames)
    data = {key: np.broadcast_to(g_values, (n_frames, rgrid.n)).copy()}
    return WaveTrajectory(times=times, data=data, rgrid=rgrid, n=3)


def test_mixed_norm_single_channel_analytic(rgrid):
    g = np.exp(-((rgrid.nodes - 3.0) ** 2)) * (0.7 + 0.2j)
    T = 4.0
    traj = _stationary_wave_traj(rgrid, g, T=T)
    want = np.sqrt(T) * np.max(np.abs(g))
    assert mixed_endpoint_norm(traj) == pytest.approx(want, rel=1e-12)


def test_mixed_norm_phase_invariance(rgrid):
    g = np.exp(-((rgrid.nodes - 3.0) ** 2))
    t1 = _stationary_wave_traj(rgrid, g)
    t2 = _stationary_wave_traj(rgrid, g * np.exp(1j * 1.234))
    assert mixed_endpoint_norm(t1) == mixed_endpoint_norm(t2)


def test_mixed_norm_empty_guard(rgrid):
    with pytest.raises(DomainError):
        WaveTrajectory(times=np.array([]), data={}, rgrid=rgrid, n=3)


def test_mixed_norm_exceeds_mean_proxy(rgrid):
    # sup_r >= (L2-in-r mean over the shell measure): sup-based norm dominates
    rng = np.random.default_rng(3)
    times = np.linspace(0, 2.0, 17)
    data = {
        (0, 1): rng.normal(size=(17, rgrid.n)) * np.exp(-((rgrid.nodes - 4.0) ** 2) / 9.0),
        (1, 1): rng.normal(size=(17, rgrid.n)) * np.exp(-((rgrid.nodes - 2.0) ** 2) / 4.0),
    }
    traj = WaveTrajectory(times=times, data=data, rgrid=rgrid, n=3)
    dens = traj.angular_density()
    vol = np.real(rgrid.integrate(rgrid.nodes**2)) * 4.0 * np.pi
    mean_proxy = np.sqrt(np.trapezoid(
        (dens * rgrid.nodes**2) @ rgrid.weights * 4.0 * np.pi / vol, times))
    assert mixed_endpoint_norm(traj) >= mean_proxy


def _dirac_stationary(rgrid, kj=1, T=4.0, n_frames=33, only_plus=True, seed=5):
    rng = np.random.default_rng(seed)
    r = rgrid.nodes
    j = abs(kj) - 0.5
    ch = DiracChannelIndex(j, 0.5, kj)
    psi = r ** (ch.l_plus + 1) * np.exp(-(r**2) / 2) * (rng.normal() + 1j * rng.normal())
    pm = np.zeros_like(psi) if only_plus else psi.copy()
    times = np.linspace(0, T, n_frames)
    data = {ch: (
        np.broadcast_to(psi, (n_frames, rgrid.n)).copy(),
        np.broadcast_to(pm, (n_frames, rgrid.n)).copy(),
    )}
    return DiracTrajectory(times=times, data=data, rgrid=rgrid), ch, psi


def test_dirac_mixed_matches_collocation(rgrid_small, sgrid8):
    # channel-sum angular density against direct sphere-grid quadrature
    rng = np.random.default_rng(7)
    r = rgrid_small.nodes
    chans = {}
    for kj, mj in ((1, 0.5), (-2, 1.5)):
        ch = DiracChannelIndex(abs(kj) - 0.5, mj, kj)
        chans[ch] = (
            RadialProfile(rgrid_small, (rng.normal() + 1j * rng.normal()) * r ** (ch.l_plus + 1) * np.exp(-(r**2)), "position"),
            RadialProfile(rgrid_small, (rng.normal() + 1j * rng.normal()) * r ** (ch.l_minus + 1) * np.exp(-(r**2)), "position"),
        )
    field = spinor_reconstruct(chans, rgrid_small, sgrid8)
    dens_col = np.sum(np.abs(field.values) ** 2, axis=2) @ sgrid8.weights
    times = np.linspace(0, 1.0, 5)
    data = {ch: (
        np.broadcast_to(p.values, (5, rgrid_small.n)).copy(),
        np.broadcast_to(m.values, (5, rgrid_small.n)).copy(),
    ) for ch, (p, m) in chans.items()}
    traj = DiracTrajectory(times=times, data=data, rgrid=rgrid_small)
    got = mixed_endpoint_norm(traj)
    want = np.sqrt(np.trapezoid(np.full(5, np.max(dens_col)), times))
    assert got == pytest.approx(want, rel=1e-8)


def test_smoothing_norm_trivial_weight(rgrid):
    g = np.exp(-((rgrid.nodes - 3.0) ** 2))
    T = 4.0
    traj = _stationary_wave_traj(rgrid, g, T=T)
    spec = WeightSpec("power", p=0.0)  # weight identically one
    want = np.sqrt(T * np.real(rgrid.integrate(np.abs(g) ** 2 * rgrid.nodes**2)))
    assert smoothing_norm(traj, spec) == pytest.approx(want, rel=1e-12)


def test_smoothing_norm_homogeneity_and_r1(rgrid):
    g = np.exp(-((rgrid.nodes - 3.0) ** 2))
    traj1 = _stationary_wave_traj(rgrid, g)
    traj2 = _stationary_wave_traj(rgrid, 2.0 * g)
    spec = WeightSpec("w_sigma", sigma=2.0)
    assert smoothing_norm(traj2, spec) == pytest.approx(2.0 * smoothing_norm(traj1, spec), rel=1e-13)
    # w_sigma(1) = 1 exactly for every sigma: nodes at r = 1 go unweighted
    from partialwave.radial import weight_eval

    for sigma in (1.0, 2.0, 5.5):
        assert float(weight_eval(WeightSpec("w_sigma", sigma=sigma), 1.0)) == 1.0


def test_x_norm_zero_and_homogeneity(rgrid_small):
    traj, ch, psi = _dirac_stationary(rgrid_small, kj=1)
    zero = DiracTrajectory(
        times=traj.times,
        data={ch: (0.0 * traj.data[ch][0], 0.0 * traj.data[ch][1])},
        rgrid=rgrid_small,
    )
    assert x_norm(zero, 1.5) == 0.0
    scaled = DiracTrajectory(
        times=traj.times,
        data={ch: (3.0 * traj.data[ch][0], 3.0 * traj.data[ch][1])},
        rgrid=rgrid_small,
    )
    assert x_norm(scaled, 1.5) == pytest.approx(3.0 * x_norm(traj, 1.5), rel=1e-12)


def test_x_norm_degree_zero_component(rgrid_small):
    # kj = -1 has l_plus = 0: Lambda^s acts as identity on psi_plus
    traj, ch, psi = _dirac_stationary(rgrid_small, kj=-1, T=4.0)
    r = rgrid_small.nodes
    sup = np.max(np.abs(psi) / r)
    dpsi = derivative_values(rgrid_small, psi)
    h1_sq = np.real(rgrid_small.integrate(np.abs(psi) ** 2 + np.abs(dpsi + ch.kj / r * psi) ** 2))
    want = np.sqrt(4.0) * sup + np.sqrt(h1_sq)
    assert x_norm(traj, 1.5) == pytest.approx(want, rel=1e-10)
    strich, energy = x_norm_parts(traj, 1.5)
    assert strich == pytest.approx(np.sqrt(4.0) * sup, rel=1e-10)


def test_x_norm_needs_s_above_one(rgrid_small):
    traj, ch, psi = _dirac_stationary(rgrid_small)
    with pytest.raises(DomainError):
        x_norm(traj, 1.0)


def test_running_x_norm_monotone(rgrid_small):
    traj, ch, psi = _dirac_stationary(rgrid_small, kj=2, only_plus=False)
    series = running_x_norm(traj, 1.5)
    assert series.size == traj.times.size
    assert np.all(np.diff(series) >= -1e-14)
    assert series[-1] == pytest.approx(x_norm(traj, 1.5), rel=1e-12)


def test_dirac_frame_norms_against_lambda(rgrid_small):
    traj, ch, psi = _dirac_stationary(rgrid_small, kj=2, only_plus=True)
    lam = traj.apply_lambda(1.5)
    factor = float(lambda_eigenvalue(ch.l_plus, 1.5))
    assert dirac_frame_l2(lam)[0] == pytest.approx(factor * dirac_frame_l2(traj)[0], rel=1e-12)
    assert dirac_frame_h1(lam)[0] == pytest.approx(factor * dirac_frame_h1(traj)[0], rel=1e-12)
    spec = WeightSpec("w_sigma", sigma=2.0)
    assert dirac_gradient_smoothing_norm(lam, spec) == pytest.approx(
        factor * dirac_gradient_smoothing_norm(traj, spec), rel=1e-12
    )


# -------------------------------------------------- weighted transfer


def _spectrum(fgrid, keys, seed=11):
    rng = np.random.default_rng(seed)
    entries = {}
    for key in keys:
        c = rng.uniform(1.4, 3.2)
        w = rng.uniform(0.4, 0.6)
        entries[key] = RadialProfile(
            fgrid,
            (rng.normal() + 1j * rng.normal()) * np.exp(-(((fgrid.nodes - c) / w) ** 2)),
            "frequency",
        )
    return ChannelSpectrum(n=3, entries=entries)


def test_transfer_s0_equality():
    fgrid = build_frequency_grid(5.0, 400)
    member = _spectrum(fgrid, [(0, 1), (1, 1), (3, 1)])
    lhs, rhs = weighted_transfer_check(0, 0.7, member)
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_transfer_s1_bounded_and_zero():
    fgrid = build_frequency_grid(5.0, 400)
    member = _spectrum(fgrid, [(1, 1), (2, 1)], seed=12)
    lhs, rhs = weighted_transfer_check(1, 0.0, member)
    assert np.isfinite(lhs) and lhs > 0 and rhs > 0
    zero = ChannelSpectrum(n=3, entries={
        (0, 1): RadialProfile(fgrid, np.zeros(fgrid.n), "frequency")})
    l0, r0 = weighted_transfer_check(1, 0.0, zero)
    assert l0 == 0.0 and r0 == 0.0


def test_transfer_s_domain():
    fgrid = build_frequency_grid(5.0, 400)
    member = _spectrum(fgrid, [(0, 1)])
    with pytest.raises(DomainError):
        weighted_transfer_check(0.5, 0.0, member)


def test_norm_report_and_frame_spacing():
    with pytest.raises(DomainError):
        NormReport("x", -1.0)
    times = np.linspace(0, 1, 11)
    assert frame_spacing_ok(times, 4.0) is True
    assert frame_spacing_ok(times, 60.0) is False
