"""Discrete space-time norms: endpoint mixed norm, smoothing norms, the
nonlinear contraction norm, and the weighted transfer inequality.

Trajectories store dense per-channel arrays (n_times, n_r).  The angular
L^2 norm at fixed (t, r) is a channel sum; the radial sup is a max over
grid nodes; time integrals are trapezoidal on the frame grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .radial import (
    RadialGrid,
    RadialProfile,
    WeightSpec,
    check_hankel_resolution,
    derivative_values,
    fourier_factor,
    hankel_matrix,
    weight_eval,
)
from .special import kbracket
from .sphere import DiracChannelIndex, lambda_eigenvalue

__all__ = [
    "WaveTrajectory",
    "DiracTrajectory",
    "NormReport",
    "mixed_endpoint_norm",
    "smoothing_norm",
    "x_norm",
    "x_norm_parts",
    "weighted_transfer_check",
    "dirac_frame_l2",
    "dirac_frame_h1",
    "dirac_gradient_smoothing_norm",
    "frame_spacing_ok",
]


@dataclass
class WaveTrajectory:
    """Scalar channel trajectory: {(k, l): position values (n_t, n_r)}."""

    times: np.ndarray
    data: dict
    rgrid: RadialGrid
    n: int

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size == 0 or not self.data:
            raise DomainError("empty trajectory")

    def sorted_keys(self):
        return sorted(self.data.keys())

    def angular_density(self) -> np.ndarray:
        """||u(t, r .)||^2_{L2_omega} as an (n_t, n_r) array."""
        out = 0.0
        for key in self.sorted_keys():
            out = out + np.abs(self.data[key]) ** 2
        return out


@dataclass
class DiracTrajectory:
    """Spinor channel trajectory: {channel: (psi_plus, psi_minus) arrays}."""

    times: np.ndarray
    data: dict
    rgrid: RadialGrid
    n: int = 3
    lambda_s: float = 0.0  # angular weight already applied (bookkeeping)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size == 0 or not self.data:
            raise DomainError("empty trajectory")

    def sorted_keys(self):
        return sorted(self.data.keys(), key=lambda c: c.sort_key())

    def angular_density(self) -> np.ndarray:
        r2 = self.rgrid.nodes**2
        out = 0.0
        for ch in self.sorted_keys():
            pp, pm = self.data[ch]
            out = out + (np.abs(pp) ** 2 + np.abs(pm) ** 2) / r2
        return out

    def apply_lambda(self, s: float) -> "DiracTrajectory":
        """Angular regularity operator: scale psi_pm by (1+l_pm(l_pm+1))^(s/2)."""
        data = {}
        for ch in self.sorted_keys():
            pp, pm = self.data[ch]
            data[ch] = (
                float(lambda_eigenvalue(ch.l_plus, s)) * pp,
                float(lambda_eigenvalue(ch.l_minus, s)) * pm,
            )
        return DiracTrajectory(self.times, data, self.rgrid, self.n, self.lambda_s + s)


@dataclass
class NormReport:
    name: str
    value: float
    grid_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.value < 0:
            raise DomainError("norms are nonnegative")


def frame_spacing_ok(times: np.ndarray, rho_max: float) -> bool:
    """Frames must resolve the fastest oscillation: spacing <= (1/8)(2 pi / rho_max)."""
    dt = np.max(np.diff(times))
    return bool(dt <= 0.125 * 2.0 * np.pi / rho_max + 1e-12)


def mixed_endpoint_norm(traj) -> float:
    """|| u ||_{L2_t L^inf_r L2_omega} on the stored frames."""
    dens = traj.angular_density()
    sup_r = np.max(dens, axis=1)
    if traj.times.size == 1:
        raise DomainError("need at least two frames for the time integral")
    return float(np.sqrt(np.trapezoid(sup_r, traj.times)))


def smoothing_norm(traj, spec: WeightSpec, weight_power: float = -0.5) -> float:
    """|| weight^{weight_power} u ||_{L2_t L2_x} with a radial weight.

    The default power -1/2 matches the smoothing norms; the wave smoothing
    estimate uses the full inverse weight (power -1).
    """
    r = traj.rgrid.nodes
    inv_w = weight_eval(spec, r) ** (2.0 * weight_power)
    if isinstance(traj, WaveTrajectory):
        dens = traj.angular_density() * (r ** (traj.n - 1.0)) * inv_w
    else:
        dens = 0.0
        for ch in traj.sorted_keys():
            pp, pm = traj.data[ch]
            dens = dens + (np.abs(pp) ** 2 + np.abs(pm) ** 2)
        dens = dens * inv_w
    per_t = dens @ traj.rgrid.weights
    return float(np.sqrt(np.trapezoid(per_t, traj.times)))


def dirac_frame_l2(traj: DiracTrajectory) -> np.ndarray:
    """|| u(t) ||_{L2} per frame."""
    dens = 0.0
    for ch in traj.sorted_keys():
        pp, pm = traj.data[ch]
        dens = dens + np.abs(pp) ** 2 + np.abs(pm) ** 2
    return np.sqrt(dens @ traj.rgrid.weights)


def _dirac_frame_h1dot_sq(traj: DiracTrajectory) -> np.ndarray:
    """|| D u(t) ||^2_{L2} per frame (gradient norm, finite differences)."""
    grid = traj.rgrid
    r = grid.nodes
    dens = 0.0
    for ch in traj.sorted_keys():
        pp, pm = traj.data[ch]
        dpp = derivative_values(grid, pp)
        dpm = derivative_values(grid, pm)
        phi_p = -dpm + (ch.kj / r) * pm
        phi_m = dpp + (ch.kj / r) * pp
        dens = dens + np.abs(phi_p) ** 2 + np.abs(phi_m) ** 2
    return dens @ grid.weights


def dirac_frame_h1(traj: DiracTrajectory) -> np.ndarray:
    """|| u(t) ||_{H1} per frame."""
    return np.sqrt(dirac_frame_l2(traj) ** 2 + _dirac_frame_h1dot_sq(traj))


def dirac_gradient_smoothing_norm(traj: DiracTrajectory, spec: WeightSpec) -> float:
    """|| weight^{-1/2} grad u ||_{L2_t L2_x}.

    The angular cross terms cancel on the sphere, so the x-integral splits
    per channel component into |d_r (psi/r)|^2 r^2 + l(l+1) |psi|^2 / r^2.
    """
    grid = traj.rgrid
    r = grid.nodes
    inv_w = 1.0 / weight_eval(spec, r)
    dens = 0.0
    for ch in traj.sorted_keys():
        pp, pm = traj.data[ch]
        for psi, ell in ((pp, ch.l_plus), (pm, ch.l_minus)):
            dpsi = derivative_values(grid, psi)
            dens = dens + np.abs(dpsi - psi / r) ** 2 + ell * (ell + 1.0) * np.abs(psi / r) ** 2
    per_t = (dens * inv_w) @ grid.weights
    return float(np.sqrt(np.trapezoid(per_t, traj.times)))


def x_norm_parts(traj: DiracTrajectory, s: float):
    """The two pieces of the contraction norm at angular regularity s > 1."""
    if s <= 1.0:
        raise DomainError(f"the contraction space needs s > 1, got {s}")
    weighted = traj.apply_lambda(s)
    strich = mixed_endpoint_norm(weighted)
    energy = float(np.max(dirac_frame_h1(weighted)))
    return strich, energy


def x_norm(traj: DiracTrajectory, s: float) -> float:
    """||Lambda^s u||_{L2_t L^inf_r L2_omega} + ||Lambda^s u||_{L^inf_t H1}."""
    strich, energy = x_norm_parts(traj, s)
    return strich + energy


def running_x_norm(traj: DiracTrajectory, s: float) -> np.ndarray:
    """X-norm of the restriction to [0, t_i] for every frame i >= 1."""
    if s <= 1.0:
        raise DomainError(f"the contraction space needs s > 1, got {s}")
    weighted = traj.apply_lambda(s)
    dens = weighted.angular_density()
    sup_r = np.max(dens, axis=1)
    t = weighted.times
    cums = np.concatenate([[0.0], np.cumsum(0.5 * (sup_r[1:] + sup_r[:-1]) * np.diff(t))])
    h1 = dirac_frame_h1(weighted)
    run_h1 = np.maximum.accumulate(h1)
    return np.sqrt(cums) + run_h1


def weighted_transfer_check(
    s: float,
    sigma: float,
    channels,
    y_max: float = 60.0,
    oversample: int = 8,
):
    """Both sides of the weighted transfer inequality at exponent s in {0, 1}.

    lhs^2 = (2 pi)^{n-1} sum_k <k>^{2 sigma} || <y>^s F_{lambda->y}(1_+ lambda^{(n-1)/2} fhat) ||^2,
    rhs^2 =              sum_k <k>^{2 sigma} || <x>^s g_k ||^2 weighted by r^{n-1},

    with g_k the position synthesis of the channel.  The (2 pi)^{n-1} factor
    makes s = 0 an exact Plancherel identity in this normalization.
    Returns (lhs, rhs).
    """
    if s not in (0.0, 1.0, 0, 1):
        raise DomainError("the transfer check is defined for s in {0, 1}")
    n = channels.n
    lhs_sq = 0.0
    rhs_sq = 0.0
    for key in sorted(channels.keys()):
        prof = channels[key]
        k = key[0]
        fgrid = prof.grid
        lam = fgrid.nodes
        h = lam ** (0.5 * (n - 1.0)) * prof.values
        dy = 2.0 * np.pi / (lam[-1] * oversample)
        n_y = 2 * int(np.ceil(y_max / dy)) + 1
        y = np.linspace(-y_max, y_max, n_y)
        hhat = np.exp(1j * np.multiply.outer(y, lam)) @ (fgrid.weights * h)
        wy = (1.0 + y * y) ** s
        lk = np.trapezoid(wy * np.abs(hhat) ** 2, y)
        lhs_sq += float(kbracket(k) ** (2.0 * sigma)) * float(lk)

        # position side on a grid wide enough for the <x> weight
        rgrid = _transfer_position_grid(fgrid)
        check_hankel_resolution(rgrid, fgrid)
        mat = hankel_matrix(rgrid, fgrid, k, n)
        g = fourier_factor(n) * (mat @ prof.values)  # phase irrelevant in modulus
        r = rgrid.nodes
        wr = (1.0 + r * r) ** s
        rk = float(np.real(rgrid.integrate(wr * np.abs(g) ** 2 * r ** (n - 1.0))))
        rhs_sq += float(kbracket(k) ** (2.0 * sigma)) * rk
    return float(np.sqrt((2.0 * np.pi) ** (n - 1.0) * lhs_sq)), float(np.sqrt(rhs_sq))


_transfer_grids: dict = {}


def _transfer_position_grid(fgrid: RadialGrid) -> RadialGrid:
    from .radial import build_radial_grid

    key = fgrid.uid
    g = _transfer_grids.get(key)
    if g is None:
        # resolve |g|^2 oscillations (rate up to 2 rho_max) out to the
        # radius where the <x> weight still sees the decaying profiles
        r_top = 60.0
        n_lin = max(480, int(r_top * 4.0 * fgrid.r_max / np.pi))
        g = build_radial_grid(1e-4, r_top, max(120, n_lin // 4), n_lin)
        _transfer_grids[key] = g
    return g
