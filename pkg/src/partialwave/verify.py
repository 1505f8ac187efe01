"""Estimate-verification harness.

For each space-time estimate: draw a reproducible ensemble of band-limited
channel data, evolve it, compute both sides of the inequality, and report
ratio statistics together with refinement and time-window stability.  A
"lesssim" is operationalized as: finite max ratio, <= 10% drift under one
grid refinement, and <= 5% growth when the time window doubles.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from . import norms as nrm
from . import nld as nldmod
from .propagators import (
    ALPHA,
    ChannelSpectrum,
    DiracChannelState,
    DiracChannelSplit,
    DiracCN,
    DiracSpectra,
    WaveCN,
    dirac_collocation_apply,
    dirac_from_spectral,
    dirac_radial_apply,
    dirac_to_spectral,
    dirac_free_evolve_spectral,
    wave_channel_evolve_multiplier,
    wave_channel_evolve_qrep,
    wave_channel_trajectory,
    wave_duhamel_trajectory,
)
from .radial import (
    RadialGrid,
    RadialProfile,
    WeightSpec,
    build_frequency_grid,
    build_radial_grid,
    channel_sobolev_norm,
    derivative_values,
    fourier_factor,
    hankel_inverse,
    hankel_matrix,
    hankel_transform,
    weight_eval,
)
from .special import (
    JacobiParams,
    angular_weight,
    bessel_j,
    bessel_j_lommel,
    jacobi_at_zero_paper,
    jacobi_eval,
    kbracket,
    q_poly_eval,
    sonine_eval,
)
from .sphere import (
    DiracChannelIndex,
    ScalarCoeffs,
    SpinorField,
    build_sphere_grid,
    dirac_channel_list,
    lambda_eigenvalue,
    lambda_omega_apply,
    sht_forward,
    sht_inverse,
    spinor_basis_eval,
    spinor_decompose,
    spinor_reconstruct,
    sphere_product,
)

__all__ = [
    "EnsembleSpec",
    "RatioStudy",
    "lemma_qk_study",
    "strichartz_free_study",
    "strichartz_inhom_study",
    "genineq2_study",
    "dirac_studies",
    "wave_potential_study",
    "prodest_study",
    "equivalence_suite",
    "contraction_study",
    "admissible_dirac_potential",
    "admissible_wave_potential",
]


@dataclass(frozen=True)
class EnsembleSpec:
    """Reproducible random channel-data ensembles (Gaussian frequency bumps)."""

    seed: int = 0
    count: int = 20
    kmax: int = 4
    l_per_k: int = 1
    jmax: float = 3.5
    rho_min: float = 0.6
    rho_max: float = 5.0
    width_lo: float = 0.35
    width_hi: float = 0.7

    def member_rngs(self):
        seqs = np.random.SeedSequence(self.seed).spawn(self.count)
        return [np.random.default_rng(s) for s in seqs]


def _bump(rng, rho, spec: EnsembleSpec):
    w = rng.uniform(spec.width_lo, spec.width_hi)
    lo = spec.rho_min + 3.0 * w
    hi = spec.rho_max - 3.0 * w
    c = rng.uniform(lo, max(hi, lo + 1e-6))
    amp = rng.uniform(0.5, 2.0) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    return amp * np.exp(-(((rho - c) / w) ** 2))


def make_wave_member(rng, fgrid: RadialGrid, n: int, spec: EnsembleSpec) -> ChannelSpectrum:
    entries = {}
    for k in range(spec.kmax + 1):
        for l in range(1, spec.l_per_k + 1):
            entries[(k, l)] = RadialProfile(fgrid, _bump(rng, fgrid.nodes, spec), "frequency")
    return ChannelSpectrum(n=n, entries=entries)


def make_dirac_member(rng, fgrid: RadialGrid, spec: EnsembleSpec) -> DiracSpectra:
    entries = {}
    for ch in dirac_channel_list(spec.jmax):
        entries[ch] = (_bump(rng, fgrid.nodes, spec), _bump(rng, fgrid.nodes, spec))
    return DiracSpectra(fgrid=fgrid, entries=entries)


def _run_members(fn, members, workers: int):
    if workers <= 1:
        return [fn(m) for m in members]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, members))


@dataclass
class RatioStudy:
    """Two-sided measurement of one estimate over an ensemble."""

    estimate_id: str
    rows: list = field(default_factory=list)  # (member_id, lhs, rhs, ratio)
    max_ratio: float = float("nan")
    median_ratio: float = float("nan")
    refinement: dict = field(default_factory=dict)
    refinement_drift: float = float("nan")
    growth: dict = field(default_factory=dict)
    growth_fraction: float = float("nan")
    passed: bool = False
    meta: dict = field(default_factory=dict)

    def finalize(self, drift_tol: float = 0.10, growth_tol: float = 0.05):
        kept = [r for r in self.rows if np.isfinite(r[3])]
        self.meta["excluded"] = len(self.rows) - len(kept)  # 0/0 guard
        self.rows = kept
        ratios = np.array([r[3] for r in self.rows], dtype=float)
        if ratios.size == 0:
            self.passed = False
            return self
        self.max_ratio = float(np.max(ratios))
        self.median_ratio = float(np.median(ratios))
        ok = True
        if len(self.refinement) >= 2:
            vals = list(self.refinement.values())
            self.refinement_drift = abs(vals[1] - vals[0]) / abs(vals[1])
            ok = ok and self.refinement_drift <= drift_tol
        if len(self.growth) >= 2:
            vals = list(self.growth.values())
            self.growth_fraction = (vals[1] - vals[0]) / abs(vals[0])
            ok = ok and self.growth_fraction <= growth_tol
        self.passed = ok
        return self

    def summary_dict(self) -> dict:
        return {
            "estimate_id": self.estimate_id,
            "count": len(self.rows),
            "max_ratio": self.max_ratio,
            "median_ratio": self.median_ratio,
            "refinement": self.refinement,
            "refinement_drift": self.refinement_drift,
            "growth": self.growth,
            "growth_fraction": self.growth_fraction,
            "passed": bool(self.passed),
            "meta": self.meta,
        }


# --------------------------------------------------------------------------
# lemma study
# --------------------------------------------------------------------------


def lemma_qk_study(n: int, kmax: int = 200, n_x: int = 4096) -> RatioStudy:
    """sup_x |Q_k| tabulation and the k^{n/2-1}-normalized boundedness witness."""
    if n < 3:
        raise DomainError("need n >= 3")
    x = np.linspace(-1.0, 1.0, n_x)
    study = RatioStudy(estimate_id="lemmaQk", meta={"n": n, "kmax": kmax, "n_x": n_x})
    sups = []
    for k in range(kmax + 1):
        sup = float(np.max(np.abs(q_poly_eval(k, n, x))))
        sups.append(sup)
        normalized = sup * (max(k, 1) ** (0.5 * n - 1.0))
        study.rows.append((k, sup, 1.0, normalized))
    sups = np.array(sups)
    if n == 3:
        study.max_ratio = float(np.max(sups))
        study.median_ratio = float(np.median(sups))
        study.passed = bool(np.all(sups <= 1.0 + 1e-12))
    else:
        norm_seq = np.array([row[3] for row in study.rows])
        lo = min(10, kmax)
        window = norm_seq[lo : kmax + 1]
        study.max_ratio = float(np.max(window))
        study.median_ratio = float(np.median(window))
        study.passed = bool(np.max(window) <= 2.0 * norm_seq[lo])
        study.meta["normalized_at_k10"] = float(norm_seq[lo])
    return study


# --------------------------------------------------------------------------
# free / inhomogeneous Strichartz studies
# --------------------------------------------------------------------------


def _study_grids(spec: EnsembleSpec, T: float, level: int = 0):
    refine = 1.5**level
    rho_max = spec.rho_max
    r_max = 2.0 * T + 14.0
    n_f = int(np.ceil(4.0 * r_max * rho_max / np.pi / 100.0) * 100 * refine)
    fgrid = build_frequency_grid(rho_max, n_f)
    n_lin = int(np.ceil(r_max * 4.0 * rho_max / np.pi / 100.0) * 100 * refine)
    rgrid = build_radial_grid(1e-4, r_max, max(96, n_lin // 4), n_lin)
    n_frames = int(np.ceil(2.0 * T *
                           4.0 * rho_max / np.pi * refine)) + 1
    times = np.linspace(0.0, 2.0 * T, n_frames)
    return fgrid, rgrid, times


def sigma_for_dimension(n: int) -> float:
    return 0.0 if n == 3 else 1.0 - 0.5 * n


def strichartz_free_study(
    n: int,
    spec: EnsembleSpec,
    T: float,
    s_extra: float = 0.0,
    workers: int = 1,
    refine: bool = True,
) -> RatioStudy:
    """Free endpoint estimate: mixed norm of e^{it|D|}f vs the data norm."""
    sigma = sigma_for_dimension(n)
    study = RatioStudy(
        estimate_id="strich3D" if n == 3 else "strichartz1",
        meta={"n": n, "T": T, "sigma": sigma, "s_extra": s_extra, "spec": spec.__dict__},
    )

    def level_ratios(level: int, t_window: float):
        fgrid, rgrid, times = _study_grids(spec, T, level)
        sel = times <= t_window + 1e-12
        tt = times[sel]
        ratios, rows = [], []
        members = list(enumerate(spec.member_rngs()))

        def one(item):
            idx, rng = item
            member = make_wave_member(rng, fgrid, n, spec)
            data = {}
            for key in sorted(member.keys()):
                prof = member[key]
                vals = wave_channel_trajectory(key[0], prof, tt, rgrid, n)
                if s_extra:
                    vals = vals * float(lambda_eigenvalue(key[0], s_extra))
                data[key] = vals
            traj = nrm.WaveTrajectory(times=tt, data=data, rgrid=rgrid, n=n)
            lhs = nrm.mixed_endpoint_norm(traj)
            rhs = channel_sobolev_norm(member.entries, 0.5 * (n - 1.0), sigma + s_extra, n)
            return (idx, lhs, rhs, lhs / rhs if rhs > 1e-300 else np.nan)

        rows = _run_members(one, members, workers)
        return rows

    rows_T = level_ratios(0, T)
    rows_2T = level_ratios(0, 2.0 * T)
    study.rows = rows_T
    study.growth = {f"T={T}": max(r[3] for r in rows_T), f"T={2*T}": max(r[3] for r in rows_2T)}
    if refine:
        rows_ref = level_ratios(1, T)
        study.refinement = {
            "level0": max(r[3] for r in rows_T),
            "level1": max(r[3] for r in rows_ref),
        }
    return study.finalize()


def _time_envelope(rng, times: np.ndarray, T: float):
    t0 = rng.uniform(0.15 * T, 0.45 * T)
    width = rng.uniform(0.08 * T, 0.2 * T)
    omega = rng.uniform(0.0, 2.0)
    return np.exp(-(((times - t0) / width) ** 2)) * np.exp(1j * omega * times)


def strichartz_inhom_study(
    n: int,
    spec: EnsembleSpec,
    T: float,
    eps: float = 0.1,
    workers: int = 1,
    refine: bool = True,
) -> RatioStudy:
    """Mixed Strichartz-smoothing estimate for the Duhamel wave integral."""
    sigma = sigma_for_dimension(n)
    study = RatioStudy(
        estimate_id="strichartz2",
        meta={"n": n, "T": T, "sigma": sigma, "eps": eps, "spec": spec.__dict__},
    )

    def level_ratios(level: int, t_window: float):
        fgrid, rgrid, times = _study_grids(spec, T, level)
        sel = times <= t_window + 1e-12
        tt = times[sel]
        members = list(enumerate(spec.member_rngs()))

        def one(item):
            idx, rng = item
            data = {}
            rhs_sq = 0.0
            for k in range(spec.kmax + 1):
                for l in range(1, spec.l_per_k + 1):
                    bump = _bump(rng, fgrid.nodes, spec)
                    env = _time_envelope(rng, tt, T)
                    forcing = np.multiply.outer(env, bump)
                    data[(k, l)] = wave_duhamel_trajectory(k, forcing, tt, fgrid, rgrid, n)
                    # RHS: ||<x>^{1/2+eps} |D|^{(n-1)/2} Lambda^sigma F||_{L2 L2}
                    mat = hankel_matrix(rgrid, fgrid, k, n)
                    gpos = fourier_factor(n) * (mat @ (fgrid.nodes ** (0.5 * (n - 1.0)) * bump))
                    wr = (1.0 + rgrid.nodes**2) ** (0.5 + eps)
                    space_sq = float(
                        np.real(rgrid.integrate(wr**2 * np.abs(gpos) ** 2 * rgrid.nodes ** (n - 1.0)))
                    )
                    time_sq = float(np.trapezoid(np.abs(env) ** 2, tt))
                    rhs_sq += float(kbracket(k) ** (2.0 * sigma)) * space_sq * time_sq
            traj = nrm.WaveTrajectory(times=tt, data=data, rgrid=rgrid, n=n)
            lhs = nrm.mixed_endpoint_norm(traj)
            rhs = float(np.sqrt(rhs_sq))
            return (idx, lhs, rhs, lhs / rhs if rhs > 1e-300 else np.nan)

        return _run_members(one, members, workers)

    rows_T = level_ratios(0, T)
    rows_2T = level_ratios(0, 2.0 * T)
    study.rows = rows_T
    study.growth = {f"T={T}": max(r[3] for r in rows_T), f"T={2*T}": max(r[3] for r in rows_2T)}
    if refine:
        rows_ref = level_ratios(1, T)
        study.refinement = {
            "level0": max(r[3] for r in rows_T),
            "level1": max(r[3] for r in rows_ref),
        }
    return study.finalize()


def genineq2_study(n: int, spec: EnsembleSpec, sigma: float = 0.0, workers: int = 1) -> dict:
    """Weighted transfer inequality: s = 0 equality, s = 1 one-sided ratio."""
    rho_max = spec.rho_max
    n_f = int(np.ceil(62.0 * 4.0 * rho_max / np.pi / 100.0) * 100)
    fgrid = build_frequency_grid(rho_max, n_f)
    members = list(enumerate(spec.member_rngs()))

    def one(item):
        idx, rng = item
        member = make_wave_member(rng, fgrid, n, spec)
        l0, r0 = nrm.weighted_transfer_check(0, sigma, member)
        l1, r1 = nrm.weighted_transfer_check(1, sigma, member)
        return (idx, l0, r0, l1, r1)

    rows = _run_members(one, members, workers)
    eq_err = max(abs(l0 / r0 - 1.0) for (_, l0, r0, _, _) in rows)
    s1 = RatioStudy(estimate_id="genineq2_s1", meta={"n": n, "sigma": sigma})
    s1.rows = [(idx, l1, r1, l1 / r1) for (idx, _, _, l1, r1) in rows]
    s1.finalize()
    s1.passed = bool(np.isfinite(s1.max_ratio))
    return {
        "estimate_id": "genineq2",
        "s0_equality_error": float(eq_err),
        "s0_passed": bool(eq_err <= 1e-6),
        "s1_study": s1,
        "passed": bool(eq_err <= 1e-6 and s1.passed),
    }


# --------------------------------------------------------------------------
# Dirac studies
# --------------------------------------------------------------------------


def admissible_dirac_potential(delta: float, sigma: float = 1.5, sign: float = 1.0) -> nldmod.PotentialSpec:
    """Scalar radial potential saturating the delta / v_sigma decay class."""

    def func(r):
        return sign * delta / weight_eval(WeightSpec("v_sigma", sigma=sigma), r)

    return nldmod.PotentialSpec(kind="radial_scalar", func=func, delta=delta, sigma=sigma)


_split_cache: dict = {}


def _split_op_cached(rgrid: RadialGrid, fgrid: RadialGrid, kj: int, V: np.ndarray, dt: float) -> DiracChannelSplit:
    vkey = None if V is None else hash(np.asarray(V).tobytes())
    key = (rgrid.uid, fgrid.uid, kj, vkey, round(dt, 14))
    op = _split_cache.get(key)
    if op is None:
        op = DiracChannelSplit(rgrid, fgrid, kj, V, dt)
        _split_cache[key] = op
    return op


def _dirac_member_trajectory(
    spectra: DiracSpectra,
    V: np.ndarray | None,
    rgrid: RadialGrid,
    times: np.ndarray,
    cn_substeps: int = 1,
):
    """Channel trajectory of the perturbed flow; exact when V is None.

    For V != 0 each channel is marched by the split propagator (exact
    V-phase x exact spectral free step); the sign convention e^{-it(H+V)}
    differs from e^{+it} by conjugation, invisible to every norm below.
    """
    fgrid = spectra.fgrid
    if V is None:
        data = {}
        rho = fgrid.nodes
        cos = np.cos(np.multiply.outer(times, rho))
        sin = np.sin(np.multiply.outer(times, rho))
        for ch in spectra.sorted_channels():
            up, um = spectra.entries[ch]
            sg = 1.0 if ch.kj > 0 else -1.0
            up_t = cos * up + 1j * sg * sin * um
            um_t = 1j * sg * sin * up + cos * um
            mat_p = hankel_matrix(rgrid, fgrid, ch.l_plus, 3)
            mat_m = hankel_matrix(rgrid, fgrid, ch.l_minus, 3)
            data[ch] = (rgrid.nodes * (up_t @ mat_p.T), rgrid.nodes * (um_t @ mat_m.T))
        return nrm.DiracTrajectory(times=times, data=data, rgrid=rgrid)
    state = dirac_from_spectral(spectra, rgrid)
    dt = (times[1] - times[0]) / cn_substeps
    data = {ch: ([], []) for ch in state.sorted_channels()}
    cur = {ch: (pp.values.copy(), pm.values.copy()) for ch, (pp, pm) in state.entries.items()}
    ops = {
        kj: _split_op_cached(rgrid, fgrid, kj, V, dt)
        for kj in sorted({ch.kj for ch in state.sorted_channels()})
    }
    for ch in state.sorted_channels():
        pp, pm = cur[ch]
        data[ch][0].append(pp.copy())
        data[ch][1].append(pm.copy())
    for _ in range(times.size - 1):
        for ch in state.sorted_channels():
            op = ops[ch.kj]
            pp, pm = cur[ch]
            for _s in range(cn_substeps):
                pp, pm = op.step_values(pp, pm)
            cur[ch] = (pp, pm)
            data[ch][0].append(pp.copy())
            data[ch][1].append(pm.copy())
    data = {ch: (np.stack(v[0]), np.stack(v[1])) for ch, v in data.items()}
    return nrm.DiracTrajectory(times=times, data=data, rgrid=rgrid)


def _spectra_norms(spectra: DiracSpectra, s: float):
    """(||f||_L2, ||f||_H1dot, ||f||_H1, ||L^s f||_H1dot, ||L^s f||_H1), exact."""
    rho = spectra.fgrid.nodes
    l2 = h1d = l2s = h1ds = 0.0
    for ch in spectra.sorted_channels():
        up, um = spectra.entries[ch]
        lp = float(lambda_eigenvalue(ch.l_plus, s)) ** 2
        lm = float(lambda_eigenvalue(ch.l_minus, s)) ** 2
        d0 = np.abs(up) ** 2 + np.abs(um) ** 2
        d0s = lp * np.abs(up) ** 2 + lm * np.abs(um) ** 2
        l2 += float(np.real(spectra.fgrid.integrate(rho**2 * d0)))
        h1d += float(np.real(spectra.fgrid.integrate(rho**4 * d0)))
        l2s += float(np.real(spectra.fgrid.integrate(rho**2 * d0s)))
        h1ds += float(np.real(spectra.fgrid.integrate(rho**4 * d0s)))
    return (
        float(np.sqrt(l2)),
        float(np.sqrt(h1d)),
        float(np.sqrt(l2 + h1d)),
        float(np.sqrt(h1ds)),
        float(np.sqrt(l2s + h1ds)),
    )


_DIRAC_ESTIMATES = ("smoothdir", "smoonablau", "enddiracV", "enddiracVang", "energyang")


def dirac_studies(
    V_spec: nldmod.PotentialSpec | None,
    spec: EnsembleSpec,
    T: float,
    s: float = 1.5,
    sigma_w: float = 1.5,
    workers: int = 1,
    refine: bool = True,
    cn_substeps: int = 4,
) -> dict:
    """Ratio studies for the free / perturbed Dirac flow estimates.

    One trajectory per member feeds every estimate: smoothing, derivative
    smoothing, endpoint, angular endpoint, and angular energy.  With V None
    the flow is exact and the 'freedirac' study is included.
    """
    names = list(_DIRAC_ESTIMATES) + (["freedirac"] if V_spec is None else [])
    studies = {name: RatioStudy(estimate_id=name, meta={"T": T, "s": s, "sigma_w": sigma_w}) for name in names}
    w_spec = WeightSpec("w_sigma", sigma=sigma_w)

    def level_rows(level: int, t_window: float):
        refine_f = 1.5**level
        rho_max = spec.rho_max
        r_max = 2.0 * T + 14.0
        n_f = int(np.ceil(4.0 * r_max * rho_max / np.pi / 100.0) * 100 * refine_f)
        fgrid = build_frequency_grid(rho_max, n_f)
        n_lin = int(np.ceil(r_max * 4.0 * rho_max / np.pi / 100.0) * 100 * refine_f)
        rgrid = build_radial_grid(1e-4, r_max, max(96, n_lin // 4), n_lin)
        n_frames = int(np.ceil(2.0 * T * 4.0 * rho_max / np.pi * refine_f)) + 1
        times = np.linspace(0.0, 2.0 * T, n_frames)
        sel = times <= t_window + 1e-12
        tt = times[sel]
        V = None if V_spec is None else V_spec.samples(rgrid)
        if V_spec is not None:
            V_spec.validate_decay(rgrid)
        members = list(enumerate(spec.member_rngs()))

        def one(item):
            idx, rng = item
            spectra = make_dirac_member(rng, fgrid, spec)
            traj = _dirac_member_trajectory(spectra, V, rgrid, tt, cn_substeps=cn_substeps * (level + 1))
            l2, h1d, h1, h1ds, h1s = _spectra_norms(spectra, s)
            lam_traj = traj.apply_lambda(s)
            out = {
                "smoothdir": (nrm.smoothing_norm(traj, w_spec), l2),
                "smoonablau": (nrm.dirac_gradient_smoothing_norm(traj, w_spec), h1),
                "enddiracV": (nrm.mixed_endpoint_norm(traj), h1),
                "enddiracVang": (nrm.mixed_endpoint_norm(lam_traj), h1s),
                "energyang": (float(np.max(nrm.dirac_frame_h1(lam_traj))), h1s),
            }
            if V_spec is None:
                out["freedirac"] = (nrm.mixed_endpoint_norm(lam_traj), h1ds)
            return idx, out

        return _run_members(one, members, workers)

    rows_T = level_rows(0, T)
    rows_2T = level_rows(0, 2.0 * T)
    rows_ref = level_rows(1, T) if refine else None
    for name in names:
        st = studies[name]
        st.rows = [(idx, out[name][0], out[name][1], out[name][0] / out[name][1]) for idx, out in rows_T]
        g0 = max(r[3] for r in st.rows)
        g1 = max(out[name][0] / out[name][1] for _, out in rows_2T)
        st.growth = {f"T={T}": g0, f"T={2*T}": g1}
        if rows_ref is not None:
            st.refinement = {
                "level0": g0,
                "level1": max(out[name][0] / out[name][1] for _, out in rows_ref),
            }
        st.finalize()
    return studies


# --------------------------------------------------------------------------
# wave-with-potential studies
# --------------------------------------------------------------------------


def admissible_wave_potential(delta: float, eps: float = 0.1, sign: float = 1.0):
    """V with |V| <= delta / (r^{1/2-eps} + r^2): the endpoint theorem class."""

    def func(r):
        return sign * delta / (r ** (0.5 - eps) + r * r)

    return func, {"delta": delta, "eps": eps}


def wave_potential_study(
    V_func,
    spec: EnsembleSpec,
    T: float,
    eps: float = 0.1,
    workers: int = 1,
    refine: bool = True,
    cn_substeps: int = 4,
    with_forcing: bool = True,
) -> dict:
    """endWEV and smooWE ratio studies for the 3D wave equation with potential."""
    n = 3
    st_end = RatioStudy(estimate_id="endWEV", meta={"T": T, "eps": eps})
    st_smoo = RatioStudy(estimate_id="smooWE", meta={"T": T, "eps": eps})
    tau = WeightSpec("tau_eps", eps=eps)

    def level_rows(level: int, t_window: float):
        refine_f = 1.5**level
        rho_max = spec.rho_max
        r_max = 2.0 * T + 14.0
        n_f = int(np.ceil(4.0 * r_max * rho_max / np.pi / 100.0) * 100 * refine_f)
        fgrid = build_frequency_grid(rho_max, n_f)
        n_lin = int(np.ceil(r_max * 4.0 * rho_max / np.pi / 100.0) * 100 * refine_f)
        rgrid = build_radial_grid(1e-4, r_max, max(96, n_lin // 4), n_lin)
        n_frames = int(np.ceil(2.0 * T * 4.0 * rho_max / np.pi * refine_f)) + 1
        times = np.linspace(0.0, 2.0 * T, n_frames)
        sel = times <= t_window + 1e-12
        tt = times[sel]
        V = None if V_func is None else np.asarray(V_func(rgrid.nodes), dtype=float)
        members = list(enumerate(spec.member_rngs()))
        frame_dt = tt[1] - tt[0]
        dt = frame_dt / (cn_substeps * (level + 1))

        def one(item):
            idx, rng = item
            rows_u = {}
            rhs_end_sq = 0.0
            rhs_smoo_f = 0.0
            rhs_smoo_g = 0.0
            for k in range(spec.kmax + 1):
                fb = _bump(rng, fgrid.nodes, spec)
                gb = _bump(rng, fgrid.nodes, spec)
                fpos = fourier_factor(n) * (hankel_matrix(rgrid, fgrid, k, n) @ fb)
                gpos = fourier_factor(n) * (hankel_matrix(rgrid, fgrid, k, n) @ gb)
                env = _time_envelope(rng, tt, T) if with_forcing else None
                Fb = _bump(rng, fgrid.nodes, spec) if with_forcing else None
                Fpos = (
                    fourier_factor(n) * (hankel_matrix(rgrid, fgrid, k, n) @ Fb)
                    if with_forcing
                    else None
                )
                op = WaveCN(rgrid, k, n, V, dt)
                u, v = fpos.copy(), gpos.copy()
                frames = [u.copy()]
                for i in range(tt.size - 1):
                    for q in range(cn_substeps * (level + 1)):
                        t_mid = tt[i] + (q + 0.5) * dt
                        f_mid = None
                        if with_forcing:
                            e = np.interp(t_mid, tt, env.real) + 1j * np.interp(t_mid, tt, env.imag)
                            f_mid = e * Fpos
                        u, v = op.step_values(u, v, f_mid)
                    frames.append(u.copy())
                rows_u[(k, 1)] = np.stack(frames)
                # RHS pieces
                rho = fgrid.nodes
                rhs_end_sq += float(
                    np.real(fgrid.integrate(rho**2 * np.abs(fb) ** 2 * rho**2))
                ) * fourier_factor(n) ** 2  # |D| f in L2 = Hdot1
                rhs_end_sq += fourier_factor(n) ** 2 * float(
                    np.real(fgrid.integrate(rho**2 * np.abs(gb) ** 2))
                )
                if with_forcing:
                    wr = (1.0 + rgrid.nodes**2) ** (0.5 + eps)
                    space_sq = float(
                        np.real(rgrid.integrate(wr**2 * np.abs(Fpos) ** 2 * rgrid.nodes ** (n - 1.0)))
                    )
                    rhs_end_sq += space_sq * float(np.trapezoid(np.abs(env) ** 2, tt))
                rhs_smoo_f += fourier_factor(n) ** 2 * float(np.real(fgrid.integrate(rho**2 * np.abs(fb) ** 2)))
                rhs_smoo_g += fourier_factor(n) ** 2 * float(
                    np.real(fgrid.integrate(np.abs(gb) ** 2))
                )
            traj = nrm.WaveTrajectory(times=tt, data=rows_u, rgrid=rgrid, n=n)
            lhs_end = nrm.mixed_endpoint_norm(traj)
            lhs_smoo = nrm.smoothing_norm(traj, tau, weight_power=-1.0)
            rhs_end = float(np.sqrt(rhs_end_sq))
            rhs_smoo = float(np.sqrt(rhs_smoo_f + rhs_smoo_g))
            return idx, (lhs_end, rhs_end), (lhs_smoo, rhs_smoo)

        return _run_members(one, members, workers)

    rows_T = level_rows(0, T)
    rows_2T = level_rows(0, 2.0 * T)
    rows_ref = level_rows(1, T) if refine else None
    for st, pick in ((st_end, 1), (st_smoo, 2)):
        st.rows = [(idx, pair[0], pair[1], pair[0] / pair[1]) for idx, *pairs in rows_T for pair in [pairs[pick - 1]]]
        g0 = max(r[3] for r in st.rows)
        g1 = max(pairs[pick - 1][0] / pairs[pick - 1][1] for _, *pairs in rows_2T)
        st.growth = {f"T={T}": g0, f"T={2*T}": g1}
        if rows_ref is not None:
            st.refinement = {
                "level0": g0,
                "level1": max(pairs[pick - 1][0] / pairs[pick - 1][1] for _, *pairs in rows_ref),
            }
        st.finalize()
    return {"endWEV": st_end, "smooWE": st_smoo}


# --------------------------------------------------------------------------
# sphere product estimate
# --------------------------------------------------------------------------


def prodest_study(spec: EnsembleSpec, s: float = 1.5, L: int = 8) -> RatioStudy:
    """Empirical constant of the sphere product estimate at regularity s > 1."""
    study = RatioStudy(estimate_id="prodest", meta={"s": s, "L": L})
    ref = []
    for idx, rng in enumerate(spec.member_rngs()):
        size = (L + 1) ** 2
        g = ScalarCoeffs(L, rng.normal(size=size) + 1j * rng.normal(size=size))
        h = ScalarCoeffs(L, rng.normal(size=size) + 1j * rng.normal(size=size))
        lhs, rhs = sphere_product(g, h, s)
        study.rows.append((idx, lhs, rhs, lhs / rhs))
        g2 = ScalarCoeffs(2 * L, np.concatenate([g.entries, np.zeros((2 * L + 1) ** 2 - size)]))
        h2 = ScalarCoeffs(2 * L, np.concatenate([h.entries, np.zeros((2 * L + 1) ** 2 - size)]))
        lhs2, rhs2 = sphere_product(g2, h2, s)
        ref.append(lhs2 / rhs2)
    study.refinement = {
        "level0": max(r[3] for r in study.rows),
        "level1": max(ref),
    }
    return study.finalize()


# --------------------------------------------------------------------------
# equivalence suite: every exact or near-exact identity in one report
# --------------------------------------------------------------------------


def _check(name, residual, tol):
    return {"name": name, "residual": float(residual), "tol": float(tol), "passed": bool(residual <= tol)}


def equivalence_suite(seed: int = 0) -> list:
    """Run the exact-identity checks; returns a list of check dicts."""
    checks = []
    rng = np.random.default_rng(seed)

    # Dirac matrices: all 9 anticommutation relations, exactly
    worst = 0.0
    for i in range(3):
        for j in range(3):
            acomm = ALPHA[i] @ ALPHA[j] + ALPHA[j] @ ALPHA[i]
            worst = max(worst, float(np.max(np.abs(acomm - 2.0 * (i == j) * np.eye(4)))))
    checks.append(_check("alpha_anticommutation", worst, 0.0))

    # D^2 = -Delta channelwise, with measured convergence order
    orders = []
    resids = []
    for nn in (1, 2):
        rg = build_radial_grid(1e-4, 16.0, 100 * nn, 260 * nn)
        r = rg.nodes
        ch = DiracChannelIndex(1.5, 0.5, 2)
        m = ch.l_plus + 1
        psi = r**m * np.exp(-(r**2) / 2.0)
        pp = RadialProfile(rg, psi, "position")
        pm = RadialProfile(rg, r ** (ch.l_minus + 1) * np.exp(-(r**2) / 2.0), "position")
        f2 = dirac_radial_apply(ch, dirac_radial_apply(ch, (pp, pm)))
        d2psi = (m * (m - 1.0) * r ** (m - 2) - (2.0 * m + 1.0) * r**m + r ** (m + 2)) * np.exp(
            -(r**2) / 2.0
        )
        exact = -d2psi + ch.kj * (ch.kj + 1.0) / r**2 * psi
        mask = r > 0.05
        resids.append(float(np.max(np.abs(f2[0].values - exact)[mask]) / np.max(np.abs(exact))))
    order = float(np.log2(resids[0] / resids[1]) / np.log2(2.0))
    checks.append(_check("dirac_square_order", max(0.0, 1.9 - order), 0.0) | {"order": order})
    checks.append(_check("dirac_square_resid_fine", resids[1], 1e-2))

    # two-route propagator equivalence (sample)
    rg = build_radial_grid(1e-4, 16.0, 120, 300)
    fg = build_frequency_grid(5.0, 280)
    worst = 0.0
    for n in (3, 4):
        for k in (0, 3):
            prof = RadialProfile(fg, np.exp(-(((fg.nodes - 2.2) / 0.5) ** 2)) * np.exp(0.4j), "frequency")
            u1 = wave_channel_evolve_multiplier(k, prof, 2.0, rg, n)
            u2 = wave_channel_evolve_qrep(k, prof, 2.0, rg, n)
            num = np.sqrt(float(np.real(rg.integrate(np.abs(u1.values - u2.values) ** 2 * rg.nodes ** (n - 1)))))
            den = np.sqrt(float(np.real(rg.integrate(np.abs(u1.values) ** 2 * rg.nodes ** (n - 1)))))
            worst = max(worst, num / den)
    checks.append(_check("two_route_propagator", worst, 1e-4))

    # Hankel: gaussian closed form, roundtrip, Plancherel
    fg8 = build_frequency_grid(8.0, 440)
    c = RadialProfile(fg8, np.exp(-(fg8.nodes**2) / 2.0), "frequency")
    gpos = hankel_transform(c, 0, 3, rg)
    exact = fourier_factor(3) * np.exp(-(rg.nodes**2) / 2.0)
    checks.append(
        _check("hankel_gaussian", float(np.max(np.abs(gpos.values - exact)) / np.max(exact)), 1e-6)
    )
    back = hankel_inverse(gpos, 0, 3, fg8)
    checks.append(_check("hankel_roundtrip", float(np.max(np.abs(back.values - c.values))), 1e-6))
    lhs = np.sqrt(float(np.real(rg.integrate(np.abs(gpos.values) ** 2 * rg.nodes**2))))
    rhs = fourier_factor(3) * np.sqrt(float(np.real(fg8.integrate(np.abs(c.values) ** 2 * fg8.nodes**2))))
    checks.append(_check("hankel_plancherel", abs(lhs - rhs) / rhs, 1e-6))

    # genineq2 s = 0 equality
    spec = EnsembleSpec(seed=seed, count=3, kmax=3, rho_max=5.0)
    fgt = build_frequency_grid(5.0, 400)
    member = make_wave_member(spec.member_rngs()[0], fgt, 3, spec)
    l0, r0 = nrm.weighted_transfer_check(0, 0.5, member)
    checks.append(_check("genineq2_s0_equality", abs(l0 / r0 - 1.0), 1e-6))

    # sht roundtrip and Parseval
    sg = build_sphere_grid(8)
    coef = ScalarCoeffs(8, rng.normal(size=81) + 1j * rng.normal(size=81))
    vals = sht_inverse(coef, sg)
    back_c = sht_forward(vals, sg, 8)
    checks.append(_check("sht_roundtrip", float(np.max(np.abs(back_c.entries - coef.entries))), 1e-10))
    pars = abs(float(np.sum(sg.weights * np.abs(vals) ** 2)) - float(coef.l2_norm_sq()))
    checks.append(_check("sht_parseval", pars / float(coef.l2_norm_sq()), 1e-10))

    # lambda operator: inverse powers
    lam = lambda_omega_apply(lambda_omega_apply(coef, 1.3), -1.3)
    checks.append(_check("lambda_inverse", float(np.max(np.abs(lam.entries - coef.entries))), 1e-13))

    # spinor Gram matrix for j <= 15/2
    sg16 = build_sphere_grid(16)
    chs = dirac_channel_list(7.5)
    cols = []
    for ch in chs:
        cols.append(spinor_basis_eval(ch, +1, sg16).T.reshape(-1))
        cols.append(spinor_basis_eval(ch, -1, sg16).T.reshape(-1))
    B = np.column_stack(cols)
    w4 = np.repeat(sg16.weights, 4)
    gram = (B.conj().T * w4) @ B
    checks.append(_check("spinor_gram", float(np.max(np.abs(gram - np.eye(gram.shape[0])))), 1e-10))

    # spinor roundtrip, L2exp and pointwise L2expS identities
    rg2 = build_radial_grid(1e-4, 14.0, 100, 220)
    r = rg2.nodes
    sg8 = build_sphere_grid(8)
    field_ch = {}
    for ch in dirac_channel_list(2.5):
        a = rng.normal() + 1j * rng.normal()
        b = rng.normal() + 1j * rng.normal()
        field_ch[ch] = (
            RadialProfile(rg2, a * r ** (ch.l_plus + 1) * np.exp(-(r**2)), "position"),
            RadialProfile(rg2, b * r ** (ch.l_minus + 1) * np.exp(-(r**2)), "position"),
        )
    fld = spinor_reconstruct(field_ch, rg2, sg8)
    back_ch = spinor_decompose(fld, 2.5)
    worst = max(
        float(np.max(np.abs(back_ch[ch][0].values - field_ch[ch][0].values)))
        + float(np.max(np.abs(back_ch[ch][1].values - field_ch[ch][1].values)))
        for ch in field_ch
    )
    checks.append(_check("spinor_roundtrip", worst, 1e-8))
    l2_ch = np.sqrt(
        sum(
            float(np.real(rg2.integrate(np.abs(p.values) ** 2 + np.abs(m.values) ** 2)))
            for p, m in field_ch.values()
        )
    )
    checks.append(_check("spinor_L2exp", abs(fld.l2_norm() - l2_ch) / l2_ch, 1e-8))
    dens_field = np.sum(np.abs(fld.values) ** 2, axis=2) @ sg8.weights
    dens_ch = sum(
        (np.abs(p.values) ** 2 + np.abs(m.values) ** 2) / r**2 for p, m in field_ch.values()
    )
    checks.append(
        _check("spinor_L2expS_pointwise", float(np.max(np.abs(dens_field - dens_ch) / np.max(dens_ch))), 1e-8)
    )

    # collocation Dirac vs channelwise radial action (discretization-level)
    dcol = spinor_decompose(dirac_collocation_apply(fld), 2.5)
    num = den = 0.0
    for ch in field_ch:
        fp, fm = dirac_radial_apply(ch, field_ch[ch])
        num += float(np.real(rg2.integrate(np.abs(dcol[ch][0].values - fp.values) ** 2 + np.abs(dcol[ch][1].values - fm.values) ** 2)))
        den += float(np.real(rg2.integrate(np.abs(fp.values) ** 2 + np.abs(fm.values) ** 2)))
    checks.append(_check("collocation_vs_radial_dirac", np.sqrt(num / den), 2e-2))

    # modified angular operator: eigenvalue ratio bounded uniformly, j <= 31/2
    ratios = []
    for sgn in (1, -1):
        for j2 in range(1, 32, 2):
            j = j2 / 2.0
            kj = sgn * int(j + 0.5)
            ch = DiracChannelIndex(j, 0.5, kj)
            for ell in (ch.l_plus, ch.l_minus):
                ratios.append(float(lambda_eigenvalue(ell, 1.0)) / abs(kj))
    ratios = np.array(ratios)
    checks.append(
        _check("lambda_tilde_equivalence", max(float(np.max(ratios)), 1.0 / float(np.min(ratios))), 3.0)
        | {"ratio_range": [float(np.min(ratios)), float(np.max(ratios))]}
    )

    # Sobolev equivalences: frequency multiplier vs position derivative form
    worst = 0.0
    fge = build_frequency_grid(5.0, 400)
    rge = build_radial_grid(1e-4, 40.0, 150, 500)
    for m in (0, 1, 2):
        for k in (0, 1, 3):
            prof = np.exp(-(((fge.nodes - 2.0) / 0.5) ** 2))
            wk = (1.0 + k * (k + 1.0)) ** m
            q1 = wk * fourier_factor(3) ** 2 * float(
                np.real(fge.integrate(fge.nodes**2 * np.abs(prof) ** 2 * fge.nodes**2))
            )
            gpos = fourier_factor(3) * (hankel_matrix(rge, fge, k, 3) @ prof)
            dg = derivative_values(rge, gpos)
            q2 = wk * float(
                np.real(
                    rge.integrate(
                        np.abs(dg) ** 2 * rge.nodes**2 + k * (k + 1.0) * np.abs(gpos) ** 2
                    )
                )
            )
            worst = max(worst, abs(np.sqrt(q1) - np.sqrt(q2)) / np.sqrt(q1))
    checks.append(_check("sobolev_equivalences", worst, 0.02))

    # Hardy inequality witness on radial test functions
    worst = 0.0
    for width in (0.7, 1.3):
        g = np.exp(-(rge.nodes**2) / (2 * width**2))
        dg = derivative_values(rge, g)
        lhs_h = np.sqrt(float(np.real(rge.integrate(np.abs(g / rge.nodes) ** 2 * rge.nodes**2))))
        rhs_h = 2.0 * np.sqrt(float(np.real(rge.integrate(np.abs(dg) ** 2 * rge.nodes**2))))
        worst = max(worst, lhs_h / rhs_h)
    checks.append(_check("hardy_witness", worst, 1.0))

    # Sonine maximum at 0 and monotonicity for a >= 1/2
    xg = np.linspace(-0.999, 0.999, 1001)
    worst = 0.0
    mono = 0.0
    for k in (2, 7, 20, 50):
        for a in (0.5, 1.0):
            sv = sonine_eval(k, a, xg)
            s0 = sonine_eval(k, a, 0.0)
            worst = max(worst, float(np.max(sv) - s0))
            right = sv[xg >= 0]
            mono = max(mono, float(np.max(np.diff(right))))
    checks.append(_check("sonine_max_at_zero", max(worst, 0.0), 1e-12))
    checks.append(_check("sonine_monotone", max(mono, 0.0), 1e-12))

    # sqrt(S_a(0)) * sqrt(k) bounded (paper: |T_a| <~ 1/sqrt(k))
    vals = [np.sqrt(sonine_eval(k, 0.5, 0.0)) * np.sqrt(k) for k in range(2, 201)]
    checks.append(_check("sonine_sqrtk_bound", float(np.max(vals)) / float(vals[0]) - 1.0, 1.0))

    # Stirling consistency of the at-zero formula
    v100 = jacobi_at_zero_paper(100, 0.5) * np.sqrt(100)
    v200 = jacobi_at_zero_paper(200, 0.5) * np.sqrt(200)
    checks.append(_check("stirling_at_zero", abs(v200 / v100 - 1.0), 0.05))

    # Bessel two-route agreement
    worst = 0.0
    ys = np.linspace(0.5, 100.0, 25)
    for nu2 in range(1, 42, 4):
        nu = nu2 / 2.0
        a = bessel_j(nu, ys)
        b = bessel_j_lommel(nu, ys, 160)
        worst = max(worst, float(np.max(np.abs(a - b))))
    checks.append(_check("bessel_two_route", worst, 1e-8))

    return checks


# --------------------------------------------------------------------------
# contraction study
# --------------------------------------------------------------------------


def contraction_study(
    spec: EnsembleSpec,
    radii=(1e-3, 3e-3, 1e-2),
    T: float = 4.0,
    dt: float = 0.25,
    s: float = 1.5,
    pairs_per_radius: int = 3,
    jmax: float = 1.5,
    P3: nldmod.CubicSpec | None = None,
    V: nldmod.PotentialSpec | None = None,
) -> dict:
    """Lipschitz-ratio scaling of the Picard map over shrinking balls.

    Fits log(||Phi(v)-Phi(w)||_X / ||v-w||_X) against log R; cubic
    homogeneity forces slope 2.
    """
    if P3 is None:
        P3 = nldmod.CubicSpec.mass_cubic()
    rho_max = spec.rho_max
    r_max = T + 12.0
    fgrid = build_frequency_grid(rho_max, int(np.ceil(4 * r_max * rho_max / np.pi / 50.0) * 50))
    n_lin = int(np.ceil(r_max * 4.0 * rho_max / np.pi / 50.0) * 50)
    rgrid = build_radial_grid(1e-4, r_max, max(96, n_lin // 4), n_lin)
    L = int(2 * (jmax + 0.5) + 2)
    sgrid = build_sphere_grid(max(4, L))
    times = np.arange(0.0, T + 0.5 * dt, dt)
    zero_f = SpinorField(rgrid, sgrid, np.zeros((rgrid.n, sgrid.n_nodes, 4), dtype=complex))

    def free_traj(rng, scale):
        spectra = make_dirac_member(rng, fgrid, spec)
        traj = _dirac_member_trajectory(spectra, None, rgrid, times)
        xn = nrm.x_norm(traj, s)
        factor = scale / xn
        data = {ch: (factor * a, factor * b) for ch, (a, b) in traj.data.items()}
        return nrm.DiracTrajectory(times=times, data=data, rgrid=rgrid)

    seqs = np.random.SeedSequence(spec.seed).spawn(len(radii) * pairs_per_radius * 2)
    rngs = [np.random.default_rng(s_) for s_ in seqs]
    rows = []
    it = iter(rngs)
    for R in radii:
        for p in range(pairs_per_radius):
            v = free_traj(next(it), R * 0.9)
            w = free_traj(next(it), R * 0.7)
            phi_v, _ = nldmod.picard_iterate(v, zero_f, V, P3, s=s, jmax=jmax, fgrid=fgrid, sgrid=sgrid)
            phi_w, _ = nldmod.picard_iterate(w, zero_f, V, P3, s=s, jmax=jmax, fgrid=fgrid, sgrid=sgrid)
            diff_phi = nrm.DiracTrajectory(
                times=times,
                data={
                    ch: (phi_v.data[ch][0] - phi_w.data[ch][0], phi_v.data[ch][1] - phi_w.data[ch][1])
                    for ch in phi_v.sorted_keys()
                },
                rgrid=rgrid,
            )
            diff_vw = nrm.DiracTrajectory(
                times=times,
                data={
                    ch: (v.data[ch][0] - w.data[ch][0], v.data[ch][1] - w.data[ch][1])
                    for ch in v.sorted_keys()
                },
                rgrid=rgrid,
            )
            ratio = nrm.x_norm(diff_phi, s) / nrm.x_norm(diff_vw, s)
            rows.append((R, p, ratio))
    logR = np.log([r[0] for r in rows])
    logq = np.log([r[2] for r in rows])
    slope, intercept = np.polyfit(logR, logq, 1)
    return {
        "estimate_id": "contraction",
        "rows": rows,
        "slope": float(slope),
        "intercept": float(intercept),
        "passed": bool(abs(slope - 2.0) <= 0.3),
        "meta": {"radii": list(radii), "T": T, "dt": dt, "s": s, "jmax": jmax},
    }
