"""Configuration-driven command line frontend.

Subcommands: `simulate nld|linear`, `verify <study-id>`, `transform hankel`,
`lemma qk`.  A JSON config file supplies defaults; flags override it.
Artifacts: study.csv / trajectory.csv, summary.json, manifest.json.
Exit codes: 0 pass, 2 a study failed its gates, 1 configuration or runtime
error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError, HypothesisViolationError, ResolutionError
from . import nld as nldmod
from . import verify as vfy
from .radial import RadialProfile, build_frequency_grid, build_radial_grid, hankel_inverse, hankel_transform
from .sphere import build_sphere_grid

_CONFIG_KEYS = {
    "command", "study", "n", "T", "dt", "count", "kmax", "jmax", "rho_max",
    "eps", "sigma", "s", "delta", "seed", "workers", "out", "refine",
    "potential", "eps0", "k", "cubic", "store_frames",
}

_STUDY_IDS = (
    "strich3D", "strichartz1", "strichartz2", "genineq2", "dirac", "freedirac",
    "wavepot", "prodest", "lemmaQk", "equivalence", "contraction",
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_manifest(outdir: Path, config: dict, grid_meta: dict):
    manifest = {
        "config": config,
        "version": __version__,
        "grid_meta": grid_meta,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default))


def _write_summary(outdir: Path, summary: dict):
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default))


def _write_study_csv(outdir: Path, rows, header=("member", "lhs", "rhs", "ratio")):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    (outdir / "study.csv").write_text("\n".join(lines) + "\n")


def load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise DomainError(f"config file not found: {path}")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DomainError(f"malformed config: {exc}") from exc
        unknown = set(cfg) - _CONFIG_KEYS
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg.setdefault("seed", 0)
    cfg.setdefault("workers", 1)
    cfg.setdefault("out", "pw_out")
    return cfg


def _ensemble(cfg, **over) -> vfy.EnsembleSpec:
    base = dict(
        seed=int(cfg.get("seed", 0)),
        count=int(cfg.get("count", 20)),
        kmax=int(cfg.get("kmax", 4)),
        jmax=float(cfg.get("jmax", 3.5)),
        rho_max=float(cfg.get("rho_max", 5.0)),
    )
    base.update(over)
    return vfy.EnsembleSpec(**base)


def _run_verify(cfg: dict, outdir: Path) -> int:
    study = cfg.get("study")
    if study not in _STUDY_IDS:
        raise DomainError(f"unknown study {study!r}; choose from {_STUDY_IDS}")
    workers = int(cfg.get("workers", 1))
    refine = bool(cfg.get("refine", True))
    T = float(cfg.get("T", 10.0))
    s = float(cfg.get("s", 1.5))
    grid_meta: dict = {}

    if study == "lemmaQk":
        st = vfy.lemma_qk_study(int(cfg.get("n", 3)), int(cfg.get("kmax", 200)))
        _write_study_csv(outdir, st.rows, header=("k", "sup_qk", "one", "normalized"))
        summary = st.summary_dict()
    elif study == "equivalence":
        checks = vfy.equivalence_suite(seed=int(cfg.get("seed", 0)))
        rows = [(c["name"], c["residual"], c["tol"], float(c["passed"])) for c in checks]
        _write_study_csv(outdir, rows, header=("check", "residual", "tol", "passed"))
        summary = {"estimate_id": "equivalence", "checks": checks, "passed": all(c["passed"] for c in checks)}
    elif study in ("strich3D", "strichartz1"):
        n = int(cfg.get("n", 3 if study == "strich3D" else 4))
        st = vfy.strichartz_free_study(n, _ensemble(cfg), T, workers=workers, refine=refine)
        _write_study_csv(outdir, st.rows)
        summary = st.summary_dict()
    elif study == "strichartz2":
        n = int(cfg.get("n", 3))
        st = vfy.strichartz_inhom_study(n, _ensemble(cfg), T, eps=float(cfg.get("eps", 0.1)), workers=workers, refine=refine)
        _write_study_csv(outdir, st.rows)
        summary = st.summary_dict()
    elif study == "genineq2":
        out = vfy.genineq2_study(int(cfg.get("n", 3)), _ensemble(cfg), sigma=float(cfg.get("sigma", 0.0)), workers=workers)
        _write_study_csv(outdir, out["s1_study"].rows)
        summary = {
            "estimate_id": "genineq2",
            "s0_equality_error": out["s0_equality_error"],
            "s0_passed": out["s0_passed"],
            "s1": out["s1_study"].summary_dict(),
            "passed": out["passed"],
        }
    elif study in ("dirac", "freedirac"):
        pot = cfg.get("potential", "none" if study == "freedirac" else "attractive")
        delta = float(cfg.get("delta", 0.05))
        Vspec = None
        if pot != "none":
            Vspec = vfy.admissible_dirac_potential(delta, sigma=float(cfg.get("sigma", 1.5)),
                                                   sign=-1.0 if pot == "attractive" else 1.0)
        studies = vfy.dirac_studies(Vspec, _ensemble(cfg), T, s=s, workers=workers, refine=refine)
        rows = []
        for name, st in studies.items():
            rows.extend((f"{name}:{r[0]}", r[1], r[2], r[3]) for r in st.rows)
        _write_study_csv(outdir, rows)
        summary = {
            "estimate_id": study,
            "studies": {name: st.summary_dict() for name, st in studies.items()},
            "passed": all(st.passed for st in studies.values()),
        }
    elif study == "wavepot":
        delta = float(cfg.get("delta", 0.05))
        pot = cfg.get("potential", "attractive")
        Vf = None
        if pot != "none":
            Vf, _meta = vfy.admissible_wave_potential(delta, eps=float(cfg.get("eps", 0.1)),
                                                      sign=-1.0 if pot == "attractive" else 1.0)
        out = vfy.wave_potential_study(Vf, _ensemble(cfg), T, eps=float(cfg.get("eps", 0.1)),
                                       workers=workers, refine=refine)
        rows = []
        for name, st in out.items():
            rows.extend((f"{name}:{r[0]}", r[1], r[2], r[3]) for r in st.rows)
        _write_study_csv(outdir, rows)
        summary = {
            "estimate_id": "wavepot",
            "studies": {name: st.summary_dict() for name, st in out.items()},
            "passed": all(st.passed for st in out.values()),
        }
    elif study == "prodest":
        st = vfy.prodest_study(_ensemble(cfg), s=s)
        _write_study_csv(outdir, st.rows)
        summary = st.summary_dict()
    else:  # contraction
        out = vfy.contraction_study(
            _ensemble(cfg, jmax=float(cfg.get("jmax", 1.5)), rho_max=float(cfg.get("rho_max", 3.0))),
            T=float(cfg.get("T", 4.0)),
            dt=float(cfg.get("dt", 0.2)),
            s=s,
        )
        _write_study_csv(outdir, [(f"R={r[0]:g}", r[1], 0.0, r[2]) for r in out["rows"]],
                         header=("radius", "pair", "zero", "lipschitz_ratio"))
        summary = {k: v for k, v in out.items() if k != "rows"}

    _write_summary(outdir, summary)
    _write_manifest(outdir, cfg, grid_meta)
    return 0 if summary.get("passed", False) else 2


def _run_simulate(cfg: dict, outdir: Path) -> int:
    kind = cfg.get("study") or cfg.get("cubic") or "nld"
    T = float(cfg.get("T", 50.0))
    dt = float(cfg.get("dt", 0.25))
    s = float(cfg.get("s", 1.5))
    jmax = float(cfg.get("jmax", 7.5))
    eps0 = float(cfg.get("eps0", 1e-3))
    rho_max = float(cfg.get("rho_max", 3.0))
    seed = int(cfg.get("seed", 0))
    r_max = T + 15.0
    rgrid = build_radial_grid(1e-4, r_max, 100, max(240, int(r_max / 0.17)))
    L = int(max(8, 2 * (jmax + 0.5) + 1))
    sgrid = build_sphere_grid(L)
    fgrid = build_frequency_grid(rho_max, max(160, int(4.2 * r_max * rho_max / np.pi)))
    f = nldmod.small_data_state(rgrid, sgrid, fgrid, jmax=jmax, eps=eps0, s=s, seed=seed)
    pot = cfg.get("potential", "none")
    Vspec = None
    if pot != "none":
        Vspec = vfy.admissible_dirac_potential(float(cfg.get("delta", 0.02)), sigma=float(cfg.get("sigma", 1.5)),
                                               sign=-1.0 if pot == "attractive" else 1.0)
    P3 = nldmod.CubicSpec.zero() if kind == "linear" else nldmod.CubicSpec.mass_cubic()
    res = nldmod.nld_simulate(
        f, Vspec, P3, T, dt, s=s, jmax=jmax, fgrid=fgrid,
        store_frames=int(cfg.get("store_frames", 48)),
    )
    lines = ["t,l2_norm,h1_norm,lam_h1_norm,running_x_norm"]
    d = res.diagnostics
    for i, t in enumerate(res.times):
        lines.append(",".join(_fmt(x) for x in (t, d["l2"][i], d["h1"][i], d["lam_h1"][i], d["running_x"][i])))
    (outdir / "trajectory.csv").write_text("\n".join(lines) + "\n")
    summary = {
        "command": f"simulate {kind}",
        "eps_initial": res.eps_initial,
        "small_data": res.small_data,
        "diverged": res.diverged,
        "sup_lam_h1": float(np.max(d["lam_h1"])),
        "final_running_x": float(d["running_x"][-1]),
        "l2_drift": float(abs(d["l2"][-1] - d["l2"][0]) / d["l2"][0]),
        "passed": bool(not res.diverged),
        "meta": res.meta,
    }
    _write_summary(outdir, summary)
    _write_manifest(outdir, cfg, {"rgrid": rgrid.meta, "fgrid": fgrid.meta, "L": L})
    return 0 if summary["passed"] else 2


def _run_transform(cfg: dict, outdir: Path) -> int:
    n = int(cfg.get("n", 3))
    k = int(cfg.get("k", 0))
    rho_max = float(cfg.get("rho_max", 8.0))
    fgrid = build_frequency_grid(rho_max, 440)
    rgrid = build_radial_grid(1e-4, 50.0, 200, 400)
    prof = RadialProfile(fgrid, np.exp(-(fgrid.nodes**2) / 2.0), "frequency")
    fwd = hankel_transform(prof, k, n, rgrid)
    back = hankel_inverse(fwd, k, n, fgrid)
    resid = float(np.max(np.abs(back.values - prof.values)))
    lines = ["r,re_g,im_g"]
    for r, v in zip(rgrid.nodes, fwd.values):
        lines.append(",".join(_fmt(x) for x in (r, v.real, v.imag)))
    (outdir / "study.csv").write_text("\n".join(lines) + "\n")
    summary = {"command": "transform hankel", "roundtrip_residual": resid, "passed": bool(resid <= 1e-6)}
    _write_summary(outdir, summary)
    _write_manifest(outdir, cfg, {"rgrid": rgrid.meta, "fgrid": fgrid.meta})
    return 0 if summary["passed"] else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="partialwave", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="JSON config file")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--n", type=int, default=None)
        sp.add_argument("--T", type=float, default=None)
        sp.add_argument("--dt", type=float, default=None)
        sp.add_argument("--count", type=int, default=None)
        sp.add_argument("--kmax", type=int, default=None)
        sp.add_argument("--jmax", type=float, default=None)
        sp.add_argument("--rho-max", dest="rho_max", type=float, default=None)
        sp.add_argument("--eps", type=float, default=None)
        sp.add_argument("--sigma", type=float, default=None)
        sp.add_argument("--s", type=float, default=None)
        sp.add_argument("--delta", type=float, default=None)
        sp.add_argument("--potential", choices=("none", "attractive", "repulsive"), default=None)

    sp = sub.add_parser("verify", help="run an estimate-verification study")
    sp.add_argument("study", choices=_STUDY_IDS)
    common(sp)
    sp.add_argument("--no-refine", dest="refine", action="store_false", default=None)

    sp = sub.add_parser("simulate", help="run the nonlinear or linear Dirac solver")
    sp.add_argument("study", choices=("nld", "linear"))
    common(sp)
    sp.add_argument("--eps0", type=float, default=None, help="initial Lambda^s H1 amplitude")
    sp.add_argument("--store-frames", dest="store_frames", type=int, default=None)

    sp = sub.add_parser("lemma", help="kernel bound tabulation")
    sp.add_argument("study", choices=("qk",))
    common(sp)

    sp = sub.add_parser("transform", help="transform demonstrations")
    sp.add_argument("study", choices=("hankel",))
    common(sp)
    sp.add_argument("--k", type=int, default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        cfg["command"] = args.command
        if getattr(args, "study", None):
            if args.command == "lemma" and args.study == "qk":
                cfg["study"] = "lemmaQk"
            else:
                cfg["study"] = args.study
        outdir = Path(cfg.get("out", "pw_out"))
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command == "verify" or args.command == "lemma":
            return _run_verify(cfg, outdir)
        if args.command == "simulate":
            return _run_simulate(cfg, outdir)
        return _run_transform(cfg, outdir)
    except (DomainError, HypothesisViolationError, ResolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
