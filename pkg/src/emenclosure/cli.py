"""Command-line front end.

Subcommands: simulate, indicator, extract, verify, scaling, reflector.
Exit codes: 0 success, 2 geometry error, 3 stale inputs, 4 no decay
detected, 5 numerical accuracy failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .analytic import (eval_background_fields, eval_exterior_fields,
                       interior_branch_selfcheck, LaplaceParams)
from .config import ExperimentConfig
from .fdtd import ConfigurationError, E_COMPONENTS, GridSpec, H_COMPONENTS, \
    YeeSimulation, leapfrog_energy
from .geometry import GeometryError, first_reflector
from .indicator import NoDecayError, classify_by_sign, extract_distance
from .materials import classify_material, hard_margin, region_membership, soft_margin
from .pipeline import StalenessError, curve_from_csv, indicator_files, simulate
from .scaling import scaling_report, write_scaling_csv
from .source import verify_pulse_decay

EXIT_OK = 0
EXIT_GEOMETRY = 2
EXIT_STALE = 3
EXIT_NO_DECAY = 4
EXIT_ACCURACY = 5


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    if getattr(args, "tau_min", None) is not None:
        cfg.raw["tau.min"] = str(args.tau_min)
    if getattr(args, "tau_max", None) is not None:
        cfg.raw["tau.max"] = str(args.tau_max)
    if getattr(args, "tau_count", None) is not None:
        cfg.raw["tau.count"] = str(args.tau_count)
    if getattr(args, "mode", None) is not None:
        cfg.raw["run.mode"] = args.mode
    if getattr(args, "threads", None) is not None:
        cfg.raw["run.threads"] = str(args.threads)
    if getattr(args, "seed", None) is not None:
        cfg.raw["run.seed"] = str(args.seed)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    manifest = simulate(cfg, args.out)
    fileio.write_schema_doc(Path(args.out) / "schemas.md")
    print(json.dumps(manifest, indent=2))
    return EXIT_OK


def cmd_indicator(args) -> int:
    cfg = _load_config(args)
    traces = args.traces or args.out
    written = indicator_files(cfg, traces, args.out)
    fileio.write_schema_doc(Path(args.out) / "schemas.md")
    for name in written:
        print(name)
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = _load_config(args)
    results = {}
    for path in args.curves:
        curve = curve_from_csv(path, cfg)
        est = extract_distance(curve)
        results[Path(path).name] = {
            **est.as_dict(),
            "material_class": classify_by_sign(curve),
        }
    payload = {"fingerprint": cfg.fingerprint(), "results": results}
    out = Path(args.out) / "extraction.json" if args.out else None
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        fileio.write_json(out, payload)
    print(json.dumps(payload, indent=2, default=float))
    return EXIT_OK


def _verify_checks(cfg: ExperimentConfig) -> list[tuple[str, bool, str]]:
    checks = []
    medium = cfg.medium()
    source = cfg.source()
    rng = np.random.default_rng(cfg.seed)

    rep = verify_pulse_decay(source.pulse, source.T, np.linspace(2.0, 40.0, 20))
    checks.append(("pulse_transform_decay", rep.source_norm_consistent,
                   f"fitted exponent {rep.fitted_exponent:.3f}"))

    worst = 0.0
    for med in (medium, type(medium)(eps0=medium.eps0, mu0=medium.mu0,
                                     sigma0=medium.sigma0 + 0.4)):
        for tau in (2.0, 7.0, 19.0):
            r = interior_branch_selfcheck(med, source.eta, tau)
            worst = max(worst, r.value_mismatch, r.derivative_mismatch)
    checks.append(("interior_potential_branch_match", worst < 1e-5,
                   f"worst C1 mismatch {worst:.2e}"))

    pts = np.asarray(source.p) + rng.standard_normal((100, 3))
    r = np.linalg.norm(pts - np.asarray(source.p), axis=1)
    pts = pts[r > 1.5 * source.eta]
    worst = 0.0
    for tau in (3.0, 9.0, 15.0):
        v1 = eval_background_fields(medium, source, tau, pts)
        v2 = eval_exterior_fields(medium, source, tau, pts)
        for a, b in zip(v1, v2):
            scale = np.max(np.abs(b))
            if scale > 0:
                worst = max(worst, float(np.max(np.abs(a - b)) / scale))
    checks.append(("field_norm_identities", worst < 1e-10,
                   f"worst relative deviation {worst:.2e}"))

    er = np.exp(rng.uniform(np.log(0.05), np.log(5.0), 2000))
    mr = np.exp(rng.uniform(np.log(0.05), np.log(5.0), 2000))
    ok = True
    for e, m in zip(er, mr):
        reg = region_membership(e, m)
        if (reg == "A1") != (soft_margin(e, m) > 0):
            ok = False
        if (reg == "A2") != (soft_margin(e, m) <= 0 and hard_margin(e, m) > 0):
            ok = False
    checks.append(("material_sign_equivalence", ok, "2000 random pairs"))

    eff = LaplaceParams.from_medium(type(medium)(eps0=medium.eps0, mu0=medium.mu0,
                                                 sigma0=0.3), 5.0)
    checks.append(("conductive_effective_permittivity",
                   abs(eff.eps0_eff - (medium.eps0 + 0.3 / 5.0)) < 1e-14,
                   f"eps_eff {eff.eps0_eff}"))

    grid = GridSpec(lo=(0, 0, 0), n=(16, 16, 16), h=0.1,
                    dt=0.4 * 0.1 / np.sqrt(3), n_steps=10)
    sim = YeeSimulation(medium, grid)
    for c in E_COMPONENTS + H_COMPONENTS:
        sim.state.fields[c][...] = rng.standard_normal(sim.state.fields[c].shape)
    for comp, axes in (("Ex", (1, 2)), ("Ey", (0, 2)), ("Ez", (0, 1))):
        arr = sim.state.fields[comp]
        for ax in axes:
            sl = [slice(None)] * 3
            sl[ax] = 0
            arr[tuple(sl)] = 0
            sl[ax] = -1
            arr[tuple(sl)] = 0
    hp = {c: sim.state.fields[c].copy() for c in H_COMPONENTS}
    ep = {c: sim.state.fields[c].copy() for c in E_COMPONENTS}
    drift = 0.0
    prev = None
    for _ in range(30):
        sim.step()
        e = leapfrog_energy(sim.state, ep, hp)
        if prev is not None:
            drift = max(drift, (e - prev) / prev)
        prev = e
        for c in H_COMPONENTS:
            np.copyto(hp[c], sim.state.fields[c])
        for c in E_COMPONENTS:
            np.copyto(ep[c], sim.state.fields[c])
    checks.append(("energy_non_increase", drift < 1e-10,
                   f"max relative growth per step {drift:.2e}"))
    return checks


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    checks = _verify_checks(cfg)
    all_ok = True
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        all_ok &= ok
    return EXIT_OK if all_ok else EXIT_ACCURACY


def cmd_scaling(args) -> int:
    cfg = _load_config(args)
    obstacle = cfg.obstacle()
    if obstacle is None:
        raise GeometryError("scaling needs an obstacle")
    medium = cfg.medium()
    source = cfg.source()
    taus = cfg.taus()
    reports = [scaling_report(medium, obstacle.shape, source.p, taus,
                              quantity="J_full"),
               scaling_report(medium, obstacle.shape, source.p, taus,
                              quantity="J_perp", a=source.a)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_scaling_csv(out / "scaling.csv", reports)
    fileio.write_json(out / "scaling_fits.json", {
        "fingerprint": cfg.fingerprint(),
        "fits": [r.as_dict() for r in reports],
    })
    fileio.write_schema_doc(out / "schemas.md")
    for r in reports:
        print(f"{r.quantity}: rate {r.rate:.6f} power {r.power:.3f}")
    return EXIT_OK


def cmd_reflector(args) -> int:
    cfg = _load_config(args)
    obstacle = cfg.obstacle()
    if obstacle is None:
        raise GeometryError("reflector analysis needs an obstacle")
    source = cfg.source()
    report = first_reflector(obstacle.shape, np.asarray(source.p),
                             np.asarray(source.a))
    medium = cfg.medium()
    cls = classify_material(obstacle, medium)
    payload = {
        "fingerprint": cfg.fingerprint(),
        "dist_p_to_boundary": report.dist_pD,
        "first_reflector_points": [
            {"q": list(pt.q), "normal": list(pt.nu),
             "gauss_curvature": pt.gauss_curvature,
             "mean_curvature": pt.mean_curvature,
             "det_diff": pt.det_diff}
            for pt in report.points],
        "flags": {
            "positive_gauss": report.flags.positive_gauss,
            "positive_det_diff": report.flags.positive_det_diff,
            "polarization_generic": report.flags.polarization_generic,
        },
        "material_class": cls.material_class,
        "margin": cls.margin,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        fileio.write_json(out / "reflector.json", payload)
    print(json.dumps(payload, indent=2, default=float))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emenclosure")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, traces=False, curves=False):
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default="out")
        sp.add_argument("--tau-min", type=float)
        sp.add_argument("--tau-max", type=float)
        sp.add_argument("--tau-count", type=int)
        sp.add_argument("--mode")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--seed", type=int)
        if traces:
            sp.add_argument("--traces", help="directory with simulate outputs")
        if curves:
            sp.add_argument("curves", nargs="+", help="indicator CSV files")

    common(sub.add_parser("simulate"))
    common(sub.add_parser("indicator"), traces=True)
    common(sub.add_parser("extract"), curves=True)
    common(sub.add_parser("verify"))
    common(sub.add_parser("scaling"))
    common(sub.add_parser("reflector"))
    return p


_HANDLERS = {
    "simulate": cmd_simulate,
    "indicator": cmd_indicator,
    "extract": cmd_extract,
    "verify": cmd_verify,
    "scaling": cmd_scaling,
    "reflector": cmd_reflector,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except StalenessError as exc:
        print(f"stale inputs: {exc}", file=sys.stderr)
        return EXIT_STALE
    except NoDecayError as exc:
        print(f"no decay: {exc}", file=sys.stderr)
        return EXIT_NO_DECAY
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except Exception as exc:  # accuracy / unexpected numeric failures
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ACCURACY


if __name__ == "__main__":
    sys.exit(main())
