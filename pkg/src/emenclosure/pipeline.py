"""Experiment orchestration: runs, caching, indicator assembly.

Heavy artifacts (background volume stores) are cached on disk keyed by the
relevant slice of the config fingerprint; set EM_ENCLOSURE_CACHE to move
the cache.  Every product embeds the config fingerprint and downstream
stages refuse inputs whose fingerprint does not match their config.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import fileio
from .config import ExperimentConfig
from .fdtd import (BackgroundStore, run_background_with_store, run_scattered,
                   run_simulation)
from .indicator import (IndicatorCurve, combine_indicators,
                        indicator_curve_analytic_bg, laplace_transform_trace,
                        _pair_indicator, _validate_taus)


class StalenessError(RuntimeError):
    """Inputs were produced from a different config than the one supplied."""


def cache_dir() -> Path:
    root = os.environ.get("EM_ENCLOSURE_CACHE")
    if root:
        p = Path(root)
    else:
        p = Path.home() / ".cache" / "emenclosure"
    p.mkdir(parents=True, exist_ok=True)
    return p


def _store_key(cfg: ExperimentConfig, which: int) -> str:
    """Fingerprint of only the keys the background store depends on."""
    relevant = {k: v for k, v in cfg.raw.items()
                if k.startswith(("medium.", "source.", "pulse.", "grid.", "obstacle."))}
    if which == 1:
        relevant.pop("source.a2", None)
    else:
        relevant["source.a"] = relevant.pop("source.a2")
    canon = "\n".join(f"{k} = {relevant[k]}" for k in sorted(relevant))
    return hashlib.sha256(canon.encode()).hexdigest()[:24]


def simulate(cfg: ExperimentConfig, out_dir) -> dict:
    """Run the configured forward problem(s); write traces and a manifest."""
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    medium = cfg.medium()
    obstacle = cfg.obstacle()
    grid = cfg.grid()
    files = {}
    directions = [1, 2] if cfg.has_second_direction() else [1]

    for which in directions:
        source = cfg.source(which)
        tag = "" if which == 1 else "_dir2"
        if cfg.mode == "background":
            res = run_simulation(medium, None, source, grid, boundary=cfg.boundary)
            path = out / f"background{tag}.trace"
            fileio.write_trace(path, res.trace)
            files[f"background{tag}"] = path.name
        elif cfg.mode == "total":
            res = run_simulation(medium, obstacle, source, grid, boundary=cfg.boundary)
            path = out / f"total{tag}.trace"
            fileio.write_trace(path, res.trace)
            files[f"total{tag}"] = path.name
        else:  # scattered
            store_path = cache_dir() / f"store_{_store_key(cfg, which)}.npz"
            if store_path.exists():
                store = BackgroundStore.load(store_path)
                bg_trace = fileio.read_trace(store_path.with_suffix(".trace"))
            else:
                bg = run_background_with_store(medium, obstacle, source, grid,
                                               boundary=cfg.boundary)
                store = bg.store
                store.save(store_path)
                fileio.write_trace(store_path.with_suffix(".trace"), bg.trace)
                bg_trace = bg.trace
            sc = run_scattered(medium, obstacle, source, grid, store,
                               boundary=cfg.boundary)
            sc_path = out / f"scattered{tag}.trace"
            bg_path = out / f"background{tag}.trace"
            fileio.write_trace(sc_path, sc.trace)
            fileio.write_trace(bg_path, bg_trace)
            files[f"scattered{tag}"] = sc_path.name
            files[f"background{tag}"] = bg_path.name
            files[f"store{tag}"] = str(store_path)

    manifest = {
        "fingerprint": cfg.fingerprint(),
        "mode": cfg.mode,
        "files": files,
        "grid": {"n": list(grid.n), "h": grid.h, "dt": grid.dt,
                 "n_steps": grid.n_steps},
    }
    fileio.write_json(out / "manifest.json", manifest)
    return manifest


def _load_manifest(cfg: ExperimentConfig, traces_dir) -> dict:
    import json
    path = Path(traces_dir) / "manifest.json"
    if not path.exists():
        raise StalenessError(f"no manifest in {traces_dir}; run simulate first")
    manifest = json.loads(path.read_text())
    if manifest.get("fingerprint") != cfg.fingerprint():
        raise StalenessError("trace files were produced from a different config")
    return manifest


def _threaded_curve(medium, source, trace, taus, variant, threads) -> IndicatorCurve:
    """Indicator curve with per-tau work fanned out; merge order is fixed
    by index, so results are identical for any thread count."""
    taus = _validate_taus(taus)
    logs = np.empty_like(taus)
    signs = np.empty_like(taus)

    def work(i):
        g = laplace_transform_trace(trace, taus[i])
        return _pair_indicator(source, g, trace.weights, taus[i])

    if threads <= 1:
        results = [work(i) for i in range(len(taus))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(len(taus))))
    for i, (lg, sg) in enumerate(results):
        logs[i], signs[i] = lg, sg
    return IndicatorCurve(taus=taus, log_abs=logs, signs=signs, variant=variant,
                          T=trace.T, slowness=medium.slowness)


def indicator_files(cfg: ExperimentConfig, traces_dir, out_dir) -> list[str]:
    """Assemble indicator curve CSVs from simulated traces."""
    manifest = _load_manifest(cfg, traces_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    medium = cfg.medium()
    taus = cfg.taus()
    tdir = Path(traces_dir)
    written = []
    variant_cfg = str(cfg.get("indicator.variant", "single"))
    curves = {}

    directions = [1, 2] if cfg.has_second_direction() else [1]
    for which in directions:
        source = cfg.source(which)
        tag = "" if which == 1 else "_dir2"
        if cfg.mode == "scattered":
            trace = fileio.read_trace(tdir / manifest["files"][f"scattered{tag}"])
            curve = _threaded_curve(medium, source, trace, taus,
                                    "single", cfg.threads)
        elif cfg.mode == "total":
            trace = fileio.read_trace(tdir / manifest["files"][f"total{tag}"])
            curve = indicator_curve_analytic_bg(medium, source, trace, taus)
        else:
            raise StalenessError("indicator needs scattered or total traces")
        curves[which] = curve
        name = f"indicator{tag}.csv"
        fileio.write_indicator_csv(out / name, curve.rows())
        written.append(name)
        if variant_cfg == "analytic_background" and cfg.mode == "scattered":
            # also form the variant against the closed-form background:
            # total = scattered + simulated background, then subtract exact
            bg = fileio.read_trace(tdir / manifest["files"][f"background{tag}"])
            from .fdtd import TraceRecord
            total = TraceRecord(sample_points=trace.sample_points,
                                weights=trace.weights, dt=trace.dt,
                                mode="total_with_obstacle",
                                series=trace.series + bg.series)
            tilde = indicator_curve_analytic_bg(medium, source, total, taus)
            name = f"indicator_analytic{tag}.csv"
            fileio.write_indicator_csv(out / name, tilde.rows())
            written.append(name)

    if len(directions) == 2:
        combined = combine_indicators(curves[1], curves[2],
                                      cfg.source(1).a, cfg.source(2).a)
        name = "indicator_combined.csv"
        fileio.write_indicator_csv(out / name, combined.rows())
        written.append(name)

    fileio.write_json(out / "indicator_manifest.json", {
        "fingerprint": cfg.fingerprint(),
        "files": written,
    })
    return written


def curve_from_csv(path, cfg: ExperimentConfig) -> IndicatorCurve:
    rows = fileio.read_indicator_csv(path)
    taus = np.array([r["tau"] for r in rows])
    return IndicatorCurve(
        taus=taus,
        log_abs=np.array([r["log_abs_I"] for r in rows]),
        signs=np.array([float(r["sign"]) for r in rows]),
        variant=rows[0]["variant"] if rows else "unknown",
        T=float(cfg.require("source.T")),
        slowness=cfg.medium().slowness,
    )
