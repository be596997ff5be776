"""Binary trace/snapshot files plus CSV/JSON writers.

All binary formats are little-endian with an 8-byte ascii magic.  Trace
files ("EMTRACE1") carry the sampled E time series; the quadrature points
and weights travel in a JSON sidecar manifest next to the trace.  Snapshot
files ("EMSNAP1") dump all six staggered field components at one instant.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .fdtd import E_COMPONENTS, H_COMPONENTS, FieldState, TraceRecord

TRACE_MAGIC = b"EMTRACE1"
SNAP_MAGIC = b"EMSNAP1\x00"
_MODE_BYTES = 24


class FileFormatError(ValueError):
    pass


def write_trace(path, trace: TraceRecord) -> None:
    series = np.ascontiguousarray(trace.series, dtype="<f8")
    n_steps_plus, n_points, _ = series.shape
    mode = trace.mode.encode("ascii")[:_MODE_BYTES].ljust(_MODE_BYTES, b"\x00")
    with open(path, "wb") as fh:
        fh.write(TRACE_MAGIC)
        fh.write(struct.pack("<qqd", n_points, n_steps_plus - 1, trace.dt))
        fh.write(mode)
        fh.write(series.tobytes())
    sidecar = Path(path).with_suffix(Path(path).suffix + ".points.json")
    sidecar.write_text(json.dumps({
        "sample_points": trace.sample_points.tolist(),
        "weights": trace.weights.tolist(),
    }))


def read_trace(path) -> TraceRecord:
    with open(path, "rb") as fh:
        if fh.read(8) != TRACE_MAGIC:
            raise FileFormatError(f"{path}: not a trace file")
        n_points, n_steps, dt = struct.unpack("<qqd", fh.read(24))
        mode = fh.read(_MODE_BYTES).rstrip(b"\x00").decode("ascii")
        data = np.frombuffer(fh.read(), dtype="<f8")
    expect = (n_steps + 1) * n_points * 3
    if data.size != expect:
        raise FileFormatError(f"{path}: truncated payload ({data.size} of {expect} values)")
    series = data.reshape(n_steps + 1, n_points, 3).astype(float)
    sidecar = Path(path).with_suffix(Path(path).suffix + ".points.json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        pts = np.asarray(meta["sample_points"])
        w = np.asarray(meta["weights"])
    else:
        pts = np.full((n_points, 3), np.nan)
        w = np.full(n_points, np.nan)
    return TraceRecord(sample_points=pts, weights=w, dt=dt, mode=mode, series=series)


def write_snapshot(path, state: FieldState) -> None:
    grid = state.grid
    with open(path, "wb") as fh:
        fh.write(SNAP_MAGIC)
        fh.write(struct.pack("<qqqdd", *grid.n, grid.h, state.t))
        for comp in E_COMPONENTS + H_COMPONENTS:
            arr = state.fields[comp]
            fh.write(struct.pack("<qqq", *arr.shape))
            # x-fastest order
            fh.write(np.asarray(arr, dtype="<f8").ravel(order="F").tobytes())


def read_snapshot(path):
    fields = {}
    with open(path, "rb") as fh:
        if fh.read(8) != SNAP_MAGIC:
            raise FileFormatError(f"{path}: not a snapshot file")
        nx, ny, nz, h, t = struct.unpack("<qqqdd", fh.read(40))
        for comp in E_COMPONENTS + H_COMPONENTS:
            shape = struct.unpack("<qqq", fh.read(24))
            count = shape[0] * shape[1] * shape[2]
            buf = np.frombuffer(fh.read(8 * count), dtype="<f8")
            fields[comp] = buf.reshape(shape, order="F").astype(float)
    return {"n": (nx, ny, nz), "h": h, "t": t, "fields": fields}


def write_indicator_csv(path, rows) -> None:
    """rows: iterable of dicts with tau, sign, log_abs_I, I_over_exp, variant."""
    with open(path, "w") as fh:
        fh.write("tau,sign,log_abs_I,I_over_exp,variant\n")
        for r in rows:
            over = r.get("I_over_exp")
            over_s = "" if over is None or not np.isfinite(over) else repr(float(over))
            fh.write(f"{float(r['tau'])!r},{int(r['sign'])},{float(r['log_abs_I'])!r},"
                     f"{over_s},{r['variant']}\n")


def read_indicator_csv(path):
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["tau", "sign", "log_abs_I"]:
            raise FileFormatError(f"{path}: unexpected indicator columns {header}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            rows.append({
                "tau": float(parts[0]),
                "sign": int(parts[1]),
                "log_abs_I": float(parts[2]),
                "I_over_exp": float(parts[3]) if parts[3] else None,
                "variant": parts[4],
            })
    return rows


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_coerce))


def _coerce(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


SCHEMA_TEXT = """\
# Output file schemas

## trace binary (magic EMTRACE1)
little-endian: magic[8] | n_points int64 | n_steps int64 | dt float64 |
mode char[24] (NUL padded) | float64 data, row-major (step, point, component),
(n_steps+1) * n_points * 3 values.  A `<name>.points.json` sidecar holds the
quadrature sample_points (n_points x 3) and weights (sum = source ball volume).

## snapshot binary (magic EMSNAP1)
little-endian: magic[8] | nx ny nz int64 | h float64 | t float64 | then for
each component Ex,Ey,Ez,Hx,Hy,Hz: its dims (3 x int64) and float64 data in
x-fastest order.

## indicator CSV
columns: tau (float), sign (-1/0/+1), log_abs_I (natural log of |I|),
I_over_exp (e^{tau*T}-scaled indicator where representable, else empty),
variant (single | analytic_background | two_direction_sum | ...).

## distance estimate JSON
{dist_est, slope, intercept, window: [tau_lo, tau_hi], residual,
 noise_floor_tau} plus diagnostics; slope is d(log|I|)/d(tau) on the clean
window, dist_est = -slope / (2 * sqrt(mu0*eps0)).

## scaling CSV
columns: tau, log_value, quantity; JSON summary holds per-quantity fits
{rate, power, const}.
"""


def write_schema_doc(path) -> None:
    Path(path).write_text(SCHEMA_TEXT)
