"""Shared fixtures and a small on-disk cache for expensive runs.

The acceptance scenarios involve multi-minute FDTD runs on ~200^3 grids.
Their traces are tiny (a few hundred KB), so each heavy run is executed
once and its trace cached under tests/_cache; delete that directory to
force a full recompute.
"""

from pathlib import Path

import numpy as np
import pytest

from emenclosure.fdtd import TraceRecord

CACHE = Path(__file__).parent / "_cache"


def trace_to_arrays(trace: TraceRecord) -> dict:
    return {
        "pts": trace.sample_points,
        "w": trace.weights,
        "dt": np.array(trace.dt),
        "mode": np.array(trace.mode),
        "series": trace.series,
    }


def trace_from_arrays(data) -> TraceRecord:
    return TraceRecord(
        sample_points=np.asarray(data["pts"]),
        weights=np.asarray(data["w"]),
        dt=float(data["dt"]),
        mode=str(data["mode"]),
        series=np.asarray(data["series"]),
    )


def cached_arrays(name: str, builder) -> dict:
    """Load arrays from tests/_cache/<name>.npz, building them on a miss."""
    path = CACHE / f"{name}.npz"
    if path.exists():
        with np.load(path, allow_pickle=False) as z:
            return {k: z[k] for k in z.files}
    data = builder()
    CACHE.mkdir(exist_ok=True)
    np.savez_compressed(path, **data)
    return data


def cached_trace(name: str, builder) -> TraceRecord:
    return trace_from_arrays(cached_arrays(name, lambda: trace_to_arrays(builder())))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260823)
