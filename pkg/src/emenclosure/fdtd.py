"""Staggered-grid leapfrog solver for the lossy Maxwell curl system.

E components live on cell edges, H components on cell faces.  One step
advances H by a half-step curl update, then E by a conductive update with
the sigma term treated semi-implicitly (exact for the homogeneous-decay
reduction, unconditionally stable in sigma).

Domain truncation is by causality by default: the box is sized so that no
boundary reflection can reach a receiver within the record window, which
keeps finite-record Laplace data exact.  A first-order absorbing boundary
(`boundary="mur"`) is available to shrink domains when the data are only
used at large tau, where late reflections are exponentially weighted away.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .geometry import GeometryError, Shape, Sphere
from .materials import BackgroundMedium, ObstacleSpec
from .source import SourceSpec, pulse_eval


class ConfigurationError(ValueError):
    pass


class InstabilityError(RuntimeError):
    def __init__(self, step_index: int):
        super().__init__(f"NaN detected in field arrays at step {step_index}")
        self.step_index = step_index


class DependencyError(RuntimeError):
    """A required precomputed input (background volume store) is missing."""


E_COMPONENTS = ("Ex", "Ey", "Ez")
H_COMPONENTS = ("Hx", "Hy", "Hz")

# staggering offsets in units of h for each component (x, y, z)
_OFFSETS = {
    "Ex": (0.5, 0.0, 0.0),
    "Ey": (0.0, 0.5, 0.0),
    "Ez": (0.0, 0.0, 0.5),
    "Hx": (0.0, 0.5, 0.5),
    "Hy": (0.5, 0.0, 0.5),
    "Hz": (0.5, 0.5, 0.0),
}


@dataclass(frozen=True)
class GridSpec:
    """Uniform staggered grid over an axis-aligned box."""

    lo: tuple[float, float, float]
    n: tuple[int, int, int]      # cells per axis
    h: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if self.h <= 0 or self.dt <= 0 or self.n_steps < 1:
            raise ConfigurationError("h, dt must be positive and n_steps >= 1")

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.lo) + np.asarray(self.n) * self.h

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    def validate_cfl(self, c_max: float, cfl: float = 1.0) -> None:
        limit = cfl * self.h / (np.sqrt(3.0) * c_max)
        if self.dt > limit * (1 + 1e-12):
            raise ConfigurationError(
                f"dt={self.dt:.4g} violates the stability bound {limit:.4g}")

    def component_shape(self, comp: str) -> tuple[int, int, int]:
        nx, ny, nz = self.n
        half = _OFFSETS[comp]
        return tuple((nx, ny, nz)[ax] + (0 if half[ax] == 0.5 else 1) for ax in range(3))

    def component_axes(self, comp: str):
        """Coordinate vectors (xs, ys, zs) of the component's sites."""
        out = []
        shape = self.component_shape(comp)
        for ax in range(3):
            out.append(self.lo[ax] + (np.arange(shape[ax]) + _OFFSETS[comp][ax]) * self.h)
        return out

    def cell_centers_axes(self):
        return [self.lo[ax] + (np.arange(self.n[ax]) + 0.5) * self.h for ax in range(3)]


def build_grid(bounds, h: float, T: float, c_max: float, cfl: float = 0.5) -> GridSpec:
    """Snap a requested box to whole cells and pick dt from the CFL bound."""
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    n = tuple(int(np.ceil((hi[ax] - lo[ax]) / h - 1e-9)) for ax in range(3))
    dt = cfl * h / (np.sqrt(3.0) * c_max)
    n_steps = int(np.ceil(T / dt - 1e-9))
    return GridSpec(lo=tuple(lo), n=n, h=h, dt=dt, n_steps=n_steps)


# ---------------------------------------------------------------------------
# occupancy / volume fractions
# ---------------------------------------------------------------------------


def _occupancy(shape: Shape, xs, ys, zs, h: float, nsub: int = 8):
    """Fraction of the h^3 cell around each site covered by the shape.

    Returns (index_arrays, fractions) for sites with nonzero fraction; the
    search is restricted to the shape's bounding box.  Interface cells are
    resolved by nsub^3 subsampling (reduces staircasing bias).
    """
    lo, hi = shape.bounding_box()
    sel = []
    for ax, axis in enumerate((xs, ys, zs)):
        idx = np.nonzero((axis >= lo[ax] - h) & (axis <= hi[ax] + h))[0]
        if idx.size == 0:
            return (np.empty(0, int),) * 3, np.empty(0)
        sel.append(idx)
    X, Y, Z = np.meshgrid(xs[sel[0]], ys[sel[1]], zs[sel[2]], indexing="ij")
    pts = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
    sd = np.asarray(shape.signed_distance(pts))
    frac = (sd < 0).astype(float)
    band = np.abs(sd) <= 0.9 * h  # half cube diagonal ~ 0.866 h
    if np.any(band) and nsub > 1:
        offs1 = (np.arange(nsub) + 0.5) / nsub * h - h / 2.0
        ox, oy, oz = np.meshgrid(offs1, offs1, offs1, indexing="ij")
        offs = np.stack([ox, oy, oz], axis=-1).reshape(-1, 3)
        sub = pts[band][:, None, :] + offs[None, :, :]
        inside = shape.signed_distance(sub.reshape(-1, 3)).reshape(len(sub), -1) < 0
        frac[band] = inside.mean(axis=1)
    keep = frac > 0
    ii, jj, kk = np.unravel_index(np.nonzero(keep)[0], X.shape)
    return (sel[0][ii], sel[1][jj], sel[2][kk]), frac[keep]


def _site_points(grid: GridSpec, comp: str, idx) -> np.ndarray:
    xs, ys, zs = grid.component_axes(comp)
    return np.column_stack([xs[idx[0]], ys[idx[1]], zs[idx[2]]])


# ---------------------------------------------------------------------------
# material coefficients
# ---------------------------------------------------------------------------


@dataclass
class _Coefficients:
    """Per-component update coefficients; scalars for homogeneous media."""

    scalar: bool
    ca: dict
    cb: dict
    ch: dict
    eps: dict      # for energy diagnostics
    mu: dict
    contrast_idx_e: dict = field(default_factory=dict)   # sites with eps/sigma contrast
    contrast_eps: dict = field(default_factory=dict)     # eps - eps0 there
    contrast_sig: dict = field(default_factory=dict)     # sigma - sigma0 there
    contrast_idx_h: dict = field(default_factory=dict)
    contrast_mu: dict = field(default_factory=dict)


def _background_coeffs(medium: BackgroundMedium, grid: GridSpec) -> _Coefficients:
    dt = grid.dt
    loss = medium.sigma0 * dt / (2.0 * medium.eps0)
    ca = (1.0 - loss) / (1.0 + loss)
    cb = dt / medium.eps0 / (1.0 + loss)
    ch = dt / medium.mu0
    return _Coefficients(
        scalar=True,
        ca={c: ca for c in E_COMPONENTS},
        cb={c: cb for c in E_COMPONENTS},
        ch={c: ch for c in H_COMPONENTS},
        eps={c: medium.eps0 for c in E_COMPONENTS},
        mu={c: medium.mu0 for c in H_COMPONENTS},
    )


def build_coefficients(medium: BackgroundMedium, obstacle: ObstacleSpec | None,
                       grid: GridSpec, interface_averaging: bool = True) -> _Coefficients:
    if obstacle is None:
        return _background_coeffs(medium, grid)
    dt = grid.dt
    nsub = 8 if interface_averaging else 1
    out = _Coefficients(scalar=False, ca={}, cb={}, ch={}, eps={}, mu={})
    for comp in E_COMPONENTS:
        shape_c = grid.component_shape(comp)
        eps = np.full(shape_c, medium.eps0)
        sig = np.full(shape_c, medium.sigma0)
        idx, frac = _occupancy(obstacle.shape, *grid.component_axes(comp), grid.h, nsub)
        if idx[0].size:
            pts = _site_points(grid, comp, idx)
            e_loc = obstacle.eps_r(pts) - 1.0 if callable(obstacle.e_pert) else obstacle.e_pert
            h_loc = obstacle.sigma_excess(pts) if callable(obstacle.h_pert) else obstacle.h_pert
            eps[idx] += medium.eps0 * e_loc * frac
            sig[idx] += h_loc * frac
        if np.any(eps <= 0):
            raise ConfigurationError("permittivity must stay positive on the grid")
        loss = sig * dt / (2.0 * eps)
        out.ca[comp] = (1.0 - loss) / (1.0 + loss)
        out.cb[comp] = dt / eps / (1.0 + loss)
        out.eps[comp] = eps
        out.contrast_idx_e[comp] = idx
        out.contrast_eps[comp] = eps[idx] - medium.eps0
        out.contrast_sig[comp] = sig[idx] - medium.sigma0
    for comp in H_COMPONENTS:
        shape_c = grid.component_shape(comp)
        mu = np.full(shape_c, medium.mu0)
        idx, frac = _occupancy(obstacle.shape, *grid.component_axes(comp), grid.h, nsub)
        if idx[0].size:
            pts = _site_points(grid, comp, idx)
            m_loc = obstacle.mu_r(pts) - 1.0 if callable(obstacle.m_pert) else obstacle.m_pert
            mu[idx] += medium.mu0 * m_loc * frac
        if np.any(mu <= 0):
            raise ConfigurationError("permeability must stay positive on the grid")
        out.ch[comp] = dt / mu
        out.mu[comp] = mu
        out.contrast_idx_h[comp] = idx
        out.contrast_mu[comp] = mu[idx] - medium.mu0
    return out


def grid_c_max(medium: BackgroundMedium, obstacle: ObstacleSpec | None) -> float:
    """Fastest wave speed on the grid (sets the CFL bound)."""
    if obstacle is None or obstacle.is_piecewise_constant():
        er = 1.0 if obstacle is None else min(1.0, 1.0 + obstacle.e_pert)
        mr = 1.0 if obstacle is None else min(1.0, 1.0 + obstacle.m_pert)
        return 1.0 / np.sqrt(medium.eps0 * er * medium.mu0 * mr)
    # varying fields: sample
    from .materials import _interior_samples
    x = _interior_samples(obstacle.shape, 2000)
    er = min(1.0, float(np.min(obstacle.eps_r(x))))
    mr = min(1.0, float(np.min(obstacle.mu_r(x))))
    return 1.0 / np.sqrt(medium.eps0 * er * medium.mu0 * mr)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


@dataclass
class TraceRecord:
    """Time series of cell-centered E at quadrature points inside B."""

    sample_points: np.ndarray   # (n_points, 3)
    weights: np.ndarray         # (n_points,), sums to vol(B)
    dt: float
    mode: str                   # total_with_obstacle | background | scattered
    series: np.ndarray          # (n_steps + 1, n_points, 3)

    @property
    def n_steps(self) -> int:
        return self.series.shape[0] - 1

    @property
    def T(self) -> float:
        return self.n_steps * self.dt


def _trace_plan(grid: GridSpec, source: SourceSpec):
    """Cells whose centers lie strictly inside B, with ball-overlap weights."""
    ball = Sphere(tuple(source.p), source.eta)
    cx, cy, cz = grid.cell_centers_axes()
    X, Y, Z = np.meshgrid(cx, cy, cz, indexing="ij")
    centers = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
    sd = ball.signed_distance(centers)
    inside = np.nonzero(sd < 0)[0]
    if inside.size == 0:
        raise ConfigurationError(
            "no cell centers inside the source ball; refine the grid (need eta >~ h)")
    pts = centers[inside]
    # overlap fraction of each selected cell
    (ii, jj, kk), frac = _occupancy(ball, cx, cy, cz, grid.h)
    full = np.zeros(tuple(grid.n))
    full[ii, jj, kk] = frac
    w = full.reshape(-1)[inside] * grid.h**3
    w *= source.ball_volume / w.sum()
    idx = np.unravel_index(inside, tuple(grid.n))
    return pts, w, idx


def _center_gather_indices(grid: GridSpec, cell_idx):
    """Flat indices for averaging each E component to given cell centers."""
    i, j, k = cell_idx
    plans = {}
    for comp, quads in {
        "Ex": [(i, j, k), (i, j + 1, k), (i, j, k + 1), (i, j + 1, k + 1)],
        "Ey": [(i, j, k), (i + 1, j, k), (i, j, k + 1), (i + 1, j, k + 1)],
        "Ez": [(i, j, k), (i + 1, j, k), (i, j + 1, k), (i + 1, j + 1, k)],
    }.items():
        shape_c = grid.component_shape(comp)
        plans[comp] = [np.ravel_multi_index(q, shape_c) for q in quads]
    return plans


def _interp_plan(grid: GridSpec, comp: str, points: np.ndarray):
    """Trilinear interpolation stencil (flat indices, weights) per point."""
    xs, ys, zs = grid.component_axes(comp)
    shape_c = grid.component_shape(comp)
    pts = np.atleast_2d(points)
    idx0 = []
    fr = []
    for ax, axis in enumerate((xs, ys, zs)):
        t = (pts[:, ax] - axis[0]) / grid.h
        i0 = np.clip(np.floor(t).astype(int), 0, len(axis) - 2)
        idx0.append(i0)
        fr.append(t - i0)
    flat = np.empty((len(pts), 8), dtype=np.int64)
    wts = np.empty((len(pts), 8))
    m = 0
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                flat[:, m] = np.ravel_multi_index(
                    (idx0[0] + dx, idx0[1] + dy, idx0[2] + dz), shape_c)
                wts[:, m] = (
                    (fr[0] if dx else 1 - fr[0])
                    * (fr[1] if dy else 1 - fr[1])
                    * (fr[2] if dz else 1 - fr[2])
                )
                m += 1
    return flat, wts


# ---------------------------------------------------------------------------
# boundaries
# ---------------------------------------------------------------------------


class _MurBoundary:
    """First-order absorbing update for tangential E on the six faces."""

    def __init__(self, grid: GridSpec, c0: float):
        self.coef = (c0 * grid.dt - grid.h) / (c0 * grid.dt + grid.h)
        self._prev: dict = {}

    @staticmethod
    def _faces():
        # (component, axis normal to the face, side)
        for comp, tang_axes in (("Ex", (1, 2)), ("Ey", (0, 2)), ("Ez", (0, 1))):
            for ax in tang_axes:
                for side in (0, -1):
                    yield comp, ax, side

    @staticmethod
    def _plane(arr, ax, pos):
        sl = [slice(None)] * 3
        sl[ax] = pos
        return arr[tuple(sl)]

    def capture(self, fields: dict) -> None:
        for comp, ax, side in self._faces():
            arr = fields[comp]
            inner = 1 if side == 0 else arr.shape[ax] - 2
            self._prev[(comp, ax, side)] = (
                self._plane(arr, ax, side).copy(),
                self._plane(arr, ax, inner).copy(),
            )

    def apply(self, fields: dict) -> None:
        for comp, ax, side in self._faces():
            arr = fields[comp]
            inner = 1 if side == 0 else arr.shape[ax] - 2
            prev_b, prev_i = self._prev[(comp, ax, side)]
            new_i = self._plane(arr, ax, inner)
            sl = [slice(None)] * 3
            sl[ax] = side
            arr[tuple(sl)] = prev_i + self.coef * (new_i - prev_b)


def causality_slack(grid: GridSpec, source: SourceSpec,
                    shape: Shape | None, T: float, speed: float) -> float:
    """Worst-case (reflection path) - (speed * T) over the six faces.

    Negative slack means some boundary reflection can reach a receiver
    (the trace ball, or the obstacle region holding stored background
    fields) within the record window.  Paths are timed at the background
    speed; an inclusion faster than the background shaves at most
    diam(D) * (1 - c0/c_in) per crossing, which lands in the last instants
    of the record where the exponential data weighting suppresses it.
    """
    p = np.asarray(source.p)
    lo = np.asarray(grid.lo)
    hi = grid.hi
    if shape is not None:
        slo, shi = shape.bounding_box()
    worst = np.inf
    for ax in range(3):
        for plane, sgn in ((lo[ax], 1.0), (hi[ax], -1.0)):
            d_b = sgn * (p[ax] - plane) - source.eta
            if shape is None:
                d_o = d_b
            else:
                d_o = min(sgn * (slo[ax] - plane), sgn * (shi[ax] - plane))
            worst = min(worst, d_b + min(d_b, d_o))
    return worst - speed * T


# ---------------------------------------------------------------------------
# background volume store (for the scattered-field formulation)
# ---------------------------------------------------------------------------


@dataclass
class BackgroundStore:
    """Background E/H time series at obstacle-contrast sites."""

    grid_key: tuple
    dt: float
    e_idx: dict       # comp -> flat site indices
    e_series: dict    # comp -> (n_steps + 1, m) array, E0 at integer steps
    h_idx: dict
    h_series: dict    # comp -> (n_steps, m), H0 at half steps

    def save(self, path) -> None:
        payload = {"grid_key": np.asarray(self.grid_key, dtype=object), "dt": self.dt}
        for comp in E_COMPONENTS:
            payload[f"eidx_{comp}"] = self.e_idx[comp]
            payload[f"eser_{comp}"] = self.e_series[comp]
        for comp in H_COMPONENTS:
            payload[f"hidx_{comp}"] = self.h_idx[comp]
            payload[f"hser_{comp}"] = self.h_series[comp]
        np.savez_compressed(path, **payload, allow_pickle=True)

    @classmethod
    def load(cls, path) -> "BackgroundStore":
        z = np.load(path, allow_pickle=True)
        return cls(
            grid_key=tuple(z["grid_key"]),
            dt=float(z["dt"]),
            e_idx={c: z[f"eidx_{c}"] for c in E_COMPONENTS},
            e_series={c: z[f"eser_{c}"] for c in E_COMPONENTS},
            h_idx={c: z[f"hidx_{c}"] for c in H_COMPONENTS},
            h_series={c: z[f"hser_{c}"] for c in H_COMPONENTS},
        )


def _grid_key(grid: GridSpec) -> tuple:
    return (*grid.lo, *grid.n, grid.h, grid.dt, grid.n_steps)


# ---------------------------------------------------------------------------
# the simulation driver
# ---------------------------------------------------------------------------


@dataclass
class FieldState:
    """Mutable solver state; arrays are updated in place."""

    fields: dict              # component name -> ndarray
    coeffs: _Coefficients
    grid: GridSpec
    t: float = 0.0
    step_index: int = 0


class YeeSimulation:
    def __init__(self, medium: BackgroundMedium, grid: GridSpec, *,
                 obstacle: ObstacleSpec | None = None,
                 source: SourceSpec | None = None,
                 boundary: str = "pec",
                 interface_averaging: bool = True,
                 cfl_limit: float = 1.0):
        grid.validate_cfl(grid_c_max(medium, obstacle), cfl_limit)
        self.medium = medium
        self.grid = grid
        self.obstacle = obstacle
        self.source = source
        coeffs = build_coefficients(medium, obstacle, grid, interface_averaging)
        fields = {c: np.zeros(grid.component_shape(c)) for c in E_COMPONENTS + H_COMPONENTS}
        self.state = FieldState(fields=fields, coeffs=coeffs, grid=grid)
        self.boundary = boundary
        self._mur = _MurBoundary(grid, medium.wave_speed) if boundary == "mur" else None
        self._source_plan = None
        if source is not None:
            ball = Sphere(tuple(source.p), source.eta)
            a = np.asarray(source.a, dtype=float)
            plan = {}
            for ci, comp in enumerate(E_COMPONENTS):
                if a[ci] == 0.0:
                    continue
                idx, frac = _occupancy(ball, *grid.component_axes(comp), grid.h)
                flat = np.ravel_multi_index(idx, grid.component_shape(comp))
                plan[comp] = (flat, frac * a[ci])
            self._source_plan = plan
        # extra injections (used by the scattered-field formulation)
        self.e_injector = None   # callable(step_index) -> {comp: (flat_idx, J_values)}
        self.h_injector = None   # callable(step_index) -> {comp: (flat_idx, dH_values)}

    # -- single step --------------------------------------------------------

    def step(self) -> None:
        st = self.state
        f = st.fields
        co = st.coeffs
        inv_h = 1.0 / self.grid.h
        n = st.step_index

        if co.scalar:
            K.update_h_scalar(f["Hx"], f["Hy"], f["Hz"], f["Ex"], f["Ey"], f["Ez"],
                              co.ch["Hx"], inv_h)
        else:
            K.update_h_array(f["Hx"], f["Hy"], f["Hz"], f["Ex"], f["Ey"], f["Ez"],
                             co.ch["Hx"], co.ch["Hy"], co.ch["Hz"], inv_h)
        if self.h_injector is not None:
            for comp, (flat, vals) in self.h_injector(n).items():
                f[comp].reshape(-1)[flat] += vals

        if self._mur is not None:
            self._mur.capture(f)
        if co.scalar:
            K.update_e_scalar(f["Ex"], f["Ey"], f["Ez"], f["Hx"], f["Hy"], f["Hz"],
                              co.ca["Ex"], co.cb["Ex"], inv_h)
        else:
            K.update_e_array(f["Ex"], f["Ey"], f["Ez"], f["Hx"], f["Hy"], f["Hz"],
                             co.ca["Ex"], co.cb["Ex"], co.ca["Ey"], co.cb["Ey"],
                             co.ca["Ez"], co.cb["Ez"], inv_h)

        t_half = st.t + 0.5 * self.grid.dt
        if self._source_plan is not None:
            amp = float(pulse_eval(self.source.pulse, t_half))
            if amp != 0.0:
                for comp, (flat, weights) in self._source_plan.items():
                    cb = st.coeffs.cb[comp]
                    cb_vals = cb if np.isscalar(cb) else cb.reshape(-1)[flat]
                    f[comp].reshape(-1)[flat] += cb_vals * amp * weights
        if self.e_injector is not None:
            for comp, (flat, vals) in self.e_injector(n).items():
                cb = st.coeffs.cb[comp]
                cb_vals = cb if np.isscalar(cb) else cb.reshape(-1)[flat]
                f[comp].reshape(-1)[flat] += cb_vals * vals

        if self._mur is not None:
            self._mur.apply(f)

        st.t += self.grid.dt
        st.step_index += 1
        if st.step_index % 25 == 0 and not np.isfinite(f["Ex"]).all():
            raise InstabilityError(st.step_index)

    # -- full run ------------------------------------------------------------

    def run(self, *, mode: str, probe_points=None, store_volume: bool = False,
            energy_monitor: bool = False):
        grid = self.grid
        st = self.state
        trace = None
        if self.source is not None:
            pts, w, cell_idx = _trace_plan(grid, self.source)
            gather = _center_gather_indices(grid, cell_idx)
            series = np.zeros((grid.n_steps + 1, len(pts), 3))
            trace = TraceRecord(sample_points=pts, weights=w, dt=grid.dt,
                                mode=mode, series=series)
        probes = None
        if probe_points is not None:
            probe_points = np.atleast_2d(np.asarray(probe_points, dtype=float))
            plans = {c: _interp_plan(grid, c, probe_points) for c in E_COMPONENTS}
            probes = np.zeros((grid.n_steps + 1, len(probe_points), 3))

        store = None
        if store_volume:
            if self.obstacle is not None:
                raise ConfigurationError("volume store is recorded on background runs")
            store = self._prepare_store()

        energies = [] if energy_monitor else None
        if energy_monitor:
            h_prev = {c: st.fields[c].copy() for c in H_COMPONENTS}
            e_prev = {c: st.fields[c].copy() for c in E_COMPONENTS}

        self._record(trace, gather if trace else None, probes,
                     plans if probes is not None else None, 0)
        if store is not None:
            self._record_store(store, 0, e_only=True)
        for n in range(grid.n_steps):
            self.step()
            self._record(trace, gather if trace else None, probes,
                         plans if probes is not None else None, n + 1)
            if store is not None:
                self._record_store(store, n + 1)
            if energy_monitor:
                energies.append(leapfrog_energy(self.state, e_prev, h_prev))
                for c in H_COMPONENTS:
                    np.copyto(h_prev[c], st.fields[c])
                for c in E_COMPONENTS:
                    np.copyto(e_prev[c], st.fields[c])
        if not np.isfinite(st.fields["Ex"]).all():
            raise InstabilityError(st.step_index)
        return RunResult(trace=trace, probe_points=probe_points, probe_series=probes,
                         store=store, energies=None if energies is None else np.array(energies))

    def _record(self, trace, gather, probes, plans, n):
        f = self.state.fields
        if trace is not None:
            for ci, comp in enumerate(E_COMPONENTS):
                flat = f[comp].reshape(-1)
                q = gather[comp]
                trace.series[n, :, ci] = 0.25 * (flat[q[0]] + flat[q[1]] + flat[q[2]] + flat[q[3]])
        if probes is not None:
            for ci, comp in enumerate(E_COMPONENTS):
                flat_idx, wts = plans[comp]
                probes[n, :, ci] = np.sum(f[comp].reshape(-1)[flat_idx] * wts, axis=1)

    def _prepare_store(self) -> BackgroundStore:
        raise ConfigurationError(
            "store_volume needs a target obstacle; use run_background_with_store")

    def _record_store(self, store, n, e_only=False):
        f = self.state.fields
        for comp in E_COMPONENTS:
            store.e_series[comp][n] = f[comp].reshape(-1)[store.e_idx[comp]]
        if not e_only:
            for comp in H_COMPONENTS:
                store.h_series[comp][n - 1] = f[comp].reshape(-1)[store.h_idx[comp]]


@dataclass
class RunResult:
    trace: TraceRecord | None
    probe_points: np.ndarray | None
    probe_series: np.ndarray | None
    store: BackgroundStore | None
    energies: np.ndarray | None


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------


def run_simulation(medium: BackgroundMedium, obstacle: ObstacleSpec | None,
                   source: SourceSpec, grid: GridSpec, *,
                   boundary: str = "pec", interface_averaging: bool = True,
                   probe_points=None, energy_monitor: bool = False) -> RunResult:
    """Total-field (or background, if obstacle is None) forward run."""
    _check_geometry(source, obstacle)
    if boundary == "pec":
        shape = None if obstacle is None else obstacle.shape
        if causality_slack(grid, source, shape, grid.T, medium.wave_speed) < 0:
            raise ConfigurationError(
                "box too small: a boundary reflection returns within the record "
                "window; enlarge the bounds or use boundary='mur'")
    sim = YeeSimulation(medium, grid, obstacle=obstacle, source=source,
                        boundary=boundary, interface_averaging=interface_averaging)
    mode = "background" if obstacle is None else "total_with_obstacle"
    return sim.run(mode=mode, probe_points=probe_points, energy_monitor=energy_monitor)


def run_background_with_store(medium: BackgroundMedium, target: ObstacleSpec,
                              source: SourceSpec, grid: GridSpec, *,
                              boundary: str = "pec", interface_averaging: bool = True,
                              probe_points=None) -> RunResult:
    """Background run that also records E0/H0 at the target's contrast sites."""
    _check_geometry(source, target)
    if boundary == "pec":
        if causality_slack(grid, source, target.shape, grid.T, medium.wave_speed) < 0:
            raise ConfigurationError(
                "box too small for a clean background store; enlarge the bounds")
    sim = YeeSimulation(medium, grid, obstacle=None, source=source, boundary=boundary)
    # contrast sites come from the target obstacle's coefficients
    co = build_coefficients(medium, target, grid, interface_averaging)
    e_idx, h_idx, e_series, h_series = {}, {}, {}, {}
    for comp in E_COMPONENTS:
        flat = np.ravel_multi_index(co.contrast_idx_e[comp], grid.component_shape(comp))
        e_idx[comp] = flat
        e_series[comp] = np.zeros((grid.n_steps + 1, flat.size))
    for comp in H_COMPONENTS:
        keep = co.contrast_mu[comp] != 0.0
        flat = np.ravel_multi_index(co.contrast_idx_h[comp], grid.component_shape(comp))[keep]
        h_idx[comp] = flat
        h_series[comp] = np.zeros((grid.n_steps, flat.size))
    store = BackgroundStore(grid_key=_grid_key(grid), dt=grid.dt,
                            e_idx=e_idx, e_series=e_series,
                            h_idx=h_idx, h_series=h_series)
    sim._prepare_store = lambda: store
    return sim.run(mode="background", store_volume=True, probe_points=probe_points)


def run_scattered(medium: BackgroundMedium, obstacle: ObstacleSpec,
                  source: SourceSpec, grid: GridSpec,
                  store: BackgroundStore, *,
                  boundary: str = "pec", interface_averaging: bool = True,
                  probe_points=None) -> RunResult:
    """Evolve E - E0 directly, driven by equivalent volume sources in D.

    Avoids the catastrophic cancellation of subtracting two near-equal
    total fields; the result plus the background trace reproduces the
    total-field run to discretization accuracy.
    """
    _check_geometry(source, obstacle)
    if store is None:
        raise DependencyError("scattered run requires a background volume store")
    if tuple(store.grid_key) != _grid_key(grid):
        raise DependencyError("background store was computed on a different grid")
    if boundary == "pec":
        if causality_slack(grid, source, obstacle.shape, grid.T,
                           medium.wave_speed) < 0:
            raise ConfigurationError(
                "box too small: a boundary reflection returns within the record window")

    sim = YeeSimulation(medium, grid, obstacle=obstacle, source=None,
                        boundary=boundary, interface_averaging=interface_averaging)
    co = sim.state.coeffs
    dt = grid.dt
    e_flat = {c: np.ravel_multi_index(co.contrast_idx_e[c], grid.component_shape(c))
              for c in E_COMPONENTS}
    # order of store sites must match coefficient contrast sites
    for c in E_COMPONENTS:
        if not np.array_equal(e_flat[c], store.e_idx[c]):
            raise DependencyError("store site layout does not match the obstacle")

    def e_injector(n):
        out = {}
        for ci, comp in enumerate(E_COMPONENTS):
            d_eps = co.contrast_eps[comp]
            d_sig = co.contrast_sig[comp]
            if d_eps.size == 0:
                continue
            e0_now = store.e_series[comp][n]
            e0_next = store.e_series[comp][n + 1]
            j_eq = -d_eps * (e0_next - e0_now) / dt - d_sig * 0.5 * (e0_next + e0_now)
            out[comp] = (e_flat[comp], j_eq)
        return out

    mu_tot = {}
    for comp in H_COMPONENTS:
        keep = co.contrast_mu[comp] != 0.0
        mu_arr = co.mu[comp]
        flat_all = np.ravel_multi_index(co.contrast_idx_h[comp], grid.component_shape(comp))[keep]
        if not np.array_equal(flat_all, store.h_idx[comp]):
            raise DependencyError("store site layout does not match the obstacle")
        mu_tot[comp] = (flat_all, co.contrast_mu[comp][keep],
                        mu_arr.reshape(-1)[flat_all])

    def h_injector(n):
        out = {}
        for comp in H_COMPONENTS:
            flat, d_mu, mu_here = mu_tot[comp]
            if flat.size == 0:
                continue
            h0_now = store.h_series[comp][n]
            h0_prev = store.h_series[comp][n - 1] if n > 0 else 0.0
            out[comp] = (flat, -(d_mu / mu_here) * (h0_now - h0_prev))
        return out

    sim.e_injector = e_injector
    sim.h_injector = h_injector
    # trace plan needs a source spec for the ball geometry
    sim.source = None
    pts, w, cell_idx = _trace_plan(grid, source)
    gather = _center_gather_indices(grid, cell_idx)
    series = np.zeros((grid.n_steps + 1, len(pts), 3))
    trace = TraceRecord(sample_points=pts, weights=w, dt=grid.dt,
                        mode="scattered", series=series)
    plans = None
    probes = None
    if probe_points is not None:
        probe_points = np.atleast_2d(np.asarray(probe_points, dtype=float))
        plans = {c: _interp_plan(grid, c, probe_points) for c in E_COMPONENTS}
        probes = np.zeros((grid.n_steps + 1, len(probe_points), 3))
    sim._record(trace, gather, probes, plans, 0)
    for n in range(grid.n_steps):
        sim.step()
        sim._record(trace, gather, probes, plans, n + 1)
    return RunResult(trace=trace, probe_points=probe_points, probe_series=probes,
                     store=None, energies=None)


def _check_geometry(source: SourceSpec, obstacle: ObstacleSpec | None) -> None:
    if obstacle is not None:
        d = float(obstacle.shape.signed_distance(np.asarray(source.p, dtype=float)))
        if d <= source.eta:
            raise GeometryError("source ball intersects the obstacle closure")


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def discrete_energy(state: FieldState) -> float:
    """0.5 * sum(eps E^2 + mu H^2) h^3 over all staggered sites."""
    co = state.coeffs
    total = 0.0
    for comp in E_COMPONENTS:
        eps = co.eps[comp]
        total += K.energy_quadratic(state.fields[comp],
                                    eps if not np.isscalar(eps) else np.empty(0),
                                    not np.isscalar(eps),
                                    eps if np.isscalar(eps) else 0.0)
    for comp in H_COMPONENTS:
        mu = co.mu[comp]
        total += K.energy_quadratic(state.fields[comp],
                                    mu if not np.isscalar(mu) else np.empty(0),
                                    not np.isscalar(mu),
                                    mu if np.isscalar(mu) else 0.0)
    return 0.5 * total * state.grid.h**3


def leapfrog_energy(state: FieldState, e_prev: dict, h_prev: dict) -> float:
    """Discrete energy with the time-staggered H product.

    The conserved pairing is E at step n with the product of H at the two
    surrounding half steps.  Called right after a step, `e_prev` holds E
    from before the step and `h_prev` holds H from before its half-step
    update; the state then holds the later H.  In the lossless source-free
    case this quantity is constant up to rounding; it never increases for
    sigma >= 0.
    """
    co = state.coeffs
    total = 0.0
    for comp in E_COMPONENTS:
        eps = co.eps[comp]
        total += K.energy_quadratic(e_prev[comp],
                                    eps if not np.isscalar(eps) else np.empty(0),
                                    not np.isscalar(eps),
                                    eps if np.isscalar(eps) else 0.0)
    for comp in H_COMPONENTS:
        mu = co.mu[comp]
        total += K.energy_bilinear(h_prev[comp], state.fields[comp],
                                   mu if not np.isscalar(mu) else np.empty(0),
                                   not np.isscalar(mu),
                                   mu if np.isscalar(mu) else 0.0)
    return 0.5 * total * state.grid.h**3
