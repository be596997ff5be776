"""Flat key = value experiment configuration.

One file per experiment; keys use dotted sections (medium.eps0, source.p,
grid.h, ...).  Values are ints, floats, comma-separated float lists, or
bare strings.  The canonical serialization (sorted keys, raw values)
is hashed into a fingerprint that every output file embeds, so stale
mixtures of configs and data are refused downstream.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fdtd import ConfigurationError, GridSpec, build_grid, causality_slack, grid_c_max
from .geometry import Box, Ellipsoid, GeometryError, Sphere
from .materials import BackgroundMedium, ObstacleSpec
from .source import PolyRamp, RampedSine, SourceSpec


def _parse_value(raw: str):
    raw = raw.strip()
    if "," in raw:
        return tuple(float(x) for x in raw.split(","))
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {ln}: expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigurationError(f"line {ln}: duplicate key {key!r}")
        out[key] = raw.strip()
    return out


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls(raw=parse_config_text(Path(path).read_text()))

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls(raw=parse_config_text(text))

    # -- access ---------------------------------------------------------

    def get(self, key: str, default=None):
        if key not in self.raw:
            return default
        return _parse_value(self.raw[key])

    def require(self, key: str):
        if key not in self.raw:
            raise ConfigurationError(f"missing required config key {key!r}")
        return _parse_value(self.raw[key])

    def fingerprint(self) -> str:
        # run.threads and run.seed are execution knobs that never change
        # the products, so they must not invalidate cached artifacts
        canon = "\n".join(f"{k} = {self.raw[k]}" for k in sorted(self.raw)
                          if k not in ("run.threads", "run.seed"))
        return hashlib.sha256(canon.encode()).hexdigest()

    # -- builders ---------------------------------------------------------

    def medium(self) -> BackgroundMedium:
        return BackgroundMedium(
            eps0=float(self.get("medium.eps0", 1.0)),
            mu0=float(self.get("medium.mu0", 1.0)),
            sigma0=float(self.get("medium.sigma0", 0.0)),
        )

    def pulse(self):
        kind = self.get("pulse.kind", "poly_ramp")
        if kind == "poly_ramp":
            return PolyRamp(k=int(self.get("pulse.k", 1)),
                            t_rise=float(self.get("pulse.t_rise", 0.5)),
                            ease=float(self.get("pulse.ease", 0.25)))
        if kind == "ramped_sine":
            return RampedSine(omega=float(self.get("pulse.omega", 2 * np.pi)),
                              t_rise=float(self.get("pulse.t_rise", 0.5)))
        raise ConfigurationError(f"unknown pulse kind {kind!r}")

    def source(self, which: int = 1) -> SourceSpec:
        a = self.require("source.a") if which == 1 else self.require("source.a2")
        return SourceSpec(
            p=tuple(self.require("source.p")),
            eta=float(self.require("source.eta")),
            a=tuple(a),
            pulse=self.pulse(),
            T=float(self.require("source.T")),
        )

    def has_second_direction(self) -> bool:
        return "source.a2" in self.raw

    def obstacle(self) -> ObstacleSpec | None:
        kind = self.get("obstacle.kind", "none")
        if kind == "none":
            return None
        if kind == "sphere":
            shape = Sphere(tuple(self.require("obstacle.center")),
                           float(self.require("obstacle.radius")))
        elif kind == "ellipsoid":
            shape = Ellipsoid(tuple(self.require("obstacle.center")),
                              tuple(self.require("obstacle.semi_axes")))
        elif kind == "box":
            shape = Box(tuple(self.require("obstacle.lo")),
                        tuple(self.require("obstacle.hi")))
        else:
            raise ConfigurationError(f"unknown obstacle kind {kind!r}")
        return ObstacleSpec(
            shape=shape,
            e_pert=float(self.get("obstacle.eps_r", 1.0)) - 1.0,
            m_pert=float(self.get("obstacle.mu_r", 1.0)) - 1.0,
            h_pert=float(self.get("obstacle.sigma", 0.0)),
        )

    def grid(self) -> GridSpec:
        lo = tuple(self.require("grid.lo"))
        hi = tuple(self.require("grid.hi"))
        c_max = grid_c_max(self.medium(), self.obstacle())
        return build_grid((lo, hi), h=float(self.require("grid.h")),
                          T=float(self.require("source.T")), c_max=c_max,
                          cfl=float(self.get("grid.cfl", 0.5)))

    def taus(self) -> np.ndarray:
        lo = float(self.get("tau.min", 4.0))
        hi = float(self.get("tau.max", 24.0))
        n = int(self.get("tau.count", 40))
        if not (0 < lo < hi) or n < 2:
            raise ConfigurationError("need 0 < tau.min < tau.max and tau.count >= 2")
        return np.linspace(lo, hi, n)

    @property
    def mode(self) -> str:
        return str(self.get("run.mode", "scattered"))

    @property
    def boundary(self) -> str:
        return str(self.get("grid.boundary", "pec"))

    @property
    def threads(self) -> int:
        return int(self.get("run.threads", 1))

    @property
    def seed(self) -> int:
        return int(self.get("run.seed", 0))

    # -- validation -------------------------------------------------------

    def validate(self) -> None:
        """All cross-module preconditions, before any heavy compute."""
        medium = self.medium()
        source = self.source()
        obstacle = self.obstacle()
        if obstacle is not None:
            d = float(obstacle.shape.signed_distance(np.asarray(source.p, dtype=float)))
            if d <= source.eta:
                raise GeometryError("source ball intersects the obstacle closure")
        grid = self.grid()
        grid.validate_cfl(grid_c_max(medium, obstacle))
        if self.boundary == "pec":
            shape = None if obstacle is None else obstacle.shape
            speed = grid_c_max(medium, obstacle)
            if causality_slack(grid, source, shape, grid.T, speed) < 0:
                raise ConfigurationError(
                    "grid box too small for causal truncation over the record")
        if self.mode not in ("scattered", "total", "background"):
            raise ConfigurationError(f"unknown run.mode {self.mode!r}")
        if self.mode != "background" and obstacle is None:
            raise ConfigurationError(f"run.mode {self.mode!r} needs an obstacle")
