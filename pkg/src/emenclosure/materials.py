"""Background media, obstacle perturbations, and jump-condition classification."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .geometry import Shape


class InvalidMaterialError(ValueError):
    """Permittivity or permeability is non-positive somewhere."""


@dataclass(frozen=True)
class BackgroundMedium:
    """Constant background (eps0, mu0, sigma0) in normalized units."""

    eps0: float = 1.0
    mu0: float = 1.0
    sigma0: float = 0.0

    def __post_init__(self):
        if self.eps0 <= 0 or self.mu0 <= 0:
            raise InvalidMaterialError("eps0 and mu0 must be positive")
        if self.sigma0 < 0:
            raise InvalidMaterialError("sigma0 must be non-negative")

    @property
    def wave_speed(self) -> float:
        return 1.0 / np.sqrt(self.eps0 * self.mu0)

    @property
    def slowness(self) -> float:
        """sqrt(mu0 * eps0); converts distances to travel times."""
        return float(np.sqrt(self.mu0 * self.eps0))


FieldOnD = float | Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ObstacleSpec:
    """Shape plus relative material perturbations supported on it.

    e_pert, m_pert, h_pert are the excesses of relative permittivity,
    relative permeability and conductivity over the background; constants
    give a piecewise-constant obstacle, callables a spatially varying one.
    """

    shape: Shape
    e_pert: FieldOnD = 0.0
    m_pert: FieldOnD = 0.0
    h_pert: FieldOnD = 0.0

    def is_piecewise_constant(self) -> bool:
        return not any(callable(f) for f in (self.e_pert, self.m_pert, self.h_pert))

    def eps_r(self, x: np.ndarray) -> np.ndarray:
        return 1.0 + _eval(self.e_pert, x)

    def mu_r(self, x: np.ndarray) -> np.ndarray:
        return 1.0 + _eval(self.m_pert, x)

    def sigma_excess(self, x: np.ndarray) -> np.ndarray:
        return _eval(self.h_pert, x)


def _eval(f: FieldOnD, x: np.ndarray) -> np.ndarray:
    if callable(f):
        return np.asarray(f(np.asarray(x, dtype=float)), dtype=float)
    return np.full(np.shape(x)[:-1], float(f))


@dataclass(frozen=True)
class MaterialClassification:
    material_class: str  # "A_I" | "A_II" | "neither"
    margin: float


def soft_margin(eps_r, mu_r):
    """Left-hand side of the 'softer than background' jump condition."""
    return (1.0 - 1.0 / np.asarray(eps_r)) + (1.0 - np.asarray(mu_r))


def hard_margin(eps_r, mu_r):
    """Left-hand side of the 'harder than background' jump condition."""
    return (1.0 - np.asarray(eps_r)) + (1.0 - 1.0 / np.asarray(mu_r))


def _interior_samples(shape: Shape, n: int = 10_000) -> np.ndarray:
    lo, hi = shape.bounding_box()
    sampler = qmc.Halton(d=3, seed=7)
    pts = []
    while sum(len(p) for p in pts) < n:
        cand = qmc.scale(sampler.random(4 * n), lo, hi)
        inside = shape.signed_distance(cand) < 0
        pts.append(cand[inside])
    return np.concatenate(pts)[:n]


def classify_material(obstacle: ObstacleSpec, bg: BackgroundMedium,
                      n_samples: int = 10_000) -> MaterialClassification:
    """Decide which jump condition (if any) the obstacle satisfies.

    Piecewise-constant obstacles are evaluated exactly; varying fields by
    dense quasi-random interior sampling (an essential-infimum surrogate).
    """
    if obstacle.is_piecewise_constant():
        er = np.array([1.0 + obstacle.e_pert])
        mr = np.array([1.0 + obstacle.m_pert])
        sig = bg.sigma0 + np.array([obstacle.h_pert])
    else:
        x = _interior_samples(obstacle.shape, n_samples)
        er = obstacle.eps_r(x)
        mr = obstacle.mu_r(x)
        sig = bg.sigma0 + obstacle.sigma_excess(x)
    if np.any(er <= 0) or np.any(mr <= 0):
        raise InvalidMaterialError("eps_r and mu_r must be positive on the obstacle")
    if np.any(sig < 0):
        raise InvalidMaterialError("total conductivity must be non-negative on the obstacle")

    m1 = float(np.min(soft_margin(er, mr)))
    m2 = float(np.min(hard_margin(er, mr)))
    if m1 > 0:
        return MaterialClassification("A_I", m1)
    if m2 > 0:
        return MaterialClassification("A_II", m2)
    return MaterialClassification("neither", max(m1, m2))


def region_membership(eps_r: float, mu_r: float) -> str:
    """Locate a homogeneous (eps_r, mu_r) pair in the material-class plane.

    Returns "A1" / "A2" for the two open regions whose members satisfy the
    soft / hard jump condition respectively, "boundary" on their closures'
    common boundary (which contains (1, 1)), "outside_both" otherwise.
    """
    if eps_r <= 0 or mu_r <= 0:
        raise InvalidMaterialError("eps_r and mu_r must be positive")
    m1 = float(soft_margin(eps_r, mu_r))
    m2 = float(hard_margin(eps_r, mu_r))
    if m1 > 0:
        return "A1"
    if m2 > 0:
        return "A2"
    if m1 == 0.0 or m2 == 0.0:
        return "boundary"
    return "outside_both"


def reciprocal_map(eps_r: float, mu_r: float) -> tuple[float, float]:
    """(x, y) -> (1/x, 1/y); swaps the two material-class regions."""
    return (1.0 / eps_r, 1.0 / mu_r)
