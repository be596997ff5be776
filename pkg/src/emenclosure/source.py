"""Temporal pulses, the localized current source, and exact Laplace transforms.

Pulses are piecewise polynomial (optionally modulated by a sine), so their
Laplace transforms over a finite record have closed forms via the stable
recurrence for the incomplete moments m_j = int_0^L s^j e^{-z s} ds.  This
stays accurate for large tau, where the integrand concentrates at t = 0 and
naive quadrature loses digits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidPulseError(ValueError):
    pass


class DegeneratePulseError(ValueError):
    """The transform underflows to zero over the whole probed grid."""


@dataclass(frozen=True)
class _Piece:
    t0: float
    t1: float | None          # None = runs to the end of the record
    coeffs: tuple[float, ...]  # polynomial in s = t - t0
    omega: float = 0.0         # if nonzero the piece is P(s) * sin(omega * t)

    def eval(self, t: np.ndarray) -> np.ndarray:
        s = t - self.t0
        val = np.polynomial.polynomial.polyval(s, np.asarray(self.coeffs))
        if self.omega != 0.0:
            val = val * np.sin(self.omega * t)
        return val


def _moments(L: float, z: complex, n: int) -> np.ndarray:
    """m_j = int_0^L s^j e^{-z s} ds for j = 0..n (upward recurrence)."""
    eL = np.exp(-z * L)
    m = np.empty(n + 1, dtype=complex)
    m[0] = (1.0 - eL) / z
    Lj = 1.0
    for j in range(1, n + 1):
        Lj *= L
        m[j] = (j * m[j - 1] - Lj * eL) / z
    return m


def _piece_transform(piece: _Piece, T: float, tau: float) -> float:
    t0 = piece.t0
    t1 = T if piece.t1 is None else min(piece.t1, T)
    if t1 <= t0:
        return 0.0
    L = t1 - t0
    c = np.asarray(piece.coeffs, dtype=float)
    if piece.omega == 0.0:
        m = _moments(L, complex(tau), len(c) - 1).real
        return float(np.exp(-tau * t0) * np.dot(c, m))
    z = complex(tau, -piece.omega)
    m = _moments(L, z, len(c) - 1)
    val = np.exp(complex(-tau * t0, piece.omega * t0)) * np.dot(c, m)
    return float(val.imag)


@dataclass(frozen=True)
class PolyRamp:
    """f(t) = t^k rising until t_rise, then eased to a constant.

    The ease takes the derivative linearly to zero over [t_rise,
    t_rise + ease], keeping f piecewise C^1 with f(0) = 0.  ease = 0 means
    no flattening (a pure power ramp).
    """

    k: int = 1
    t_rise: float = 0.5
    ease: float = 0.25

    def __post_init__(self):
        if self.k < 1:
            raise InvalidPulseError("poly ramp exponent must be >= 1 (f(0) = 0)")
        if self.t_rise <= 0 or self.ease < 0:
            raise InvalidPulseError("t_rise must be positive and ease non-negative")

    @property
    def gamma_witness(self) -> float:
        # f ~ t^k near 0 gives f~(tau) ~ k! / tau^(k+1)
        return self.k + 1.0

    def pieces(self) -> tuple[_Piece, ...]:
        a, b, k = self.t_rise, self.ease, self.k
        ramp = _Piece(0.0, a, tuple(0.0 for _ in range(k)) + (1.0,))
        if b == 0.0:
            return (_Piece(0.0, None, tuple(0.0 for _ in range(k)) + (1.0,)),)
        slope = k * a ** (k - 1)
        ease = _Piece(a, a + b, (a**k, slope, -slope / (2.0 * b)))
        flat = _Piece(a + b, None, (a**k + slope * b / 2.0,))
        return (ramp, ease, flat)


@dataclass(frozen=True)
class RampedSine:
    """f(t) = sin(omega t) * r(t) with a smoothstep ramp r over [0, t_rise]."""

    omega: float = 2.0 * np.pi
    t_rise: float = 0.5

    def __post_init__(self):
        if self.omega <= 0 or self.t_rise <= 0:
            raise InvalidPulseError("omega and t_rise must be positive")

    @property
    def gamma_witness(self) -> float:
        # f ~ 3 omega t^3 / t_rise^2 near 0
        return 4.0

    def pieces(self) -> tuple[_Piece, ...]:
        a, w = self.t_rise, self.omega
        ramp = _Piece(0.0, a, (0.0, 0.0, 3.0 / a**2, -2.0 / a**3), omega=w)
        tail = _Piece(a, None, (1.0,), omega=w)
        return (ramp, tail)


PulseSpec = PolyRamp | RampedSine


def pulse_eval(pulse: PulseSpec, t) -> np.ndarray:
    """Sample f(t); t may be scalar or array, clipped to t >= 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for piece in pulse.pieces():
        hi = np.inf if piece.t1 is None else piece.t1
        m = (t >= piece.t0) & (t < hi)
        out[m] = piece.eval(t[m])
    return out


def laplace_pulse(pulse: PulseSpec, T: float, tau: float) -> float:
    """f~(tau) = int_0^T e^{-tau t} f(t) dt, in closed form."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return sum(_piece_transform(p, T, tau) for p in pulse.pieces())


def linear_ramp_transform(T: float, tau: float) -> float:
    """Closed form for f(t) = t: (1 - (1 + tau T) e^{-tau T}) / tau^2."""
    x = tau * T
    return (1.0 - (1.0 + x) * np.exp(-x)) / tau**2


@dataclass(frozen=True)
class PulseDecayReport:
    taus: np.ndarray
    abs_transform: np.ndarray
    fitted_exponent: float      # slope of log|f~| vs log tau on the upper half
    source_norm_consistent: bool  # slope <= -3/2 + 0.1


def verify_pulse_decay(pulse: PulseSpec, T: float, taus) -> PulseDecayReport:
    """Fit the large-tau power of |f~| and check the source-norm decay rate."""
    taus = np.asarray(taus, dtype=float)
    if np.any(np.diff(taus) <= 0) or taus[0] <= 0:
        raise ValueError("taus must be ascending and positive")
    vals = np.array([abs(laplace_pulse(pulse, T, t)) for t in taus])
    if np.all(vals == 0.0):
        raise DegeneratePulseError("pulse transform underflows on the entire grid")
    upper = taus >= taus[len(taus) // 2]
    ok = upper & (vals > 0)
    slope = np.polyfit(np.log(taus[ok]), np.log(vals[ok]), 1)[0]
    return PulseDecayReport(
        taus=taus,
        abs_transform=vals,
        fitted_exponent=float(slope),
        source_norm_consistent=bool(slope <= -1.5 + 0.1),
    )


@dataclass(frozen=True)
class SourceSpec:
    """Current source f(t) chi_B(x) a on the ball B(p, eta), recorded to T."""

    p: tuple[float, float, float]
    eta: float
    a: tuple[float, float, float]
    pulse: PulseSpec
    T: float

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("source ball radius eta must be positive")
        if self.T <= 0:
            raise ValueError("record duration T must be positive")
        if abs(np.linalg.norm(np.asarray(self.a)) - 1.0) > 1e-9:
            raise ValueError("polarization a must be a unit vector")
        if pulse_eval(self.pulse, np.array([0.0]))[0] != 0.0:
            raise InvalidPulseError("pulse must vanish at t = 0")

    @property
    def ball_volume(self) -> float:
        return 4.0 / 3.0 * np.pi * self.eta**3

    def f_tilde(self, tau: float) -> float:
        return laplace_pulse(self.pulse, self.T, tau)

    def waveform_csv(self, path, n: int = 2001) -> None:
        t = np.linspace(0.0, self.T, n)
        np.savetxt(path, np.column_stack([t, pulse_eval(self.pulse, t)]),
                   delimiter=",", header="t,f", comments="")
