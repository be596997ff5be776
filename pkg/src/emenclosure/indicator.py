"""Enclosure indicator from finite-record boundary data.

The indicator at parameter tau is the pairing of the source density with
the Laplace-transformed difference between the measured and background
electric fields, integrated over the source ball:

    I(tau) = f~(tau) * sum_q w_q a . (W_e - V_e)(x_q)

with the quadrature points/weights carried by the trace.  Its large-tau
behavior encodes the distance to the obstacle (decay rate) and the
material class (limiting sign).  All curve values are kept as
(log-magnitude, sign) pairs so the exponentially small tail never
underflows intermediate arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fdtd import TraceRecord
from .logdomain import NEG_INF, from_float
from .materials import BackgroundMedium
from .source import SourceSpec
from .analytic import eval_background_fields


class ExtractionError(RuntimeError):
    pass


class NoDecayError(ExtractionError):
    """The curve does not decay; the record T may be shorter than the
    two-way travel time to the obstacle."""


class DirectionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# exact Laplace transform of piecewise-linear samples
# ---------------------------------------------------------------------------


def _interval_weights(x: float) -> tuple[float, float]:
    """(alpha, beta): exact transform of the linear hat on one interval.

    alpha = int_0^1 e^{-x s}(1-s) ds, beta = int_0^1 e^{-x s} s ds,
    evaluated stably for small x.
    """
    if x < 0.1:
        # alpha = sum (-x)^m / (m+2)!, beta = sum (m+1)(-x)^m / (m+2)!;
        # the closed form cancels catastrophically for small x
        a = b = 0.0
        fact = 2.0  # (m+2)!
        xp = 1.0
        for m in range(10):
            a += xp / fact
            b += (m + 1) * xp / fact
            xp *= -x
            fact *= m + 3
        return a, b
    ex = np.exp(-x)
    return (x - 1.0 + ex) / (x * x), (1.0 - (1.0 + x) * ex) / (x * x)


def transform_weights(n_steps: int, dt: float, tau: float) -> np.ndarray:
    """Node weights w_n with int_0^T e^{-tau t} g(t) dt = sum w_n g(t_n)
    for piecewise-linear g through the samples."""
    x = tau * dt
    a, b = _interval_weights(x)
    decay = np.exp(-tau * dt * np.arange(n_steps))  # e^{-tau t_n}, n < n_steps
    w = np.zeros(n_steps + 1)
    w[:-1] += dt * a * decay
    w[1:] += dt * b * decay
    return w


def laplace_transform_trace(trace: TraceRecord, tau: float) -> np.ndarray:
    """(n_points, 3) transform of the trace over its full record."""
    w = transform_weights(trace.n_steps, trace.dt, tau)
    return np.tensordot(w, trace.series, axes=(0, 0))


# ---------------------------------------------------------------------------
# indicator curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IndicatorCurve:
    taus: np.ndarray
    log_abs: np.ndarray      # natural log of |I|; -inf where I = 0
    signs: np.ndarray        # -1, 0, +1
    variant: str
    T: float                 # record length behind the data
    slowness: float          # sqrt(mu0 eps0) of the background

    def value_over_exp(self, i: int) -> float | None:
        """e^{tau T} I(tau) at index i, or None when not representable."""
        z = self.log_abs[i] + self.taus[i] * self.T
        if z > 700.0:
            return None
        return float(self.signs[i] * np.exp(z))

    def rows(self):
        for i, tau in enumerate(self.taus):
            yield {
                "tau": float(tau),
                "sign": int(self.signs[i]),
                "log_abs_I": float(self.log_abs[i]),
                "I_over_exp": self.value_over_exp(i),
                "variant": self.variant,
            }


def _pair_indicator(source: SourceSpec, diff_transform: np.ndarray,
                    weights: np.ndarray, tau: float) -> tuple[float, float]:
    a = np.asarray(source.a, dtype=float)
    val = source.f_tilde(tau) * float(np.dot(weights, diff_transform @ a))
    return from_float(val)


def _validate_taus(taus) -> np.ndarray:
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size == 0 or np.any(taus <= 0) or np.any(np.diff(taus) <= 0):
        raise ValueError("taus must be a strictly increasing positive 1-d grid")
    return taus


def indicator_curve(medium: BackgroundMedium, source: SourceSpec,
                    scattered: TraceRecord, taus,
                    variant: str = "single") -> IndicatorCurve:
    """Indicator from a scattered-field trace (measured minus background)."""
    taus = _validate_taus(taus)
    if scattered.mode not in ("scattered", "difference"):
        raise ValueError(f"expected a scattered/difference trace, got mode "
                         f"{scattered.mode!r}")
    logs = np.empty_like(taus)
    signs = np.empty_like(taus)
    for i, tau in enumerate(taus):
        g = laplace_transform_trace(scattered, tau)
        logs[i], signs[i] = _pair_indicator(source, g, scattered.weights, tau)
    return IndicatorCurve(taus=taus, log_abs=logs, signs=signs, variant=variant,
                          T=scattered.T, slowness=medium.slowness)


def difference_trace(total: TraceRecord, background: TraceRecord) -> TraceRecord:
    """Pointwise total-minus-background trace (loses the digits the
    scattered formulation keeps; provided for cross-checks)."""
    if total.series.shape != background.series.shape or total.dt != background.dt:
        raise ValueError("total and background traces are not commensurate")
    return TraceRecord(sample_points=total.sample_points, weights=total.weights,
                       dt=total.dt, mode="difference",
                       series=total.series - background.series)


def indicator_curve_analytic_bg(medium: BackgroundMedium, source: SourceSpec,
                                total: TraceRecord, taus) -> IndicatorCurve:
    """Indicator variant with the closed-form background field.

    Replaces the simulated background transform by the exact Laplace-domain
    background evaluated at the trace points; useful when only the
    obstacle run is available.
    """
    taus = _validate_taus(taus)
    if total.mode != "total_with_obstacle":
        raise ValueError("analytic-background variant needs a total-field trace")
    logs = np.empty_like(taus)
    signs = np.empty_like(taus)
    for i, tau in enumerate(taus):
        g = laplace_transform_trace(total, tau)
        v0, _ = eval_background_fields(medium, source, tau, total.sample_points)
        logs[i], signs[i] = _pair_indicator(source, g - v0, total.weights, tau)
    return IndicatorCurve(taus=taus, log_abs=logs, signs=signs,
                          variant="analytic_background", T=total.T,
                          slowness=medium.slowness)


def combine_indicators(curve1: IndicatorCurve, curve2: IndicatorCurve,
                       a1, a2) -> IndicatorCurve:
    """Sum of two single-direction indicators (the two-polarization curve).

    The directions must be linearly independent for the combined sign
    dichotomy to hold regardless of the first reflector's orientation.
    """
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if np.linalg.norm(np.cross(a1, a2)) < 1e-12:
        raise DirectionError("polarizations must be linearly independent")
    if not np.array_equal(curve1.taus, curve2.taus):
        raise ValueError("curves must share the tau grid")
    logs = np.empty_like(curve1.log_abs)
    signs = np.empty_like(curve1.signs)
    for i in range(len(logs)):
        pair = np.array([curve1.log_abs[i], curve2.log_abs[i]])
        sgn = np.array([curve1.signs[i], curve2.signs[i]])
        logs[i], signs[i] = _signed_sum(pair, sgn)
    return IndicatorCurve(taus=curve1.taus, log_abs=logs, signs=signs,
                          variant="two_direction_sum", T=curve1.T,
                          slowness=curve1.slowness)


def _signed_sum(logmags, signs):
    from .logdomain import signed_log_sum
    return signed_log_sum(np.asarray(logmags), np.asarray(signs))


# ---------------------------------------------------------------------------
# distance extraction and sign classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistanceEstimate:
    dist_est: float
    slope: float             # d log|I| / d tau on the clean window
    intercept: float
    window: tuple[float, float]
    residual: float
    noise_floor_tau: float | None
    power: float = 0.0       # fitted coefficient of log tau

    def as_dict(self) -> dict:
        return {
            "dist_est": self.dist_est,
            "slope": self.slope,
            "intercept": self.intercept,
            "window": list(self.window),
            "residual": self.residual,
            "noise_floor_tau": self.noise_floor_tau,
            "power": self.power,
        }


def clean_window(curve: IndicatorCurve) -> tuple[np.ndarray, float | None]:
    """Mask of samples before the noise floor.

    The exact curve keeps decaying at a near-constant rate; once the signal
    drops to solver noise the local slope collapses toward zero.  The
    window is the longest prefix whose local slope stays below half the
    median slope of the first third of the grid.
    """
    finite = np.isfinite(curve.log_abs)
    y = curve.log_abs
    t = curve.taus
    n = len(t)
    if n < 3 or not finite[: max(3, n // 3)].all():
        return finite, None
    local = np.diff(y) / np.diff(t)
    ref = np.median(local[: max(2, n // 3)])
    if not np.isfinite(ref) or ref >= 0:
        return finite, None
    mask = np.zeros(n, dtype=bool)
    mask[0] = True
    for i in range(n - 1):
        if finite[i + 1] and np.isfinite(local[i]) and local[i] <= 0.5 * ref:
            mask[i + 1] = True
        else:
            break
    floor = float(t[mask.sum()]) if mask.sum() < n else None
    return mask, floor


def extract_distance(curve: IndicatorCurve, min_points: int = 8) -> DistanceEstimate:
    """Fit the decay rate of log|I| and convert it to a distance.

    Model: log|I| = slope * tau + power * log tau + intercept.  The log-tau
    term absorbs the algebraic prefactor of the decay; without it the
    fitted slope is biased at moderate tau.  dist = -slope / (2 * slowness).
    """
    mask, floor = clean_window(curve)
    t = curve.taus[mask]
    y = curve.log_abs[mask]
    keep = np.isfinite(y)
    t, y = t[keep], y[keep]
    if len(t) < min_points:
        raise ExtractionError(
            f"only {len(t)} usable samples before the noise floor "
            f"(need {min_points}); extend the tau grid or reduce noise")
    X = np.column_stack([t, np.log(t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    slope, power, intercept = (float(c) for c in coef)
    resid = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    if slope >= 0:
        raise NoDecayError(
            "indicator does not decay on the probed grid; the record length "
            "T may be below the two-way travel time to the obstacle")
    # A fitted decay time -slope close to the record length T means the
    # transform is dominated by the very last samples: the exponential
    # weight of the truncated record, not a physical arrival inside it.
    # A real echo at time t* < T produces -slope = t*; t* at or beyond
    # 0.9 T is indistinguishable from truncation of a signal that has not
    # arrived yet, so the distance would be meaningless.
    if curve.T > 0 and -slope >= 0.9 * curve.T:
        raise NoDecayError(
            f"fitted decay time {-slope:.3f} is at the record length "
            f"T = {curve.T:.3f}; no arrival is resolved inside the record "
            "(T is likely below the two-way travel time to the obstacle)")
    dist = -slope / (2.0 * curve.slowness)
    return DistanceEstimate(dist_est=dist, slope=slope, intercept=intercept,
                            window=(float(t[0]), float(t[-1])), residual=resid,
                            noise_floor_tau=floor, power=power)


def classify_by_sign(curve: IndicatorCurve) -> str:
    """Material class from the stable limiting sign of the indicator.

    Negative indicator on the clean tail means the obstacle is optically
    softer than the background ("A_I"); positive means harder ("A_II").
    """
    mask, _ = clean_window(curve)
    idx = np.nonzero(mask)[0]
    tail = idx[len(idx) // 2:]
    s = curve.signs[tail]
    s = s[s != 0]
    if len(s) == 0 or not np.all(s == s[0]):
        return "indeterminate"
    return "A_I" if s[0] < 0 else "A_II"


def synthetic_exponential_curve(taus, rate: float, amplitude_log: float = 0.0,
                                sign: int = -1, T: float = 4.0,
                                slowness: float = 1.0) -> IndicatorCurve:
    """Pure-exponential curve |I| = e^{a + rate*tau}; extraction is exact
    on it, which pins down the fit conventions."""
    taus = _validate_taus(taus)
    logs = amplitude_log + rate * taus
    signs = np.full_like(taus, float(sign))
    return IndicatorCurve(taus=taus, log_abs=logs, signs=signs,
                          variant="synthetic", T=T, slowness=slowness)
