import numpy as np
import pytest
from scipy.integrate import quad
from scipy.interpolate import interp1d

from emenclosure.fdtd import TraceRecord
from emenclosure.indicator import (DirectionError, ExtractionError,
                                   IndicatorCurve, NoDecayError,
                                   classify_by_sign, clean_window,
                                   combine_indicators, difference_trace,
                                   extract_distance, indicator_curve,
                                   indicator_curve_analytic_bg,
                                   laplace_transform_trace,
                                   synthetic_exponential_curve,
                                   transform_weights)
from emenclosure.materials import BackgroundMedium
from emenclosure.source import PolyRamp, SourceSpec

MED = BackgroundMedium()


def make_trace(series, dt, mode="scattered"):
    n_pts = series.shape[1]
    pts = np.zeros((n_pts, 3))
    w = np.full(n_pts, 1.0 / n_pts)
    return TraceRecord(sample_points=pts, weights=w, dt=dt, mode=mode,
                       series=series)


def test_transform_weights_quadrature_oracle(rng):
    n, dt = 73, 0.013
    g = rng.standard_normal(n + 1)
    t = np.arange(n + 1) * dt
    lin = interp1d(t, g)
    for tau in (0.5, 7.0, 160.0):
        # integrate the interpolant interval by interval (kinks at nodes)
        ref = sum(quad(lambda s: np.exp(-tau * s) * lin(s), t[i], t[i + 1],
                       epsabs=1e-15, epsrel=1e-13)[0] for i in range(n))
        val = float(np.dot(transform_weights(n, dt, tau), g))
        assert val == pytest.approx(ref, rel=1e-10, abs=1e-14)


def test_transform_weights_small_x_series_branch():
    # both branches must integrate constants exactly:
    # sum w = (1 - e^{-tau T}) / tau, straddling the series cutoff
    n = 10
    for dt in (1e-7, 1e-4, 0.05, 0.0999, 0.1001, 0.4):
        w = transform_weights(n, dt, 1.0)
        assert w.sum() == pytest.approx((1 - np.exp(-n * dt)) / 1.0, rel=1e-12)
    # and linear functions: int e^{-tau t} t dt
    dt, tau = 0.03, 1.0  # x = 0.03 exercises the series branch
    t = np.arange(n + 1) * dt
    T = n * dt
    ref = (1 - (1 + tau * T) * np.exp(-tau * T)) / tau**2
    assert float(np.dot(transform_weights(n, dt, tau), t)) == pytest.approx(
        ref, rel=1e-12)


def test_laplace_transform_trace_exact_on_linear():
    # g(t) = c + b t transforms exactly (the interpolant is g itself)
    dt, n = 0.02, 50
    t = np.arange(n + 1) * dt
    series = np.zeros((n + 1, 2, 3))
    series[:, 0, 1] = 2.0 + 3.0 * t
    tr = make_trace(series, dt)
    tau = 4.0
    T = n * dt
    got = laplace_transform_trace(tr, tau)[0, 1]
    ref, _ = quad(lambda s: np.exp(-tau * s) * (2 + 3 * s), 0, T)
    assert got == pytest.approx(ref, rel=1e-12)


def test_indicator_curve_requires_scattered_mode():
    tr = make_trace(np.zeros((4, 1, 3)), 0.1, mode="total_with_obstacle")
    src = SourceSpec(p=(0, 0, 0), eta=0.05, a=(0, 1, 0), pulse=PolyRamp(), T=0.4)
    with pytest.raises(ValueError):
        indicator_curve(MED, src, tr, np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        indicator_curve_analytic_bg(MED, src, make_trace(np.zeros((4, 1, 3)), 0.1),
                                    np.array([1.0, 2.0]))


def test_indicator_sign_and_magnitude_small_case():
    # constant scattered field e_y = -c: I = -c * f~(tau) * (1 - e^{-tau T})/tau
    dt, n, c = 0.01, 100, 2.5
    series = np.zeros((n + 1, 3, 3))
    series[:, :, 1] = -c
    tr = make_trace(series, dt)
    src = SourceSpec(p=(0, 0, 0), eta=0.05, a=(0, 1, 0), pulse=PolyRamp(), T=n * dt)
    taus = np.array([3.0, 9.0])
    curve = indicator_curve(MED, src, tr, taus)
    for i, tau in enumerate(taus):
        ref = -c * src.f_tilde(tau) * (1 - np.exp(-tau * tr.T)) / tau
        assert curve.signs[i] == -1.0
        assert curve.signs[i] * np.exp(curve.log_abs[i]) == pytest.approx(ref, rel=1e-10)


def test_difference_trace():
    a = make_trace(np.full((3, 2, 3), 5.0), 0.1, mode="total_with_obstacle")
    b = make_trace(np.full((3, 2, 3), 2.0), 0.1, mode="background")
    d = difference_trace(a, b)
    assert d.mode == "difference"
    np.testing.assert_allclose(d.series, 3.0)
    with pytest.raises(ValueError):
        difference_trace(a, make_trace(np.zeros((4, 2, 3)), 0.1))


def test_extract_distance_exact_on_synthetic():
    taus = np.linspace(4.0, 24.0, 40)
    curve = synthetic_exponential_curve(taus, rate=-1.4, amplitude_log=-3.0,
                                        T=4.0, slowness=1.0)
    est = extract_distance(curve)
    assert est.dist_est == pytest.approx(0.7, abs=1e-9)
    assert est.slope == pytest.approx(-1.4, abs=1e-9)
    assert est.power == pytest.approx(0.0, abs=1e-7)
    assert est.residual < 1e-10


def test_extract_distance_with_algebraic_prefactor():
    # |I| = tau^{-2} e^{-1.4 tau}: the log-tau term must absorb the prefactor
    taus = np.linspace(4.0, 24.0, 40)
    logs = -1.4 * taus - 2.0 * np.log(taus)
    curve = IndicatorCurve(taus=taus, log_abs=logs, signs=np.full(40, -1.0),
                           variant="synthetic", T=4.0, slowness=1.0)
    est = extract_distance(curve)
    assert est.dist_est == pytest.approx(0.7, abs=1e-6)
    assert est.power == pytest.approx(-2.0, abs=1e-6)


def test_extract_distance_respects_slowness():
    taus = np.linspace(4.0, 24.0, 40)
    curve = synthetic_exponential_curve(taus, rate=-1.4, T=8.0, slowness=2.0)
    est = extract_distance(curve)
    assert est.dist_est == pytest.approx(0.35, abs=1e-9)


def test_no_decay_on_growing_curve():
    taus = np.linspace(4.0, 24.0, 40)
    curve = synthetic_exponential_curve(taus, rate=+0.3, T=4.0)
    with pytest.raises(NoDecayError):
        extract_distance(curve)


def test_no_decay_when_rate_sits_at_record_length():
    # decay time equal to T is the truncation signature, not an arrival
    taus = np.linspace(4.0, 24.0, 40)
    curve = synthetic_exponential_curve(taus, rate=-1.0, T=1.0)
    with pytest.raises(NoDecayError):
        extract_distance(curve)


def test_extraction_needs_enough_clean_points():
    taus = np.linspace(4.0, 10.0, 5)
    curve = synthetic_exponential_curve(taus, rate=-1.0, T=4.0)
    with pytest.raises(ExtractionError):
        extract_distance(curve)


def test_clean_window_detects_noise_floor(rng):
    taus = np.linspace(4.0, 24.0, 60)
    # exponential decay that bottoms out at a flat noise floor
    logs = np.maximum(-1.2 * taus, -20.0) + 0.01 * rng.standard_normal(60)
    curve = IndicatorCurve(taus=taus, log_abs=logs, signs=np.full(60, -1.0),
                           variant="synthetic", T=4.0, slowness=1.0)
    mask, floor = clean_window(curve)
    assert floor is not None
    assert 15.0 < floor < 19.0
    assert mask[:20].all() and not mask[-10:].any()
    est = extract_distance(curve)
    assert est.dist_est == pytest.approx(0.6, abs=0.02)


def test_classify_by_sign():
    taus = np.linspace(4.0, 24.0, 40)
    neg = synthetic_exponential_curve(taus, rate=-1.0, sign=-1)
    pos = synthetic_exponential_curve(taus, rate=-1.0, sign=+1)
    assert classify_by_sign(neg) == "A_I"
    assert classify_by_sign(pos) == "A_II"
    mixed = IndicatorCurve(taus=taus, log_abs=neg.log_abs,
                           signs=np.where(np.arange(40) % 2 == 0, 1.0, -1.0),
                           variant="synthetic", T=4.0, slowness=1.0)
    assert classify_by_sign(mixed) == "indeterminate"


def test_combine_indicators():
    taus = np.linspace(4.0, 24.0, 40)
    c1 = synthetic_exponential_curve(taus, rate=-1.0, amplitude_log=0.0, sign=-1)
    c2 = synthetic_exponential_curve(taus, rate=-1.0, amplitude_log=np.log(2.0), sign=-1)
    comb = combine_indicators(c1, c2, (1, 0, 0), (0, 1, 0))
    # -e^{-tau} - 2 e^{-tau} = -3 e^{-tau}
    np.testing.assert_allclose(comb.log_abs, np.log(3.0) - taus, atol=1e-12)
    assert np.all(comb.signs == -1.0)
    assert comb.variant == "two_direction_sum"
    with pytest.raises(DirectionError):
        combine_indicators(c1, c2, (1, 0, 0), (-1, 0, 0))
    with pytest.raises(ValueError):
        combine_indicators(c1, synthetic_exponential_curve(taus[:-1], rate=-1.0),
                           (1, 0, 0), (0, 1, 0))


def test_value_over_exp_overflow_guard():
    taus = np.array([100.0, 200.0, 300.0])
    curve = IndicatorCurve(taus=taus, log_abs=np.array([-10.0, -10.0, -10.0]),
                           signs=np.array([-1.0, -1.0, -1.0]),
                           variant="synthetic", T=4.0, slowness=1.0)
    assert curve.value_over_exp(0) == pytest.approx(-np.exp(390.0))
    assert curve.value_over_exp(2) is None
    rows = list(curve.rows())
    assert rows[2]["I_over_exp"] is None
