import math

import numpy as np
import pytest
from scipy.special import ndtr

import impnoise as ip
from helpers import make_chain_config


def test_histogram_two_values():
    h = ip.histogram([0.0, 1.0], 2, (0.0, 1.0))
    assert list(h.masses) == [0.5, 0.5]
    assert h.total_count == 2 and h.clipped == 0


def test_histogram_constant_values():
    h = ip.histogram([3.0] * 10, 4, (0.0, 8.0))
    assert h.masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.count_nonzero(h.masses) == 1


def test_histogram_clipping_counts():
    h = ip.histogram([-10.0, 0.5, 99.0], 2, (0.0, 1.0))
    assert h.clipped == 2
    # -10 clipped into the first bin; 0.5 opens the second; 99 clipped into it
    assert h.masses[0] == pytest.approx(1 / 3)
    assert h.masses[1] == pytest.approx(2 / 3)


def test_histogram_errors():
    with pytest.raises(ip.EmptyInput):
        ip.histogram([], 4, (0.0, 1.0))
    with pytest.raises(ip.DegenerateInput):
        ip.histogram([1.0, 2.0], 4, (1.0, 1.0))
    with pytest.raises(ip.DegenerateInput):
        ip.histogram([1.0, 2.0], 1, (0.0, 3.0))


def test_histogram_gaussian_multinomial_bands():
    rng = np.random.default_rng(0)
    n = 1_000_000
    h = ip.histogram(rng.standard_normal(n), 100, (-5.0, 5.0))
    expected = np.diff(ndtr(h.edges))
    expected[0] += ndtr(-5.0)
    expected[-1] += ndtr(-5.0)
    se = np.sqrt(expected * (1 - expected) / n)
    assert (np.abs(h.masses - expected) <= 3 * se).all()


def test_kl_self_is_exactly_zero():
    rng = np.random.default_rng(5)
    h = ip.histogram(rng.exponential(1.0, 10_000), 50, (0.0, 10.0))
    assert ip.kl_divergence(h, h) == 0.0
    assert ip.mse_cdf(h, h) == 0.0


def test_kl_two_bin_hand_case():
    # p = (1, 0) vs q = (1/2, 1/2): KL -> ln 2 as smoothing vanishes
    edges = np.linspace(0.0, 1.0, 3)
    big = 10 ** 12
    p = ip.Histogram(edges=edges, masses=np.array([1.0, 0.0]), total_count=big)
    q = ip.Histogram(edges=edges, masses=np.array([0.5, 0.5]), total_count=big)
    assert ip.kl_divergence(p, q) == pytest.approx(math.log(2.0), abs=1e-9)


def test_kl_nonnegative_on_random_pairs():
    rng = np.random.default_rng(17)
    edges = np.linspace(0.0, 1.0, 21)
    for _ in range(1000):
        a = rng.dirichlet(np.full(20, rng.uniform(0.1, 3.0)))
        b = rng.dirichlet(np.full(20, rng.uniform(0.1, 3.0)))
        p = ip.Histogram(edges=edges, masses=a, total_count=int(rng.integers(10, 10**6)))
        q = ip.Histogram(edges=edges, masses=b, total_count=int(rng.integers(10, 10**6)))
        assert ip.kl_divergence(p, q) >= 0.0


def test_kl_bin_mismatch():
    p = ip.histogram([0.2, 0.4], 4, (0.0, 1.0))
    q = ip.histogram([0.2, 0.4], 4, (0.0, 2.0))
    with pytest.raises(ip.BinMismatch):
        ip.kl_divergence(p, q)
    with pytest.raises(ip.BinMismatch):
        ip.mse_cdf(p, q)


def test_mse_cdf_two_bin_hand_case():
    edges = np.linspace(0.0, 1.0, 3)
    p = ip.Histogram(edges=edges, masses=np.array([1.0, 0.0]), total_count=10)
    q = ip.Histogram(edges=edges, masses=np.array([0.0, 1.0]), total_count=10)
    assert ip.mse_cdf(p, q) == pytest.approx(0.5)


def test_pearson_exact_lines():
    x = np.arange(10.0)
    assert ip.pearson(x, 2 * x + 1) == pytest.approx(1.0, abs=1e-12)
    assert ip.pearson(x, -x) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_affine_invariance():
    rng = np.random.default_rng(3)
    x = rng.normal(0, 1, 500)
    y = x + rng.normal(0, 0.5, 500)
    r = ip.pearson(x, y)
    assert ip.pearson(3.0 * x + 7.0, y) == pytest.approx(r, abs=1e-12)
    assert ip.pearson(x, 0.2 * y - 4.0) == pytest.approx(r, abs=1e-12)


def test_pearson_degenerate():
    with pytest.raises(ip.DegenerateInput):
        ip.pearson([1.0], [2.0])
    with pytest.raises(ip.DegenerateInput):
        ip.pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_pearson_duration_amplitude_coupling():
    cfg = make_chain_config(entry=(4e-5, 2e-5, 1e-5))
    ch = ip.build_chain(cfg)
    trace, _ = ip.generate(ch, 10_000_000, seed=21)
    events = ip.detect_impulses(trace, "universal").events
    assert len(events) >= 300
    r = ip.pearson([e.duration for e in events], [e.amplitude for e in events])
    assert r > 0.5


def test_periodogram_parseval():
    rng = np.random.default_rng(9)
    for duration in (17, 64, 111):
        x = rng.normal(0, 2, duration)
        power = ip.event_periodogram(x, 128, sampling_rate_hz=5e9)
        integral = power.sum() * (5e9 / 128)
        assert integral == pytest.approx(np.mean(x ** 2), rel=1e-6)


def test_impulse_spectrum_sinusoid_peak_exact_bin():
    fs = 1.0
    n_fft = 256
    k = 10
    x = np.zeros(10_000)
    t = np.arange(n_fft)
    x[1000:1000 + n_fft] = 5.0 * np.sin(2 * np.pi * k / n_fft * t)
    trace = ip.NoiseTrace(x, fs)
    events = ip.segment_impulses(trace, ip.DetectionConfig(th_a=1.0, th_d=10))
    spec = ip.impulse_spectrum(events, trace, n_fft)
    assert int(np.argmax(spec.power)) == k


def test_impulse_spectrum_white_noise_flat():
    rng = np.random.default_rng(30)
    fs = 2.0
    sigma = 1.5
    n_events, dur = 400, 64
    x = np.zeros(n_events * 2 * dur)
    events = []
    for i in range(n_events):
        s = 2 * dur * i
        x[s:s + dur] = rng.normal(0, sigma, dur)
        events.append(ip.ImpulseEvent(start=s, duration=dur, amplitude=1.0,
                                      iat=None, iit=None, truncated=False))
    spec = ip.impulse_spectrum(events, ip.NoiseTrace(x, fs), dur)
    x32 = x.astype(np.float32)
    level = np.full(spec.power.size, 2 * sigma ** 2 / fs)
    level[0] = sigma ** 2 / fs
    level[-1] = sigma ** 2 / fs
    rel_se = np.sqrt(2.0 / n_events)  # |X_k|^2 is ~exponential per event
    assert (np.abs(spec.power - level) <= 5 * rel_se * level).all()


def test_impulse_spectrum_validation():
    x = np.zeros(1000)
    x[100:180] = 3.0
    trace = ip.NoiseTrace(x)
    events = ip.segment_impulses(trace, ip.DetectionConfig(th_a=1.0, th_d=2))
    with pytest.raises(ip.TooShort):
        ip.impulse_spectrum(events, trace, 64)  # event longer than fft
    with pytest.raises(ip.DomainError):
        ip.impulse_spectrum(events, trace, 100)  # not a power of two
    with pytest.raises(ip.TooShort):
        ip.impulse_spectrum([], trace, 128)


def test_impulse_spectrum_order_independent():
    rng = np.random.default_rng(40)
    x = rng.normal(0, 1, 5000)
    trace = ip.NoiseTrace(x, 1.0)
    events = [ip.ImpulseEvent(start=100 * i, duration=50 + i, amplitude=1.0,
                              iat=None, iit=None, truncated=False)
              for i in range(20)]
    a = ip.impulse_spectrum(events, trace, 128)
    b = ip.impulse_spectrum(events[::-1], trace, 128)
    assert np.abs(a.power - b.power).max() <= 1e-12 * a.power.max()


def test_trace_spectrum_row_count_and_peak():
    fs = 1.0
    n = 1 << 14
    t = np.arange(n)
    x = np.sin(2 * np.pi * (40 / 1024) * t)
    spec = ip.trace_spectrum(ip.NoiseTrace(x, fs), 1024)
    assert spec.power.size == 513
    assert int(np.argmax(spec.power)) == 40


def test_compare_report_self_comparison_is_zero():
    cfg = make_chain_config(entry=(4e-5, 2e-5, 1e-5))
    ch = ip.build_chain(cfg)
    trace, _ = ip.generate(ch, 1_000_000, seed=55)
    cc = ip.CompareConfig(threshold_mode="universal",
                          band_centers_hz=(0.1, 0.25), band_halfwidth_hz=0.02)
    result = ip.compare_report(trace, {"self": trace}, cc)
    report = result.reports["self"]
    for scores in report.characteristics.values():
        assert scores.kl == 0.0
        assert scores.mse_cdf == 0.0
    for gap in report.band_gaps_db.values():
        assert gap == 0.0


def test_compare_report_failures_do_not_stop_run():
    cfg = make_chain_config(entry=(4e-5, 2e-5, 1e-5))
    ch = ip.build_chain(cfg)
    measured, _ = ip.generate(ch, 1_000_000, seed=56)
    good, _ = ip.generate(ch, 1_000_000, seed=57)
    rng = np.random.default_rng(58)
    pure = ip.NoiseTrace(np.clip(rng.normal(0, 1, 1_000_000), -4.0, 4.0))
    cc = ip.CompareConfig(threshold_mode="universal",
                          band_centers_hz=(0.1,), band_halfwidth_hz=0.02)
    result = ip.compare_report(measured, {"good": good, "broken": pure}, cc)
    assert "good" in result.reports
    assert "broken" in result.failures
    assert isinstance(result.failures["broken"], ip.ToolkitError)


def test_compare_report_chain_beats_bg_single_seed():
    truth = ip.build_chain(make_chain_config(entry=(4e-5, 2e-5, 1e-5)))
    measured, _ = ip.generate(truth, 2_000_000, seed=60)
    rep = ip.fit_chain(measured, ip.FitOptions(threshold_mode="universal"))
    bg = ip.fit_bg_memory(measured, threshold_mode="universal")
    chain_trace, _ = ip.generate(ip.build_chain(rep.config), 2_000_000, seed=61)
    bg_trace = ip.generate_bg(bg, 2_000_000, seed=62)
    cc = ip.CompareConfig(threshold_mode="universal", bin_count=50,
                          band_centers_hz=(0.16,), band_halfwidth_hz=0.02)
    result = ip.compare_report(measured, {"chain": chain_trace, "bg": bg_trace}, cc)
    amp = "impulse_amplitude"
    assert (result.reports["chain"].characteristics[amp].kl
            < result.reports["bg"].characteristics[amp].kl)
