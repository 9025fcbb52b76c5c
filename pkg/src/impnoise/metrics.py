"""Fidelity metrics: histogram divergences, impulse spectra, correlation.

Comparisons follow a fixed recipe: detect impulses on both traces, build
histograms of each characteristic on edges derived from the measured
trace, then score the model with the KL coefficient and the mean squared
error of the cumulative distributions, plus averaged impulse power
spectra around chosen carrier bands.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import detect
from .errors import (BinMismatch, DegenerateInput, DomainError, EmptyInput,
                     TooShort, ToolkitError)

CHARACTERISTICS = ("samples_value", "impulse_duration", "iat", "impulse_amplitude")


@dataclass(frozen=True, eq=False)
class Histogram:
    """Uniform-width probability histogram.

    ``clipped`` counts values that fell outside the range and were
    assigned to the end bins.
    """

    edges: np.ndarray
    masses: np.ndarray
    total_count: int
    clipped: int = 0

    @property
    def bin_count(self):
        return self.masses.size


def histogram(values, bin_count, value_range=None):
    """Bin values into a uniform histogram, clipping outliers to end bins."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptyInput("cannot build a histogram from no values")
    if bin_count < 2:
        raise DegenerateInput(f"bin_count must be at least 2, got {bin_count}")
    if value_range is None:
        value_range = (float(values.min()), float(values.max()))
    lo, hi = (float(value_range[0]), float(value_range[1]))
    if not (hi > lo):
        raise DegenerateInput(f"histogram range must be nondegenerate, got [{lo}, {hi}]")
    clipped = int(np.count_nonzero((values < lo) | (values > hi)))
    edges = np.linspace(lo, hi, bin_count + 1)
    counts, _ = np.histogram(np.clip(values, lo, hi), bins=edges)
    masses = counts / values.size
    edges.setflags(write=False)
    masses.setflags(write=False)
    return Histogram(edges=edges, masses=masses, total_count=values.size,
                     clipped=clipped)


def _check_same_edges(p, q):
    if p.edges.shape != q.edges.shape or not np.array_equal(p.edges, q.edges):
        raise BinMismatch("histograms do not share identical bin edges")


def _smoothed(h):
    # Additive smoothing tied to the sample count, so it vanishes as the
    # histogram converges; identical histograms smooth identically.
    eps = 1.0 / (10.0 * h.total_count)
    return (h.masses + eps) / (1.0 + h.bin_count * eps)


def kl_divergence(p, q):
    """KL coefficient sum(p * ln(p / q)) with measured p, model q.

    Both operands receive additive smoothing scaled by their own sample
    counts, which keeps the coefficient finite on empty bins and makes
    KL(p, p) exactly zero.
    """
    _check_same_edges(p, q)
    ps = _smoothed(p)
    qs = _smoothed(q)
    return float(np.sum(ps * np.log(ps / qs)))


def mse_cdf(p, q):
    """Mean squared difference between the cumulative distributions."""
    _check_same_edges(p, q)
    diff = np.cumsum(p.masses) - np.cumsum(q.masses)
    return float(np.mean(diff * diff))


def pearson(durations, amplitudes):
    """Sample Pearson correlation between paired observations."""
    x = np.asarray(durations, dtype=np.float64).ravel()
    y = np.asarray(amplitudes, dtype=np.float64).ravel()
    if x.size != y.size:
        raise DegenerateInput(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise DegenerateInput("need at least two paired observations")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt(np.sum(xc * xc)))
    sy = float(np.sqrt(np.sum(yc * yc)))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInput("zero variance in one of the variables")
    return float(np.sum(xc * yc) / (sx * sy))


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def event_periodogram(samples, fft_size, sampling_rate_hz):
    """One-sided power spectrum of one event, zero-padded to fft_size.

    Normalized so that sum(power) * (fs / fft_size) equals the event's
    mean-square value (discrete Parseval identity).
    """
    x = np.asarray(samples, dtype=np.float64)
    spec = np.fft.rfft(x, n=fft_size)
    power = np.abs(spec) ** 2
    weights = np.full(power.size, 2.0)
    weights[0] = 1.0
    if fft_size % 2 == 0:
        weights[-1] = 1.0
    return weights * power / (sampling_rate_hz * x.size)


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Averaged one-sided power spectrum with its frequency axis."""

    freq_hz: np.ndarray
    power: np.ndarray
    fft_size: int
    event_count: int


def impulse_spectrum(events, trace, fft_size=None, window=None):
    """Arithmetic mean of per-event periodograms.

    Events shorter than fft_size are zero-padded; by default no taper is
    applied (pass ``window="hann"`` to taper, which trades the Parseval
    identity for reduced leakage).
    """
    events = list(events)
    if not events:
        raise TooShort("no events to average a spectrum over")
    longest = max(ev.duration for ev in events)
    if fft_size is None:
        fft_size = 1 << max(6, (longest - 1).bit_length())
    fft_size = int(fft_size)
    if not _is_pow2(fft_size):
        raise DomainError(f"fft_size must be a power of two, got {fft_size}")
    if fft_size < longest:
        raise TooShort(
            f"fft_size {fft_size} smaller than the longest event ({longest})")
    fs = trace.sampling_rate_hz
    acc = np.zeros(fft_size // 2 + 1)
    for ev in events:
        x = trace.samples[ev.start:ev.end + 1].astype(np.float64)
        if window == "hann":
            x = x * np.hanning(x.size)
        elif window is not None:
            raise DegenerateInput(f"unknown window {window!r}")
        acc += event_periodogram(x, fft_size, fs)
    power = acc / len(events)
    freq = np.fft.rfftfreq(fft_size, d=1.0 / fs)
    freq.setflags(write=False)
    power.setflags(write=False)
    return SpectrumResult(freq_hz=freq, power=power, fft_size=fft_size,
                          event_count=len(events))


def trace_spectrum(trace, fft_size):
    """Segment-averaged periodogram of a whole trace.

    The trace is cut into consecutive non-overlapping fft_size segments
    (a single zero-padded segment if shorter than fft_size) and their
    periodograms averaged.
    """
    fft_size = int(fft_size)
    if not _is_pow2(fft_size):
        raise DomainError(f"fft_size must be a power of two, got {fft_size}")
    x = trace.samples
    fs = trace.sampling_rate_hz
    n_segments = x.size // fft_size
    acc = np.zeros(fft_size // 2 + 1)
    if n_segments == 0:
        acc += event_periodogram(x.astype(np.float64), fft_size, fs)
        n_segments = 1
    else:
        for i in range(n_segments):
            seg = x[i * fft_size:(i + 1) * fft_size].astype(np.float64)
            acc += event_periodogram(seg, fft_size, fs)
    freq = np.fft.rfftfreq(fft_size, d=1.0 / fs)
    freq.setflags(write=False)
    power = acc / n_segments
    power.setflags(write=False)
    return SpectrumResult(freq_hz=freq, power=power, fft_size=fft_size,
                          event_count=n_segments)


@dataclass(frozen=True)
class CompareConfig:
    """Knobs for measured-vs-model comparison."""

    bin_count: int = 200
    fft_size: int | None = None
    band_centers_hz: tuple = (900e6, 1.8e9, 2.4e9)
    band_halfwidth_hz: float = 50e6
    threshold_mode: str = "fixed"
    universal_window: int | None = None


@dataclass(frozen=True)
class CharacteristicScores:
    kl: float
    mse_cdf: float


@dataclass(frozen=True)
class MetricsReport:
    """Divergence scores of one model against the measured trace."""

    characteristics: dict
    band_gaps_db: dict
    pearson_duration_amplitude: float
    kl_log_base: str = "e"


@dataclass(frozen=True)
class ComparisonResult:
    reports: dict
    failures: dict
    measured_pearson: float


def _event_values(trace, events):
    values = {"samples_value": trace.samples}
    values["impulse_duration"] = np.array([ev.duration for ev in events], dtype=float)
    values["impulse_amplitude"] = np.array([ev.amplitude for ev in events], dtype=float)
    values["iat"] = np.array([ev.iat for ev in events if ev.iat is not None],
                             dtype=float)
    return values


def _band_gaps(measured_spec, model_spec, config):
    gaps = {}
    freq = measured_spec.freq_hz
    for center in config.band_centers_hz:
        sel = np.abs(freq - center) <= config.band_halfwidth_hz
        if not np.any(sel):
            gaps[center] = math.nan
            continue
        with np.errstate(divide="ignore"):
            m_db = 10.0 * np.log10(measured_spec.power[sel])
            q_db = 10.0 * np.log10(model_spec.power[sel])
        gaps[center] = float(np.mean(np.abs(m_db - q_db)))
    return gaps


def compare_report(measured, model_traces, config=None):
    """Score each model trace against the measured trace.

    ``model_traces`` maps a model name to its generated NoiseTrace. Per
    characteristic the histograms share edges spanning the measured
    trace's observed range. Failures of individual models are collected
    and do not stop the remaining comparisons.
    """
    config = config or CompareConfig()
    det_m = detect.detect_impulses(measured, config.threshold_mode,
                                   config.universal_window)
    values_m = _event_values(measured, det_m.events)
    ranges = {}
    hists_m = {}
    for name in CHARACTERISTICS:
        v = values_m[name]
        if v.size == 0:
            raise TooShort(f"measured trace yields no values for {name}")
        ranges[name] = (float(v.min()), float(v.max()))
        if not ranges[name][1] > ranges[name][0]:
            # Degenerate spread (e.g. all durations equal): widen by one unit.
            ranges[name] = (ranges[name][0] - 0.5, ranges[name][1] + 0.5)
        hists_m[name] = histogram(v, config.bin_count, ranges[name])
    try:
        measured_r = pearson(values_m["impulse_duration"],
                             values_m["impulse_amplitude"])
    except DegenerateInput:
        measured_r = math.nan

    reports = {}
    failures = {}
    for model_name, trace in model_traces.items():
        try:
            det_q = detect.detect_impulses(trace, config.threshold_mode,
                                           config.universal_window)
            values_q = _event_values(trace, det_q.events)
            scores = {}
            for name in CHARACTERISTICS:
                if values_q[name].size == 0:
                    raise TooShort(f"model {model_name} yields no values for {name}")
                hq = histogram(values_q[name], config.bin_count, ranges[name])
                scores[name] = CharacteristicScores(
                    kl=kl_divergence(hists_m[name], hq),
                    mse_cdf=mse_cdf(hists_m[name], hq))
            longest = max(max(ev.duration for ev in det_m.events),
                          max(ev.duration for ev in det_q.events))
            fft_size = config.fft_size or (1 << max(6, (longest - 1).bit_length()))
            spec_m = impulse_spectrum(det_m.events, measured, fft_size)
            spec_q = impulse_spectrum(det_q.events, trace, fft_size)
            try:
                model_r = pearson(values_q["impulse_duration"],
                                  values_q["impulse_amplitude"])
            except DegenerateInput:
                model_r = math.nan
            reports[model_name] = MetricsReport(
                characteristics=scores,
                band_gaps_db=_band_gaps(spec_m, spec_q, config),
                pearson_duration_amplitude=model_r)
        except ToolkitError as err:
            failures[model_name] = err
    return ComparisonResult(reports=reports, failures=failures,
                            measured_pearson=measured_r)
