"""Estimate every chain parameter from a measured trace.

The pipeline runs detection, splits the detected amplitudes into three
equal-width intervals (groups), estimates per-group Gaussian amplitude
statistics and mean durations, derives entry probabilities from event
counts, reads the oscillation frequency off the averaged impulse
spectrum, telescopes group durations into per-system dwell targets and
assembles a validated chain configuration.
"""

import contextlib
from dataclasses import dataclass

import numpy as np

from . import chain as chain_mod
from . import detect as detect_mod
from . import metrics as metrics_mod
from .errors import (DomainError, EmptyGroup, TooFewEvents, TooShort,
                     ToolkitError)


@dataclass(frozen=True)
class GroupStats:
    """Amplitude interval, population and fitted statistics of one group."""

    group: int
    amplitude_lo: float
    amplitude_hi: float
    count: int
    amplitude_mean: float
    amplitude_variance: float
    mean_duration: float


@dataclass(frozen=True)
class FitOptions:
    states_per_system: int = 6
    threshold_mode: str = "fixed"       # "fixed" (5 sigma0) or "universal"
    universal_window: int | None = None
    min_events_per_group: int = 10      # thinner groups only produce a warning
    fft_size: int | None = None
    exclude_truncated_durations: bool = True


@dataclass(frozen=True)
class FitDiagnostics:
    event_count: int
    truncated_count: int
    osc_freq_cycles: float
    warnings: tuple


@dataclass(frozen=True)
class FitReport:
    config: chain_mod.ChainConfig
    groups: tuple
    detection: detect_mod.DetectionConfig
    moments: detect_mod.MomentsFit
    diagnostics: FitDiagnostics


@contextlib.contextmanager
def _stage(name):
    # Tag errors with the pipeline stage that raised them.
    try:
        yield
    except ToolkitError as err:
        if err.stage is None:
            err.stage = name
        raise


def classify_groups(events, exclude_truncated_durations=True):
    """Split events into three equal-width amplitude intervals.

    Boundary amplitudes belong to the lower interval. Returns GroupStats
    for groups 1 (smallest) through 3. Amplitude statistics are
    maximum-likelihood Gaussian fits (sample mean, biased sample
    variance); durations of boundary-truncated events are excluded from
    the mean duration unless a group would end up empty.
    """
    events = list(events)
    if len(events) < 3:
        raise TooFewEvents(f"need at least 3 events to form groups, got {len(events)}")
    amps = np.array([ev.amplitude for ev in events])
    lo = float(amps.min())
    hi = float(amps.max())
    if not (hi > lo):
        raise EmptyGroup(
            f"zero amplitude spread, all events at {lo}; cannot form intervals",
            lo=lo, hi=hi)
    width = (hi - lo) / 3.0
    assignment = np.clip(np.ceil((amps - lo) / width).astype(int), 1, 3)

    groups = []
    for g in (1, 2, 3):
        sel = assignment == g
        count = int(np.count_nonzero(sel))
        g_lo = lo + (g - 1) * width
        g_hi = lo + g * width
        if count == 0:
            raise EmptyGroup(
                f"amplitude interval {g} [{g_lo}, {g_hi}] received no events",
                group=g, lo=g_lo, hi=g_hi)
        g_events = [ev for ev, keep in zip(events, sel) if keep]
        g_amps = amps[sel]
        durations = [ev.duration for ev in g_events
                     if not (exclude_truncated_durations and ev.truncated)]
        if not durations:
            durations = [ev.duration for ev in g_events]
        groups.append(GroupStats(
            group=g,
            amplitude_lo=g_lo,
            amplitude_hi=g_hi,
            count=count,
            amplitude_mean=float(g_amps.mean()),
            amplitude_variance=float(g_amps.var()),
            mean_duration=float(np.mean(durations))))
    return tuple(groups)


def estimate_entry_probs(groups, background_sample_count):
    """Background-to-system transition probabilities from event counts.

    Every impulse start is one background-to-entry transition, so the
    maximum-likelihood estimate is the per-group event count divided by
    the number of background samples. Returns (p_group1, p_group2,
    p_group3).
    """
    background_sample_count = int(background_sample_count)
    if background_sample_count < 1:
        raise DomainError("background sample count must be at least 1")
    probs = tuple(g.count / background_sample_count for g in groups)
    if sum(probs) >= 1.0:
        raise DomainError(
            f"entry probabilities sum to {sum(probs)}, more impulse starts "
            "than background samples; malformed input")
    return probs


def estimate_osc_freq(events, trace, states_per_system=6, fft_size=None):
    """Frequency (cycles per sample) of the largest impulse-spectrum peak.

    Uses only events long enough to resolve at least two oscillation
    periods; the DC bin is excluded from the peak search.
    """
    min_duration = 2 * states_per_system
    long_events = [ev for ev in events if ev.duration >= min_duration]
    if not long_events:
        raise TooShort(
            f"no event of duration >= {min_duration} samples for a spectral estimate")
    spectrum = metrics_mod.impulse_spectrum(long_events, trace, fft_size)
    peak = int(np.argmax(spectrum.power[1:])) + 1
    return float(spectrum.freq_hz[peak] / trace.sampling_rate_hz)


def system_dwell_targets(d1, d2, d3):
    """Telescope group mean durations into per-system dwell targets.

    A group-i impulse traverses systems i down to 1, so its expected
    duration is the sum of the dwell targets of those systems: T1 = d1,
    T2 = d2 - T1, T3 = d3 - T2 - T1. Targets that telescope below one
    sample are clamped to 1 and flagged.

    Returns ``(targets, clamped)``, two 3-tuples ordered by group index.
    """
    for name, d in (("d1", d1), ("d2", d2), ("d3", d3)):
        if not (d >= 1):
            raise DomainError(f"mean duration {name} must be >= 1 sample, got {d}")
    t1 = float(d1)
    t2 = float(d2) - t1
    c2 = t2 < 1.0
    t2 = max(t2, 1.0)
    t3 = float(d3) - t2 - t1
    c3 = t3 < 1.0
    t3 = max(t3, 1.0)
    return (t1, t2, t3), (False, c2, c3)


def fit_chain(trace, options=None):
    """Run the full estimation pipeline and assemble a validated config.

    Any stage error propagates with a ``stage`` tag naming the step that
    failed.
    """
    opts = options or FitOptions()
    warnings = []

    with _stage("background_variance"):
        moments = detect_mod.estimate_background_variance(trace)
    with _stage("amplitude_threshold"):
        if opts.threshold_mode == "fixed":
            th_a = detect_mod.amplitude_threshold(moments)
        elif opts.threshold_mode == "universal":
            th_a = detect_mod.amplitude_threshold(
                moments, opts.universal_window or len(trace))
        else:
            raise DomainError(f"unknown threshold mode {opts.threshold_mode!r}")
    with _stage("gap_sequence"):
        gaps = detect_mod.gap_sequence(trace, th_a)
    with _stage("duration_threshold"):
        th_d = detect_mod.duration_threshold(gaps)
    detection = detect_mod.DetectionConfig(th_a=th_a, th_d=th_d)
    with _stage("segment_impulses"):
        events = detect_mod.segment_impulses(trace, detection)
    with _stage("classify_groups"):
        groups = classify_groups(events, opts.exclude_truncated_durations)
    for g in groups:
        if g.count < opts.min_events_per_group:
            warnings.append(
                f"group {g.group} has only {g.count} events "
                f"(minimum for a trustworthy fit: {opts.min_events_per_group})")

    impulse_samples = sum(ev.duration for ev in events)
    background_count = len(trace) - impulse_samples
    with _stage("entry_probs"):
        entry_probs = estimate_entry_probs(groups, background_count)
    with _stage("osc_freq"):
        freq = estimate_osc_freq(events, trace, opts.states_per_system,
                                 opts.fft_size)
    with _stage("stay_prob"):
        stay_prob = chain_mod.oscillation_stay_prob(freq, opts.states_per_system)
    with _stage("dwell_targets"):
        targets, clamped = system_dwell_targets(groups[0].mean_duration,
                                                groups[1].mean_duration,
                                                groups[2].mean_duration)
    for g, was_clamped in zip((1, 2, 3), clamped):
        if was_clamped:
            warnings.append(
                f"dwell target for system {g} clamped to 1 sample "
                "(group durations are not increasing)")

    exit_probs = []
    for g, target in zip((1, 2, 3), targets):
        q = 1.0 / target
        cap = 1.0 - stay_prob
        if q > cap:
            q = cap
            warnings.append(
                f"exit probability for system {g} capped at 1 - stay_prob = {cap}")
        if q >= 1.0:
            q = 1.0 - 1e-9
            warnings.append(f"exit probability for system {g} capped below 1")
        exit_probs.append(q)

    sigma0_sq = moments.background_variance
    variances = []
    for g in groups:
        var = g.amplitude_variance
        if var <= 1e-12 * max(1.0, g.amplitude_mean ** 2):
            var = sigma0_sq
            warnings.append(
                f"group {g.group} amplitude variance degenerate "
                f"({g.count} events); substituted the background variance")
        variances.append(var)

    systems = tuple(
        chain_mod.SystemConfig(amplitude_mean=groups[g - 1].amplitude_mean,
                               amplitude_variance=variances[g - 1],
                               exit_prob=exit_probs[g - 1])
        for g in (3, 2, 1))
    config = chain_mod.ChainConfig(
        systems=systems,
        entry_probs=entry_probs,
        stay_prob=stay_prob,
        background_variance=sigma0_sq,
        sampling_rate_hz=trace.sampling_rate_hz,
        states_per_system=opts.states_per_system)
    with _stage("build_chain"):
        chain_mod.build_chain(config)

    diagnostics = FitDiagnostics(
        event_count=len(events),
        truncated_count=sum(1 for ev in events if ev.truncated),
        osc_freq_cycles=freq,
        warnings=tuple(warnings))
    return FitReport(config=config, groups=groups, detection=detection,
                     moments=moments, diagnostics=diagnostics)
