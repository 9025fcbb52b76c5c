"""Comparison models: Bernoulli-Gaussian with memory and Middleton Class-A.

The two-state model keeps the chain's switching behaviour but collapses
all impulsive states into one zero-mean Gaussian state; Class-A is the
classic i.i.d. Poisson-weighted Gaussian mixture.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import chain as chain_mod
from . import detect as detect_mod
from .errors import DomainError, InvalidConfig, NoRoot
from .trace import NoiseTrace

_SOLVER_BOX = (1e-6, 10.0)
_CLASS_A_CHUNK = 1 << 22


@dataclass(frozen=True)
class BGMemoryParams:
    """Two-state chain: background/impulse stay probabilities and variances."""

    background_stay_prob: float
    impulse_stay_prob: float
    background_variance: float
    impulse_variance: float


@dataclass(frozen=True)
class ClassAParams:
    """Poisson-weighted Gaussian mixture of the Class-A density.

    ``impulsive_index`` is the impulse occurrence rate (the Poisson
    mean), ``power_ratio`` the Gaussian-to-impulsive power ratio,
    ``total_variance`` the variance of the full noise, and
    ``truncation_order`` the largest mixture order kept.
    """

    impulsive_index: float
    power_ratio: float
    total_variance: float
    truncation_order: int


def _validate_bg(params):
    # stay probability of exactly 1 is the degenerate pure-background model
    if not (0.0 <= params.background_stay_prob <= 1.0):
        raise InvalidConfig("background_stay_prob must lie in [0, 1]",
                            field="background_stay_prob")
    if not (0.0 <= params.impulse_stay_prob < 1.0):
        raise InvalidConfig("impulse_stay_prob must lie in [0, 1)",
                            field="impulse_stay_prob")
    if not (params.background_variance > 0):
        raise InvalidConfig("background_variance must be positive",
                            field="background_variance")
    if not (params.impulse_variance > params.background_variance):
        raise InvalidConfig("impulse_variance must exceed background_variance",
                            field="impulse_variance")


def _validate_class_a(params):
    if not (params.impulsive_index > 0):
        raise InvalidConfig("impulsive_index must be positive",
                            field="impulsive_index")
    if not (params.power_ratio > 0):
        raise InvalidConfig("power_ratio must be positive", field="power_ratio")
    if not (params.total_variance > 0):
        raise InvalidConfig("total_variance must be positive",
                            field="total_variance")
    if params.truncation_order < 1:
        raise InvalidConfig("truncation_order must be at least 1",
                            field="truncation_order")


def fit_bg_memory(trace, threshold_mode="fixed", universal_window=None):
    """Fit the two-state model from detected impulses.

    The background-to-impulse probability comes from the impulse count
    over the background samples, the impulse stay probability from the
    inverted geometric mean dwell (p = 1 - 1/mean duration), and the two
    variances are the sample variances of background-labeled and
    impulse-labeled samples.
    """
    result = detect_mod.detect_impulses(trace, threshold_mode, universal_window)
    events = result.events
    mask = detect_mod.impulse_mask(len(trace), events)
    impulse_count = int(mask.sum())
    background_count = len(trace) - impulse_count
    if background_count < 1:
        raise DomainError("trace contains no background samples")
    p_leave_bg = len(events) / background_count
    if p_leave_bg >= 1.0:
        raise DomainError("more impulse starts than background samples")
    durations = [ev.duration for ev in events if not ev.truncated]
    if not durations:
        durations = [ev.duration for ev in events]
    mean_duration = float(np.mean(durations))
    x = trace.samples.astype(np.float64)
    params = BGMemoryParams(
        background_stay_prob=1.0 - p_leave_bg,
        impulse_stay_prob=1.0 - 1.0 / mean_duration,
        background_variance=float(np.mean(x[~mask] ** 2)),
        impulse_variance=float(np.mean(x[mask] ** 2)))
    _validate_bg(params)
    return params


def generate_bg(params, n, seed, sampling_rate_hz=1.0, return_path=False):
    """Generate n samples from the two-state chain (zero-mean emissions)."""
    _validate_bg(params)
    n = int(n)
    if n < 1:
        raise DomainError(f"sample count must be at least 1, got {n}")
    pb = params.background_stay_prob
    pi = params.impulse_stay_prob
    matrix = np.array([[pb, 1.0 - pb], [1.0 - pi, pi]])
    means = np.zeros(2)
    stds = np.sqrt([params.background_variance, params.impulse_variance])
    rng = np.random.default_rng(seed)
    path = chain_mod.simulate_states(matrix, n, rng)
    samples = chain_mod.emit_samples(path, means, stds, rng)
    trace = NoiseTrace(samples, sampling_rate_hz)
    if return_path:
        return trace, path
    return trace


def class_a_weights(params):
    """Poisson weights e^-A A^m / m! for m = 0..M, plus the dropped tail.

    Computed in log space so large impulsive indices do not underflow.
    """
    a = params.impulsive_index
    m = np.arange(params.truncation_order + 1, dtype=np.float64)
    log_w = -a + np.concatenate(([0.0], np.cumsum(np.log(a / m[1:]))))
    weights = np.exp(log_w)
    tail = max(0.0, 1.0 - float(weights.sum()))
    return weights, tail


def class_a_sigma_sq(params):
    """Per-order mixture variances sigma_m^2 = sigma^2 (m/A + ratio)/(1 + ratio)."""
    m = np.arange(params.truncation_order + 1, dtype=np.float64)
    scale = (m / params.impulsive_index + params.power_ratio) / (1.0 + params.power_ratio)
    return params.total_variance * scale


def class_a_pdf(x, params):
    """Truncated Class-A density, evaluated elementwise.

    The sum is kept truncated (it integrates to 1 minus the reported
    Poisson tail); use :func:`class_a_weights` for the tail bound.
    """
    _validate_class_a(params)
    weights, _ = class_a_weights(params)
    sigma_sq = class_a_sigma_sq(params)
    x = np.asarray(x, dtype=np.float64)
    x2 = x * x
    density = np.zeros_like(x2)
    for w, var in zip(weights, sigma_sq):
        density += w / np.sqrt(2.0 * np.pi * var) * np.exp(-x2 / (2.0 * var))
    return density


def default_truncation(impulsive_index):
    """Truncation order keeping the Poisson tail below ~1e-12."""
    return max(20, math.ceil(impulsive_index + 10.0 * math.sqrt(impulsive_index)))


def _ratio_equations(e2, e4, e6):
    # Normalized moment ratios of the (untruncated) Class-A mixture:
    #   e4 / (3 e2^2)  = 1 + 1 / (A (1+G)^2)
    #   e6 / (15 e2^3) = 1 + 3 / (A (1+G)^2) + 1 / (A^2 (1+G)^3)
    r4 = e4 / (3.0 * e2 * e2)
    r6 = e6 / (15.0 * e2 ** 3)
    return r4, r6


def fit_class_a(trace):
    """Method-of-moments fit of (A, ratio, sigma^2).

    The total variance is the second moment. The fourth-moment equation
    pins A for any candidate ratio, leaving a one-dimensional root search
    on the sixth-moment residual, solved by bounded bisection over the
    ratio box; candidates whose implied A leaves the box are rejected.
    """
    e2, e4, e6, _ = detect_mod.even_moments(trace.samples)
    r4, r6 = _ratio_equations(e2, e4, e6)
    lo, hi = _SOLVER_BOX
    if r4 <= 1.0:
        raise NoRoot(
            f"fourth-moment ratio {r4} at or below the Gaussian value; "
            "no impulsive component", r4=r4, r6=r6)

    def residual(gamma):
        # Sixth-moment residual with A eliminated via the fourth moment:
        # 1/(A (1+G)^2) = r4 - 1 and 1/(A^2 (1+G)^3) = (r4 - 1)^2 (1+G).
        return (1.0 + 3.0 * (r4 - 1.0) + (r4 - 1.0) ** 2 * (1.0 + gamma)) - r6

    f_lo = residual(lo)
    f_hi = residual(hi)
    if f_lo > 0.0 or f_hi < 0.0:
        raise NoRoot(
            "moment ratios outside the attainable set of the mixture "
            f"(r4 = {r4}, r6 = {r6})", r4=r4, r6=r6)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if residual(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    gamma = 0.5 * (lo + hi)
    a = 1.0 / ((r4 - 1.0) * (1.0 + gamma) ** 2)
    box_lo, box_hi = _SOLVER_BOX
    if not (box_lo < a <= box_hi):
        raise NoRoot(
            f"implied impulsive index {a} outside the search box "
            f"(r4 = {r4}, r6 = {r6})", r4=r4, r6=r6, implied_index=a)
    params = ClassAParams(impulsive_index=a, power_ratio=gamma,
                          total_variance=e2,
                          truncation_order=default_truncation(a))
    _validate_class_a(params)
    return params


def generate_class_a(params, n, seed, sampling_rate_hz=1.0):
    """Draw n i.i.d. samples: a truncated-Poisson order, then a Gaussian."""
    _validate_class_a(params)
    n = int(n)
    if n < 1:
        raise DomainError(f"sample count must be at least 1, got {n}")
    weights, _ = class_a_weights(params)
    probs = weights / weights.sum()
    stds = np.sqrt(class_a_sigma_sq(params))
    rng = np.random.default_rng(seed)
    out = np.empty(n, dtype=np.float32)
    for start in range(0, n, _CLASS_A_CHUNK):
        stop = min(start + _CLASS_A_CHUNK, n)
        orders = rng.choice(probs.size, size=stop - start, p=probs)
        out[start:stop] = stds[orders] * rng.standard_normal(stop - start)
    return NoiseTrace(out, sampling_rate_hz)
