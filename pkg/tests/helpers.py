"""Shared builders for test configurations and synthetic traces."""

import numpy as np

from impnoise import ChainConfig, NoiseTrace, SystemConfig


def make_chain_config(m=(14.0, 22.0, 34.0), rel_std=0.02,
                      entry=(2e-5, 1e-5, 5e-6), dwell=(10.0, 20.0, 70.0),
                      f0=0.16, states_per_system=6, background_variance=1.0,
                      sampling_rate_hz=1.0):
    """Chain config from group-ordered amplitude means and dwell targets.

    ``m`` and ``dwell`` are ordered group 1..3 (smallest amplitude first);
    the systems tuple is assembled largest first as the config requires.
    Group mean durations come out as (d1, d1+d2, d1+d2+d3).
    """
    stay = 1.0 - states_per_system * f0
    q = tuple(1.0 / t for t in dwell)
    systems = (SystemConfig(m[2], (rel_std * m[2]) ** 2, q[2]),
               SystemConfig(m[1], (rel_std * m[1]) ** 2, q[1]),
               SystemConfig(m[0], (rel_std * m[0]) ** 2, q[0]))
    return ChainConfig(systems=systems, entry_probs=tuple(entry),
                       stay_prob=stay, background_variance=background_variance,
                       sampling_rate_hz=sampling_rate_hz,
                       states_per_system=states_per_system)


def bernoulli_gaussian(rng, n, lam, sigma0, sigma1):
    """I.i.d. two-component Gaussian variance mixture (the moments oracle)."""
    mask = rng.random(n) < lam
    return np.where(mask, rng.normal(0.0, sigma0, n), rng.normal(0.0, sigma1, n))


def sine_burst_trace(n, burst_starts, burst_len, freq_cycles, amplitude,
                     sampling_rate_hz=1.0, noise_std=0.0, seed=0):
    """Zeros (or faint noise) with sinusoid bursts at given start indices."""
    rng = np.random.default_rng(seed)
    x = (rng.normal(0.0, noise_std, n) if noise_std > 0
         else np.zeros(n)).astype(np.float64)
    t = np.arange(burst_len)
    burst = amplitude * np.sin(2.0 * np.pi * freq_cycles * t)
    for s in burst_starts:
        x[s:s + burst_len] += burst
    return NoiseTrace(x, sampling_rate_hz)


def alternating_burst(n, starts, burst_len, amplitude):
    """Zeros with +A/-A alternating bursts (oscillation at the Nyquist rate)."""
    x = np.zeros(n)
    pattern = amplitude * (-1.0) ** np.arange(burst_len)
    for s in starts:
        x[s:s + burst_len] = pattern
    return NoiseTrace(x, 1.0)
