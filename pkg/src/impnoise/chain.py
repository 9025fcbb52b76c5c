"""Partitioned Markov chain: configuration, timing analysis, generation.

The chain has one background state emitting zero-mean Gaussian noise plus
three "impulsive systems": rings of 4 or 6 states whose emission means
trace one period of a sinusoid. Systems are chained by decreasing
amplitude, so a walk entering the largest system and draining through the
smaller ones produces a damped oscillating burst over the background.

State layout of the dense transition matrix (``k = states_per_system``):

    index 0              background
    indices 1 .. k       system 3 (largest amplitude)
    indices k+1 .. 2k    system 2
    indices 2k+1 .. 3k   system 1 (smallest amplitude)

Every state of system ``i`` keeps the shared ``stay_prob`` on the
diagonal, advances along its ring with ``1 - stay_prob - exit_prob`` and
leaves the system with ``exit_prob``, landing on the entry state of
system ``i - 1`` (the background for system 1). Group-``i`` impulses
start at the entry state of system ``i``, traversing the remaining
systems in damping order.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, InfeasibleOscillation, InvalidConfig
from .trace import NoiseTrace

_EMISSION_CHUNK = 1 << 22

_LOOP_AGREEMENT_RTOL = 1e-9


@dataclass(frozen=True)
class SystemConfig:
    """One impulsive system: peak emission statistics and per-step exit chance."""

    amplitude_mean: float
    amplitude_variance: float
    exit_prob: float


@dataclass(frozen=True)
class StateEmission:
    """Gaussian emission attached to one chain state."""

    mean: float
    variance: float


@dataclass(frozen=True)
class ChainConfig:
    """Full parameterization of the partitioned chain.

    ``systems`` is ordered largest amplitude first (system 3, 2, 1);
    ``entry_probs`` is ordered by group index (group 1, 2, 3), giving the
    per-step probability of leaving the background into the entry state
    of the matching system. ``stay_prob`` is shared by all impulsive
    states and controls the oscillation frequency.
    """

    systems: tuple
    entry_probs: tuple
    stay_prob: float
    background_variance: float
    sampling_rate_hz: float = 1.0
    states_per_system: int = 6

    def system(self, group):
        """SystemConfig for group index 1, 2 or 3."""
        return self.systems[3 - group]

    @property
    def exit_probs(self):
        return tuple(s.exit_prob for s in self.systems)


def validate_config(config):
    """Raise InvalidConfig / InfeasibleOscillation on the first violated invariant."""
    if config.states_per_system not in (4, 6):
        raise InvalidConfig(
            f"states_per_system must be 4 or 6, got {config.states_per_system}",
            field="states_per_system")
    if len(config.systems) != 3:
        raise InvalidConfig(
            f"exactly 3 impulsive systems required, got {len(config.systems)}",
            field="systems")
    if not (config.background_variance > 0):
        raise InvalidConfig("background_variance must be positive",
                            field="background_variance")
    if not (0.0 <= config.stay_prob < 1.0):
        raise InvalidConfig(f"stay_prob must lie in [0, 1), got {config.stay_prob}",
                            field="stay_prob")
    for rank, system in enumerate(config.systems):
        name = f"systems[{rank}] (system {3 - rank})"
        if not (system.amplitude_mean > 0):
            raise InvalidConfig(f"{name}: amplitude_mean must be positive",
                                field="amplitude_mean")
        if not (system.amplitude_variance > 0):
            raise InvalidConfig(f"{name}: amplitude_variance must be positive",
                                field="amplitude_variance")
        if not (0.0 < system.exit_prob < 1.0):
            raise InvalidConfig(f"{name}: exit_prob must lie in (0, 1)",
                                field="exit_prob")
        if config.stay_prob + system.exit_prob > 1.0:
            raise InfeasibleOscillation(
                f"{name}: stay_prob + exit_prob = "
                f"{config.stay_prob + system.exit_prob} exceeds 1",
                field="exit_prob")
    means = [s.amplitude_mean for s in config.systems]
    if not (means[0] > means[1] > means[2]):
        raise InvalidConfig(
            "amplitude means must strictly decrease along the damping chain "
            f"(system 3 > 2 > 1), got {tuple(means)}", field="systems")
    if len(config.entry_probs) != 3:
        raise InvalidConfig("entry_probs must hold one probability per group",
                            field="entry_probs")
    for i, p in enumerate(config.entry_probs):
        if not (0.0 <= p < 1.0):
            raise InvalidConfig(f"entry_probs[{i}] must lie in [0, 1), got {p}",
                                field="entry_probs")
    if not (sum(config.entry_probs) < 1.0):
        raise InvalidConfig("entry probabilities must sum to less than 1",
                            field="entry_probs")
    if not (config.sampling_rate_hz > 0):
        raise InvalidConfig("sampling_rate_hz must be positive",
                            field="sampling_rate_hz")


def emission_table(states_per_system, amplitude_mean, amplitude_variance,
                   background_variance):
    """Per-state emissions for one impulsive system.

    The means trace one sinusoid period; only the two peak states carry
    the system's amplitude variance, all other states reuse the
    background variance.
    """
    m = amplitude_mean
    s0 = background_variance
    si = amplitude_variance
    if states_per_system == 4:
        spec = ((0.0, s0), (m, si), (0.0, s0), (-m, si))
    elif states_per_system == 6:
        spec = ((m / 2, s0), (m, si), (m / 2, s0),
                (-m / 2, s0), (-m, si), (-m / 2, s0))
    else:
        raise InvalidConfig(f"states_per_system must be 4 or 6, got {states_per_system}",
                            field="states_per_system")
    return tuple(StateEmission(mean, var) for mean, var in spec)


@dataclass(frozen=True, eq=False)
class PartitionedChain:
    """Built chain: dense row-stochastic matrix plus per-state emissions.

    Immutable (arrays are read-only) and safe to share across threads;
    :func:`generate` is a pure function of (chain, n, seed).
    """

    config: ChainConfig
    matrix: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    labels: tuple
    state_systems: np.ndarray

    @property
    def n_states(self):
        return self.matrix.shape[0]

    def entry_state(self, group):
        """Index of the entry state of the system serving ``group``."""
        k = self.config.states_per_system
        return 1 + (3 - group) * k

    @property
    def emissions(self):
        return tuple(StateEmission(float(m), float(s * s))
                     for m, s in zip(self.means, self.stds))


def build_chain(config):
    """Assemble and validate the explicit transition matrix and emissions."""
    validate_config(config)
    k = config.states_per_system
    n_states = 1 + 3 * k
    matrix = np.zeros((n_states, n_states))
    means = np.zeros(n_states)
    variances = np.full(n_states, config.background_variance)
    labels = ["0"]
    state_systems = np.zeros(n_states, dtype=np.int8)

    matrix[0, 0] = 1.0 - sum(config.entry_probs)
    for group in (1, 2, 3):
        entry = 1 + (3 - group) * k
        matrix[0, entry] = config.entry_probs[group - 1]

    for block, system in enumerate(config.systems):
        sys_no = 3 - block
        base = 1 + block * k
        exit_target = base + k if block < 2 else 0
        table = emission_table(k, system.amplitude_mean,
                               system.amplitude_variance,
                               config.background_variance)
        advance = 1.0 - config.stay_prob - system.exit_prob
        for j in range(k):
            s = base + j
            matrix[s, s] = config.stay_prob
            matrix[s, base + (j + 1) % k] += advance
            matrix[s, exit_target] += system.exit_prob
            means[s] = table[j].mean
            variances[s] = table[j].variance
            labels.append(f"{sys_no}{j}")
            state_systems[s] = sys_no

    row_err = np.abs(matrix.sum(axis=1) - 1.0).max()
    if row_err > 1e-12:
        raise InvalidConfig(f"transition rows deviate from 1 by {row_err}",
                            field="matrix")

    stds = np.sqrt(variances)
    for arr in (matrix, means, stds, state_systems):
        arr.setflags(write=False)
    return PartitionedChain(config=config, matrix=matrix, means=means,
                            stds=stds, labels=tuple(labels),
                            state_systems=state_systems)


def mean_sojourn(p):
    """Expected consecutive samples spent in a state with self-probability p.

    The dwell is geometric, P(dwell = n) = (1 - p) p^(n-1), whose mean is
    1 / (1 - p).
    """
    if not (0.0 <= p < 1.0):
        raise DomainError(f"self-probability must lie in [0, 1), got {p}")
    return 1.0 / (1.0 - p)


def loop_period(stay_probs):
    """Mean number of samples for one full loop of an impulsive system.

    Models the loop as an absorbing chain (advancing past the last state
    is absorption), solves (I - Q) t = 1 for the mean absorption times
    and returns the time from the first state. The result is
    cross-checked against the closed form sum over 1 / (1 - p_j); the two
    routes must agree to 1e-9 relative.
    """
    p = np.asarray(stay_probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DomainError("stay_probs must be a non-empty 1-D sequence")
    if np.any(p < 0.0) or np.any(p >= 1.0):
        raise DomainError(f"per-state stay probabilities must lie in [0, 1), got {p}")
    q = np.diag(p)
    for j in range(p.size - 1):
        q[j, j + 1] = 1.0 - p[j]
    t = np.linalg.solve(np.eye(p.size) - q, np.ones(p.size))
    result = float(t[0])
    closed = float(np.sum(1.0 / (1.0 - p)))
    if abs(result - closed) > _LOOP_AGREEMENT_RTOL * max(1.0, abs(closed)):
        raise DomainError(
            f"loop period routes disagree: matrix {result} vs closed form {closed}")
    return result


def oscillation_stay_prob(freq_cycles_per_sample, states_per_system=6):
    """Shared stay probability that makes the mean loop period 1 / f samples.

    With k states per system and per-state geometric dwell the loop takes
    k / (1 - p) samples on average, so p = 1 - k * f. Each state emits at
    least one sample, which bounds f above by 1 / k.
    """
    if states_per_system not in (4, 6):
        raise InvalidConfig(f"states_per_system must be 4 or 6, got {states_per_system}",
                            field="states_per_system")
    f = float(freq_cycles_per_sample)
    if not (0.0 < f <= 1.0 / states_per_system):
        raise DomainError(
            f"oscillation frequency must lie in (0, 1/{states_per_system}] "
            f"cycles per sample, got {f}")
    return 1.0 - states_per_system * f


class TrueImpulse(NamedTuple):
    """Ground-truth impulse from a generated state path."""

    start: int
    duration: int
    group: int


@dataclass(frozen=True, eq=False)
class StatePath:
    """Ground-truth state sequence for a generated trace."""

    indices: np.ndarray
    labels: tuple
    state_systems: np.ndarray

    def __len__(self):
        return self.indices.size

    def impulse_mask(self):
        """Boolean array, True where the emitting state is impulsive."""
        return self.state_systems[self.indices] > 0

    def impulse_fraction(self):
        return float(self.impulse_mask().mean())

    def impulse_events(self):
        """Contiguous impulsive runs as (start, duration, group) records.

        The group is the system of the run's first state, i.e. the system
        the excursion entered from the background.
        """
        mask = self.impulse_mask()
        edges = np.diff(mask.astype(np.int8))
        starts = np.flatnonzero(edges == 1) + 1
        ends = np.flatnonzero(edges == -1)
        if mask[0]:
            starts = np.concatenate(([0], starts))
        if mask[-1]:
            ends = np.concatenate((ends, [mask.size - 1]))
        events = []
        for s, e in zip(starts, ends):
            group = int(self.state_systems[self.indices[s]])
            events.append(TrueImpulse(int(s), int(e - s + 1), group))
        return events

    def dwell_lengths(self, state, drop_censored=True):
        """Run lengths of consecutive samples spent in ``state``.

        Runs touching either end of the path are censored (the visit was
        cut by the observation window) and dropped by default.
        """
        inside = self.indices == state
        edges = np.diff(inside.astype(np.int8))
        starts = np.flatnonzero(edges == 1) + 1
        ends = np.flatnonzero(edges == -1)
        if inside[0]:
            starts = np.concatenate(([0], starts))
        if inside[-1]:
            ends = np.concatenate((ends, [inside.size - 1]))
        lengths = ends - starts + 1
        if drop_censored and lengths.size:
            keep = np.ones(lengths.size, dtype=bool)
            if inside[0]:
                keep[0] = False
            if inside[-1]:
                keep[-1] = False
            lengths = lengths[keep]
        return lengths


def simulate_states(matrix, n, rng, start=0):
    """Simulate n steps of a row-stochastic chain, returning the state path.

    Runs of consecutive samples in one state are drawn as geometric
    dwells, then a conditional jump picks the next state, which is
    distribution-identical to stepping the chain sample by sample but
    costs one RNG call per state change instead of per sample.
    """
    n_states = matrix.shape[0]
    idx = np.arange(n_states)
    self_probs = matrix.diagonal()
    targets = []
    cums = []
    for s in range(n_states):
        off = (matrix[s] > 0) & (idx != s)
        tgt = np.flatnonzero(off)
        if tgt.size:
            w = matrix[s, tgt].astype(np.float64)
            cum = np.cumsum(w / w.sum())
            cum[-1] = 1.0
        else:
            cum = np.empty(0)
        targets.append(tgt)
        cums.append(cum)

    path = np.empty(n, dtype=np.int16)
    t = 0
    s = int(start)
    while t < n:
        p_stay = self_probs[s]
        if p_stay >= 1.0 or targets[s].size == 0:
            path[t:] = s
            break
        dwell = int(rng.geometric(1.0 - p_stay))
        if dwell >= n - t:
            path[t:] = s
            break
        path[t:t + dwell] = s
        t += dwell
        j = int(np.searchsorted(cums[s], rng.random(), side="right"))
        s = int(targets[s][j])
    return path


def emit_samples(path, means, stds, rng):
    """Gaussian emissions for a state path, one draw per sample (float32)."""
    n = path.size
    out = np.empty(n, dtype=np.float32)
    for lo in range(0, n, _EMISSION_CHUNK):
        hi = min(lo + _EMISSION_CHUNK, n)
        block = path[lo:hi]
        out[lo:hi] = means[block] + stds[block] * rng.standard_normal(hi - lo)
    return out


def generate(chain, n, seed):
    """Generate n samples starting from the background state.

    Returns the sampled trace and the ground-truth state path.
    Deterministic for a fixed (chain, n, seed) within this build: one
    seeded PCG64 stream drives the walk and the emissions.
    """
    n = int(n)
    if n < 1:
        raise DomainError(f"sample count must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    path = simulate_states(chain.matrix, n, rng)
    samples = emit_samples(path, chain.means, chain.stds, rng)
    trace = NoiseTrace(samples, chain.config.sampling_rate_hz)
    state_path = StatePath(indices=path, labels=chain.labels,
                           state_systems=chain.state_systems)
    return trace, state_path
