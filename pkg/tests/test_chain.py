import numpy as np
import pytest
from scipy import stats

import impnoise as ip
from helpers import make_chain_config


def test_build_chain_basic_bookkeeping():
    cfg = make_chain_config(dwell=(100.0, 100.0, 100.0), f0=1.0 / 60)
    assert cfg.stay_prob == pytest.approx(0.9)
    ch = ip.build_chain(cfg)
    assert ch.n_states == 19
    sums = ch.matrix.sum(axis=1)
    assert np.abs(sums - 1.0).max() <= 1e-12
    assert ch.matrix.min() >= 0.0 and ch.matrix.max() <= 1.0
    # each impulsive state: stay 0.9, advance 1 - 0.9 - 0.01 = 0.09, exit 0.01
    s = ch.entry_state(3)
    assert ch.matrix[s, s] == pytest.approx(0.9)
    assert ch.matrix[s, s + 1] == pytest.approx(0.09)
    assert ch.matrix[s, ch.entry_state(2)] == pytest.approx(0.01)


def test_build_chain_exit_routing_and_reachability():
    cfg = make_chain_config()
    ch = ip.build_chain(cfg)
    k = cfg.states_per_system
    blocks = {3: range(1, 1 + k), 2: range(1 + k, 1 + 2 * k),
              1: range(1 + 2 * k, 1 + 3 * k)}
    # system 3 states reach only: themselves, system 2 entry
    for s in blocks[3]:
        targets = set(np.flatnonzero(ch.matrix[s] > 0))
        assert targets <= set(blocks[3]) | {ch.entry_state(2)}
    for s in blocks[2]:
        targets = set(np.flatnonzero(ch.matrix[s] > 0))
        assert targets <= set(blocks[2]) | {ch.entry_state(1)}
    for s in blocks[1]:
        targets = set(np.flatnonzero(ch.matrix[s] > 0))
        assert targets <= set(blocks[1]) | {0}
    # background reaches only entry states and itself
    bg_targets = set(np.flatnonzero(ch.matrix[0] > 0))
    assert bg_targets <= {0, ch.entry_state(1), ch.entry_state(2), ch.entry_state(3)}


def test_build_chain_rejects_bad_amp_ordering():
    cfg = make_chain_config()
    swapped = ip.ChainConfig(systems=(cfg.systems[1], cfg.systems[0], cfg.systems[2]),
                             entry_probs=cfg.entry_probs, stay_prob=cfg.stay_prob,
                             background_variance=cfg.background_variance)
    with pytest.raises(ip.InvalidConfig, match="decrease"):
        ip.build_chain(swapped)


def test_build_chain_invariant_errors():
    good = make_chain_config()
    with pytest.raises(ip.InfeasibleOscillation):
        ip.build_chain(make_chain_config(dwell=(1.01, 20.0, 70.0), f0=0.001))
    bad_entry = ip.ChainConfig(systems=good.systems, entry_probs=(0.5, 0.4, 0.2),
                               stay_prob=good.stay_prob, background_variance=1.0)
    with pytest.raises(ip.InvalidConfig, match="entry"):
        ip.build_chain(bad_entry)
    bad_var = ip.ChainConfig(systems=good.systems, entry_probs=good.entry_probs,
                             stay_prob=good.stay_prob, background_variance=0.0)
    with pytest.raises(ip.InvalidConfig, match="background_variance"):
        ip.build_chain(bad_var)
    with pytest.raises(ip.InvalidConfig, match="states_per_system"):
        ip.build_chain(make_chain_config(states_per_system=5, f0=0.16))


def test_emission_tables():
    four = ip.emission_table(4, 3.0, 0.25, 1.0)
    assert [e.mean for e in four] == [0.0, 3.0, 0.0, -3.0]
    assert [e.variance for e in four] == [1.0, 0.25, 1.0, 0.25]
    six = ip.emission_table(6, 3.0, 0.25, 1.0)
    assert [e.mean for e in six] == [1.5, 3.0, 1.5, -1.5, -3.0, -1.5]
    assert [e.variance for e in six] == [1.0, 0.25, 1.0, 1.0, 0.25, 1.0]


def test_emission_symmetry_per_system():
    for k in (4, 6):
        ch = ip.build_chain(make_chain_config(states_per_system=k))
        for group in (1, 2, 3):
            base = ch.entry_state(group)
            means = sorted(ch.means[base:base + k])
            negated = sorted(-m for m in means)
            assert means == pytest.approx(negated)


def test_mean_sojourn_closed_form():
    assert ip.mean_sojourn(0.0) == 1.0
    assert ip.mean_sojourn(0.99) == pytest.approx(100.0)
    for bad in (1.0, 1.5, -0.1):
        with pytest.raises(ip.DomainError):
            ip.mean_sojourn(bad)


def test_mean_sojourn_monte_carlo():
    # Per-step oracle: a Bernoulli stream of stay decisions; every False
    # ends one visit, so mean dwell = steps consumed / visits.
    p = 0.9
    rng = np.random.default_rng(42)
    stream = rng.random(10_500_000) < p
    leaves = np.flatnonzero(~stream)
    mc = (leaves[-1] + 1) / leaves.size
    assert leaves.size >= 1_000_000
    assert 9.8 <= mc <= 10.2
    assert mc == pytest.approx(ip.mean_sojourn(p), rel=0.02)


def test_loop_period_closed_form():
    assert ip.loop_period([0.0, 0.0, 0.0, 0.0]) == pytest.approx(4.0)
    assert ip.loop_period([0.9] * 6) == pytest.approx(60.0)
    with pytest.raises(ip.DomainError):
        ip.loop_period([0.5, 1.0, 0.5, 0.5])
    with pytest.raises(ip.DomainError):
        ip.loop_period([0.5, -0.1, 0.5, 0.5])


def test_loop_period_matches_sum_property():
    rng = np.random.default_rng(123)
    for _ in range(1000):
        k = int(rng.integers(2, 9))
        p = rng.uniform(0.0, 0.995, k)
        expected = float(np.sum(1.0 / (1.0 - p)))
        assert ip.loop_period(p) == pytest.approx(expected, rel=1e-9)


def test_loop_period_monte_carlo():
    # Per-step walk to absorption, all walks stepped in parallel.
    k, p = 6, 0.9
    walks = 100_000
    rng = np.random.default_rng(7)
    state = np.zeros(walks, dtype=np.int64)
    steps = np.zeros(walks, dtype=np.int64)
    active = np.ones(walks, dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        steps[idx] += 1
        advanced = rng.random(idx.size) >= p
        state[idx] += advanced
        active[idx[state[idx] >= k]] = False
    assert steps.mean() == pytest.approx(ip.loop_period([p] * k), rel=0.02)


def test_oscillation_stay_prob():
    assert ip.oscillation_stay_prob(1.0 / 60.0, 6) == pytest.approx(0.9)
    # 800 MHz at 5 GS/s is 0.16 cycles per sample
    assert ip.oscillation_stay_prob(800e6 / 5e9, 6) == pytest.approx(0.04)
    assert ip.oscillation_stay_prob(0.1, 4) == pytest.approx(0.6)
    with pytest.raises(ip.DomainError):
        ip.oscillation_stay_prob(0.3, 6)
    with pytest.raises(ip.DomainError):
        ip.oscillation_stay_prob(0.0, 6)


def test_generate_pure_background():
    cfg = make_chain_config(entry=(0.0, 0.0, 0.0), background_variance=4.0)
    ch = ip.build_chain(cfg)
    trace, path = ip.generate(ch, 1_000_000, seed=5)
    assert path.impulse_fraction() == 0.0
    var = trace.samples.astype(np.float64).var()
    assert var == pytest.approx(4.0, rel=0.02)


def test_generate_deterministic():
    ch = ip.build_chain(make_chain_config())
    t1, p1 = ip.generate(ch, 200_000, seed=99)
    t2, p2 = ip.generate(ch, 200_000, seed=99)
    assert np.array_equal(t1.samples, t2.samples)
    assert np.array_equal(p1.indices, p2.indices)
    t3, _ = ip.generate(ch, 200_000, seed=100)
    assert not np.array_equal(t1.samples, t3.samples)


def test_generate_paper_like_impulse_fraction():
    # entry probabilities summing to ~1e-5 with dwell targets of tens of
    # samples put roughly one sample in 1e4 inside an impulse
    cfg = make_chain_config(entry=(3e-6, 1e-6, 5e-7))
    ch = ip.build_chain(cfg)
    _, path = ip.generate(ch, 10_000_000, seed=2024)
    fraction = path.impulse_fraction()
    assert 2e-5 <= fraction <= 5e-4


def test_state_path_groups_and_events():
    cfg = make_chain_config(entry=(1e-4, 5e-5, 2e-5))
    ch = ip.build_chain(cfg)
    _, path = ip.generate(ch, 2_000_000, seed=8)
    events = path.impulse_events()
    assert events
    assert {e.group for e in events} <= {1, 2, 3}
    mask = path.impulse_mask()
    total = sum(e.duration for e in events)
    assert total == int(mask.sum())
    # event starts sit on entry states of their group's system
    for e in events[:50]:
        state = int(path.indices[e.start])
        assert state == ch.entry_state(e.group)


def test_sojourn_law_geometric_dwell():
    # Dwell histogram in a fixed in-system state follows the geometric law.
    cfg = make_chain_config(entry=(2e-3, 1e-3, 5e-4), dwell=(30.0, 30.0, 30.0),
                            f0=1.0 / 30)  # stay_prob 0.8
    ch = ip.build_chain(cfg)
    _, path = ip.generate(ch, 2_000_000, seed=31)
    state = ch.entry_state(1) + 1
    dwells = path.dwell_lengths(state)
    assert dwells.size > 2000
    p_leave = 1.0 - cfg.stay_prob
    k_max = 12
    observed = np.bincount(np.minimum(dwells, k_max + 1), minlength=k_max + 2)[1:]
    pmf = p_leave * cfg.stay_prob ** np.arange(k_max)
    probs = np.append(pmf, cfg.stay_prob ** k_max)  # tail bin
    expected = probs * dwells.size
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    assert chi2 < stats.chi2.ppf(0.999, df=k_max)


def test_chain_is_immutable():
    ch = ip.build_chain(make_chain_config())
    with pytest.raises(ValueError):
        ch.matrix[0, 0] = 0.5
    with pytest.raises(ValueError):
        ch.means[0] = 1.0
