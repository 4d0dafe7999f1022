import math

import numpy as np
import pytest

import stergm.dynamics as dyn
from stergm.dynamics import (ChainConfig, ModelSpec, _Chain, dissolution_phase,
                             formation_phase, run_chain, run_replicates, step)
from stergm.equilibrium import ilogit, stationary_dyad_probs
from stergm.errors import ConfigError
from stergm.netcore import ActorTable, NetworkState
from stergm.statistics import StatisticTerm, TargetSpec

from conftest import random_network, random_table


def flat_table(n, sex_split=True):
    t = ActorTable()
    for k in range(n):
        t.add_actor("M" if (sex_split and k % 2) else "F", "B", 300 + k)
    return t


def edges_model(tp, tm, offset=False):
    return ModelSpec(formation=[StatisticTerm("edges")], theta_plus=[tp],
                     dissolution=[StatisticTerm("edges")], theta_minus=[tm],
                     size_offset=offset)


def test_frozen_chain_is_constant():
    net = random_network(np.random.default_rng(0), 8, 0.3)
    model = edges_model(-40.0, 40.0)
    cur = net
    for _ in range(10):
        cur = step(cur, model, np.random.default_rng(1))
    assert set(cur.ties) == set(net.ties)
    assert cur.clock == net.clock + 10


def test_formation_bernoulli_oracle():
    # theta+ = 0: each empty dyad forms with probability one half
    net = NetworkState(flat_table(15))
    model = edges_model(0.0, 0.0)
    total = 15 * 14 // 2
    draws = 150
    formed = 0
    for k in range(draws):
        formed += len(formation_phase(net, model, np.random.default_rng(k)))
    n_trials = draws * total
    se = math.sqrt(0.25 / n_trials)
    assert abs(formed / n_trials - 0.5) < 3 * se


def test_formation_limit_nothing():
    net = NetworkState(flat_table(10))
    assert formation_phase(net, edges_model(-60.0, 0.0),
                           np.random.default_rng(3)) == set()


def test_dissolution_survival_oracle():
    from stergm.equilibrium import logit

    rng = np.random.default_rng(7)
    net = random_network(rng, 40, 0.5)
    m = net.n_ties()
    model = edges_model(-60.0, float(logit(0.9)))
    survived = 0
    draws = 400
    for k in range(draws):
        gone = dissolution_phase(net, model, np.random.default_rng(k))
        survived += m - len(gone)
    n_trials = draws * m
    se = math.sqrt(0.9 * 0.1 / n_trials)
    assert abs(survived / n_trials - 0.9) < 3 * se


def test_dissolution_limit_nothing():
    rng = np.random.default_rng(5)
    net = random_network(rng, 10, 0.5)
    assert dissolution_phase(net, edges_model(0.0, 60.0),
                             np.random.default_rng(0)) == set()


def test_offset_shifts_per_dyad_log_odds_by_log_n():
    from stergm.statistics import Frame, dyad_delta_values

    n = 1000
    t = flat_table(20)  # evaluation table; offset reads the frame size
    frame = Frame(t)
    model = edges_model(-2.0, 0.0, offset=True)
    terms, theta = model.formation_with_offset()
    lo = dyad_delta_values(frame, terms, theta,
                           np.array([0]), np.array([1]))[0]
    assert lo == pytest.approx(-2.0 - math.log(20), rel=1e-12)
    # the worked offset value: log(1/1000) = -6.908
    assert math.log(1.0 / n) == pytest.approx(-6.908, abs=1e-3)


def test_same_seed_identical_trajectories():
    net = NetworkState(flat_table(12))
    model = edges_model(-1.0, 1.0)
    spec = TargetSpec(terms=[StatisticTerm("edges")])
    cfg = ChainConfig(burnin_steps=10, interval_steps=2, num_samples=40,
                      rng_seed=99)
    a = run_chain(net, model, cfg, spec)
    b = run_chain(net, model, cfg, spec)
    assert np.array_equal(a, b)


def test_replicates_deterministic_and_thread_invariant():
    net = NetworkState(flat_table(10))
    model = edges_model(-1.0, 1.0)
    spec = TargetSpec(terms=[StatisticTerm("edges")])
    cfg = ChainConfig(burnin_steps=5, interval_steps=1, num_samples=10,
                      num_replicates=4, rng_seed=3)
    seq = run_replicates(net, model, cfg, spec, threads=1)
    par = run_replicates(net, model, cfg, spec, threads=2)
    assert np.array_equal(seq, par)
    assert not np.array_equal(seq[0], seq[1])


def test_separability_formation_unaffected_by_dissolution_model():
    rng = np.random.default_rng(11)
    net = random_network(rng, 12, 0.3)
    loose = edges_model(-1.0, -2.0)
    tight = edges_model(-1.0, 3.0)
    for seed in range(5):
        a = step(net, loose, np.random.default_rng(seed))
        b = step(net, tight, np.random.default_rng(seed))
        formed_a = set(a.ties) - set(net.ties)
        formed_b = set(b.ties) - set(net.ties)
        assert formed_a == formed_b


def test_ergodicity_two_starts_agree():
    model = edges_model(-0.5, 0.5)
    t = flat_table(4)
    empty = NetworkState(t)
    full = NetworkState(t)
    for i in range(4):
        for j in range(i + 1, 4):
            full.add_tie(i, j)
    spec = TargetSpec(terms=[StatisticTerm("edges")])
    cfg = ChainConfig(burnin_steps=200, interval_steps=3, num_samples=3000,
                      rng_seed=21)
    a = run_chain(empty, model, cfg, spec)[:, 0]
    cfg2 = ChainConfig(burnin_steps=200, interval_steps=3, num_samples=3000,
                       rng_seed=22)
    b = run_chain(full, model, cfg2, spec)[:, 0]
    se = math.sqrt(a.var() / 800 + b.var() / 800)  # conservative ess
    assert abs(a.mean() - b.mean()) < 3 * se


def _per_dyad_frequencies(net, model, draws, proposals=None):
    freq = {}
    for k in range(draws):
        f_rng, _ = np.random.default_rng(k).spawn(2)
        chain = _Chain(net, model, f_rng, None, proposals)
        for e in chain.sample_formation():
            freq[e] = freq.get(e, 0) + 1
    return freq


def test_exact_path_matches_mcmc_path_dyad_independent():
    # a zero-coefficient degree term forces the Metropolis path without
    # changing the distribution
    t = flat_table(5)
    net = NetworkState(t)
    exact = ModelSpec(
        formation=[StatisticTerm("edges"),
                   StatisticTerm("actor-activity-by-category", attr="sex",
                                 level="M")],
        theta_plus=[-0.8, 0.6],
        dissolution=[StatisticTerm("edges")], theta_minus=[1.0])
    mh = ModelSpec(
        formation=list(exact.formation) + [StatisticTerm("degree1-count")],
        theta_plus=[-0.8, 0.6, 0.0],
        dissolution=[StatisticTerm("edges")], theta_minus=[1.0])
    draws = 600
    fa = _per_dyad_frequencies(net, exact, draws)
    fb = _per_dyad_frequencies(net, mh, draws, proposals=400)
    dyads = [(i, j) for i in range(5) for j in range(i + 1, 5)]
    for d in dyads:
        pa = fa.get(d, 0) / draws
        pb = fb.get(d, 0) / draws
        p = (pa + pb) / 2
        se = math.sqrt(max(p * (1 - p), 1e-4) * 2 / draws)
        assert abs(pa - pb) < 3.5 * se, (d, pa, pb)


def test_mcmc_dissolution_matches_exact_enumeration():
    # genuinely dyad-dependent dissolution (monogamy bonus): compare the
    # Metropolis sampler with exhaustive enumeration of the conditional law
    t = flat_table(4)
    net = NetworkState(t)
    for (i, j) in [(0, 1), (1, 2), (2, 3)]:
        net.add_tie(i, j)
    terms = [StatisticTerm("edges"), StatisticTerm("degree1-count")]
    theta = np.array([0.3, 0.8])
    model = ModelSpec(formation=[StatisticTerm("edges")], theta_plus=[-60.0],
                      dissolution=terms, theta_minus=theta)

    import itertools

    from stergm.statistics import eval_stats

    ties = list(net.ties)
    weights = {}
    for bits in itertools.product((0, 1), repeat=3):
        kept = [e for e, b in zip(ties, bits) if b]
        sub = NetworkState(t)
        for e in kept:
            sub.add_tie(*e)
        weights[bits] = math.exp(float(theta @ eval_stats(sub, terms)))
    z = sum(weights.values())
    exact = {bits: w / z for bits, w in weights.items()}

    counts = {bits: 0 for bits in exact}
    draws = 4000
    for k in range(draws):
        _, d_rng = np.random.default_rng(k).spawn(2)
        chain = _Chain(net, model, None, d_rng, 300)
        gone = set(chain.sample_dissolution())
        bits = tuple(0 if e in gone else 1 for e in ties)
        counts[bits] += 1
    for bits, p in exact.items():
        se = math.sqrt(p * (1 - p) / draws)
        assert abs(counts[bits] / draws - p) < 4 * se, (bits, counts[bits] / draws, p)


def test_long_run_tie_frequency_matches_stationary_probs():
    # the load-bearing cross-module check, on a heterogeneous model
    rng = np.random.default_rng(2)
    t = random_table(rng, 14)
    net = NetworkState(t)
    model = ModelSpec(
        formation=[StatisticTerm("edges"),
                   StatisticTerm("category-homophily", attr="race", level="B"),
                   StatisticTerm("dyad-covariate-effect", transform="sqrt",
                                 power=1)],
        theta_plus=[-1.5, 0.9, -0.3],
        dissolution=[StatisticTerm("edges"),
                     StatisticTerm("same-category-pair", attr="sex")],
        theta_minus=[0.8, 0.5])
    ii, jj, probs = stationary_dyad_probs(net, model)

    seeds = np.random.SeedSequence(17).spawn(2)
    chain = _Chain(net, model, np.random.default_rng(seeds[0]),
                   np.random.default_rng(seeds[1]))
    for _ in range(300):
        chain.step()
    samples = 4000
    on_counts = np.zeros(len(ii))
    ids = [int(a) for a in net.table.ids]
    index = {(min(ids[a], ids[b]), max(ids[a], ids[b])): x
             for x, (a, b) in enumerate(zip(ii, jj))}
    for s in range(samples):
        chain.step()
        for e in chain.net._onset:
            on_counts[index[e]] += 1
    emp = on_counts / samples
    # autocorrelation-adjusted standard error (mean duration ~ e^0.8)
    ess = samples / 12
    for x in range(len(ii)):
        se = math.sqrt(max(probs[x] * (1 - probs[x]), 1e-4) / ess)
        assert abs(emp[x] - probs[x]) < 4 * se, (x, emp[x], probs[x])


def test_self_balancing_drift_sign():
    model = edges_model(-0.85, 0.0)  # stationary density ~ 0.3
    from stergm.equilibrium import edges_model_density

    p_star = edges_model_density(-0.85, 0.0)
    t = flat_table(10)
    total = 45
    for d0, direction in ((0.8, -1), (0.05, +1)):
        rng = np.random.default_rng(31)
        drifts = []
        for r in range(400):
            net = random_network(np.random.default_rng(1000 + r), 10, d0)
            net2 = step(net, model, np.random.default_rng(r))
            drifts.append((net2.n_ties() - net.n_ties()) / total)
        mean_drift = float(np.mean(drifts))
        se = float(np.std(drifts) / math.sqrt(len(drifts)))
        assert direction * mean_drift > 3 * se


def test_dissolution_hazard_constant_in_age():
    # memorylessness of the geometric duration law
    from stergm.equilibrium import logit

    p_gone = 0.2
    model = edges_model(-1.2, float(logit(1 - p_gone)))
    net = NetworkState(flat_table(20))
    seeds = np.random.SeedSequence(8).spawn(2)
    chain = _Chain(net, model, np.random.default_rng(seeds[0]),
                   np.random.default_rng(seeds[1]))
    for _ in range(50):
        chain.step()
    at_risk = {}
    died = {}
    for _ in range(3000):
        ages_before = {e: chain.net.clock - o + 1
                       for e, o in chain.net._onset.items()}
        formed, dissolved = chain.step()
        gone = set(dissolved)
        for e, age in ages_before.items():
            bin_ = min(age, 8)
            at_risk[bin_] = at_risk.get(bin_, 0) + 1
            if e in gone:
                died[bin_] = died.get(bin_, 0) + 1
    for bin_, n in at_risk.items():
        if n < 400:
            continue
        haz = died.get(bin_, 0) / n
        se = math.sqrt(p_gone * (1 - p_gone) / n)
        assert abs(haz - p_gone) < 4 * se, (bin_, haz, n)


def test_thinning_and_dense_paths_agree(monkeypatch):
    t = flat_table(80)
    net = NetworkState(t)
    model = ModelSpec(
        formation=[StatisticTerm("edges"),
                   StatisticTerm("actor-activity-by-category", attr="sex",
                                 level="M")],
        theta_plus=[-4.5, 0.4],
        dissolution=[StatisticTerm("edges")], theta_minus=[1.5])
    spec = TargetSpec(terms=[StatisticTerm("edges")])
    cfg = ChainConfig(burnin_steps=100, interval_steps=2, num_samples=2000,
                      rng_seed=5)

    monkeypatch.setattr(dyn, "_DENSE_MIN_N", 10**9)  # force dense
    dense = run_chain(net, model, cfg, spec)[:, 0]
    monkeypatch.setattr(dyn, "_DENSE_MIN_N", 0)      # force thinning
    monkeypatch.setattr(dyn, "_DENSE_PMAX", 2.0)
    thin = run_chain(net, model, cfg, spec)[:, 0]
    se = math.sqrt(dense.var() / 500 + thin.var() / 500)
    assert abs(dense.mean() - thin.mean()) < 3 * se


def test_model_json_roundtrip_and_validation():
    model = ModelSpec(
        formation=[StatisticTerm("edges"),
                   StatisticTerm("dyad-covariate-effect", transform="sqrt",
                                 power=2)],
        theta_plus=[-2.0, 0.1],
        dissolution=[StatisticTerm("edges")], theta_minus=[2.0],
        size_offset=True)
    back = ModelSpec.from_json(model.to_json())
    assert back.to_json() == model.to_json()
    with pytest.raises(ConfigError):
        ModelSpec(formation=[StatisticTerm("edges")], theta_plus=[1.0, 2.0],
                  dissolution=[], theta_minus=[])
    with pytest.raises(ConfigError):
        ModelSpec(formation=[StatisticTerm("offset-log-inverse-n")],
                  theta_plus=[1.0], dissolution=[], theta_minus=[])
    with pytest.raises(ConfigError):
        ModelSpec(formation=[StatisticTerm("mean-tie-age")], theta_plus=[1.0],
                  dissolution=[], theta_minus=[])


def test_bipartite_space_only_forms_allowed_ties():
    from stergm.netcore import DyadSpace

    t = flat_table(10)
    space = DyadSpace(kind="bipartite-by-attribute", attr="sex")
    net = NetworkState(t, space)
    model = ModelSpec(formation=[StatisticTerm("edges")], theta_plus=[2.0],
                      dissolution=[StatisticTerm("edges")], theta_minus=[0.0],
                      dyad_space=space)
    cur = net
    for k in range(5):
        cur = step(cur, model, np.random.default_rng(k))
    for (i, j) in cur.ties:
        assert t.level_of("sex", i) != t.level_of("sex", j)
