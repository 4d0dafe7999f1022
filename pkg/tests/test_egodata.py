import math

import numpy as np
import pytest

from stergm.dynamics import ModelSpec, step
from stergm.egodata import (ConditioningReport, EgoRecord, EgoSample,
                            Nomination, conditioning_demo, ego_census,
                            one_toggle_statistics, recover_cross_targets,
                            recover_single_wave_transition,
                            recover_transition_stats, resample_egos,
                            scale_targets_to_table)
from stergm.errors import ConfigError, ContractError, UnsupportedModelError
from stergm.netcore import NetworkState
from stergm.statistics import StatisticTerm, TargetSpec, eval_stats, eval_targets

from conftest import full_battery, random_network


def target_battery():
    return full_battery() + [StatisticTerm("mean-tie-age"),
                             StatisticTerm("mean-monogamous-tie-age")]


def test_census_recovery_is_exact(rng):
    # the module's central property: a census of any network recovers every
    # local target bit for bit
    spec = TargetSpec(terms=target_battery())
    for k in range(40):
        n = int(rng.integers(4, 16))
        net = random_network(rng, n, float(rng.uniform(0.15, 0.6)))
        if net.n_ties() == 0:
            continue
        full = eval_targets(net, spec)
        rec = recover_cross_targets(ego_census(net), spec)
        assert np.array_equal(full, rec.values), k


def test_single_ego_mean_age():
    ego = EgoRecord(0, "F", "B", 300)
    noms = [(0, Nomination("M", "B", 310, start_months_before=2,
                           end_months_before=None)),
            (0, Nomination("M", "W", 320, start_months_before=4,
                           end_months_before=None))]
    sample = EgoSample([ego], noms)
    spec = TargetSpec(terms=[StatisticTerm("mean-tie-age")])
    rec = recover_cross_targets(sample, spec)
    assert rec.values[0] == 4.0  # ages 3 and 5


def test_double_report_cancellation():
    # a same-sex tie reported by both partners contributes 2 * 1/2 = 1
    egos = [EgoRecord(0, "M", "B", 300), EgoRecord(1, "M", "B", 310)]
    noms = [(0, Nomination("M", "B", 310, 1, None)),
            (1, Nomination("M", "B", 300, 1, None))]
    sample = EgoSample(egos, noms)
    spec = TargetSpec(terms=[StatisticTerm("edges"),
                             StatisticTerm("same-category-pair", attr="sex")])
    rec = recover_cross_targets(sample, spec)
    assert rec.values.tolist() == [1.0, 1.0]


def test_half_factor_is_load_bearing(rng):
    net = random_network(rng, 10, 0.4)
    census = ego_census(net)
    spec = TargetSpec(terms=[StatisticTerm("edges")])
    rec = recover_cross_targets(census, spec)
    doubled = math.fsum(1.0 for e in census.egos
                        for _ in census.noms[e.ego_id])
    assert doubled == 2.0 * rec.values[0]


def test_asymmetric_reports_accepted():
    # only one partner interviewed: accepted, tie counts half
    egos = [EgoRecord(0, "F", "B", 300)]
    noms = [(0, Nomination("M", "B", 310, 0, None))]
    rec = recover_cross_targets(EgoSample(egos, noms),
                                TargetSpec(terms=[StatisticTerm("edges")]))
    assert rec.values[0] == 0.5


def test_normalized_report_and_scaling(rng):
    net = random_network(rng, 12, 0.4)
    spec = TargetSpec(terms=[StatisticTerm("edges"),
                             StatisticTerm("actor-activity-by-category",
                                           attr="sex", level="M")],
                      normalization="per-capita-by-group")
    census = ego_census(net)
    rec = recover_cross_targets(census, spec)
    assert np.allclose(rec.normalized, eval_targets(net, spec))
    table = resample_egos(census, 200, np.random.default_rng(0))
    scaled = scale_targets_to_table(rec, table)
    from stergm.statistics import Frame

    frame = Frame(table)
    males = frame.group_count("sex", "M")
    assert scaled[0] == pytest.approx(rec.normalized[0] * 200)
    assert scaled[1] == pytest.approx(rec.normalized[1] * males)


def test_two_wave_transition_matches_full_networks(rng):
    formation = [StatisticTerm("edges"),
                 StatisticTerm("actor-activity-by-category", attr="sex",
                               level="F"),
                 StatisticTerm("category-homophily", attr="race", level="B"),
                 StatisticTerm("degree1-count")]
    dissolution = [StatisticTerm("edges"), StatisticTerm("degree1-count")]
    for k in range(25):
        prev = random_network(rng, int(rng.integers(6, 20)),
                              float(rng.uniform(0.1, 0.5)))
        model = ModelSpec(formation=[StatisticTerm("edges")],
                          theta_plus=[float(rng.uniform(-2, 0))],
                          dissolution=[StatisticTerm("edges")],
                          theta_minus=[float(rng.uniform(-1, 2))])
        now = step(prev, model, np.random.default_rng(k))

        # oracle: evaluate on the union and intersection networks directly
        union = prev.copy()
        union.clock = now.clock
        for e in set(now.ties) - set(prev.ties):
            union.add_tie(*e, onset=now.clock)
        inter = prev.copy()
        for e in set(prev.ties) - set(now.ties):
            inter.remove_tie(*e)
        expected = np.concatenate([eval_stats(union, formation),
                                   eval_stats(inter, dissolution)])

        dissolved_records = [(e[0], e[1], prev.onset(*e), now.clock)
                             for e in set(prev.ties) - set(now.ties)]
        census = ego_census(now, dissolved_records)
        rep = recover_transition_stats(census.wave(1), census.wave(0),
                                       formation, dissolution)
        assert np.array_equal(rep.values, expected), k
        assert rep.dissolution_available


def test_no_change_between_waves_zero_flux():
    rng = np.random.default_rng(4)
    net = random_network(rng, 8, 0.4)
    census = ego_census(net)
    # census ages >= 1 so wave(1) == wave(0) only if every age > 1; force it
    for e in list(net.ties):
        net._onset[e] = min(net._onset[e], net.clock - 3)
    census = ego_census(net)
    formation = [StatisticTerm("edges")]
    dissolution = [StatisticTerm("edges")]
    rep = recover_transition_stats(census.wave(1), census.wave(0),
                                   formation, dissolution)
    # union == intersection == current ties: formed and dissolved sums are 0
    assert rep.formation_values[0] == rep.dissolution_values[0] == net.n_ties()


def test_unlinkable_waves_raise(rng):
    a = ego_census(random_network(rng, 6, 0.4))
    b = ego_census(random_network(rng, 6, 0.4))
    with pytest.raises(ContractError):
        recover_transition_stats(a.wave(1), b.wave(0),
                                 [StatisticTerm("edges")],
                                 [StatisticTerm("edges")])
    with pytest.raises(ContractError):
        recover_transition_stats(a.wave(0), a.wave(1),
                                 [StatisticTerm("edges")],
                                 [StatisticTerm("edges")])


def test_single_wave_identifies_formation_not_dissolution(rng):
    net = random_network(rng, 12, 0.4)
    census = ego_census(net)
    formed_now = [e for e in net.ties if net.age(*e) <= 1]
    rep = recover_single_wave_transition(census, [StatisticTerm("edges")],
                                         [StatisticTerm("edges")])
    assert not rep.dissolution_available
    assert rep.dissolution_values is None
    assert rep.formation_values[0] == float(len(formed_now))
    with pytest.raises(UnsupportedModelError):
        recover_single_wave_transition(census, [StatisticTerm("degree1-count")],
                                       [])


def test_truncation_realism_equilibrium_ages(rng):
    # ages seen through an equilibrium ego census follow the observed-age
    # law, which for geometric durations is the duration law itself
    from scipy import stats

    from stergm.dynamics import ChainConfig, _Chain
    from stergm.equilibrium import logit, observed_age_pmf

    from conftest import random_table

    p = 0.25
    model = ModelSpec(formation=[StatisticTerm("edges")], theta_plus=[-2.2],
                      dissolution=[StatisticTerm("edges")],
                      theta_minus=[float(logit(1 - p))])
    t = random_table(rng, 30)
    seeds = np.random.SeedSequence(13).spawn(2)
    chain = _Chain(NetworkState(t), model, np.random.default_rng(seeds[0]),
                   np.random.default_rng(seeds[1]))
    for _ in range(120):
        chain.step()
    ages = []
    for s in range(450):
        for _ in range(10):
            chain.step()
        census = ego_census(chain.to_network_state())
        ages.extend(nom.age_at(0) for e in census.egos
                    for nom in census.noms[e.ego_id])
    ages = np.asarray(ages)
    kmax = 12
    observed = np.array([(ages == k).sum() for k in range(1, kmax)]
                        + [(ages >= kmax).sum()], dtype=float)
    pmf = observed_age_pmf(np.arange(1, kmax), p)
    expected = np.append(pmf, 1.0 - pmf.sum()) * len(ages)
    # double reporting halves the effective sample; scale counts down
    chi2 = float(((observed - expected) ** 2 / expected).sum()) / 2.0
    crit = stats.chi2.ppf(0.999, df=kmax - 1)
    assert chi2 < crit


# -- survey file handling -----------------------------------------------------


def test_survey_csv_roundtrip(tmp_path, rng):
    net = random_network(rng, 10, 0.4)
    census = ego_census(net, window_months=12)
    path = tmp_path / "survey.csv"
    census.to_csv(path)
    back = EgoSample.from_csv(path)
    assert len(back) == len(census)
    spec = TargetSpec(terms=target_battery())
    if net.n_ties():
        a = recover_cross_targets(census, spec)
        b = recover_cross_targets(back, spec)
        assert np.array_equal(a.values, b.values)


def test_survey_csv_errors(tmp_path):
    header = ("ego_id,sex,race,age_months,alter_sex,alter_race,"
              "alter_age_months,start_months_before,end_months_before\n")
    p = tmp_path / "bad1.csv"
    p.write_text(header + "0,F,B,300.5,,,,,\n")
    with pytest.raises(ConfigError, match="line 2.*sub-month"):
        EgoSample.from_csv(p)
    p2 = tmp_path / "bad2.csv"
    p2.write_text(header + "0,,,,,,,,\n")
    with pytest.raises(ConfigError, match="line 2"):
        EgoSample.from_csv(p2)
    p3 = tmp_path / "bad3.csv"
    p3.write_text("ego_id,sex\n0,F\n")
    with pytest.raises(ConfigError, match="header"):
        EgoSample.from_csv(p3)
    p4 = tmp_path / "bad4.csv"
    p4.write_text(header + "0,F,B,300\n5,M,W,400\n0,,,,M,B,310,3,ONGOING\n"
                  + "9,,,,F,B,300,2,ONGOING\n")
    with pytest.raises(ConfigError, match="unknown ego"):
        EgoSample.from_csv(p4)


def test_nomination_validation():
    with pytest.raises(ConfigError):
        Nomination("F", "B", 300, start_months_before=2, end_months_before=5)
    with pytest.raises(ConfigError):
        Nomination("F", "B", 300, start_months_before=-1,
                   end_months_before=None)
    nom = Nomination("F", "B", 300, 5, 2)
    assert nom.active_at(3) and not nom.active_at(2)
    assert nom.age_at(3) == 3


# -- the conditioning obstruction ---------------------------------------------


def test_conditioning_demo_properties():
    rep = conditioning_demo()
    assert rep.summary == (4, 4)
    for edges in (rep.network_a, rep.network_b):
        deg = [0] * rep.n_actors
        for (i, j) in edges:
            deg[i] += 1
            deg[j] += 1
        assert len(edges) == 4
        assert sum(1 for d in deg if d == 1) == 4
    assert rep.witness == (1, 6)
    assert rep.witness in rep.reachable_b
    assert rep.witness not in rep.reachable_a
    assert rep.reachable_a != rep.reachable_b
    assert max(d for _, d in rep.reachable_b) == 6
    assert max(d for _, d in rep.reachable_a) < 6
    assert "normalizing constants differ" in rep.describe()


def test_one_toggle_statistics_small():
    # single tie on 3 actors: toggles give deg1 counts {0, 2} at hamming 1
    reach = one_toggle_statistics([(0, 1)], 3)
    assert reach == frozenset({(1, 0), (1, 2)})
