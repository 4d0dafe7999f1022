import itertools
import json

import numpy as np
import pytest

from stergm.errors import ConfigError, ContractError
from stergm.netcore import (ActorTable, DyadSpace, NetworkState, PhaseOutcome,
                            canonical_pair, compose_step)

from conftest import random_network, random_table


def small_table(n=4):
    t = ActorTable()
    for k in range(n):
        t.add_actor("M" if k % 2 else "F", "B", 300 + k)
    return t


def net_from_ties(table, ties, clock=0):
    net = NetworkState(table, clock=clock)
    for (i, j) in ties:
        net.add_tie(i, j)
    return net


def test_identity_transition_ages_increment():
    net = net_from_ties(small_table(), [(0, 1)], clock=3)
    out = compose_step(net, PhaseOutcome(set(), set()))
    assert set(out.ties) == {(0, 1)}
    assert out.age(0, 1) == net.age(0, 1) + 1


def test_pure_formation_ages_start_at_one():
    net = NetworkState(small_table(), clock=5)
    out = compose_step(net, PhaseOutcome({(0, 1), (2, 3)}, set()))
    assert set(out.ties) == {(0, 1), (2, 3)}
    assert out.age(0, 1) == 1 and out.age(2, 3) == 1
    assert out.clock == 6


def test_mixed_step_matches_set_algebra():
    net = net_from_ties(small_table(), [(0, 1), (0, 2)])
    out = compose_step(net, PhaseOutcome({(1, 3)}, {(0, 2)}))
    assert set(out.ties) == {(0, 1), (1, 3)}


def test_compose_equals_set_identities_exhaustively():
    # y_new = y_minus | (y_plus \ y_prev) over every (prev, formed,
    # dissolved) configuration of a 4-actor dyad space
    table = small_table()
    dyads = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    count = 0
    for prev_bits in itertools.product((0, 1), repeat=6):
        prev = frozenset(d for d, b in zip(dyads, prev_bits) if b)
        empty = [d for d in dyads if d not in prev]
        for formed_bits in itertools.product((0, 1), repeat=len(empty)):
            formed = frozenset(d for d, b in zip(empty, formed_bits) if b)
            for diss_bits in itertools.product((0, 1), repeat=len(prev)):
                dissolved = frozenset(
                    d for d, b in zip(sorted(prev), diss_bits) if b)
                y_plus = prev | formed
                y_minus = prev - dissolved
                expected = y_minus | (y_plus - prev)
                also = y_plus - (prev - y_minus)
                net = net_from_ties(table, prev)
                out = compose_step(net, PhaseOutcome(set(formed),
                                                     set(dissolved)))
                assert set(out.ties) == expected == also
                count += 1
    assert count == 4096


def test_dissolved_and_reformed_tie_restarts_at_age_one():
    net = net_from_ties(small_table(), [(0, 1)], clock=0)
    net._onset[(0, 1)] = -5
    assert net.age(0, 1) == 6
    gone = compose_step(net, PhaseOutcome(set(), {(0, 1)}))
    back = compose_step(gone, PhaseOutcome({(0, 1)}, set()))
    assert back.age(0, 1) == 1


def test_phase_invariant_violations_raise():
    net = net_from_ties(small_table(), [(0, 1)])
    with pytest.raises(ContractError):
        compose_step(net, PhaseOutcome({(0, 1)}, set()))  # already present
    with pytest.raises(ContractError):
        compose_step(net, PhaseOutcome(set(), {(2, 3)}))  # absent
    with pytest.raises(ContractError):
        compose_step(net, PhaseOutcome({(1, 2)}, {(1, 2)}))


def test_tie_age_vector():
    net = NetworkState(small_table(), clock=10)
    assert net.tie_age_vector() == []
    net.add_tie(0, 1, onset=10)
    net.add_tie(1, 2, onset=5)
    ages = dict(net.tie_age_vector())
    assert ages[(0, 1)] == 1
    assert ages[(1, 2)] == 6


def test_canonical_pair_and_self_loop():
    assert canonical_pair(3, 1) == (1, 3)
    with pytest.raises(ContractError):
        canonical_pair(2, 2)


def test_actor_ids_never_reused():
    t = small_table()
    t.deactivate(2)
    new = t.add_actor("F", "W", 400)
    assert new == 4
    assert not t.is_active(2)
    assert t.n_active() == 4


def test_unknown_level_raises():
    t = small_table()
    with pytest.raises(ConfigError):
        t.level_code("sex", "X")
    with pytest.raises(ConfigError):
        t.codes("height")


def test_bipartite_dyad_space():
    t = small_table()
    space = DyadSpace(kind="bipartite-by-attribute", attr="sex")
    assert space.contains(t, 0, 1)       # F-M
    assert not space.contains(t, 0, 2)   # F-F
    mask = space.mask(t, t.ids)
    assert mask[0, 1] and not mask[0, 2] and not mask[1, 1]
    net = NetworkState(t, space)
    net.add_tie(0, 1)
    with pytest.raises(ContractError):
        net.add_tie(0, 2)


def test_explicit_list_dyad_space():
    t = small_table()
    space = DyadSpace(kind="explicit-list", pairs=frozenset({(1, 0), (2, 3)}))
    assert space.contains(t, 0, 1)
    assert not space.contains(t, 1, 2)


def test_network_json_roundtrip(tmp_path, rng):
    net = random_network(rng, 8, 0.3)
    path = tmp_path / "net.json"
    net.save(path)
    back = NetworkState.load(path)
    assert set(back.ties) == set(net.ties)
    assert back.clock == net.clock
    assert all(back.onset(*e) == net.onset(*e) for e in net.ties)
    recs = list(back.table.records())
    assert recs == list(net.table.records())


def test_actor_csv_roundtrip_and_errors(tmp_path):
    path = tmp_path / "actors.csv"
    path.write_text("id,sex,race,age_months\n0,F,B,300\n1,M,W,420\n")
    t = ActorTable.from_csv(path)
    assert t.n_active() == 2
    assert t.level_of("race", 1) == "W"

    bad = tmp_path / "bad.csv"
    bad.write_text("id,sex,race,age_months\n0,F,B,nope\n")
    with pytest.raises(ConfigError, match="line 2"):
        ActorTable.from_csv(bad)
    headerless = tmp_path / "no.csv"
    headerless.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError, match="header"):
        ActorTable.from_csv(headerless)


def test_inactive_endpoint_rejected():
    t = small_table()
    t.deactivate(3)
    net = NetworkState(t)
    with pytest.raises(ContractError):
        net.add_tie(0, 3)
