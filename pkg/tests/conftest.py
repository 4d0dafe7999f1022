import numpy as np
import pytest

from stergm.netcore import ActorTable, NetworkState
from stergm.statistics import StatisticTerm

SEXES = ("F", "M")
RACES = ("B", "H", "O", "W")


def random_table(rng, n):
    t = ActorTable()
    t.declare_levels("sex", SEXES)
    t.declare_levels("race", RACES)
    for _ in range(n):
        t.add_actor(SEXES[int(rng.integers(2))],
                    RACES[int(rng.integers(4))],
                    int(rng.integers(216, 720)))
    return t


def random_network(rng, n, p, clock=30):
    net = NetworkState(random_table(rng, n), clock=clock)
    ids = list(net.table.ids)
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p:
                net.add_tie(ids[a], ids[b],
                            onset=int(rng.integers(clock - 20, clock + 1)))
    return net


def full_battery():
    return [
        StatisticTerm("edges"),
        StatisticTerm("actor-activity-by-category", attr="sex", level="M"),
        StatisticTerm("actor-activity-by-category", attr="sex", level="F"),
        StatisticTerm("actor-activity-by-category", attr="race", level="W"),
        StatisticTerm("category-homophily", attr="race", level="B"),
        StatisticTerm("category-homophily", attr="race", level="W"),
        StatisticTerm("same-category-pair", attr="sex"),
        StatisticTerm("degree1-count"),
        StatisticTerm("degree1-count-by-category", attr="sex", level="F"),
        StatisticTerm("degree1-count-by-category", attr="sex", level="M"),
        StatisticTerm("actor-covariate-effect", transform="sqrt"),
        StatisticTerm("actor-covariate-effect", transform="identity"),
        StatisticTerm("dyad-covariate-effect", transform="sqrt", power=1),
        StatisticTerm("dyad-covariate-effect", transform="identity", power=1),
        StatisticTerm("dyad-covariate-effect", transform="sqrt", power=2),
        StatisticTerm("dyad-covariate-effect", transform="identity", power=2),
        StatisticTerm("older-male-younger-female"),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
