"""Bundled synthetic egocentric survey.

The real survey this package's workflow was designed around cannot be
redistributed, so a synthetic stand-in with the same schema ships in
``stergm/data``: a population with sex, race, and age attributes whose
partnership network evolved under a known parameter vector until
equilibrium, then censused egocentrically (ongoing ties plus a 12-month
retrospective window of ended ones). Regenerate with
``tools/generate_synthetic_survey.py``.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .dynamics import ModelSpec, _Chain
from .egodata import EgoSample, ego_census
from .netcore import ActorTable, NetworkState
from .statistics import StatisticTerm, TargetSpec

RACES = ("B", "H", "O", "W")
RACE_PROBS = (0.3, 0.2, 0.2, 0.3)

TRUE_THETA_PLUS = (-3.1, 0.4, 0.8)
TRUE_THETA_MINUS = (2.9444389791664403,)  # logit(0.95): 20-month mean duration


def synthetic_population(n=500, seed=0) -> ActorTable:
    rng = np.random.default_rng(seed)
    table = ActorTable()
    for _ in range(n):
        sex = "F" if rng.random() < 0.5 else "M"
        race = RACES[int(rng.choice(len(RACES), p=RACE_PROBS))]
        age = int(rng.integers(216, 720))
        table.add_actor(sex, race, age)
    return table


def synthetic_model() -> ModelSpec:
    return ModelSpec(
        formation=[StatisticTerm("edges"),
                   StatisticTerm("actor-activity-by-category",
                                 attr="sex", level="M"),
                   StatisticTerm("category-homophily", attr="race", level="W")],
        theta_plus=TRUE_THETA_PLUS,
        dissolution=[StatisticTerm("edges")],
        theta_minus=TRUE_THETA_MINUS,
        size_offset=True)


def synthetic_target_spec() -> TargetSpec:
    return TargetSpec(
        terms=list(synthetic_model().formation) + [StatisticTerm("mean-tie-age")],
        normalization="per-capita-by-group")


def make_synthetic_survey(n_egos=500, seed=20, equilibrate_steps=400,
                          window_months=12) -> EgoSample:
    """Simulate the known model to equilibrium and census it, keeping the
    last window of dissolved ties as retrospective reports."""
    table = synthetic_population(n_egos, seed=seed)
    model = synthetic_model()
    net = NetworkState(table)
    seeds = np.random.SeedSequence(seed).spawn(2)
    chain = _Chain(net, model, np.random.default_rng(seeds[0]),
                   np.random.default_rng(seeds[1]))
    dissolved_records = []
    for k in range(equilibrate_steps):
        onsets = dict(chain.net._onset)
        _, dissolved = chain.step()
        if k >= equilibrate_steps - window_months:
            clock = chain.net.clock
            dissolved_records.extend(
                (e[0], e[1], onsets[e], clock) for e in dissolved)
    return ego_census(chain.to_network_state(), dissolved_records,
                      window_months=window_months)


def bundled_survey_path():
    return resources.files("stergm.data") / "synthetic_survey.csv"


def bundled_model_path():
    return resources.files("stergm.data") / "synthetic_model.json"
