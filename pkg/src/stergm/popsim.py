"""Evolving-population simulation: network step plus births, deaths,
aging, and age-out, with tie-history logging for duration analysis.

Each time step (one month) runs exactly this sub-step sequence:

  1. the size-adjusted network evolution step (formation and dissolution);
  2. births: each actor spawns, with the birth probability, a new actor
     with the parent's attributes but entry age and uniform-random sex;
  3. deaths: each actor is removed with the death probability;
  4. every actor ages one month;
  5. actors at or past the exit age are removed;
  6. ties incident on removed actors dissolve (recorded as censored);
  7. the population state is recorded.

Vital changes within a step never feed back into that step's network
phase. Permuting sub-steps changes results; the order is pinned by a
golden-trace test.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ChainConfig, ModelSpec, _Chain
from .errors import ConfigError, ContractError, UndefinedTargetError
from .netcore import NetworkState
from .statistics import TargetSpec

CAUSE_DISSOLVED = "dissolved"
CAUSE_REMOVED = "actor-removed"
CAUSE_SIM_END = "simulation-end"


@dataclass(frozen=True)
class VitalConfig:
    """Birth/death/age-window process parameters (probabilities are per
    actor per step)."""

    birth_prob: float = 0.0023
    death_prob: float = 0.00042
    entry_age_months: int = 216   # 18 years
    exit_age_months: int = 720    # 60 years
    steps: int = 6000
    seed: int = 0

    def __post_init__(self):
        for p in (self.birth_prob, self.death_prob):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"vital probability {p} outside [0, 1]")
        if self.entry_age_months >= self.exit_age_months:
            raise ConfigError("entry age must precede exit age")

    def to_json(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_json(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown vital config keys {sorted(unknown)}")
        return cls(**known)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


class TieHistoryLog:
    """Append-only per-tie records: onset step, end step, and how the tie
    left the data (natural dissolution, actor removal, or simulation end).

    A completed tie's duration is end - onset (the number of dissolution
    phases it survived plus one is its last age). A censored record's value
    end - onset counts the phases it survived; the tie's true duration
    exceeds it.
    """

    def __init__(self):
        self.i = []
        self.j = []
        self.onset = []
        self.end = []
        self.cause = []

    def record(self, i, j, onset, end, cause):
        if end < onset:
            raise ContractError("tie ends before its onset")
        if cause not in (CAUSE_DISSOLVED, CAUSE_REMOVED, CAUSE_SIM_END):
            raise ContractError(f"unknown censoring cause {cause!r}")
        self.i.append(i)
        self.j.append(j)
        self.onset.append(onset)
        self.end.append(end)
        self.cause.append(cause)

    def __len__(self):
        return len(self.i)

    def durations(self):
        """(values, event_observed) pairs for survival analysis: completed
        records carry their duration with event=True; censored records the
        survived-phase count with event=False."""
        vals = np.asarray(self.end, dtype=np.int64) - np.asarray(self.onset,
                                                                 dtype=np.int64)
        events = np.asarray([c == CAUSE_DISSOLVED for c in self.cause])
        return vals, events

    def observed_lengths(self):
        """Steps each tie was present in recorded states (descriptive)."""
        vals = np.asarray(self.end, dtype=np.int64) - np.asarray(self.onset,
                                                                 dtype=np.int64)
        sim_end = np.asarray([c == CAUSE_SIM_END for c in self.cause])
        return vals + sim_end

    def censored_fraction(self):
        if not self.cause:
            return 0.0
        return sum(c != CAUSE_DISSOLVED for c in self.cause) / len(self.cause)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "onset", "end", "cause"])
            for row in zip(self.i, self.j, self.onset, self.end, self.cause):
                w.writerow(row)


def km_survival(durations, events):
    """Product-limit survival estimate over the observed integer grid.

    Returns (times, s_hat) where s_hat[k] estimates P(X > times[k]);
    censored records contribute to risk sets only.
    """
    durations = np.asarray(durations)
    events = np.asarray(events, dtype=bool)
    if not events.any():
        raise ContractError("all records censored; survival is unidentified")
    times = np.unique(durations[events])
    s = np.empty(len(times))
    cur = 1.0
    for k, x in enumerate(times):
        at_risk = int(np.sum(durations >= x))
        deaths = int(np.sum(durations[events] == x))
        cur *= 1.0 - deaths / at_risk
        s[k] = cur
    return times, s


def km_adjusted_mean_duration(log: TieHistoryLog):
    """(raw_mean, km_mean): the face-value average observed tie length, and
    the mean duration from integrating the product-limit survival function
    over the observed span (sum of S(x) for x = 0 .. max observed - 1)."""
    durations, events = log.durations()
    if len(durations) == 0:
        raise ContractError("empty tie history")
    raw_mean = float(np.mean(log.observed_lengths()))
    times, s = km_survival(durations, events)
    span = int(durations.max())
    km_mean = 0.0
    cur = 1.0
    idx = 0
    for x in range(span):
        while idx < len(times) and times[idx] <= x:
            cur = s[idx]
            idx += 1
        km_mean += cur
    return raw_mean, float(km_mean)


@dataclass
class PopsimResult:
    stats: np.ndarray | None
    stat_names: tuple
    steps_recorded: list
    composition: list
    tie_log: TieHistoryLog
    final_state: NetworkState
    events: dict


def popsim_step(chain: _Chain, vital: VitalConfig, vital_rng,
                log: TieHistoryLog):
    """One full month: the seven sub-steps, in order. Returns the vital
    event counts for the step."""
    table = chain.net.table
    onset = chain.net._onset

    # 1. network evolution (size offset reads the pre-step active count)
    formed = chain.sample_formation()
    dissolved = chain.sample_dissolution()
    chain.net.clock += 1
    clock = chain.net.clock
    for e in dissolved:
        log.record(e[0], e[1], onset[e], clock, CAUSE_DISSOLVED)
        del onset[e]
    for e in formed:
        onset[e] = clock

    # 2. births
    parents = table.active_ids()
    born = parents[vital_rng.random(len(parents)) < vital.birth_prob]
    sex_levels = table.levels("sex")
    for parent in born:
        sex = sex_levels[int(vital_rng.integers(0, len(sex_levels)))]
        table.add_actor(sex, table.level_of("race", int(parent)),
                        vital.entry_age_months)

    # 3. deaths (newborns included: they are actors by now)
    alive = table.active_ids()
    dead = set(int(a) for a in
               alive[vital_rng.random(len(alive)) < vital.death_prob])

    # 4. aging
    table.increment_ages(1)

    # 5. age-out
    aged_out = set()
    for a in table.active_ids():
        a = int(a)
        if a not in dead and \
                table.age_months[table.row(a)] >= vital.exit_age_months:
            aged_out.add(a)

    # 6. removals dissolve incident ties (censored by removal)
    removed = dead | aged_out
    if removed:
        for a in removed:
            table.deactivate(a)
        for e in [e for e in onset if e[0] in removed or e[1] in removed]:
            log.record(e[0], e[1], onset[e], clock, CAUSE_REMOVED)
            del onset[e]
    # ages moved every step, so attribute caches must always follow
    chain.refresh()

    # 7. recording is the caller's (it owns the output layout)
    return {"births": int(len(born)), "deaths": len(dead),
            "ageouts": len(aged_out)}


def run_popsim(init: NetworkState, model: ModelSpec, vital: VitalConfig,
               spec: TargetSpec = None, record_interval=1,
               mcmc_proposals_per_phase=None) -> PopsimResult:
    """Simulate the evolving population for ``vital.steps`` months."""
    seeds = np.random.SeedSequence(vital.seed).spawn(3)
    chain = _Chain(init, model, np.random.default_rng(seeds[0]),
                   np.random.default_rng(seeds[1]),
                   mcmc_proposals_per_phase)
    vital_rng = np.random.default_rng(seeds[2])
    log = TieHistoryLog()

    stats_rows = []
    steps_recorded = []
    composition = []
    totals = {"births": 0, "deaths": 0, "ageouts": 0}
    sex_levels = init.table.levels("sex")
    race_levels = init.table.levels("race")

    for k in range(vital.steps):
        ev = popsim_step(chain, vital, vital_rng, log)
        for key in totals:
            totals[key] += ev[key]
        if (k + 1) % record_interval:
            continue
        frame = chain.frame
        steps_recorded.append(chain.net.clock)
        row = {"step": chain.net.clock, "n": frame.n,
               "ties": chain.net.n_ties(), **ev}
        for s in sex_levels:
            row[f"n.sex.{s}"] = frame.group_count("sex", s)
        for r in race_levels:
            row[f"n.race.{r}"] = frame.group_count("race", r)
        composition.append(row)
        if spec is not None:
            try:
                stats_rows.append(chain.eval_targets(spec))
            except UndefinedTargetError:
                stats_rows.append(np.full(len(spec.terms), np.nan))

    for e, o in chain.net._onset.items():
        log.record(e[0], e[1], o, chain.net.clock, CAUSE_SIM_END)

    stats = np.asarray(stats_rows) if spec is not None else None
    return PopsimResult(stats=stats,
                        stat_names=spec.names if spec is not None else (),
                        steps_recorded=steps_recorded,
                        composition=composition, tie_log=log,
                        final_state=chain.to_network_state(), events=totals)


def composition_report(result: PopsimResult):
    """Time series of subpopulation sizes and proportions derived from a
    run's recorded composition rows."""
    out = []
    for row in result.composition:
        rec = dict(row)
        n = row["n"]
        for key in list(row):
            if key.startswith("n.") and n > 0:
                rec["prop." + key[2:]] = row[key] / n
        out.append(rec)
    return out


def write_composition_csv(result: PopsimResult, path):
    rows = composition_report(result)
    if not rows:
        raise ContractError("nothing recorded")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)


def write_stats_csv(result: PopsimResult, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step"] + list(result.stat_names))
        if result.stats is not None:
            for step, row in zip(result.steps_recorded, result.stats):
                w.writerow([step] + [float(v) for v in row])
