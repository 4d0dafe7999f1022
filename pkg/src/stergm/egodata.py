"""Egocentric survey ingestion and statistic recovery.

Respondents (egos) report their own attributes plus, for each nominated
partner (alter), the alter's attributes and the relationship's start and
end in whole months before the interview (ongoing relationships have no
end). Alters are nominations, not resolved actors: two respondents may
unknowingly name the same person, so each undirected tie can be reported
up to twice and dyad-level sums carry a 1/2 factor.

For any local statistic, an egocentric census of a network recovers the
full-network value exactly; the module's tests hold this to bit equality.
A single cross-section with ages can identify which current ties just
formed (age <= 1) but cannot see dissolved ties at all, so implicitly
dynamic dissolution statistics are unavailable without a second wave (or a
retrospective window, from which a linked earlier wave is derived).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, UndefinedTargetError, UnsupportedModelError
from .netcore import ActorTable, NetworkState
from .statistics import (DEGREE_KINDS, StatisticTerm, TargetSpec, TRANSFORMS,
                         eval_targets, normalization_group)

ONGOING = "ONGOING"


@dataclass(frozen=True)
class EgoRecord:
    ego_id: int
    sex: str
    race: str
    age_months: int


@dataclass(frozen=True)
class Nomination:
    sex: str
    race: str
    age_months: int
    start_months_before: int
    end_months_before: int | None  # None while ongoing

    def __post_init__(self):
        if self.start_months_before < 0:
            raise ConfigError("nomination starts in the future")
        if (self.end_months_before is not None
                and not (0 <= self.end_months_before <= self.start_months_before)):
            raise ConfigError("nomination end after its start")

    def active_at(self, months_before):
        """Ongoing at the time `months_before` months before the interview."""
        if self.start_months_before < months_before:
            return False
        return self.end_months_before is None or \
            self.end_months_before < months_before

    def age_at(self, months_before):
        """Inclusive age in months at that time (only if active then)."""
        return self.start_months_before - months_before + 1


class EgoSample:
    """Parsed egocentric survey: egos plus per-ego nomination lists."""

    def __init__(self, egos, nominations, window_months=12):
        self.egos = list(egos)
        self.noms = {e.ego_id: [] for e in self.egos}
        for ego_id, nom in nominations:
            if ego_id not in self.noms:
                raise ConfigError(f"nomination for unknown ego {ego_id}")
            self.noms[ego_id].append(nom)
        self.window_months = window_months

    def __len__(self):
        return len(self.egos)

    def wave(self, months_before):
        """Linked snapshot of each ego's active nominations at a past time;
        nomination identity is the row position within the ego, so waves
        from the same sample are linkable."""
        view = {}
        for e in self.egos:
            view[e.ego_id] = {k: nom for k, nom in enumerate(self.noms[e.ego_id])
                              if nom.active_at(months_before)}
        return Wave(sample=self, months_before=months_before, view=view)

    # -- CSV (single file; ego rows leave alter fields empty and vice versa)
    CSV_FIELDS = ("ego_id", "sex", "race", "age_months", "alter_sex",
                  "alter_race", "alter_age_months", "start_months_before",
                  "end_months_before")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.CSV_FIELDS)
            w.writeheader()
            for e in self.egos:
                w.writerow({"ego_id": e.ego_id, "sex": e.sex, "race": e.race,
                            "age_months": e.age_months})
            for e in self.egos:
                for nom in self.noms[e.ego_id]:
                    end = ONGOING if nom.end_months_before is None \
                        else nom.end_months_before
                    w.writerow({"ego_id": e.ego_id, "alter_sex": nom.sex,
                                "alter_race": nom.race,
                                "alter_age_months": nom.age_months,
                                "start_months_before": nom.start_months_before,
                                "end_months_before": end})

    @classmethod
    def from_csv(cls, path, window_months=12):
        def whole_months(value, lineno, col):
            try:
                f = float(value)
            except ValueError:
                raise ConfigError(f"{path}: line {lineno}: {col} "
                                  f"{value!r} is not a number") from None
            if f != int(f):
                raise ConfigError(f"{path}: line {lineno}: {col} {value!r} "
                                  "has sub-month precision")
            return int(f)

        egos, noms = [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(cls.CSV_FIELDS) - set(reader.fieldnames or [])
            if missing:
                raise ConfigError(f"{path}: header missing {sorted(missing)}")
            for lineno, row in enumerate(reader, start=2):
                if row["sex"]:
                    egos.append(EgoRecord(
                        ego_id=whole_months(row["ego_id"], lineno, "ego_id"),
                        sex=row["sex"], race=row["race"],
                        age_months=whole_months(row["age_months"], lineno,
                                                "age_months")))
                elif row["alter_sex"]:
                    end = row["end_months_before"]
                    noms.append((
                        whole_months(row["ego_id"], lineno, "ego_id"),
                        Nomination(
                            sex=row["alter_sex"], race=row["alter_race"],
                            age_months=whole_months(row["alter_age_months"],
                                                    lineno, "alter_age_months"),
                            start_months_before=whole_months(
                                row["start_months_before"], lineno,
                                "start_months_before"),
                            end_months_before=None if end == ONGOING else
                            whole_months(end, lineno, "end_months_before"))))
                else:
                    raise ConfigError(f"{path}: line {lineno}: neither ego "
                                      "nor nomination row")
        return cls(egos, noms, window_months=window_months)


@dataclass
class Wave:
    sample: EgoSample
    months_before: int
    view: dict


# ---------------------------------------------------------------------------
# Per-pair term values (must match statistics._tie_value_array bit-for-bit)


def _pair_value(term: StatisticTerm, ego, alter, n_pseudo):
    k = term.kind
    if k == "edges":
        return 1.0
    if k == "actor-activity-by-category":
        return (1.0 if getattr(ego, term.attr) == term.level else 0.0) + \
            (1.0 if getattr(alter, term.attr) == term.level else 0.0)
    if k == "category-homophily":
        return 1.0 if (getattr(ego, term.attr) == term.level
                       and getattr(alter, term.attr) == term.level) else 0.0
    if k == "same-category-pair":
        return 1.0 if getattr(ego, term.attr) == getattr(alter, term.attr) else 0.0
    if k == "actor-covariate-effect":
        f = TRANSFORMS[term.transform]
        return f(ego.age_months / 12.0) + f(alter.age_months / 12.0)
    if k == "dyad-covariate-effect":
        f = TRANSFORMS[term.transform]
        d = abs(f(ego.age_months / 12.0) - f(alter.age_months / 12.0))
        return d if term.power == 1 else d * d
    if k == "older-male-younger-female":
        a = ego.sex == "M" and alter.sex == "F" and ego.age_months > alter.age_months
        b = alter.sex == "M" and ego.sex == "F" and alter.age_months > ego.age_months
        return 1.0 if (a or b) else 0.0
    if k == "offset-log-inverse-n":
        return math.log(1.0 / n_pseudo)
    raise UnsupportedModelError(
        f"{term.name} cannot be recovered from egocentric data")


def _is_actor_level(term):
    return term.kind in DEGREE_KINDS


def _deg1_indicator(term, ego, n_alters):
    if n_alters != 1:
        return 0.0
    if term.kind == "degree1-count":
        return 1.0
    return 1.0 if getattr(ego, term.attr) == term.level else 0.0


@dataclass
class EgoTargetReport:
    """Recovered targets scaled to a pseudo-network of one actor per ego."""

    spec: TargetSpec
    values: np.ndarray          # counts for the |E|-actor pseudo-network
    normalized: np.ndarray      # per-capita by the reporting rules
    names: tuple
    n_egos: int
    group_sizes: dict
    mean_ongoing_age: float | None


def _group_sizes(egos, spec):
    sizes = {}
    for term in spec.terms:
        grp = normalization_group(term)
        if grp and grp not in sizes:
            attr, level = grp
            sizes[grp] = sum(1 for e in egos if getattr(e, attr) == level)
    return sizes


def recover_cross_targets(sample: EgoSample, spec: TargetSpec,
                          months_before=0) -> EgoTargetReport:
    """Cross-sectional target recovery from active nominations.

    Dyad-level terms are half the sum of per-report pair values (each tie
    is reportable twice); actor-level terms sum ego indicators; the
    mean-tie-age target averages ages of active nominations.
    """
    egos = sample.egos
    n = len(egos)
    active = {e.ego_id: [nom for nom in sample.noms[e.ego_id]
                         if nom.active_at(months_before)] for e in egos}
    values = np.empty(len(spec.terms))
    mean_age = None
    for t, term in enumerate(spec.terms):
        if term.kind == "mean-tie-age":
            ages = [float(nom.age_at(months_before))
                    for e in egos for nom in active[e.ego_id]]
            if not ages:
                raise UndefinedTargetError("no ongoing nominations")
            mean_age = math.fsum(ages) / len(ages)
            values[t] = mean_age
        elif term.kind == "mean-monogamous-tie-age":
            ages = [float(active[e.ego_id][0].age_at(months_before))
                    for e in egos if len(active[e.ego_id]) == 1]
            values[t] = math.fsum(ages) / n
        elif _is_actor_level(term):
            values[t] = math.fsum(
                _deg1_indicator(term, e, len(active[e.ego_id])) for e in egos)
        else:
            values[t] = 0.5 * math.fsum(
                _pair_value(term, e, nom, n)
                for e in egos for nom in active[e.ego_id])
    sizes = _group_sizes(egos, spec)
    den = np.ones(len(spec.terms))
    for t, term in enumerate(spec.terms):
        if term.is_duration():
            continue
        grp = normalization_group(term)
        size = sizes[grp] if grp else n
        # an empty group makes the per-capita view undefined (NaN) without
        # spoiling the raw counts
        den[t] = size if size > 0 else np.nan
    return EgoTargetReport(spec=spec, values=values, normalized=values / den,
                           names=spec.names, n_egos=n, group_sizes=sizes,
                           mean_ongoing_age=mean_age)


def scale_targets_to_table(report: EgoTargetReport, table: ActorTable):
    """Target values for a pseudo-network with the given actor table:
    per-capita values times the table's group sizes (duration targets pass
    through unchanged)."""
    from .statistics import Frame, normalization_denominators

    frame = Frame(table)
    den = normalization_denominators(frame, TargetSpec(
        terms=report.spec.terms, normalization="per-capita-by-group"))
    out = report.normalized.copy()
    for t, term in enumerate(report.spec.terms):
        if not term.is_duration():
            out[t] = report.normalized[t] * den[t]
    return out


def resample_egos(sample: EgoSample, size, rng) -> ActorTable:
    """Pseudo-population of the given size drawn from the egos with
    replacement; actor ids are fresh."""
    idx = rng.integers(0, len(sample.egos), size=size)
    table = ActorTable()
    people = sample.egos + [n for noms in sample.noms.values() for n in noms]
    table.declare_levels("sex", sorted({p.sex for p in people}))
    table.declare_levels("race", sorted({p.race for p in people}))
    for x in idx:
        e = sample.egos[int(x)]
        table.add_actor(e.sex, e.race, e.age_months)
    return table


# ---------------------------------------------------------------------------
# Transition statistics from linked waves


@dataclass
class TransitionReport:
    values: np.ndarray | None
    names: tuple
    formation_values: np.ndarray
    dissolution_values: np.ndarray | None
    dissolution_available: bool
    note: str = ""


def recover_transition_stats(wave_prev: Wave, wave_now: Wave,
                             formation_terms, dissolution_terms) -> TransitionReport:
    """Transition statistic recovery from two linked waves.

    Implicitly dynamic formation terms are evaluated on the union network
    (previous ties plus current), dissolution terms on the intersection
    (persisted ties); per ego those are the union and intersection of its
    linked nomination sets. Dyad-level sums carry the 1/2 factor;
    actor-level degree-1 terms use the union/intersection neighborhood
    sizes.
    """
    if wave_prev.sample is not wave_now.sample:
        raise ContractError("waves come from different samples; nominations "
                            "are not linkable")
    if wave_prev.months_before <= wave_now.months_before:
        raise ContractError("wave_prev must be earlier than wave_now")
    sample = wave_prev.sample
    egos = sample.egos

    def collect(which):
        per_ego = {}
        for e in egos:
            prev = wave_prev.view[e.ego_id]
            now = wave_now.view[e.ego_id]
            keys = set(prev) | set(now) if which == "union" \
                else set(prev) & set(now)
            per_ego[e.ego_id] = [sample.noms[e.ego_id][k] for k in keys]
        return per_ego

    def sums(terms, per_ego):
        out = np.empty(len(terms))
        for t, term in enumerate(terms):
            if _is_actor_level(term):
                out[t] = math.fsum(
                    _deg1_indicator(term, e, len(per_ego[e.ego_id]))
                    for e in egos)
            else:
                out[t] = 0.5 * math.fsum(
                    _pair_value(term, e, nom, len(egos))
                    for e in egos for nom in per_ego[e.ego_id])
        return out

    fvals = sums(list(formation_terms), collect("union"))
    dvals = sums(list(dissolution_terms), collect("intersection"))
    names = tuple([f"formation.{t.name}" for t in formation_terms]
                  + [f"dissolution.{t.name}" for t in dissolution_terms])
    return TransitionReport(values=np.concatenate([fvals, dvals]),
                            names=names, formation_values=fvals,
                            dissolution_values=dvals,
                            dissolution_available=True)


def recover_single_wave_transition(sample: EgoSample, formation_terms,
                                   dissolution_terms) -> TransitionReport:
    """What one cross-section with ages identifies: ties of age 1 are
    known formed this step, so formation sums over just-formed ties are
    available; dissolved ties are indistinguishable from never-ties, so
    dissolution sums are flagged unavailable."""
    egos = sample.egos
    formed = {e.ego_id: [nom for nom in sample.noms[e.ego_id]
                         if nom.active_at(0) and nom.age_at(0) <= 1]
              for e in egos}
    fvals = np.empty(len(formation_terms))
    for t, term in enumerate(formation_terms):
        if _is_actor_level(term):
            raise UnsupportedModelError(
                f"{term.name} needs the union neighborhood; not identifiable "
                "from one wave")
        fvals[t] = 0.5 * math.fsum(_pair_value(term, e, nom, len(egos))
                                   for e in egos for nom in formed[e.ego_id])
    names = tuple(f"formation.{t.name}" for t in formation_terms)
    return TransitionReport(
        values=None, names=names, formation_values=fvals,
        dissolution_values=None, dissolution_available=False,
        note="single wave with ages identifies formed ties (age <= 1) but "
             "cannot distinguish dissolved ties from never-ties")


# ---------------------------------------------------------------------------
# Census construction (testing and synthetic-data support)


def ego_census(net: NetworkState, dissolved_records=(), window_months=12) -> EgoSample:
    """Perfect egocentric census of a network state: every active actor is
    an ego; ongoing nominations mirror extant ties with their ages, and
    optional (i, j, onset, end_step) records add reports of ties that ended
    within the retrospective window."""
    table = net.table
    egos = [EgoRecord(ego_id=int(rec["id"]), sex=rec["sex"], race=rec["race"],
                      age_months=int(rec["age_months"]))
            for rec in table.records() if rec["active"]]
    attrs = {e.ego_id: e for e in egos}
    noms = []
    for (i, j), onset in net._onset.items():
        age = net.clock - onset + 1
        for ego_id, alter_id in ((i, j), (j, i)):
            a = attrs[alter_id]
            noms.append((ego_id, Nomination(
                sex=a.sex, race=a.race, age_months=a.age_months,
                start_months_before=age - 1, end_months_before=None)))
    for (i, j, onset, end_step) in dissolved_records:
        months_since_end = net.clock - end_step
        if months_since_end >= window_months or months_since_end < 0:
            continue
        start_before = net.clock - onset
        for ego_id, alter_id in ((i, j), (j, i)):
            if ego_id not in attrs or alter_id not in attrs:
                continue
            a = attrs[alter_id]
            noms.append((ego_id, Nomination(
                sex=a.sex, race=a.race, age_months=a.age_months,
                start_months_before=start_before,
                end_months_before=months_since_end)))
    return EgoSample(egos, noms, window_months=window_months)


# ---------------------------------------------------------------------------
# The conditioning obstruction


@dataclass
class ConditioningReport:
    n_actors: int
    summary: tuple
    network_a: tuple
    network_b: tuple
    reachable_a: frozenset
    reachable_b: frozenset
    witness: tuple

    def describe(self):
        return (f"Both networks have {self.summary[0]} ties and "
                f"{self.summary[1]} degree-1 actors, yet the transition "
                f"statistic {self.witness} is one-toggle-reachable only "
                f"from network B: conditional normalizing constants differ.")


def _deg1_count(edges, n):
    deg = [0] * n
    for (i, j) in edges:
        deg[i] += 1
        deg[j] += 1
    return sum(1 for d in deg if d == 1)


def one_toggle_statistics(edges, n):
    """Set of (hamming distance, degree-1 count) transition statistics
    reachable from the network by toggling exactly one dyad."""
    edges = frozenset(edges)
    out = set()
    for i in range(n):
        for j in range(i + 1, n):
            e = (i, j)
            nxt = edges - {e} if e in edges else edges | {e}
            out.add((1, _deg1_count(nxt, n)))
    return frozenset(out)


def conditioning_demo(n_actors=6, edge_count=4, deg1_count=4) -> ConditioningReport:
    """Exhaustive search for two networks with the same recoverable summary
    (edge count, degree-1 count) whose one-toggle-reachable transition
    statistic sets differ, witnessed by (1, deg1_count + 2).

    Shows that the conditional likelihood's normalizing constant is not a
    function of what egocentric data can recover.
    """
    from itertools import combinations

    dyads = [(i, j) for i in range(n_actors) for j in range(i + 1, n_actors)]
    witness = (1, deg1_count + 2)
    net_a = net_b = reach_a = reach_b = None
    for edges in combinations(dyads, edge_count):
        if _deg1_count(edges, n_actors) != deg1_count:
            continue
        reach = one_toggle_statistics(edges, n_actors)
        if witness in reach:
            if net_b is None:
                net_b, reach_b = edges, reach
        elif net_a is None:
            net_a, reach_a = edges, reach
        if net_a is not None and net_b is not None:
            break
    if net_a is None or net_b is None:
        raise ContractError(
            f"no witness pair among {n_actors}-actor networks with summary "
            f"({edge_count}, {deg1_count})")
    return ConditioningReport(
        n_actors=n_actors, summary=(edge_count, deg1_count),
        network_a=net_a, network_b=net_b,
        reachable_a=reach_a, reachable_b=reach_b, witness=witness)
