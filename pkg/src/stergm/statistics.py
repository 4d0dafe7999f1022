"""Generative and target statistics over network states.

Every term here is *local*: its change statistic for a dyad (i, j) depends
only on attributes and ties incident to i and j, which is what makes both
the fast per-dyad samplers and the egocentric recovery in
:mod:`stergm.egodata` possible.

Floating-point sums use ``math.fsum`` so that differently-ordered but
mathematically identical accumulations (network-side vs ego-census-side)
agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, ContractError, UndefinedTargetError,
                     UnsupportedModelError)
from .netcore import ActorTable, NetworkState, canonical_pair

STRUCTURAL_KINDS = (
    "edges",
    "actor-activity-by-category",
    "category-homophily",
    "same-category-pair",
    "degree1-count",
    "degree1-count-by-category",
    "actor-covariate-effect",
    "dyad-covariate-effect",
    "older-male-younger-female",
    "offset-log-inverse-n",
)
DURATION_KINDS = ("mean-tie-age", "mean-monogamous-tie-age")
DEGREE_KINDS = ("degree1-count", "degree1-count-by-category")
TRANSFORMS = {"sqrt": math.sqrt, "identity": float}


@dataclass(frozen=True)
class StatisticTerm:
    """One named statistic; ``kind`` selects the formula, the remaining
    fields parameterize it."""

    kind: str
    attr: str | None = None
    level: str | None = None
    transform: str | None = None
    power: int = 1
    implicit_dynamic: bool = True

    def __post_init__(self):
        if self.kind not in STRUCTURAL_KINDS + DURATION_KINDS:
            raise ConfigError(f"unknown statistic term {self.kind!r}")
        if self.kind in ("actor-activity-by-category", "category-homophily",
                         "degree1-count-by-category"):
            if self.attr is None or self.level is None:
                raise ConfigError(f"{self.kind} needs attr and level")
        if self.kind == "same-category-pair" and self.attr is None:
            raise ConfigError("same-category-pair needs attr")
        if self.kind in ("actor-covariate-effect", "dyad-covariate-effect"):
            if self.transform not in TRANSFORMS:
                raise ConfigError(f"{self.kind} needs transform in {sorted(TRANSFORMS)}")
            if self.power not in (1, 2):
                raise ConfigError(f"{self.kind} power must be 1 or 2")

    @property
    def name(self):
        k = self.kind
        if k == "edges":
            return "edges"
        if k == "actor-activity-by-category":
            return f"activity.{self.attr}.{self.level}"
        if k == "category-homophily":
            return f"homophily.{self.attr}.{self.level}"
        if k == "same-category-pair":
            return f"samecat.{self.attr}"
        if k == "degree1-count":
            return "deg1"
        if k == "degree1-count-by-category":
            return f"deg1.{self.attr}.{self.level}"
        if k == "actor-covariate-effect":
            return f"actorage.{self.transform}" + ("" if self.power == 1 else f".p{self.power}")
        if k == "dyad-covariate-effect":
            return f"agediff.{self.transform}.p{self.power}"
        if k == "older-male-younger-female":
            return "older.male.younger.female"
        if k == "offset-log-inverse-n":
            return "offset.log.inv.n"
        if k == "mean-tie-age":
            return "mean_tie_age"
        return "mean_monog_tie_age"

    def is_duration(self):
        return self.kind in DURATION_KINDS

    def is_dyad_independent(self):
        """Change statistic free of network state (degree terms are not)."""
        return self.kind not in DEGREE_KINDS and not self.is_duration()

    def to_json(self):
        d = {"term": self.kind}
        for f in ("attr", "level", "transform"):
            v = getattr(self, f)
            if v is not None:
                d[f] = v
        if self.power != 1:
            d["power"] = self.power
        if not self.implicit_dynamic:
            d["implicit_dynamic"] = False
        return d

    @classmethod
    def from_json(cls, d):
        return cls(kind=d["term"], attr=d.get("attr"), level=d.get("level"),
                   transform=d.get("transform"), power=d.get("power", 1),
                   implicit_dynamic=d.get("implicit_dynamic", True))


def parse_term_list(items):
    """Parse a JSON term list; returns (terms, theta) where theta entries may
    be None for target declarations."""
    terms, theta = [], []
    for d in items:
        terms.append(StatisticTerm.from_json(d))
        theta.append(d.get("theta"))
    return terms, theta


class Frame:
    """Dense evaluation context over the active actors of a table."""

    def __init__(self, table: ActorTable):
        self.table = table
        mask = table.active_mask
        self.ids = table.ids[mask]
        self.pos = {int(a): x for x, a in enumerate(self.ids)}
        self.sex = table.codes("sex")[mask]
        self.race = table.codes("race")[mask]
        self.age_months = table.age_months[mask]
        self.age_years = self.age_months / 12.0
        self.n = len(self.ids)

    def codes(self, attr):
        if attr == "sex":
            return self.sex
        if attr == "race":
            return self.race
        raise ConfigError(f"unknown categorical attribute {attr!r}")

    def level_code(self, attr, level):
        return self.table.level_code(attr, level)

    def group_count(self, attr, level):
        return int(np.sum(self.codes(attr) == self.level_code(attr, level)))

    def transformed_age(self, transform):
        f = TRANSFORMS[transform]
        return np.asarray([f(a) for a in self.age_years])


def _require_sex_levels(frame):
    try:
        return frame.level_code("sex", "M"), frame.level_code("sex", "F")
    except ConfigError:
        raise ConfigError("older-male-younger-female needs sex levels 'M' and 'F'") from None


def _tie_value_array(frame, term, ei, ej):
    """Per-tie contributions of a dyad-independent structural term."""
    k = term.kind
    if k == "edges":
        return np.ones(len(ei))
    if k == "actor-activity-by-category":
        c = frame.level_code(term.attr, term.level)
        codes = frame.codes(term.attr)
        return (codes[ei] == c).astype(float) + (codes[ej] == c).astype(float)
    if k == "category-homophily":
        c = frame.level_code(term.attr, term.level)
        codes = frame.codes(term.attr)
        return ((codes[ei] == c) & (codes[ej] == c)).astype(float)
    if k == "same-category-pair":
        codes = frame.codes(term.attr)
        return (codes[ei] == codes[ej]).astype(float)
    if k == "actor-covariate-effect":
        fa = frame.transformed_age(term.transform)
        return fa[ei] + fa[ej]
    if k == "dyad-covariate-effect":
        fa = frame.transformed_age(term.transform)
        d = np.abs(fa[ei] - fa[ej])
        return d if term.power == 1 else d * d
    if k == "older-male-younger-female":
        m, f = _require_sex_levels(frame)
        sex, age = frame.sex, frame.age_months
        a = (sex[ei] == m) & (sex[ej] == f) & (age[ei] > age[ej])
        b = (sex[ej] == m) & (sex[ei] == f) & (age[ej] > age[ei])
        return (a | b).astype(float)
    if k == "offset-log-inverse-n":
        return np.full(len(ei), math.log(1.0 / frame.n))
    raise ContractError(f"{k} has no per-tie value")


def eval_structural(frame, ei, ej, degrees, terms):
    """Structural statistic vector over tie index arrays (positions into the
    frame). ``degrees`` is the per-actor degree vector of the same network."""
    out = np.empty(len(terms))
    for t, term in enumerate(terms):
        if term.is_duration():
            raise ContractError("duration target in structural evaluation")
        if term.kind == "degree1-count":
            out[t] = float(np.sum(degrees == 1))
        elif term.kind == "degree1-count-by-category":
            c = frame.level_code(term.attr, term.level)
            out[t] = float(np.sum((degrees == 1) & (frame.codes(term.attr) == c)))
        else:
            out[t] = math.fsum(_tie_value_array(frame, term, ei, ej).tolist())
    return out


def tie_index_arrays(net: NetworkState, frame: Frame):
    """(ei, ej, ages) position arrays for the ties of a network state."""
    m = net.n_ties()
    ei = np.empty(m, dtype=np.int64)
    ej = np.empty(m, dtype=np.int64)
    ages = np.empty(m, dtype=np.int64)
    for x, (e, o) in enumerate(net._onset.items()):
        ei[x] = frame.pos[e[0]]
        ej[x] = frame.pos[e[1]]
        ages[x] = net.clock - o + 1
    return ei, ej, ages


def degrees_from_ties(n, ei, ej):
    deg = np.zeros(n, dtype=np.int64)
    np.add.at(deg, ei, 1)
    np.add.at(deg, ej, 1)
    return deg


def eval_stats(net: NetworkState, terms) -> np.ndarray:
    """Evaluate structural terms on a network state."""
    frame = Frame(net.table)
    ei, ej, _ = tie_index_arrays(net, frame)
    deg = degrees_from_ties(frame.n, ei, ej)
    return eval_structural(frame, ei, ej, deg, list(terms))


def change_stat(net: NetworkState, dyad, terms) -> np.ndarray:
    """g(y + ij) - g(y - ij) per term, computed directly from locality."""
    i, j = canonical_pair(*dyad)
    if not net.dyad_space.contains(net.table, i, j):
        raise ContractError(f"dyad ({i}, {j}) outside the dyad space")
    frame = Frame(net.table)
    ei, ej, _ = tie_index_arrays(net, frame)
    deg = degrees_from_ties(frame.n, ei, ej)
    pi, pj = frame.pos[i], frame.pos[j]
    if net.has_tie(i, j):
        deg[pi] -= 1
        deg[pj] -= 1
    return change_stat_from_arrays(frame, pi, pj, deg, list(terms))


def change_stat_from_arrays(frame, pi, pj, deg_without, terms):
    """Change statistic for one dyad given degrees excluding that dyad."""
    out = np.empty(len(terms))
    one_i = np.asarray([pi]), np.asarray([pj])
    for t, term in enumerate(terms):
        k = term.kind
        if term.is_duration():
            raise ContractError("duration target has no change statistic")
        if k in DEGREE_KINDS:
            if k == "degree1-count-by-category":
                c = frame.level_code(term.attr, term.level)
                in_i = frame.codes(term.attr)[pi] == c
                in_j = frame.codes(term.attr)[pj] == c
            else:
                in_i = in_j = True
            di, dj = deg_without[pi], deg_without[pj]
            v = 0.0
            if in_i:
                v += (1.0 if di == 0 else 0.0) - (1.0 if di == 1 else 0.0)
            if in_j:
                v += (1.0 if dj == 0 else 0.0) - (1.0 if dj == 1 else 0.0)
            out[t] = v
        else:
            out[t] = _tie_value_array(frame, term, *one_i)[0]
    return out


def dyad_delta_values(frame, terms, theta, ii, jj):
    """theta . change-statistic for many dyads at once; all terms must be
    dyad-independent (degree terms need the samplers' own bookkeeping)."""
    lo = np.zeros(len(ii))
    for term, th in zip(terms, theta):
        if not term.is_dyad_independent():
            raise UnsupportedModelError(f"{term.name} is not dyad-independent")
        if th == 0.0:
            continue
        lo += th * _tie_value_array(frame, term, ii, jj)
    return lo


def dyad_delta_matrix(frame, terms, theta):
    """Dense symmetric (n, n) matrix of theta . change-statistic for every
    dyad; dyad-independent terms only."""
    n = frame.n
    w = np.zeros((n, n))
    for term, th in zip(terms, theta):
        if not term.is_dyad_independent():
            raise UnsupportedModelError(f"{term.name} is not dyad-independent")
        if th == 0.0:
            continue
        k = term.kind
        if k == "edges":
            w += th
        elif k == "actor-activity-by-category":
            c = frame.level_code(term.attr, term.level)
            ind = (frame.codes(term.attr) == c).astype(float)
            w += th * (ind[:, None] + ind[None, :])
        elif k == "category-homophily":
            c = frame.level_code(term.attr, term.level)
            ind = (frame.codes(term.attr) == c).astype(float)
            w += th * (ind[:, None] * ind[None, :])
        elif k == "same-category-pair":
            codes = frame.codes(term.attr)
            w += th * (codes[:, None] == codes[None, :]).astype(float)
        elif k == "actor-covariate-effect":
            fa = frame.transformed_age(term.transform)
            w += th * (fa[:, None] + fa[None, :])
        elif k == "dyad-covariate-effect":
            fa = frame.transformed_age(term.transform)
            d = np.abs(fa[:, None] - fa[None, :])
            w += th * (d if term.power == 1 else d * d)
        elif k == "older-male-younger-female":
            m, f = _require_sex_levels(frame)
            male = frame.sex == m
            female = frame.sex == f
            older = frame.age_months[:, None] > frame.age_months[None, :]
            a = (male[:, None] & female[None, :]) & older
            w += th * (a | a.T).astype(float)
        elif k == "offset-log-inverse-n":
            w += th * math.log(1.0 / n)
    return w


def delta_bounds(frame, term):
    """Conservative (lo, hi) range of a term's change statistic over the
    dyad space; used to bound per-dyad probabilities."""
    k = term.kind
    if k == "edges":
        return 1.0, 1.0
    if k == "actor-activity-by-category":
        return 0.0, 2.0
    if k in ("category-homophily", "same-category-pair",
             "older-male-younger-female"):
        return 0.0, 1.0
    if k == "actor-covariate-effect":
        fa = frame.transformed_age(term.transform)
        return 2.0 * float(fa.min()), 2.0 * float(fa.max())
    if k == "dyad-covariate-effect":
        fa = frame.transformed_age(term.transform)
        span = float(fa.max() - fa.min())
        return 0.0, span if term.power == 1 else span * span
    if k == "offset-log-inverse-n":
        v = math.log(1.0 / frame.n)
        return v, v
    if k in DEGREE_KINDS:
        return -2.0, 2.0
    raise ContractError(f"{k} has no change-statistic bounds")


def logodds_upper_bound(frame, terms, theta):
    """Upper bound on theta . change-statistic over all dyads."""
    hi = 0.0
    for term, th in zip(terms, theta):
        lo_k, hi_k = delta_bounds(frame, term)
        hi += th * (hi_k if th >= 0 else lo_k)
    return hi


def uses_age_covariates(terms):
    return any(t.kind in ("actor-covariate-effect", "dyad-covariate-effect",
                          "older-male-younger-female") for t in terms)


# ---------------------------------------------------------------------------
# Target specifications


@dataclass(frozen=True)
class TargetSpec:
    """Targeted statistics: structural terms plus optional duration targets,
    with the reporting normalization (raw counts or per-capita by group)."""

    terms: tuple
    normalization: str = "raw"

    def __post_init__(self):
        if self.normalization not in ("raw", "per-capita-by-group"):
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def names(self):
        return tuple(t.name for t in self.terms)

    def structural_terms(self):
        return [t for t in self.terms if not t.is_duration()]

    def has_duration_targets(self):
        return any(t.is_duration() for t in self.terms)

    def to_json(self):
        return {"targets": [t.to_json() for t in self.terms],
                "normalization": self.normalization}

    @classmethod
    def from_json(cls, d):
        terms, _ = parse_term_list(d["targets"])
        return cls(terms=terms, normalization=d.get("normalization", "raw"))


def normalization_group(term):
    """Per-capita rule: a statistic about a category subset is scaled by that
    subset's size, anything else by the whole network's size."""
    if term.kind in ("actor-activity-by-category", "category-homophily",
                     "degree1-count-by-category"):
        return term.attr, term.level
    return None


def normalization_denominators(frame, spec: TargetSpec):
    den = np.ones(len(spec.terms))
    if spec.normalization == "raw":
        return den
    for t, term in enumerate(spec.terms):
        if term.is_duration():
            continue
        grp = normalization_group(term)
        size = frame.group_count(*grp) if grp else frame.n
        if size == 0:
            raise ConfigError(f"{term.name}: empty normalization group")
        den[t] = size
    return den


def eval_targets_arrays(frame, ei, ej, ages, spec: TargetSpec):
    """Target vector from tie index arrays; shared by the chain engine."""
    deg = degrees_from_ties(frame.n, ei, ej)
    out = np.empty(len(spec.terms))
    for t, term in enumerate(spec.terms):
        if term.kind == "mean-tie-age":
            if len(ei) == 0:
                raise UndefinedTargetError("mean tie age of an empty network")
            out[t] = math.fsum(ages.tolist()) / len(ages)
        elif term.kind == "mean-monogamous-tie-age":
            mono = (deg[ei] == 1).astype(np.int64) + (deg[ej] == 1)
            out[t] = math.fsum((ages * mono).tolist()) / frame.n
        else:
            out[t] = eval_structural(frame, ei, ej, deg, [term])[0]
    return out / normalization_denominators(frame, spec)


def eval_targets(net: NetworkState, spec: TargetSpec) -> np.ndarray:
    """Evaluate a target specification on a network state. Structural
    entries are the cross-sectional statistics; mean-tie-age is the average
    inclusive age of extant ties; the monogamous variant sums ages of ties
    at degree-1 actors scaled by 1/n."""
    frame = Frame(net.table)
    ei, ej, ages = tie_index_arrays(net, frame)
    return eval_targets_arrays(frame, ei, ej, ages, spec)
