"""Actors, dyad spaces, and tie-level network state.

A network at discrete time ``t`` is an undirected simple graph over labeled
actors together with a per-tie onset step. Tie ages are inclusive: a tie
formed at the current step has age 1, so durations live on {1, 2, ...}.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError

CATEGORICAL_ATTRS = ("sex", "race")


def canonical_pair(i, j):
    """Unordered pair as an (low, high) id tuple; self-loops are rejected."""
    i, j = int(i), int(j)
    if i == j:
        raise ContractError(f"self-loop on actor {i}")
    return (i, j) if i < j else (j, i)


class ActorTable:
    """Columnar table of actors with stable, never-reused integer ids.

    Attributes are held as small-int codes against per-attribute level
    lists so statistic evaluation can run on plain numpy arrays.
    """

    def __init__(self):
        self._ids = []
        self._codes = {a: [] for a in CATEGORICAL_ATTRS}
        self._levels = {a: [] for a in CATEGORICAL_ATTRS}
        self._level_index = {a: {} for a in CATEGORICAL_ATTRS}
        self._age_months = []
        self._active = []
        self._row_of = {}
        self._next_id = 0
        self._dirty = True
        self._cache = {}

    def __len__(self):
        return len(self._ids)

    @property
    def next_id(self):
        return self._next_id

    def declare_levels(self, attr, levels):
        """Register categorical levels up-front so terms may reference them
        even before (or after) any actor carries them."""
        for level in levels:
            self._code_for(attr, level)

    def _code_for(self, attr, level, create=True):
        idx = self._level_index[attr]
        if level not in idx:
            if not create:
                raise ConfigError(f"unknown {attr} level {level!r}")
            idx[level] = len(self._levels[attr])
            self._levels[attr].append(level)
        return idx[level]

    def add_actor(self, sex, race, age_months, active=True, actor_id=None):
        """Append one actor and return its id. Ids are monotone; explicit
        ids (file loads) must not collide or go backwards past reuse."""
        if actor_id is None:
            actor_id = self._next_id
        elif actor_id in self._row_of:
            raise ConfigError(f"duplicate actor id {actor_id}")
        if age_months < 0:
            raise ConfigError(f"actor {actor_id}: negative age_months")
        self._next_id = max(self._next_id, actor_id + 1)
        self._row_of[actor_id] = len(self._ids)
        self._ids.append(actor_id)
        self._codes["sex"].append(self._code_for("sex", sex))
        self._codes["race"].append(self._code_for("race", race))
        self._age_months.append(int(age_months))
        self._active.append(bool(active))
        self._dirty = True
        return actor_id

    def row(self, actor_id):
        try:
            return self._row_of[actor_id]
        except KeyError:
            raise ConfigError(f"unknown actor id {actor_id}") from None

    def has_actor(self, actor_id):
        return actor_id in self._row_of

    def deactivate(self, actor_id):
        self._active[self.row(actor_id)] = False
        self._dirty = True

    def is_active(self, actor_id):
        return self._active[self.row(actor_id)]

    def increment_ages(self, months=1, active_only=True):
        for r, act in enumerate(self._active):
            if act or not active_only:
                self._age_months[r] += months
        self._dirty = True

    def set_age_months(self, actor_id, months):
        self._age_months[self.row(actor_id)] = int(months)
        self._dirty = True

    # -- array views ------------------------------------------------------
    def _arrays(self):
        if self._dirty:
            self._cache = {
                "ids": np.asarray(self._ids, dtype=np.int64),
                "age_months": np.asarray(self._age_months, dtype=np.int64),
                "active": np.asarray(self._active, dtype=bool),
            }
            for a in CATEGORICAL_ATTRS:
                self._cache[a] = np.asarray(self._codes[a], dtype=np.int64)
            self._dirty = False
        return self._cache

    @property
    def ids(self):
        return self._arrays()["ids"]

    @property
    def active_mask(self):
        return self._arrays()["active"]

    @property
    def age_months(self):
        return self._arrays()["age_months"]

    def codes(self, attr):
        if attr not in CATEGORICAL_ATTRS:
            raise ConfigError(f"unknown categorical attribute {attr!r}")
        return self._arrays()[attr]

    def levels(self, attr):
        if attr not in CATEGORICAL_ATTRS:
            raise ConfigError(f"unknown categorical attribute {attr!r}")
        return list(self._levels[attr])

    def level_code(self, attr, level):
        if attr not in CATEGORICAL_ATTRS:
            raise ConfigError(f"unknown categorical attribute {attr!r}")
        try:
            return self._level_index[attr][level]
        except KeyError:
            raise ConfigError(f"unknown {attr} level {level!r}") from None

    def level_of(self, attr, actor_id):
        return self._levels[attr][self._codes[attr][self.row(actor_id)]]

    def active_ids(self):
        arr = self._arrays()
        return arr["ids"][arr["active"]]

    def n_active(self):
        return int(self.active_mask.sum())

    def records(self):
        for r, aid in enumerate(self._ids):
            yield {
                "id": aid,
                "sex": self._levels["sex"][self._codes["sex"][r]],
                "race": self._levels["race"][self._codes["race"][r]],
                "age_months": self._age_months[r],
                "active": self._active[r],
            }

    def copy(self):
        out = ActorTable()
        for rec in self.records():
            out.add_actor(rec["sex"], rec["race"], rec["age_months"],
                          active=rec["active"], actor_id=rec["id"])
        out._next_id = self._next_id
        return out

    @classmethod
    def from_records(cls, records):
        t = cls()
        for rec in records:
            t.add_actor(rec["sex"], rec["race"], rec["age_months"],
                        active=rec.get("active", True), actor_id=rec.get("id"))
        return t

    @classmethod
    def from_csv(cls, path):
        """Load `id,sex,race,age_months` rows; errors name the line."""
        t = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"id", "sex", "race", "age_months"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise ConfigError(f"{path}: header must contain {sorted(required)}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    t.add_actor(row["sex"], row["race"], int(row["age_months"]),
                                actor_id=int(row["id"]))
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"{path}: line {lineno}: {exc}") from None
        return t


@dataclass(frozen=True)
class DyadSpace:
    """Which unordered actor pairs may ever hold a tie.

    kind:
      * ``all`` - every pair of distinct actors;
      * ``bipartite-by-attribute`` - only pairs whose ``attr`` values differ
        (e.g. heterosexual-only when attr is sex);
      * ``explicit-list`` - a fixed pair list.
    Membership is evaluated lazily; the full pair set is never materialized.
    """

    kind: str = "all"
    attr: str | None = None
    pairs: frozenset = field(default=None)

    def __post_init__(self):
        if self.kind not in ("all", "bipartite-by-attribute", "explicit-list"):
            raise ConfigError(f"unknown dyad space kind {self.kind!r}")
        if self.kind == "bipartite-by-attribute" and self.attr is None:
            raise ConfigError("bipartite-by-attribute dyad space needs attr")
        if self.kind == "explicit-list":
            if self.pairs is None:
                raise ConfigError("explicit-list dyad space needs pairs")
            object.__setattr__(
                self, "pairs",
                frozenset(canonical_pair(i, j) for i, j in self.pairs))

    def contains(self, table, i, j):
        if i == j:
            return False
        if self.kind == "all":
            return True
        if self.kind == "bipartite-by-attribute":
            return table.level_of(self.attr, i) != table.level_of(self.attr, j)
        return canonical_pair(i, j) in self.pairs

    def mask(self, table, ids):
        """Boolean (k, k) matrix over the given actor ids (diagonal False)."""
        k = len(ids)
        if self.kind == "all":
            m = np.ones((k, k), dtype=bool)
        elif self.kind == "bipartite-by-attribute":
            rows = np.asarray([table.row(a) for a in ids])
            codes = table.codes(self.attr)[rows]
            m = codes[:, None] != codes[None, :]
        else:
            pos = {a: x for x, a in enumerate(ids)}
            m = np.zeros((k, k), dtype=bool)
            for (i, j) in self.pairs:
                if i in pos and j in pos:
                    m[pos[i], pos[j]] = m[pos[j], pos[i]] = True
        np.fill_diagonal(m, False)
        return m

    def to_json(self):
        d = {"kind": self.kind}
        if self.attr is not None:
            d["attr"] = self.attr
        if self.pairs is not None:
            d["pairs"] = sorted(list(p) for p in self.pairs)
        return d

    @classmethod
    def from_json(cls, d):
        if d is None:
            return cls()
        return cls(kind=d.get("kind", "all"), attr=d.get("attr"),
                   pairs=frozenset(map(tuple, d["pairs"])) if "pairs" in d else None)


@dataclass
class PhaseOutcome:
    """Net effect of one time step's two phases."""

    formed: set
    dissolved: set


class NetworkState:
    """Undirected network with per-tie onset steps and a step clock.

    Single-writer: simulation code mutates through :func:`compose_step` or
    the engine; readers may share snapshots freely.
    """

    def __init__(self, table: ActorTable, dyad_space: DyadSpace = None, clock=0):
        self.table = table
        self.dyad_space = dyad_space if dyad_space is not None else DyadSpace()
        self.clock = int(clock)
        self._onset = {}

    # -- tie accessors ----------------------------------------------------
    @property
    def ties(self):
        return self._onset.keys()

    def n_ties(self):
        return len(self._onset)

    def has_tie(self, i, j):
        return canonical_pair(i, j) in self._onset

    def onset(self, i, j):
        return self._onset[canonical_pair(i, j)]

    def age(self, i, j):
        """Inclusive age in steps: 1 on the step the tie formed."""
        return self.clock - self._onset[canonical_pair(i, j)] + 1

    def add_tie(self, i, j, onset=None):
        e = canonical_pair(i, j)
        if e in self._onset:
            raise ContractError(f"tie {e} already present")
        if not self.dyad_space.contains(self.table, *e):
            raise ContractError(f"dyad {e} outside the dyad space")
        if not (self.table.is_active(e[0]) and self.table.is_active(e[1])):
            raise ContractError(f"tie {e} touches an inactive actor")
        o = self.clock if onset is None else int(onset)
        if o > self.clock:
            raise ContractError(f"tie {e}: onset {o} after clock {self.clock}")
        self._onset[e] = o

    def remove_tie(self, i, j):
        e = canonical_pair(i, j)
        if e not in self._onset:
            raise ContractError(f"tie {e} not present")
        del self._onset[e]

    def degree(self, actor_id):
        return sum(1 for e in self._onset if actor_id in e)

    def neighbors(self, actor_id):
        return [j if i == actor_id else i
                for (i, j) in self._onset if actor_id in (i, j)]

    def tie_age_vector(self):
        """List of ((i, j), age) pairs, ages in steps, each >= 1."""
        return [(e, self.clock - o + 1) for e, o in self._onset.items()]

    def copy(self):
        out = NetworkState(self.table, self.dyad_space, self.clock)
        out._onset = dict(self._onset)
        return out

    # -- serialization ----------------------------------------------------
    def to_json(self):
        return {
            "actors": [{k: v for k, v in rec.items()} for rec in self.table.records()],
            "ties": [{"i": i, "j": j, "onset": int(o)}
                     for (i, j), o in sorted(self._onset.items())],
            "clock": self.clock,
            "dyad_space": self.dyad_space.to_json(),
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def from_json(cls, d):
        table = ActorTable.from_records(d["actors"])
        net = cls(table, DyadSpace.from_json(d.get("dyad_space")), d.get("clock", 0))
        for t in d.get("ties", []):
            net.add_tie(t["i"], t["j"], onset=t.get("onset", net.clock))
        return net

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def compose_step(prev: NetworkState, outcome: PhaseOutcome) -> NetworkState:
    """Apply one step's phase outcome: ties become (prev + formed) - dissolved,
    the clock advances by one, survivors keep their onset and formed ties
    start at age 1."""
    formed = {canonical_pair(*e) for e in outcome.formed}
    dissolved = {canonical_pair(*e) for e in outcome.dissolved}
    for e in formed:
        if e in prev._onset:
            raise ContractError(f"formed tie {e} already present")
        if not prev.dyad_space.contains(prev.table, *e):
            raise ContractError(f"formed tie {e} outside the dyad space")
    for e in dissolved:
        if e not in prev._onset:
            raise ContractError(f"dissolved tie {e} absent")
    if formed & dissolved:
        raise ContractError("a tie cannot both form and dissolve in one step")

    out = NetworkState(prev.table, prev.dyad_space, prev.clock + 1)
    for e, o in prev._onset.items():
        if e not in dissolved:
            out._onset[e] = o
    for e in formed:
        if not (prev.table.is_active(e[0]) and prev.table.is_active(e[1])):
            raise ContractError(f"formed tie {e} touches an inactive actor")
        out._onset[e] = out.clock
    return out
