"""One-step and long-run simulation of separable network evolution.

Each time step draws two conditionally independent phases given the
previous network: a formation draw over networks that add zero or more
ties, and a dissolution draw over networks that remove zero or more ties;
the step result applies both change sets.

When a phase's terms are all dyad-independent the conditional draw
factorizes over its free dyads and is sampled exactly, either densely
(one uniform per dyad) or by thinning against an upper probability bound
(sparse regimes). Degree-1 terms make a phase dyad-dependent and switch it
to a Metropolis walk over the phase's toggleable dyads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import _engine
from .equilibrium import ilogit
from .errors import ConfigError
from .netcore import DyadSpace, NetworkState, PhaseOutcome, compose_step
from .statistics import (Frame, StatisticTerm, TargetSpec, degrees_from_ties,
                         dyad_delta_values, eval_targets_arrays,
                         logodds_upper_bound, parse_term_list)

OFFSET_TERM = StatisticTerm(kind="offset-log-inverse-n")
_DENSE_PMAX = 0.05
_DENSE_MIN_N = 64
_MH_CHUNK = 1 << 15


@dataclass(frozen=True)
class ModelSpec:
    """Formation and dissolution term lists with their coefficient vectors.

    ``size_offset`` adds a log(1/n) coefficient on the formation edge count
    (and formation only), with n the number of active actors at the start
    of the step, making equilibrium mean degree asymptotically stable in n.
    """

    formation: tuple
    theta_plus: np.ndarray
    dissolution: tuple
    theta_minus: np.ndarray
    size_offset: bool = False
    dyad_space: DyadSpace = field(default_factory=DyadSpace)

    def __post_init__(self):
        object.__setattr__(self, "formation", tuple(self.formation))
        object.__setattr__(self, "dissolution", tuple(self.dissolution))
        object.__setattr__(self, "theta_plus",
                           np.asarray(self.theta_plus, dtype=float))
        object.__setattr__(self, "theta_minus",
                           np.asarray(self.theta_minus, dtype=float))
        if len(self.theta_plus) != len(self.formation):
            raise ConfigError("theta_plus length does not match formation terms")
        if len(self.theta_minus) != len(self.dissolution):
            raise ConfigError("theta_minus length does not match dissolution terms")
        for t in self.formation + self.dissolution:
            if t.is_duration():
                raise ConfigError(f"{t.name} is a target, not a generative term")
            if t.kind == "offset-log-inverse-n":
                raise ConfigError("declare the size offset via size_offset, "
                                  "not as an explicit term")

    def formation_with_offset(self):
        if not self.size_offset:
            return self.formation, self.theta_plus
        return self.formation + (OFFSET_TERM,), np.append(self.theta_plus, 1.0)

    @property
    def theta(self):
        return np.concatenate([self.theta_plus, self.theta_minus])

    def with_theta(self, theta):
        p = len(self.formation)
        return replace(self, theta_plus=np.asarray(theta[:p], dtype=float),
                       theta_minus=np.asarray(theta[p:], dtype=float))

    def phase_is_dyad_independent(self, phase):
        terms = self.formation if phase == "formation" else self.dissolution
        return all(t.is_dyad_independent() for t in terms)

    def is_dyad_independent(self):
        return (self.phase_is_dyad_independent("formation")
                and self.phase_is_dyad_independent("dissolution"))

    def to_json(self):
        def dump(terms, theta):
            return [dict(t.to_json(), theta=float(v))
                    for t, v in zip(terms, theta)]
        return {"formation": dump(self.formation, self.theta_plus),
                "dissolution": dump(self.dissolution, self.theta_minus),
                "size_offset": self.size_offset,
                "dyad_space": self.dyad_space.to_json()}

    @classmethod
    def from_json(cls, d):
        fterms, ftheta = parse_term_list(d.get("formation", []))
        dterms, dtheta = parse_term_list(d.get("dissolution", []))
        if any(v is None for v in ftheta + dtheta):
            raise ConfigError("every generative term needs a theta")
        return cls(formation=fterms, theta_plus=ftheta,
                   dissolution=dterms, theta_minus=dtheta,
                   size_offset=bool(d.get("size_offset", False)),
                   dyad_space=DyadSpace.from_json(d.get("dyad_space")))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


@dataclass(frozen=True)
class ChainConfig:
    """Run lengths and seeding for simulation chains."""

    burnin_steps: int = 100
    interval_steps: int = 10
    num_samples: int = 100
    num_replicates: int = 1
    mcmc_proposals_per_phase: int | None = None  # default 10x toggleable set
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.burnin_steps, self.interval_steps) < 0 or \
                min(self.num_samples, self.num_replicates) < 1:
            raise ConfigError("chain lengths must be positive")


def _idpair(ids, a, b):
    x, y = int(ids[a]), int(ids[b])
    return (x, y) if x < y else (y, x)


def _triangular_decode(t, k):
    """Upper-triangle pair index -> (i, j), i < j, rows enumerated first."""
    t = np.asarray(t, dtype=np.float64)
    kk = 2.0 * k - 1.0
    i = np.floor((kk - np.sqrt(kk * kk - 8.0 * t)) / 2.0).astype(np.int64)
    base = i * (2 * k - i - 1) // 2
    j = np.asarray(t, dtype=np.int64) - base + i + 1
    return i, j


def _bernoulli_indices(rng, total, p):
    """Indices of independent Bernoulli(p) successes over range(total):
    a binomial success count plus a uniform subset of that size (exact,
    O(successes) via Floyd's sampling inside Generator.choice)."""
    if total == 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(total, dtype=np.int64)
    count = int(rng.binomial(total, p))
    if count == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(rng.choice(total, size=count, replace=False)).astype(np.int64)


class _Chain:
    """Array-backed simulation state over one network's active actors.

    Wraps a NetworkState (ties keyed by actor id) with cached position
    arrays for the active actors. Invalidate with :meth:`refresh` whenever
    actor membership or ages change.
    """

    def __init__(self, net: NetworkState, model: ModelSpec, rng_formation,
                 rng_dissolution, mcmc_proposals_per_phase=None):
        self.net = net.copy()
        self.model = model
        self.f_rng = rng_formation
        self.d_rng = rng_dissolution
        self.proposals = mcmc_proposals_per_phase
        self.refresh()

    def refresh(self):
        self.frame = Frame(self.net.table)
        self._space_pairs_ok = None
        self._free_list = None

    @property
    def clock(self):
        return self.net.clock

    def _tie_positions(self):
        m = self.net.n_ties()
        ei = np.empty(m, dtype=np.int64)
        ej = np.empty(m, dtype=np.int64)
        onset = np.empty(m, dtype=np.int64)
        pos = self.frame.pos
        for x, (e, o) in enumerate(self.net._onset.items()):
            ei[x] = pos[e[0]]
            ej[x] = pos[e[1]]
            onset[x] = o
        return ei, ej, onset

    def _degrees(self):
        ei, ej, _ = self._tie_positions()
        return degrees_from_ties(self.frame.n, ei, ej)

    def _pairs_allowed(self, ii, jj):
        space = self.model.dyad_space
        if space.kind == "all":
            return np.ones(len(ii), dtype=bool)
        if space.kind == "bipartite-by-attribute":
            codes = self.frame.codes(space.attr)
            return codes[ii] != codes[jj]
        ids = self.frame.ids
        return np.asarray([(min(a, b), max(a, b)) in space.pairs
                           for a, b in zip(ids[ii], ids[jj])], dtype=bool)

    # -- exact dyad-independent sampling ----------------------------------
    def _formation_exact(self, terms, theta):
        frame = self.frame
        k = frame.n
        total = k * (k - 1) // 2
        if total == 0:
            return []
        pmax = float(ilogit(logodds_upper_bound(frame, terms, theta)))
        if k < _DENSE_MIN_N or pmax > _DENSE_PMAX:
            return self._formation_dense(terms, theta)
        cand = _bernoulli_indices(self.f_rng, total, pmax)
        if len(cand) == 0:
            return []
        ii, jj = _triangular_decode(cand, k)
        u = self.f_rng.random(len(cand))
        ids = frame.ids
        free = self._pairs_allowed(ii, jj)
        has = self.net._onset
        for x in range(len(cand)):
            if free[x] and (min(ids[ii[x]], ids[jj[x]]),
                            max(ids[ii[x]], ids[jj[x]])) in has:
                free[x] = False
        lo = dyad_delta_values(frame, terms, theta, ii, jj)
        accept = free & (u < ilogit(lo) / pmax)
        return [_idpair(ids, a, b) for a, b in zip(ii[accept], jj[accept])]

    def _formation_dense(self, terms, theta):
        from .statistics import dyad_delta_matrix

        frame = self.frame
        k = frame.n
        w = dyad_delta_matrix(frame, terms, theta)
        p = ilogit(w)
        a = np.zeros((k, k), dtype=bool)
        ei, ej, _ = self._tie_positions()
        a[ei, ej] = a[ej, ei] = True
        mask = self.model.dyad_space.mask(self.net.table, frame.ids)
        u = self.f_rng.random((k, k))
        iu, ju = np.triu_indices(k, k=1)
        hit = (~a[iu, ju]) & mask[iu, ju] & (u[iu, ju] < p[iu, ju])
        ids = frame.ids
        return [_idpair(ids, a_, b_) for a_, b_ in zip(iu[hit], ju[hit])]

    def _dissolution_exact(self, terms, theta):
        ei, ej, _ = self._tie_positions()
        if len(ei) == 0:
            return []
        lo = dyad_delta_values(self.frame, terms, theta, ei, ej)
        u = self.d_rng.random(len(ei))
        gone = u >= ilogit(lo)
        ids = self.frame.ids
        return [(int(ids[a]), int(ids[b])) for a, b in zip(ei[gone], ej[gone])]

    # -- Metropolis sampling for dyad-dependent phases ---------------------
    def _split_terms(self, terms, theta):
        attr_terms, attr_theta, deg_coefs, deg_masks = [], [], [], []
        frame = self.frame
        for t, th in zip(terms, theta):
            if t.is_dyad_independent():
                attr_terms.append(t)
                attr_theta.append(th)
            else:
                deg_coefs.append(th)
                if t.kind == "degree1-count":
                    deg_masks.append(np.ones(frame.n, dtype=np.uint8))
                else:
                    c = frame.level_code(t.attr, t.level)
                    deg_masks.append(
                        (frame.codes(t.attr) == c).astype(np.uint8))
        masks = (np.asarray(deg_masks, dtype=np.uint8)
                 if deg_masks else np.zeros((0, frame.n), dtype=np.uint8))
        return attr_terms, np.asarray(attr_theta), \
            np.asarray(deg_coefs, dtype=float), masks

    def _run_mh(self, rng, di, dj, base_lo, state, deg, deg_coefs, deg_masks):
        m = len(di)
        n_props = self.proposals if self.proposals else 10 * m
        left = n_props
        while left > 0:
            chunk = min(left, _MH_CHUNK)
            prop = rng.integers(0, m, size=chunk)
            u = rng.random(chunk)
            _engine.mh_phase(di, dj, base_lo, state, deg, deg_coefs,
                             deg_masks, prop, u)
            left -= chunk
        return state

    def _free_dyads(self):
        frame = self.frame
        k = frame.n
        a = np.zeros((k, k), dtype=bool)
        ei, ej, _ = self._tie_positions()
        a[ei, ej] = a[ej, ei] = True
        mask = self.model.dyad_space.mask(self.net.table, frame.ids)
        iu, ju = np.triu_indices(k, k=1)
        keep = mask[iu, ju] & ~a[iu, ju]
        return iu[keep], ju[keep]

    def _formation_mh(self, terms, theta):
        di, dj = self._free_dyads()
        if len(di) == 0:
            return []
        attr_terms, attr_theta, deg_coefs, deg_masks = \
            self._split_terms(terms, theta)
        base_lo = dyad_delta_values(self.frame, attr_terms, attr_theta, di, dj)
        state = np.zeros(len(di), dtype=np.uint8)
        deg = self._degrees()
        self._run_mh(self.f_rng, di, dj, base_lo, state, deg,
                     deg_coefs, deg_masks)
        ids = self.frame.ids
        on = np.flatnonzero(state)
        return [_idpair(ids, di[x], dj[x]) for x in on]

    def _dissolution_mh(self, terms, theta):
        di, dj, _ = self._tie_positions()
        if len(di) == 0:
            return []
        attr_terms, attr_theta, deg_coefs, deg_masks = \
            self._split_terms(terms, theta)
        base_lo = dyad_delta_values(self.frame, attr_terms, attr_theta, di, dj)
        state = np.ones(len(di), dtype=np.uint8)
        deg = self._degrees()
        self._run_mh(self.d_rng, di, dj, base_lo, state, deg,
                     deg_coefs, deg_masks)
        ids = self.frame.ids
        off = np.flatnonzero(state == 0)
        return [(int(ids[di[x]]), int(ids[dj[x]])) for x in off]

    # -- one full step ------------------------------------------------------
    def sample_formation(self):
        terms, theta = self.model.formation_with_offset()
        if all(t.is_dyad_independent() for t in terms):
            return self._formation_exact(terms, theta)
        return self._formation_mh(terms, theta)

    def sample_dissolution(self):
        terms, theta = self.model.dissolution, self.model.theta_minus
        if all(t.is_dyad_independent() for t in terms):
            return self._dissolution_exact(terms, theta)
        return self._dissolution_mh(terms, theta)

    def step(self):
        """Advance one step in place; returns (formed, dissolved) id pairs."""
        formed = self.sample_formation()
        dissolved = self.sample_dissolution()
        self.net.clock += 1
        clock = self.net.clock
        onset = self.net._onset
        for e in dissolved:
            del onset[e]
        for e in formed:
            onset[e] = clock
        return formed, dissolved

    def eval_targets(self, spec: TargetSpec):
        ei, ej, onset = self._tie_positions()
        ages = self.net.clock - onset + 1
        return eval_targets_arrays(self.frame, ei, ej, ages, spec)

    def to_network_state(self):
        return self.net.copy()


def _phase_rngs(rng):
    """Split a generator (or seed) into independent formation and
    dissolution substreams so the two phases never share draws."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return rng.spawn(2)


def formation_phase(prev: NetworkState, model: ModelSpec, rng) -> set:
    """Sample the formation phase: the set of new ties added to the
    previous network, drawn from the conditional model over networks that
    contain the previous network."""
    f_rng, _ = _phase_rngs(rng)
    chain = _Chain(prev, model, f_rng, None)
    return {tuple(e) for e in chain.sample_formation()}


def dissolution_phase(prev: NetworkState, model: ModelSpec, rng) -> set:
    """Sample the dissolution phase: the set of extant ties removed."""
    _, d_rng = _phase_rngs(rng)
    chain = _Chain(prev, model, None, d_rng)
    return {tuple(e) for e in chain.sample_dissolution()}


def step(prev: NetworkState, model: ModelSpec, rng) -> NetworkState:
    """One full transition: two independent phase draws composed onto the
    previous network."""
    f_rng, d_rng = _phase_rngs(rng)
    chain = _Chain(prev, model, f_rng, d_rng)
    formed = chain.sample_formation()
    dissolved = chain.sample_dissolution()
    return compose_step(prev, PhaseOutcome(set(formed), set(dissolved)))


def run_chain(init: NetworkState, model: ModelSpec, config: ChainConfig,
              spec: TargetSpec, seed_seq=None):
    """Simulate one chain and return an (num_samples, q) array of target
    vectors, one row per sampling interval after burn-in."""
    if seed_seq is None:
        seed_seq = np.random.SeedSequence(config.rng_seed)
    f_seed, d_seed = seed_seq.spawn(2)
    chain = _Chain(init, model, np.random.default_rng(f_seed),
                   np.random.default_rng(d_seed),
                   config.mcmc_proposals_per_phase)
    for _ in range(config.burnin_steps):
        chain.step()
    out = np.empty((config.num_samples, len(spec.terms)))
    for s in range(config.num_samples):
        for _ in range(config.interval_steps):
            chain.step()
        out[s] = chain.eval_targets(spec)
    return out


def _replicate_job(args):
    init_json, model_json, config, spec_json, seed_seq = args
    init = NetworkState.from_json(init_json)
    model = ModelSpec.from_json(model_json)
    spec = TargetSpec.from_json(spec_json)
    return run_chain(init, model, config, spec, seed_seq)


def run_replicates(init, model, config, spec, threads=1):
    """Replicate chains with independent seed substreams, merged in
    replicate order regardless of scheduling."""
    seeds = np.random.SeedSequence(config.rng_seed).spawn(config.num_replicates)
    if threads > 1 and config.num_replicates > 1:
        from concurrent.futures import ProcessPoolExecutor

        args = [(init.to_json(), model.to_json(), config, spec.to_json(), s)
                for s in seeds]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_replicate_job, args))
    else:
        results = [run_chain(init, model, config, spec, s) for s in seeds]
    return np.stack(results)
