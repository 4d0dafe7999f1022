"""Constructing a starting network whose statistics hit given targets.

A simulated-annealing toggle walk over the dyad space minimizes the
(optionally weighted) squared distance between the running structural
statistics and the target values, with geometric cooling and uniform dyad
proposals. Best-effort: the best state seen is returned along with its
residual distance.
"""

from __future__ import annotations

import numpy as np

from . import _engine
from .errors import ConfigError
from .netcore import ActorTable, DyadSpace, NetworkState
from .statistics import (Frame, TargetSpec, _tie_value_array, eval_stats)

_CHUNK = 1 << 15


def _dyad_list(frame, table, space):
    iu, ju = np.triu_indices(frame.n, k=1)
    mask = space.mask(table, frame.ids)
    keep = mask[iu, ju]
    return np.ascontiguousarray(iu[keep]), np.ascontiguousarray(ju[keep])


def anneal_network(table: ActorTable, targets, spec: TargetSpec,
                   dyad_space: DyadSpace = None, rng=None, n_props=None,
                   t0=None, t_end=1e-3, weights=None, clock=0):
    """Search for a network over the table's active actors whose structural
    statistics approach ``targets`` (raw counts, aligned with spec.terms).

    Returns (network, achieved_stats, residual, trace); the trace logs the
    best objective value after each proposal chunk. Formed ties start at
    age 1; use :func:`seed_tie_ages` to backdate onsets afterwards.
    """
    dyad_space = dyad_space or DyadSpace()
    rng = rng if isinstance(rng, np.random.Generator) \
        else np.random.default_rng(rng)
    targets = np.asarray(targets, dtype=float)
    terms = list(spec.terms)
    if len(targets) != len(terms):
        raise ConfigError("targets length does not match term list")
    for t in terms:
        if t.is_duration():
            raise ConfigError(f"{t.name}: duration targets cannot be "
                              "constructed into a static network")
    frame = Frame(table)
    di, dj = _dyad_list(frame, table, dyad_space)
    m = len(di)
    if m == 0:
        raise ConfigError("empty dyad space")
    q = len(terms)

    delta_static = np.zeros((m, q))
    deg_cols, deg_masks = [], []
    for t, term in enumerate(terms):
        if term.is_dyad_independent():
            delta_static[:, t] = _tie_value_array(frame, term, di, dj)
        else:
            deg_cols.append(t)
            if term.kind == "degree1-count":
                deg_masks.append(np.ones(frame.n, dtype=np.uint8))
            else:
                c = frame.level_code(term.attr, term.level)
                deg_masks.append((frame.codes(term.attr) == c).astype(np.uint8))
    deg_cols = np.asarray(deg_cols, dtype=np.int64)
    deg_masks = (np.asarray(deg_masks, dtype=np.uint8) if len(deg_masks)
                 else np.zeros((0, frame.n), dtype=np.uint8))

    weights = np.ones(q) if weights is None else np.asarray(weights, dtype=float)
    state = np.zeros(m, dtype=np.uint8)
    deg = np.zeros(frame.n, dtype=np.int64)
    stats = np.zeros(q)
    best_state = np.zeros(m, dtype=np.uint8)
    best_stats = np.zeros(q)

    n_props = n_props or min(20 * m, 5_000_000)
    e0 = float(np.sum(weights * (stats - targets) ** 2))
    t_start = t0 if t0 is not None else max(1.0, 0.05 * e0)
    temps_all = t_start * (t_end / t_start) ** (np.arange(n_props)
                                                / max(n_props - 1, 1))

    trace = []
    global_best = np.inf
    global_best_state = state.copy()
    done = 0
    while done < n_props:
        chunk = min(_CHUNK, n_props - done)
        prop = rng.integers(0, m, size=chunk)
        u = rng.random(chunk)
        temps = np.ascontiguousarray(temps_all[done:done + chunk])
        best_e = _engine.anneal_walk(di, dj, delta_static, state, deg,
                                     deg_cols, deg_masks, stats, targets,
                                     weights, temps, prop, u,
                                     best_state, best_stats)
        done += chunk
        if best_e < global_best:
            global_best = best_e
            global_best_state = best_state.copy()
        trace.append((done, float(global_best)))
        if global_best == 0.0:
            break

    net = NetworkState(table, dyad_space, clock=clock)
    ids = frame.ids
    for x in np.flatnonzero(global_best_state):
        net.add_tie(int(ids[di[x]]), int(ids[dj[x]]))
    achieved = eval_stats(net, terms)
    residual = float(np.sum(weights * (achieved - targets) ** 2))
    return net, achieved, residual, trace


def seed_tie_ages(net: NetworkState, p_dissolve, rng):
    """Backdate tie onsets with geometric ages on {1, 2, ...}: under an
    edge-count-only dissolution this is exactly the equilibrium age law, so
    chains started here need no age burn-in."""
    rng = rng if isinstance(rng, np.random.Generator) \
        else np.random.default_rng(rng)
    for e in list(net.ties):
        age = int(rng.geometric(p_dissolve))
        net._onset[e] = net.clock - (age - 1)
    return net
