"""Pure-Python reference implementations of the toggle-walk kernels.

Kept trivially readable: the compiled backend must match these loops
draw-for-draw. Degree bookkeeping is shared by both kernels; ``deg`` always
holds each actor's degree in the phase network implied by ``state`` plus
any fixed ties the caller folded in.
"""

import math

BACKEND = "pure"


def _degree1_delta(deg_i, adding):
    # change in I(degree == 1) for one endpoint when a tie toggles
    if adding:
        return (1.0 if deg_i == 0 else 0.0) - (1.0 if deg_i == 1 else 0.0)
    return (1.0 if deg_i == 2 else 0.0) - (1.0 if deg_i == 1 else 0.0)


def mh_phase(di, dj, base_lo, state, deg, deg_coefs, deg_masks, prop_idx, u_acc):
    """Metropolis sweep over one phase's toggleable dyads, in place.

    state[m] is the current on/off of toggleable dyad m = (di[m], dj[m]);
    base_lo[m] is the attribute part of theta . change-statistic; degree-1
    terms arrive as (coefficient, actor mask) pairs and are evaluated
    against the live ``deg`` array.
    """
    n_deg = len(deg_coefs)
    for p in range(len(prop_idx)):
        m = prop_idx[p]
        i = di[m]
        j = dj[m]
        s = state[m]
        adding = s == 0
        dlo = base_lo[m] if adding else -base_lo[m]
        for k in range(n_deg):
            c = deg_coefs[k]
            d = 0.0
            if deg_masks[k, i]:
                d += _degree1_delta(deg[i], adding)
            if deg_masks[k, j]:
                d += _degree1_delta(deg[j], adding)
            dlo += c * d
        if dlo >= 0.0 or u_acc[p] < math.exp(dlo):
            if adding:
                state[m] = 1
                deg[i] += 1
                deg[j] += 1
            else:
                state[m] = 0
                deg[i] -= 1
                deg[j] -= 1


def anneal_walk(di, dj, delta_static, state, deg, deg_term_cols, deg_masks,
                stats, targets, weights, temps, prop_idx, u_acc,
                best_state, best_stats):
    """Simulated-annealing toggle walk minimizing the weighted squared
    distance between running statistics and target values.

    delta_static[m, t] is the state-free change of target t when dyad m
    turns on; degree-1 target columns are listed in ``deg_term_cols`` with
    their actor masks and are updated from the live degrees. Tracks the
    best state seen; returns the best objective value.
    """
    q = len(stats)
    n_deg = len(deg_term_cols)
    energy = 0.0
    for t in range(q):
        r = stats[t] - targets[t]
        energy += weights[t] * r * r
    best_e = energy
    best_state[:] = state
    best_stats[:] = stats
    dvec = [0.0] * q

    for p in range(len(prop_idx)):
        m = prop_idx[p]
        i = di[m]
        j = dj[m]
        adding = state[m] == 0
        sign = 1.0 if adding else -1.0
        for t in range(q):
            dvec[t] = sign * delta_static[m, t]
        for k in range(n_deg):
            col = deg_term_cols[k]
            d = 0.0
            if deg_masks[k, i]:
                d += _degree1_delta(deg[i], adding)
            if deg_masks[k, j]:
                d += _degree1_delta(deg[j], adding)
            dvec[col] += d
        de = 0.0
        for t in range(q):
            r = stats[t] - targets[t]
            de += weights[t] * (2.0 * r * dvec[t] + dvec[t] * dvec[t])
        if de <= 0.0 or u_acc[p] < math.exp(-de / temps[p]):
            if adding:
                state[m] = 1
                deg[i] += 1
                deg[j] += 1
            else:
                state[m] = 0
                deg[i] -= 1
                deg[j] -= 1
            for t in range(q):
                stats[t] += dvec[t]
            energy += de
            if energy < best_e:
                best_e = energy
                best_state[:] = state
                best_stats[:] = stats
    return best_e
