"""Closed-form long-run behavior of temporally dyad-independent models.

When every dyad's transition depends only on its own previous state, each
dyad is a 2-state Markov chain and the whole process has a product-form
stationary distribution. With transition log-odds ``theta . g0`` for an
empty dyad turning on and ``theta . g1`` for an extant tie staying on, the
stationary odds of the tie are

    odds = (1 + exp(theta . g1)) / (1 + exp(-theta . g0)).

For an edge-count-only dissolution with coefficient ``b``, tie durations
are Geometric(ilogit(-b)) on {1, 2, ...}, and the age distribution of ties
observed in equilibrium is the same geometric law: the length-biased
selection of long ties and their right-censoring at the observation time
cancel exactly.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BoundaryError, DomainError, UnsupportedModelError
from .statistics import Frame, tie_index_arrays

_EDGE = 1e-12


def ilogit(x):
    """Inverse logit, stable for large |x|."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)

def logit(p):
    """Log-odds. Inputs within 1e-12 of 0 or 1 are boundary errors rather
    than clamped values so divergent estimates surface instead of sticking."""
    p = float(p)
    if p <= _EDGE or p >= 1.0 - _EDGE:
        raise BoundaryError(f"logit argument {p} at or beyond the boundary")
    return math.log(p) - math.log1p(-p)


def transition_log_odds(theta, g0, g1):
    a1 = float(np.dot(theta, g1))
    a0 = float(np.dot(theta, g0))
    return a0, a1


def stationary_tie_odds(g0, g1, theta):
    """Stationary odds of a single dyad being on (may overflow to inf for
    extreme parameters; use :func:`stationary_tie_prob` when a probability
    is wanted)."""
    a0, a1 = transition_log_odds(theta, g0, g1)
    return math.exp(stationary_tie_log_odds_from_la(a0, a1))


def stationary_tie_log_odds_from_la(a0, a1):
    # log[(1+e^{a1}) / (1+e^{-a0})], evaluated without overflow
    return np.logaddexp(0.0, a1) - np.logaddexp(0.0, -a0)


def stationary_tie_prob(g0, g1, theta):
    a0, a1 = transition_log_odds(theta, g0, g1)
    return float(ilogit(stationary_tie_log_odds_from_la(a0, a1)))


def edges_model_density(theta_plus, theta_minus):
    """Stationary density of the edge-count formation / edge-count
    dissolution model: (1+e^b) / (2+e^{-a}+e^b)."""
    return stationary_tie_prob(np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                               np.array([theta_plus, theta_minus]))


def _model_dyad_logodds(net, model):
    """Per-dyad (a0, a1) arrays for every dyad in the space, plus the upper
    triangle index arrays. Requires temporal dyadic independence."""
    from .statistics import dyad_delta_matrix  # cycle-free local import

    for t in model.formation + model.dissolution:
        if not t.is_dyad_independent():
            raise UnsupportedModelError(
                f"{t.name}: stationary pmf needs temporal dyadic independence")
    frame = Frame(net.table)
    fterms, ftheta = model.formation_with_offset()
    wp = dyad_delta_matrix(frame, fterms, ftheta)
    wm = dyad_delta_matrix(frame, model.dissolution, model.theta_minus)
    mask = net.dyad_space.mask(net.table, frame.ids)
    iu, ju = np.triu_indices(frame.n, k=1)
    keep = mask[iu, ju]
    return frame, iu[keep], ju[keep], wp[iu, ju][keep], wm[iu, ju][keep]


def stationary_network_logpmf(net, model):
    """Log pmf of a network under the stationary distribution of a
    temporally dyad-independent model: a sum of independent per-dyad
    Bernoulli log-likelihoods at the stationary probabilities."""
    frame, iu, ju, a0, a1 = _model_dyad_logodds(net, model)
    lo = np.logaddexp(0.0, a1) - np.logaddexp(0.0, -a0)
    logp = lo - np.logaddexp(0.0, lo)
    log1mp = -np.logaddexp(0.0, lo)
    on = np.zeros(len(iu), dtype=bool)
    pos = frame.pos
    for (i, j) in net.ties:
        pi, pj = sorted((pos[i], pos[j]))
        hit = np.flatnonzero((iu == pi) & (ju == pj))
        on[hit] = True
    return float(np.sum(np.where(on, logp, log1mp)))


def stationary_dyad_probs(net, model):
    """(i_pos, j_pos, p) stationary tie probabilities per dyad."""
    _, iu, ju, a0, a1 = _model_dyad_logodds(net, model)
    p = ilogit(np.logaddexp(0.0, a1) - np.logaddexp(0.0, -a0))
    return iu, ju, np.atleast_1d(p)


def expected_targets_dyad_independent(net, model, spec):
    """Exact stationary expectation of dyad-independent structural targets
    (linear in tie indicators), used as a simulation oracle."""
    from .statistics import (_tie_value_array, normalization_denominators)

    frame = Frame(net.table)
    iu, ju, p = stationary_dyad_probs(net, model)
    out = np.empty(len(spec.terms))
    for t, term in enumerate(spec.terms):
        if term.is_duration() or not term.is_dyad_independent():
            raise UnsupportedModelError(f"{term.name}: no linear closed form")
        out[t] = float(np.dot(p, _tie_value_array(frame, term, iu, ju)))
    return out / normalization_denominators(frame, spec)


# ---------------------------------------------------------------------------
# Duration distributions


def _check_duration_args(x, p):
    if not (0.0 < p <= 1.0):
        raise DomainError(f"dissolution probability {p} outside (0, 1]")
    x = np.asarray(x)
    if np.any(x < 1) or np.any(x != np.floor(x)):
        raise DomainError("durations live on {1, 2, ...}")
    return x.astype(float)


def duration_pmf(x, p):
    """Geometric tie-duration pmf on {1, 2, ...}: (1-p)^(x-1) p."""
    x = _check_duration_args(x, p)
    out = np.power(1.0 - p, x - 1.0) * p
    return float(out) if out.ndim == 0 else out


def observed_duration_pmf(x, p):
    """Pmf of the full duration of a tie given that it was observed in a
    cross-section: x f(x) / E(X), the length-biased law."""
    x = _check_duration_args(x, p)
    out = x * np.power(1.0 - p, x - 1.0) * p * p
    return float(out) if out.ndim == 0 else out


def observed_age_pmf(x, p):
    """Pmf of the age of an observed tie: (1 - F(x-1)) / E(X). For geometric
    durations this collapses to the duration pmf itself."""
    x = _check_duration_args(x, p)
    out = np.power(1.0 - p, x - 1.0) * p
    return float(out) if out.ndim == 0 else out


def mean_duration(p):
    if not (0.0 < p <= 1.0):
        raise DomainError(f"dissolution probability {p} outside (0, 1]")
    return 1.0 / p


def duration_summary(theta_minus_edges):
    """Duration facts implied by an edge-count dissolution coefficient."""
    p = float(ilogit(-theta_minus_edges))
    return {
        "survival_prob_per_step": float(ilogit(theta_minus_edges)),
        "dissolution_prob_per_step": p,
        "mean_duration_steps": mean_duration(p),
    }


# ---------------------------------------------------------------------------
# Network-size offset asymptotics


def offset_mean_degree(n, theta_plus, theta_minus):
    """Equilibrium mean degree of the offset-adjusted edges/edges model on n
    actors: (n-1)(1+e^b) / (1 + n e^{-a} + 1 + e^b)."""
    if n < 2:
        raise DomainError("offset mean degree needs n >= 2")
    eb = math.exp(theta_minus)
    return (n - 1.0) * (1.0 + eb) / (1.0 + n * math.exp(-theta_plus) + 1.0 + eb)


def offset_mean_degree_limit(theta_plus, theta_minus):
    """Large-n limit of the offset-adjusted mean degree: e^a + e^{a+b}."""
    return math.exp(theta_plus) + math.exp(theta_plus + theta_minus)


# ---------------------------------------------------------------------------
# Cross-sectional method-of-moments example: isolate count target


def expected_isolates(n, theta):
    """E(number of isolates) in an n-actor Bernoulli graph with edge-count
    coefficient theta: n (1 - ilogit(theta))^(n-1)."""
    return n * (1.0 - float(ilogit(theta))) ** (n - 1)


def isolate_gmme(n, observed_isolates):
    """Moment-matching estimate of the edge coefficient from an observed
    isolate count: logit(1 - (t/n)^(1/(n-1)))."""
    t = float(observed_isolates)
    if t <= 0.0 or t >= n:
        raise BoundaryError(
            f"isolate count {t} of {n} gives an infinite estimate")
    return logit(1.0 - (t / n) ** (1.0 / (n - 1.0)))
