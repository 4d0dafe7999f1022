"""Equilibrium method-of-moments fitting.

The estimator seeks theta such that the stationary expectation of the
targeted statistics matches their observed values, by minimizing the
squared Mahalanobis objective

    J(theta) = (mu(theta) - t_obs)' V(theta)^{-1} (mu(theta) - t_obs)

with mu and V only available through simulation. The search is a plain
stochastic-approximation gradient descent

    theta <- theta - gamma_t (mu_hat - t_obs)' V_hat^{-1} G_hat,

with the moment gradient G_hat re-estimated continually by regressing
recent simulated target values on recent (jittered) theta values plus an
intercept; the covariance of that regression's residuals is the
continuously-updated V_hat. Gamma_t declines over iterations.

Window length, jitter, ridge and stopping rules are artifact conventions:
the per-iteration jitter supplies the regressor variation the regression
needs, and convergence is declared when the windowed objective stays under
``tol_j`` for ``consecutive`` iterations while the (pre-jitter) update step
is relatively tiny.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ChainConfig, ModelSpec, _Chain, run_replicates
from .equilibrium import ilogit, logit
from .errors import (ConfigError, DegeneracyError, DomainError,
                     NumericalError)
from .statistics import TargetSpec


def objective(mu_hat, v_hat, t_obs):
    """Squared Mahalanobis distance between estimated moments and observed
    targets; zero iff they coincide."""
    d = np.asarray(mu_hat, dtype=float) - np.asarray(t_obs, dtype=float)
    try:
        x = np.linalg.solve(v_hat, d)
    except np.linalg.LinAlgError:
        raise NumericalError("moment covariance is singular") from None
    j = float(d @ x)
    if not np.isfinite(j):
        raise NumericalError("objective is not finite")
    return j


def ridge_regularize(v, ridge=1e-6):
    v = np.asarray(v, dtype=float)
    lam = ridge * np.trace(v) / len(v)
    if lam <= 0.0:
        lam = ridge
    return v + lam * np.eye(len(v))


def effective_sample_sizes(samples):
    """Per-column effective sample size of one chain's sample matrix using
    the initial-positive-sequence truncation of the autocorrelation sum."""
    s = np.asarray(samples, dtype=float)
    n, q = s.shape
    ess = np.empty(q)
    for c in range(q):
        x = s[:, c] - s[:, c].mean()
        v0 = float(x @ x) / n
        if v0 == 0.0:
            ess[c] = n
            continue
        rho_sum = 0.0
        for lag in range(1, n // 2):
            r = float(x[:-lag] @ x[lag:]) / (n * v0)
            if r <= 0.0:
                break
            rho_sum += r
        ess[c] = n / (1.0 + 2.0 * rho_sum)
    return ess


@dataclass
class MomentsResult:
    mu: np.ndarray
    cov: np.ndarray          # single-draw covariance of the targets
    se_mu: np.ndarray        # autocorrelation-aware standard error of mu
    ess: np.ndarray
    n_samples: int
    degenerate: list         # targets pinned at one value over all samples
    samples: np.ndarray


def estimate_moments(model: ModelSpec, init_net, spec: TargetSpec,
                     config: ChainConfig, threads=1) -> MomentsResult:
    """Simulate the stationary distribution and estimate target moments.

    A target column that never moves over all post-burn-in samples is
    reported in ``degenerate`` (the hull problem) rather than raised.
    """
    reps = run_replicates(init_net, model, config, spec, threads=threads)
    flat = reps.reshape(-1, reps.shape[-1])
    mu = flat.mean(axis=0)
    if flat.shape[0] > 1:
        cov = np.cov(flat, rowvar=False, ddof=1).reshape(len(mu), len(mu))
    else:
        cov = np.zeros((len(mu), len(mu)))
    ess = np.zeros(len(mu))
    for r in range(reps.shape[0]):
        ess += effective_sample_sizes(reps[r])
    var = flat.var(axis=0, ddof=1) if flat.shape[0] > 1 else np.zeros(len(mu))
    se_mu = np.sqrt(var / np.maximum(ess, 1.0))
    degenerate = [spec.names[c] for c in range(len(mu))
                  if flat[:, c].max() == flat[:, c].min()]
    return MomentsResult(mu=mu, cov=cov, se_mu=se_mu, ess=ess,
                         n_samples=flat.shape[0], degenerate=degenerate,
                         samples=flat)


def estimate_gradient(history_theta, history_mu):
    """Least-squares gradient of targets with respect to theta over a
    window of (theta, simulated targets) pairs, with an intercept.

    Returns (G, V_resid) where G[k, l] = d mu_k / d theta_l and V_resid is
    the covariance of the regression residuals (the continuous-updating
    covariance estimate).
    """
    th = np.asarray(history_theta, dtype=float)
    mu = np.asarray(history_mu, dtype=float)
    n, p = th.shape
    if n < p + 2:
        raise DegeneracyError(
            f"gradient window has {n} points; needs at least {p + 2}")
    x = np.column_stack([np.ones(n), th])
    if np.linalg.matrix_rank(x) < p + 1:
        raise DegeneracyError(
            "rank-deficient theta history; widen the window or increase jitter")
    coef, *_ = np.linalg.lstsq(x, mu, rcond=None)
    g = coef[1:].T
    resid = mu - x @ coef
    dof = max(n - p - 1, 1)
    v_resid = resid.T @ resid / dof
    return g, v_resid


def dissolution_shortcut(mean_age_steps):
    """Edge-count dissolution coefficient whose geometric duration law has
    the given mean age of extant ties: -logit(1 / mean_age)."""
    m = float(mean_age_steps)
    if m <= 1.0:
        raise DomainError(f"mean tie age {m} must exceed 1 step")
    return -logit(1.0 / m)


@dataclass(frozen=True)
class FitConfig:
    """Stochastic-approximation settings; defaults suit desk-scale fits."""

    gamma_a: float = 0.1
    gamma_b: float = 20.0
    window: int | None = None          # default 20 * dim(theta)
    jitter_scale: float = 1.0          # jitter sd = jitter_scale * gamma_t
    ridge: float = 1e-6
    max_iters: int = 400
    tol_j: float = 0.5
    tol_theta: float = 1e-3
    consecutive: int = 5
    burn_per_iter: int = 10
    samples_per_iter: int = 16
    interval_steps: int = 2
    init_burnin: int | None = None     # default 10 * interval * samples
    confirm_samples: int = 400
    confirm_interval: int = 5
    max_step: float = 0.5              # trust region per coordinate
    update: str = "gauss-newton"       # or "gradient" (the raw descent step)
    rng_seed: int = 0

    def to_json(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_json(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown fit config keys {sorted(unknown)}")
        return cls(**known)


@dataclass
class FitReport:
    theta_hat: np.ndarray
    theta_names: tuple
    target_names: tuple
    t_obs: np.ndarray
    mu_final: np.ndarray
    j_final: float
    se: np.ndarray                 # asymptotic, tenuous for single networks
    cov_theta: np.ndarray
    gradient: np.ndarray
    v_single: np.ndarray
    v_updating: np.ndarray
    ess_final: np.ndarray
    converged: bool
    n_iters: int
    flags: list
    trace: list = field(default_factory=list)

    # Asymptotics here treat one observed network as if it carried the full
    # sampling variability of the stationary law; they are indicative only.
    se_caveat: str = ("asymptotic standard errors from a single observed "
                      "network are tenuous; treat as indicative")

    def to_json(self):
        return {
            "theta_hat": self.theta_hat.tolist(),
            "theta_names": list(self.theta_names),
            "target_names": list(self.target_names),
            "t_obs": self.t_obs.tolist(),
            "mu_final": self.mu_final.tolist(),
            "j_final": self.j_final,
            "se": self.se.tolist(),
            "se_caveat": self.se_caveat,
            "cov_theta": self.cov_theta.tolist(),
            "gradient": self.gradient.tolist(),
            "ess_final": self.ess_final.tolist(),
            "converged": self.converged,
            "n_iters": self.n_iters,
            "flags": self.flags,
        }


def theta_names(model: ModelSpec):
    return tuple([f"formation.{t.name}" for t in model.formation]
                 + [f"dissolution.{t.name}" for t in model.dissolution])


def initial_theta(model: ModelSpec, spec: TargetSpec, t_obs, n_actors,
                  frame=None):
    """Heuristic starting point: the dissolution edge coefficient from the
    mean-age shortcut when a mean-age target exists, the formation edge
    coefficient from observed density (offset-corrected), zeros elsewhere.
    There is no pseudolikelihood-style initializer for this setting."""
    t_obs = np.asarray(t_obs, dtype=float)
    names = list(spec.names)
    th_plus = np.zeros(len(model.formation))
    th_minus = np.zeros(len(model.dissolution))

    p_dissolve = None
    if "mean_tie_age" in names:
        mean_age = float(t_obs[names.index("mean_tie_age")])
        if mean_age > 1.0:
            shortcut = dissolution_shortcut(mean_age)
            p_dissolve = float(ilogit(-shortcut))
            for k, term in enumerate(model.dissolution):
                if term.kind == "edges":
                    th_minus[k] = shortcut
    if p_dissolve is None:
        p_dissolve = 0.1

    if "edges" in names:
        edges = float(t_obs[names.index("edges")])
        from .statistics import normalization_denominators
        if spec.normalization == "per-capita-by-group" and frame is not None:
            den = normalization_denominators(frame, spec)
            edges = edges * den[names.index("edges")]
        total = n_actors * (n_actors - 1) / 2.0
        dens = min(max(edges / total, 1e-6), 1.0 - 1e-6)
        # two-state balance: formation probability giving this density
        p_form = min(max(dens * p_dissolve / (1.0 - dens), 1e-9), 1.0 - 1e-9)
        for k, term in enumerate(model.formation):
            if term.kind == "edges":
                th_plus[k] = logit(p_form) + \
                    (math.log(n_actors) if model.size_offset else 0.0)
    return np.concatenate([th_plus, th_minus])


def fit(model: ModelSpec, t_obs, spec: TargetSpec, init_net,
        init_theta_vec=None, config: FitConfig = None,
        mcmc_proposals_per_phase=None) -> FitReport:
    """Run the stochastic-approximation search for the equilibrium
    method-of-moments estimate and return a report with the estimate,
    final objective, and (tenuous) asymptotic standard errors."""
    config = config or FitConfig()
    t_obs = np.asarray(t_obs, dtype=float)
    q = len(spec.terms)
    p = len(model.theta)
    if q < p:
        raise ConfigError(f"{q} targets cannot identify {p} parameters")

    from .statistics import Frame
    frame = Frame(init_net.table)
    if init_theta_vec is None:
        init_theta_vec = initial_theta(model, spec, t_obs, frame.n, frame)
    theta_bar = np.asarray(init_theta_vec, dtype=float).copy()

    window = config.window or 20 * p
    seed_root = np.random.SeedSequence(config.rng_seed)
    jitter_seed, chain_seed, confirm_seed = seed_root.spawn(3)
    jitter_rng = np.random.default_rng(jitter_seed)
    f_seed, d_seed = chain_seed.spawn(2)
    chain = _Chain(init_net, model.with_theta(theta_bar),
                   np.random.default_rng(f_seed),
                   np.random.default_rng(d_seed),
                   mcmc_proposals_per_phase)

    init_burn = (config.init_burnin if config.init_burnin is not None
                 else 10 * config.interval_steps * config.samples_per_iter)
    for _ in range(init_burn):
        chain.step()

    hist_theta, hist_mu = [], []
    trace = []
    flags = []
    jitter_boost = 1.0
    ok_streak = 0
    converged = False
    degen_streak = np.zeros(q, dtype=int)
    v_hat = np.eye(q)
    g_hat = None
    n_done = 0

    for it in range(config.max_iters):
        gamma = config.gamma_a / (1.0 + it / config.gamma_b)
        sd = config.jitter_scale * gamma * jitter_boost
        theta_sim = theta_bar + jitter_rng.normal(0.0, sd, size=p)
        chain.model = model.with_theta(theta_sim)
        for _ in range(config.burn_per_iter):
            chain.step()
        block = np.empty((config.samples_per_iter, q))
        for s in range(config.samples_per_iter):
            for _ in range(config.interval_steps):
                chain.step()
            block[s] = chain.eval_targets(spec)
        mu_iter = block.mean(axis=0)

        pinned = block.max(axis=0) == block.min(axis=0)
        degen_streak = np.where(pinned, degen_streak + 1, 0)
        worst = int(degen_streak.max())
        if worst >= max(2 * window, 50):
            name = spec.names[int(degen_streak.argmax())]
            raise DegeneracyError(
                f"target {name} pinned at one value for {worst} iterations; "
                "the model cannot move it off the hull boundary")

        hist_theta.append(theta_sim)
        hist_mu.append(mu_iter)
        if len(hist_theta) > window:
            hist_theta.pop(0)
            hist_mu.pop(0)

        j_check = math.inf
        step_rel = math.inf
        if len(hist_theta) >= p + 2:
            try:
                g_hat, v_resid = estimate_gradient(hist_theta, hist_mu)
                v_hat = ridge_regularize(v_resid, config.ridge)
                jitter_boost = max(1.0, jitter_boost * 0.9)
            except DegeneracyError:
                jitter_boost = min(jitter_boost * 2.0, 64.0)
                flags.append(f"iter {it}: rank-deficient window, "
                             f"jitter boosted to {jitter_boost:g}")
                g_hat = None
            if g_hat is not None:
                d = mu_iter - t_obs
                try:
                    grad = np.linalg.solve(v_hat, d) @ g_hat
                    if config.update == "gradient":
                        update = grad
                    else:
                        # Gauss-Newton preconditioning: same descent
                        # direction family and fixed point, but the step
                        # lives on the parameter scale, so one gamma
                        # schedule works across problems
                        curv = g_hat.T @ np.linalg.solve(v_hat, g_hat)
                        update = np.linalg.solve(
                            ridge_regularize(curv, config.ridge), grad)
                except np.linalg.LinAlgError:
                    raise NumericalError(
                        "updating covariance singular after ridge") from None
                step_vec = gamma * update
                step_vec = np.clip(step_vec, -config.max_step, config.max_step)
                theta_bar = theta_bar - step_vec
                half = max(p + 2, len(hist_mu) // 2)
                mu_window = np.mean(hist_mu[-half:], axis=0)
                j_check = objective(mu_window, v_hat, t_obs)
                step_rel = (np.linalg.norm(step_vec)
                            / max(1.0, np.linalg.norm(theta_bar)))

        trace.append({"iter": it, "theta": theta_sim.tolist(),
                      "mu": mu_iter.tolist(),
                      "j": None if not np.isfinite(j_check) else j_check,
                      "gamma": gamma})
        n_done = it + 1
        if j_check < config.tol_j and step_rel < config.tol_theta:
            ok_streak += 1
            if ok_streak >= config.consecutive:
                converged = True
                break
        else:
            ok_streak = 0

    # confirmation run at the final theta, no jitter
    confirm_cfg = ChainConfig(
        burnin_steps=config.burn_per_iter * 4,
        interval_steps=config.confirm_interval,
        num_samples=config.confirm_samples,
        rng_seed=0)
    final_model = model.with_theta(theta_bar)
    moments = _confirm(chain, final_model, spec, confirm_cfg, confirm_seed)
    mu_final = moments.mu
    if g_hat is None:
        raise DegeneracyError("search ended before a gradient was estimable")
    j_final = objective(mu_final, v_hat, t_obs)
    v_single = ridge_regularize(moments.cov, config.ridge)
    try:
        vg = np.linalg.solve(v_single, g_hat)
        cov_theta = np.linalg.inv(g_hat.T @ vg)
    except np.linalg.LinAlgError:
        raise NumericalError("asymptotic variance is singular") from None
    se = np.sqrt(np.clip(np.diag(cov_theta), 0.0, None))
    if moments.degenerate:
        flags.append(f"confirmation-run degenerate targets: {moments.degenerate}")
    if not converged:
        flags.append("did not meet the convergence rule; hit max_iters")

    return FitReport(theta_hat=theta_bar, theta_names=theta_names(model),
                     target_names=spec.names, t_obs=t_obs, mu_final=mu_final,
                     j_final=j_final, se=se, cov_theta=cov_theta,
                     gradient=g_hat, v_single=v_single, v_updating=v_hat,
                     ess_final=moments.ess, converged=converged,
                     n_iters=n_done, flags=flags, trace=trace)


def _confirm(chain: _Chain, model, spec, cfg: ChainConfig, seed_seq):
    """Continue the fitter's chain at fixed theta to measure mu and the
    single-draw target covariance."""
    chain.model = model
    for _ in range(cfg.burnin_steps):
        chain.step()
    samples = np.empty((cfg.num_samples, len(spec.terms)))
    for s in range(cfg.num_samples):
        for _ in range(cfg.interval_steps):
            chain.step()
        samples[s] = chain.eval_targets(spec)
    mu = samples.mean(axis=0)
    cov = np.cov(samples, rowvar=False, ddof=1).reshape(len(mu), len(mu))
    ess = effective_sample_sizes(samples)
    degenerate = [spec.names[c] for c in range(len(mu))
                  if samples[:, c].max() == samples[:, c].min()]
    return MomentsResult(mu=mu, cov=cov,
                         se_mu=np.sqrt(samples.var(axis=0, ddof=1)
                                       / np.maximum(ess, 1.0)),
                         ess=ess, n_samples=cfg.num_samples,
                         degenerate=degenerate, samples=samples)


def save_report(report: FitReport, path):
    with open(path, "w") as fh:
        json.dump(report.to_json(), fh, indent=1)


def save_trace_csv(report: FitReport, path):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "gamma", "j"]
                   + [f"theta.{n}" for n in report.theta_names]
                   + [f"mu.{n}" for n in report.target_names])
        for row in report.trace:
            w.writerow([row["iter"], row["gamma"], row["j"]]
                       + row["theta"] + row["mu"])
