"""Command-line entry point.

Subcommands wire the library into the full workflow: recover targets from
an egocentric survey, estimate parameters, construct a starting network,
validate on a static population, and simulate an evolving one. Every
command is deterministic given its inputs and seed; each output directory
gets one run manifest with input and output digests.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .construct import anneal_network, seed_tie_ages
from .dynamics import ChainConfig, ModelSpec, run_replicates
from .egmme import (FitConfig, dissolution_shortcut, estimate_moments, fit,
                    save_report, save_trace_csv)
from .egodata import EgoSample, recover_cross_targets, resample_egos, scale_targets_to_table
from .equilibrium import (duration_summary, expected_targets_dyad_independent,
                          ilogit, offset_mean_degree, offset_mean_degree_limit,
                          stationary_dyad_probs)
from .errors import (BoundaryError, ConfigError, ContractError,
                     DegeneracyError, DomainError, NumericalError,
                     UndefinedTargetError, UnsupportedModelError)
from .netcore import ActorTable, NetworkState
from .popsim import (VitalConfig, km_adjusted_mean_duration, run_popsim,
                     write_composition_csv, write_stats_csv)
from .statistics import TargetSpec, eval_targets

_CONFIG_ERRORS = (ConfigError, ContractError, UnsupportedModelError,
                  FileNotFoundError, json.JSONDecodeError)
_NUMERICAL_ERRORS = (NumericalError, DomainError, BoundaryError,
                     UndefinedTargetError, np.linalg.LinAlgError)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


class Manifest:
    def __init__(self, command, args, out_dir):
        self.data = {"command": command, "argv": args, "seed": None,
                     "version": __version__, "inputs": {}, "outputs": {},
                     "started": time.strftime("%Y-%m-%dT%H:%M:%S"),
                     "finished": None, "stages": []}
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def add_input(self, path):
        if path:
            self.data["inputs"][str(path)] = _sha256(path)

    def add_output(self, path):
        self.data["outputs"][str(Path(path).name)] = _sha256(path)

    def stage(self, name):
        self.data["stages"].append(name)

    def write(self):
        self.data["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        with open(self.out_dir / "manifest.json", "w") as fh:
            json.dump(self.data, fh, indent=1)


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _load_targets_file(path):
    d = _load_json(path)
    spec = TargetSpec.from_json(d)
    values = np.asarray(d["values"], dtype=float) if "values" in d else None
    return spec, values, d


def _write_targets_file(path, spec, values, extra=None):
    d = spec.to_json()
    d["values"] = [float(v) for v in values]
    d["names"] = list(spec.names)
    if extra:
        d.update(extra)
    with open(path, "w") as fh:
        json.dump(d, fh, indent=1)


def _write_stats_csv(path, names, rows, seed_col=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = (["replicate"] if seed_col else []) + list(names)
        w.writerow(header)
        for rep, row in rows:
            w.writerow(([rep] if seed_col else []) + [float(v) for v in row])


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args):
    model = ModelSpec.load(args.model)
    init = NetworkState.load(args.init)
    doc = _load_json(args.model)
    if "targets" in doc:
        spec = TargetSpec.from_json(doc)
    else:
        spec = TargetSpec(terms=model.formation, normalization="raw")
    samples = max(1, args.steps // args.interval)
    cfg = ChainConfig(burnin_steps=args.burnin, interval_steps=args.interval,
                      num_samples=samples, num_replicates=args.replicates,
                      rng_seed=args.seed,
                      mcmc_proposals_per_phase=args.mcmc_proposals)
    reps = run_replicates(init, model, cfg, spec, threads=args.threads)
    rows = [(r, reps[r, s]) for r in range(reps.shape[0])
            for s in range(reps.shape[1])]
    _write_stats_csv(args.out, spec.names, rows, seed_col=True)
    print(f"wrote {len(rows)} sampled target vectors to {args.out}")
    return {"outputs": [args.out], "inputs": [args.model, args.init]}


def cmd_equilibrium(args):
    model = ModelSpec.load(args.model)
    out = {"n": args.n}
    if args.actors:
        table = ActorTable.from_csv(args.actors)
        net = NetworkState(table, model.dyad_space)
        _, _, p = stationary_dyad_probs(net, model)
        out["stationary_density"] = float(np.mean(p))
        out["mean_degree"] = float(2.0 * np.sum(p) / table.n_active())
    else:
        edges_only = (len(model.formation) == 1
                      and model.formation[0].kind == "edges")
        if not edges_only:
            raise ConfigError("closed-form summaries without an actor table "
                              "need an edges-only formation; pass --actors")
        tp = float(model.theta_plus[0])
        tm = float(model.theta_minus[0]) if model.dissolution else 0.0
        if model.size_offset:
            md = offset_mean_degree(args.n, tp, tm)
            out["mean_degree"] = md
            out["mean_degree_limit"] = offset_mean_degree_limit(tp, tm)
            out["stationary_density"] = md / (args.n - 1)
        else:
            from .equilibrium import edges_model_density
            p = edges_model_density(tp, tm)
            out["stationary_density"] = p
            out["mean_degree"] = (args.n - 1) * p
    diss_edges = [k for k, t in enumerate(model.dissolution)
                  if t.kind == "edges"]
    if len(model.dissolution) == 1 and diss_edges:
        out["duration"] = duration_summary(float(model.theta_minus[0]))
    text = json.dumps(out, indent=1)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        return {"outputs": [args.out], "inputs": [args.model]}
    return {"outputs": [], "inputs": [args.model]}


def cmd_ego_stats(args):
    survey = EgoSample.from_csv(args.survey)
    spec, _, _ = _load_targets_file(args.spec)
    report = recover_cross_targets(survey, spec)
    rng = np.random.default_rng(args.seed)
    table = resample_egos(survey, args.resample, rng)
    # values live in the spec's declared units: per-capita as recovered, or
    # raw counts rescaled to the pseudo-population
    if spec.normalization == "per-capita-by-group":
        values = report.normalized
    else:
        values = scale_targets_to_table(report, table)
    _write_targets_file(args.out, spec, values, extra={
        "n_egos": report.n_egos, "resample": args.resample,
        "normalized": [float(v) for v in report.normalized]})
    actors_path = args.out_actors or str(Path(args.out).with_suffix("")) + "_actors.csv"
    with open(actors_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "sex", "race", "age_months"])
        for rec in table.records():
            w.writerow([rec["id"], rec["sex"], rec["race"], rec["age_months"]])
    print(f"recovered {len(spec.terms)} targets from {report.n_egos} egos; "
          f"pseudo-population of {args.resample} written to {actors_path}")
    return {"outputs": [args.out, actors_path],
            "inputs": [args.survey, args.spec]}


def targets_as_counts(spec, values, table):
    """Target values converted to raw counts for the given population
    (per-capita entries are scaled up by their group sizes)."""
    if spec.normalization != "per-capita-by-group":
        return np.asarray(values, dtype=float)
    from stergm.statistics import Frame, normalization_denominators

    den = normalization_denominators(Frame(table), spec)
    out = np.asarray(values, dtype=float).copy()
    for t, term in enumerate(spec.terms):
        if not term.is_duration():
            out[t] = values[t] * den[t]
    return out


def cmd_init_network(args):
    spec, values, _ = _load_targets_file(args.targets)
    if values is None:
        raise ConfigError(f"{args.targets} carries no observed values")
    table = ActorTable.from_csv(args.actors)
    counts = targets_as_counts(spec, values, table)
    structural = [(t, v) for t, v in zip(spec.terms, counts)
                  if not t.is_duration()]
    sub_spec = TargetSpec(terms=[t for t, _ in structural])
    rng = np.random.default_rng(args.seed)
    net, achieved, residual, trace = anneal_network(
        table, [v for _, v in structural], sub_spec, rng=rng,
        n_props=args.proposals)
    if args.age_geometric_p:
        seed_tie_ages(net, args.age_geometric_p, rng)
    net.save(args.out)
    print(f"constructed {net.n_ties()} ties; residual distance {residual:g}")
    return {"outputs": [args.out], "inputs": [args.targets, args.actors],
            "extra": {"residual": residual}}


def cmd_fit(args):
    model = ModelSpec.load(args.model)
    spec, t_obs, _ = _load_targets_file(args.targets)
    if t_obs is None:
        raise ConfigError(f"{args.targets} carries no observed values")
    fit_cfg = FitConfig.from_json(_load_json(args.config)) if args.config \
        else FitConfig()
    if args.seed is not None:
        fit_cfg = FitConfig.from_json(dict(fit_cfg.to_json(), rng_seed=args.seed))
    init = NetworkState.load(args.init)
    report = fit(model, t_obs, spec, init, config=fit_cfg,
                 mcmc_proposals_per_phase=args.mcmc_proposals)
    save_report(report, args.out)
    trace_path = str(Path(args.out).with_suffix("")) + "_trace.csv"
    save_trace_csv(report, trace_path)
    print(f"fit J = {report.j_final:.4g}, converged = {report.converged}; "
          f"theta = {np.round(report.theta_hat, 4).tolist()}")
    return {"outputs": [args.out, trace_path],
            "inputs": [args.model, args.targets, args.init]
            + ([args.config] if args.config else [])}


def cmd_popsim(args):
    model = ModelSpec.load(args.model)
    init = NetworkState.load(args.init)
    vital = VitalConfig.load(args.vital) if args.vital else VitalConfig()
    overrides = {}
    if args.steps is not None:
        overrides["steps"] = args.steps
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        vital = VitalConfig.from_json(dict(vital.to_json(), **overrides))
    doc = _load_json(args.model)
    spec = TargetSpec.from_json(doc) if "targets" in doc else None
    result = run_popsim(init, model, vital, spec,
                        record_interval=args.record_interval)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    if spec is not None:
        write_stats_csv(result, out / "stats.csv")
        outputs.append(out / "stats.csv")
    result.tie_log.to_csv(out / "tie_history.csv")
    write_composition_csv(result, out / "composition.csv")
    result.final_state.save(out / "final_net.json")
    outputs += [out / "tie_history.csv", out / "composition.csv",
                out / "final_net.json"]
    raw_mean, km_mean = km_adjusted_mean_duration(result.tie_log)
    summary = {"steps": vital.steps, "final_n": result.final_state.table.n_active(),
               "events": result.events,
               "censored_fraction": result.tie_log.censored_fraction(),
               "raw_mean_duration": raw_mean, "km_mean_duration": km_mean}
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    outputs.append(out / "summary.json")
    print(f"population {init.table.n_active()} -> {summary['final_n']}; "
          f"durations raw {raw_mean:.2f} / adjusted {km_mean:.2f} steps")
    return {"outputs": [str(p) for p in outputs],
            "inputs": [args.model, args.init]
            + ([args.vital] if args.vital else [])}


def cmd_pipeline(args):
    """Survey to simulation: recover targets, estimate, validate on a
    static population, then run the evolving-population simulation."""
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("pipeline", {k: v for k, v in vars(args).items()
                                     if k != "func"}, out)
    manifest.data["seed"] = args.seed
    for p in (args.survey, args.model, args.vital):
        if p:
            manifest.add_input(p)
    stage_path = out / "stage.failed"

    def fail_marker(stage):
        with open(stage_path, "w") as fh:
            fh.write(stage + "\n")

    seed_root = np.random.SeedSequence(args.seed)
    s_resample, s_anneal, s_fit, s_valid, s_pop = seed_root.spawn(5)

    # stage 1: ego statistics
    stage = "ego-stats"
    try:
        survey = EgoSample.from_csv(args.survey)
        model_doc = _load_json(args.model)
        model = ModelSpec.from_json(model_doc)
        spec = TargetSpec.from_json(model_doc)
        report = recover_cross_targets(survey, spec)
        table = resample_egos(survey, args.resample,
                              np.random.default_rng(s_resample))
        if spec.normalization == "per-capita-by-group":
            t_obs = report.normalized
        else:
            t_obs = scale_targets_to_table(report, table)
        targets_path = out / "targets.json"
        _write_targets_file(targets_path, spec, t_obs,
                            extra={"n_egos": report.n_egos,
                                   "resample": args.resample})
        manifest.add_output(targets_path)
        manifest.stage(stage)

        # stage 2: dissolution shortcut + starting network
        stage = "init-network"
        names = list(spec.names)
        mean_age = (float(t_obs[names.index("mean_tie_age")])
                    if "mean_tie_age" in names else None)
        p_dissolve = None
        if mean_age is not None:
            p_dissolve = float(ilogit(-dissolution_shortcut(mean_age)))
        counts = targets_as_counts(spec, t_obs, table)
        structural = [(t, v) for t, v in zip(spec.terms, counts)
                      if not t.is_duration()]
        net, achieved, residual, _ = anneal_network(
            table, [v for _, v in structural],
            TargetSpec(terms=[t for t, _ in structural]),
            dyad_space=model.dyad_space,
            rng=np.random.default_rng(s_anneal), n_props=args.anneal_proposals)
        if p_dissolve:
            seed_tie_ages(net, p_dissolve, np.random.default_rng(s_anneal))
        init_path = out / "init_net.json"
        net.save(init_path)
        manifest.add_output(init_path)
        manifest.stage(stage)

        # stage 3: EGMME fit
        stage = "fit"
        fit_cfg = (FitConfig.from_json(_load_json(args.fit_config))
                   if args.fit_config else FitConfig())
        fit_cfg = FitConfig.from_json(
            dict(fit_cfg.to_json(), rng_seed=int(s_fit.generate_state(1)[0])))
        fit_report = fit(model, t_obs, spec, net, config=fit_cfg)
        report_path = out / "report.json"
        save_report(fit_report, report_path)
        save_trace_csv(fit_report, out / "trace.csv")
        manifest.add_output(report_path)
        manifest.add_output(out / "trace.csv")
        manifest.stage(stage)

        # stage 4: static-population validation at the fitted parameters
        stage = "validate-static"
        fitted = model.with_theta(fit_report.theta_hat)
        cfg = ChainConfig(burnin_steps=args.validate_burnin,
                          interval_steps=args.validate_interval,
                          num_samples=args.validate_samples,
                          rng_seed=int(s_valid.generate_state(1)[0]))
        moments = estimate_moments(fitted, net, spec, cfg,
                                   threads=args.threads)
        z = (moments.mu - t_obs) / np.where(moments.se_mu > 0,
                                            moments.se_mu, np.inf)
        validation = {
            "targets": [float(v) for v in t_obs],
            "simulated_mean": [float(v) for v in moments.mu],
            "se": [float(v) for v in moments.se_mu],
            "z": [float(v) for v in z],
            "names": list(spec.names),
            "within_3se": bool(np.all(np.abs(z) <= 3.0)),
        }
        with open(out / "validation.json", "w") as fh:
            json.dump(validation, fh, indent=1)
        manifest.add_output(out / "validation.json")
        manifest.stage(stage)

        # stage 5: evolving-population simulation
        stage = "popsim"
        vital = VitalConfig.load(args.vital) if args.vital else VitalConfig()
        overrides = {"seed": int(s_pop.generate_state(1)[0])}
        if args.steps is not None:
            overrides["steps"] = args.steps
        vital = VitalConfig.from_json(dict(vital.to_json(), **overrides))
        result = run_popsim(net, fitted, vital, spec,
                            record_interval=args.record_interval)
        write_stats_csv(result, out / "popsim_stats.csv")
        write_composition_csv(result, out / "popsim_composition.csv")
        result.tie_log.to_csv(out / "popsim_tie_history.csv")
        result.final_state.save(out / "popsim_final_net.json")
        raw_mean, km_mean = km_adjusted_mean_duration(result.tie_log)
        with open(out / "popsim_summary.json", "w") as fh:
            json.dump({"events": result.events,
                       "final_n": result.final_state.table.n_active(),
                       "censored_fraction": result.tie_log.censored_fraction(),
                       "raw_mean_duration": raw_mean,
                       "km_mean_duration": km_mean}, fh, indent=1)
        for name in ("popsim_stats.csv", "popsim_composition.csv",
                     "popsim_tie_history.csv", "popsim_final_net.json",
                     "popsim_summary.json"):
            manifest.add_output(out / name)
        manifest.stage(stage)
    except BaseException:
        fail_marker(stage)
        manifest.write()
        raise
    if stage_path.exists():
        stage_path.unlink()
    manifest.write()
    print(f"pipeline complete; validation within 3 SE: "
          f"{validation['within_3se']}; artifacts in {out}")
    return {"outputs": [], "inputs": [], "manifest_done": True}


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="stergm", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_default=0):
        sp.add_argument("--seed", type=int, default=seed_default)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--out-dir", default=".")

    sp = sub.add_parser("simulate", help="sample target statistics from a chain")
    sp.add_argument("--model", required=True)
    sp.add_argument("--init", required=True)
    sp.add_argument("--steps", type=int, required=True,
                    help="post-burn-in steps to simulate")
    sp.add_argument("--burnin", type=int, default=0)
    sp.add_argument("--interval", type=int, default=1)
    sp.add_argument("--replicates", type=int, default=1)
    sp.add_argument("--mcmc-proposals", type=int, default=None)
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("equilibrium", help="closed-form stationary summaries")
    sp.add_argument("--model", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--actors", default=None)
    sp.add_argument("--out", default=None)
    common(sp)
    sp.set_defaults(func=cmd_equilibrium)

    sp = sub.add_parser("ego-stats", help="recover targets from a survey")
    sp.add_argument("--survey", required=True)
    sp.add_argument("--spec", required=True)
    sp.add_argument("--resample", type=int, default=1000)
    sp.add_argument("--out", required=True)
    sp.add_argument("--out-actors", default=None)
    common(sp)
    sp.set_defaults(func=cmd_ego_stats)

    sp = sub.add_parser("init-network", help="anneal a starting network")
    sp.add_argument("--targets", required=True)
    sp.add_argument("--actors", required=True)
    sp.add_argument("--proposals", type=int, default=None)
    sp.add_argument("--age-geometric-p", type=float, default=None)
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_init_network)

    sp = sub.add_parser("fit", help="equilibrium method-of-moments fit")
    sp.add_argument("--model", required=True)
    sp.add_argument("--targets", required=True)
    sp.add_argument("--config", default=None)
    sp.add_argument("--init", required=True)
    sp.add_argument("--mcmc-proposals", type=int, default=None)
    sp.add_argument("--out", required=True)
    common(sp, seed_default=None)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("popsim", help="evolving-population simulation")
    sp.add_argument("--model", required=True)
    sp.add_argument("--init", required=True)
    sp.add_argument("--vital", default=None)
    sp.add_argument("--steps", type=int, default=None)
    sp.add_argument("--record-interval", type=int, default=1)
    common(sp, seed_default=None)
    sp.set_defaults(func=cmd_popsim)

    sp = sub.add_parser("pipeline", help="survey -> fit -> validate -> popsim")
    sp.add_argument("--survey", required=True)
    sp.add_argument("--model", required=True,
                    help="model skeleton JSON with a targets list")
    sp.add_argument("--vital", default=None)
    sp.add_argument("--resample", type=int, default=1000)
    sp.add_argument("--fit-config", default=None)
    sp.add_argument("--steps", type=int, default=None)
    sp.add_argument("--record-interval", type=int, default=1)
    sp.add_argument("--anneal-proposals", type=int, default=None)
    sp.add_argument("--validate-burnin", type=int, default=50)
    sp.add_argument("--validate-interval", type=int, default=5)
    sp.add_argument("--validate-samples", type=int, default=200)
    common(sp)
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegeneracyError as exc:
        print(f"degeneracy: {exc}", file=sys.stderr)
        return 4
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if result and not result.get("manifest_done"):
        manifest = Manifest(args.command, {k: v for k, v in vars(args).items()
                                           if k != "func"}, args.out_dir)
        manifest.data["seed"] = getattr(args, "seed", None)
        for path in result.get("inputs", []):
            manifest.add_input(path)
        for path in result.get("outputs", []):
            manifest.add_output(path)
        manifest.write()
    return 0


if __name__ == "__main__":
    sys.exit(main())
