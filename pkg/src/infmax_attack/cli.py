"""Command-line entry point.

Every subcommand writes its outputs under ``--out DIR`` together with a
``manifest.json`` listing the command, its arguments and the files written.
Exit codes: 0 success, 2 bad configuration or usage, 3 unreadable or
inconsistent data, 4 runtime failure (training, convergence, too many failed
trials).
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .centrality import ConvergenceError
from .experiment import (
    ConfigError,
    ExperimentConfig,
    ExperimentError,
    load_config,
    parse_config,
    report,
    run_attack_experiment,
    run_theta_hist,
)
from .graph_core import Graph, GraphError, influence_columns, transition_matrix
from .ltm import BipartiteInstance, ThresholdSpec, bipartite_from_influence, expected_objective, simulate_spread
from .perturb import PerturbationSpec, build_epsilon, proxy_scores
from .strategies import STRATEGIES, AttackPlan, SelectionConstraint, select
from .synth import SBMConfig, case_study_export, generate_sbm
from .victim import TrainConfig, TrainingError, VictimGCN, evaluate_attack, random_split, train

log = logging.getLogger("infmax_attack")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4


class DataError(Exception):
    pass


def _load_data(path) -> Graph:
    d = Path(path)
    edges = d / "edges.txt"
    if not edges.exists():
        raise DataError(f"{d}: no edges.txt")
    feats = d / "features.csv"
    labels = d / "labels.csv"
    try:
        return io.load_graph(edges, feats if feats.exists() else None, labels if labels.exists() else None)
    except (GraphError, ValueError, IndexError) as exc:
        raise DataError(f"{d}: {exc}") from None


def _need(g: Graph, features=True, labels=True):
    if features and g.features is None:
        raise DataError("the dataset has no features.csv")
    if labels and g.labels is None:
        raise DataError("the dataset has no labels.csv")


def _train_config(args, seed) -> TrainConfig:
    return TrainConfig(args.hidden_dim, args.lr, args.epochs, args.weight_decay, seed)


def _constraint(args, g: Graph) -> SelectionConstraint:
    r = args.r
    budget = max(1, int(np.floor(r * g.n_nodes + 0.5))) if r < 1 else int(r)
    if budget > g.n_nodes:
        raise ConfigError(f"r={budget} exceeds the graph size {g.n_nodes}")
    try:
        return SelectionConstraint(budget, m=args.max_degree, percentile=None if args.max_degree else args.percentile)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _read_json(path):
    try:
        return io.load_json(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _read_epsilon(path, dim):
    try:
        eps = io.read_epsilon(path)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"{path}: {exc}") from None
    if len(eps) != dim:
        raise DataError(f"{path}: epsilon has length {len(eps)}, the features have {dim}")
    return eps


# subcommands return the list of files they wrote under ``out``

def cmd_synth(args, out: Path) -> list[str]:
    cfg = SBMConfig(args.communities, args.per_community, args.p_in, args.p_out, args.feature_dim,
                    args.signal, args.noise_sd, args.informative, args.seed)
    g = generate_sbm(cfg)
    files = list(io.save_graph(out, g).values())
    io.dump_json(out / "synth.json", {**cfg.to_json(), "n_nodes": g.n_nodes, "n_edges": g.n_edges})
    return files + ["synth.json"]


def cmd_train(args, out: Path) -> list[str]:
    g = _load_data(args.data)
    _need(g)
    split = random_split(g.n_nodes, args.split_seed if args.split_seed is not None else args.seed)
    model = train(g, split, _train_config(args, args.seed))
    (out / "model.json").write_text(model.dumps() + "\n")
    log.info("best epoch %d, validation accuracy %.4f", model.best_epoch, model.val_accuracy)
    return ["model.json"]


def cmd_epsilon(args, out: Path) -> list[str]:
    g = _load_data(args.data)
    _need(g)
    spec = PerturbationSpec(args.lam, args.top_fraction, args.sign_agreement, args.n_proxies, args.flip_sign)
    scores = proxy_scores(g, spec.n_proxies, _train_config(args, 0), args.seed)
    eps = build_epsilon(scores, spec)
    io.write_epsilon(out / "epsilon.csv", eps)
    return ["epsilon.csv"]


def cmd_attack(args, out: Path) -> list[str]:
    g = _load_data(args.data)
    c = _constraint(args, g)
    plans = [select(g, c, s, L=args.L, a=args.a, sigma=args.sigma, l=args.l, k=args.k, seed=args.seed)
             for s in args.strategy]
    written = []
    if len(plans) == 1:
        io.dump_json(out / "plan.json", plans[0].to_json(g))
        written.append("plan.json")
    else:
        for p in plans:
            io.dump_json(out / f"plan_{p.strategy}.json", p.to_json(g))
            written.append(f"plan_{p.strategy}.json")
    for p in plans:
        if p.shortfall:
            log.warning("%s selected %d of %d nodes", p.strategy, len(p.selected), c.r)
    if args.layout:
        io.dump_json(out / "layout.json", case_study_export(g, plans))
        written.append("layout.json")
    return written


def _thresholds(args) -> ThresholdSpec:
    try:
        if args.family == "uniform":
            return ThresholdSpec.uniform(args.a, args.b)
        return ThresholdSpec.normal(args.sigma)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_simulate(args, out: Path) -> list[str]:
    labels = None
    if args.instance:
        inst = BipartiteInstance.from_json(_read_json(args.instance))
        if args.family:
            inst = BipartiteInstance(inst.weights, _thresholds(args))
        seeds = [int(v) for v in (args.nodes or [])]
        if args.plan:
            seeds = [int(v) for v in _read_json(args.plan)["selected"]]
    else:
        if not args.data:
            raise ConfigError("simulate needs --data or --instance")
        g = _load_data(args.data)
        if args.plan:
            seeds = g.indices_of(_read_json(args.plan)["selected"])
        else:
            seeds = g.indices_of(io._normalize(args.nodes or []))
        args.family = args.family or "uniform"
        nodes = sorted(set(seeds))
        walk = transition_matrix(g)
        inst = bipartite_from_influence(influence_columns(walk, nodes, args.L), _thresholds(args))
        seeds = list(range(len(nodes)))     # instance seed k is the k-th sorted node
        labels = g.ids_of(nodes)
    try:
        counts = simulate_spread(inst, seeds, args.seed, args.trials)
        closed = expected_objective(inst, inst.thresholds, seeds) if inst.thresholds.family != "explicit" else None
    except ValueError as exc:
        raise DataError(str(exc)) from None
    mean = float(counts.mean())
    se = float(counts.std(ddof=1) / np.sqrt(len(counts))) if len(counts) > 1 else 0.0
    io.dump_json(out / "spread.json", {
        "seeds": seeds if labels is None else labels,
        "thresholds": inst.thresholds.to_json(),
        "trials": args.trials,
        "mean_activated": mean,
        "standard_error": se,
        "expected_closed_form": closed,
    })
    return ["spread.json"]


def cmd_eval(args, out: Path) -> list[str]:
    g = _load_data(args.data)
    _need(g)
    model = VictimGCN.from_json(_read_json(args.model))
    if model.split is None or len(model.split.test) != g.n_nodes:
        raise DataError(f"{args.model}: the checkpoint split does not match a {g.n_nodes}-node dataset")
    if model.W1.shape[1] != g.features.shape[1]:
        raise DataError(f"{args.model}: model expects {model.W1.shape[1]} features, data has {g.features.shape[1]}")
    plan = AttackPlan.from_json(_read_json(args.plan), g) if args.plan else AttackPlan([], "none")
    eps = _read_epsilon(args.epsilon, g.features.shape[1]) if args.epsilon else np.zeros(g.features.shape[1])
    outcome = evaluate_attack(model, g, plan, eps)
    io.dump_json(out / "eval.json", outcome.to_json(g))
    return ["eval.json"]


def _fmt_theta(v: float) -> str:
    return "inf" if v == np.inf else "-inf" if v == -np.inf else repr(float(v))


def cmd_theta_hist(args, out: Path) -> list[str]:
    g = _load_data(args.data)
    _need(g)
    cfg = _train_config(args, 0)
    if args.epsilon:
        eps = _read_epsilon(args.epsilon, g.features.shape[1])
    else:
        spec = PerturbationSpec(args.lam, args.top_fraction, args.sign_agreement, args.n_proxies, args.flip_sign)
        eps = build_epsilon(proxy_scores(g, spec.n_proxies, cfg, args.seed), spec)
        io.write_epsilon(out / "epsilon.csv", eps)
    res = run_theta_hist(g, eps, cfg, args.trials, args.seed)
    n_trials = res.samples.shape[0]
    with open(out / "theta_samples.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", *(f"trial_{t}" for t in range(n_trials))])
        for j, tok in enumerate(g.node_ids):
            w.writerow([tok, *(_fmt_theta(v) for v in res.samples[:, j])])
    io.dump_json(out / "theta_summary.json", {
        "trials": args.trials,
        "completed": n_trials,
        "skipped": res.skipped,
        "nonincreasing_fraction": res.diagnostic_fraction,
        "nonincreasing": {str(t): f for t, f in zip(g.node_ids, res.nonincreasing)},
    })
    written = ["theta_samples.csv", "theta_summary.json"]
    return (["epsilon.csv"] if not args.epsilon else []) + written


_EXPERIMENT_OVERRIDES = ("trials", "seed", "workers", "dataset")


def cmd_experiment(args, out: Path) -> list[str]:
    overrides = {k: getattr(args, k) for k in _EXPERIMENT_OVERRIDES}
    try:
        cfg = load_config(args.config, **overrides) if args.config else parse_config("", **overrides)
    except OSError as exc:
        raise DataError(f"{args.config}: {exc}") from None
    if cfg.dataset is not None:
        g = _load_data(cfg.dataset)
    else:
        g = None
    results = run_attack_experiment(cfg, g)
    return report(results, out, args.format)


def cmd_report(args, out: Path) -> list[str]:
    results = _read_json(args.results)
    return report(results, out, args.format)


def _add_train_args(p):
    p.add_argument("--hidden-dim", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--weight-decay", type=float, default=5e-4)


def _add_eps_args(p):
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=10.0)
    p.add_argument("--n-proxies", type=int, default=20)
    p.add_argument("--top-fraction", type=float, default=0.02)
    p.add_argument("--sign-agreement", type=float, default=0.8)
    p.add_argument("--flip-sign", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infmax-attack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, fn, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(fn=fn)
        return p

    p = command("synth", cmd_synth, "generate a stochastic blockmodel dataset")
    p.add_argument("--communities", type=int, default=4)
    p.add_argument("--per-community", type=int, default=100)
    p.add_argument("--p-in", type=float, default=0.05)
    p.add_argument("--p-out", type=float, default=0.005)
    p.add_argument("--feature-dim", type=int, default=100)
    p.add_argument("--signal", type=float, default=1.0)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--informative", type=int)
    p.add_argument("--seed", type=int, default=0)

    p = command("train", cmd_train, "train a victim GCN and save a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0, help="initialization seed")
    p.add_argument("--split-seed", type=int, help="split seed (defaults to --seed)")
    _add_train_args(p)

    p = command("epsilon", cmd_epsilon, "build the perturbation vector from proxy models")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_eps_args(p)
    _add_train_args(p)

    p = command("attack", cmd_attack, "select nodes to perturb")
    p.add_argument("--data", required=True)
    p.add_argument("--strategy", action="append", choices=STRATEGIES + ("none",),
                   help="repeat for several plans (default infmax-unif)")
    p.add_argument("--r", type=float, default=0.01, help="budget: fraction of N if < 1, else a count")
    p.add_argument("--percentile", type=float, default=0.1)
    p.add_argument("--max-degree", type=int, help="explicit neighbourhood-size cap (overrides --percentile)")
    p.add_argument("--L", type=int, default=4)
    p.add_argument("--a", type=float, default=0.01)
    p.add_argument("--sigma", type=float, default=0.01)
    p.add_argument("--l", type=int, default=30)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="seed for the random baseline")
    p.add_argument("--layout", action="store_true", help="also write plot-ready layout data")

    p = command("simulate", cmd_simulate, "Monte-Carlo spread under the threshold model")
    p.add_argument("--data")
    p.add_argument("--instance", help="bipartite instance JSON instead of a dataset")
    p.add_argument("--plan")
    p.add_argument("--nodes", nargs="*")
    p.add_argument("--family", choices=("uniform", "normal"))
    p.add_argument("--a", type=float, default=0.01)
    p.add_argument("--b", type=float)
    p.add_argument("--sigma", type=float, default=0.01)
    p.add_argument("--L", type=int, default=4)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)

    p = command("eval", cmd_eval, "accuracy of a checkpoint before and after an attack")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--plan")
    p.add_argument("--epsilon")

    p = command("theta-hist", cmd_theta_hist, "per-node flip-threshold samples over retrained victims")
    p.add_argument("--data", required=True)
    p.add_argument("--epsilon", help="epsilon CSV; built from proxies when absent")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    _add_eps_args(p)
    _add_train_args(p)

    p = command("experiment", cmd_experiment, "seeded multi-trial attack comparison")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--dataset", help="dataset directory (overrides the config)")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--format", nargs="+", default=["json", "csv", "markdown"],
                   choices=("json", "csv", "markdown"))

    p = command("report", cmd_report, "render results.json as JSON, CSV and a markdown table")
    p.add_argument("--results", required=True)
    p.add_argument("--format", nargs="+", default=["json", "csv", "markdown"],
                   choices=("json", "csv", "markdown"))
    return parser


def _manifest_args(args) -> dict:
    skip = {"fn", "out", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "strategy", "unset") is None:
        args.strategy = ["infmax-unif"]
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = args.fn(args, out)
    except (ConfigError, argparse.ArgumentTypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, GraphError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, ConvergenceError, ExperimentError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    io.dump_json(out / "manifest.json", {
        "command": args.command,
        "version": __version__,
        "args": _manifest_args(args),
        "files": sorted(files),
    })
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
