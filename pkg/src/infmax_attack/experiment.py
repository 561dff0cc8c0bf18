"""Attack experiments: configuration, seeded trials, aggregation and reports.

One trial draws proxy splits, builds the perturbation from the proxies,
trains a victim on its own split, applies every strategy and records test
accuracy.  Trials hang off one master seed through ``numpy.random.SeedSequence``
so results are reproducible byte for byte.
"""
from __future__ import annotations

import csv
import io as _io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import stats

from . import io
from .centrality import ConvergenceError
from .graph_core import Graph, transition_matrix
from .perturb import PerturbationSpec, build_epsilon, proxy_scores
from .strategies import STRATEGIES, AttackPlan, SelectionConstraint, select
from .surrogate import theta_histogram
from .synth import SBMConfig, generate_sbm
from .victim import TrainConfig, TrainingError, evaluate_attack, random_split, train

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.2


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    n_communities: int = 4
    nodes_per_community: int = 100
    p_in: float = 0.05
    p_out: float = 0.005
    feature_dim: int = 100
    signal: float = 1.0
    noise_sd: float = 1.0
    informative: int | None = None
    synth_seed: int = 0

    strategies: list = field(default_factory=lambda: list(STRATEGIES))
    r: float = 0.01                  # < 1: fraction of N, otherwise a node count
    degree_percentile: float = 0.1
    L: int = 4
    a: float = 0.01
    sigma: float = 0.01
    l: int = 30
    k: int = 1

    lam: float = 10.0
    n_proxies: int = 20
    top_fraction: float = 0.02
    sign_agreement: float = 0.8
    flip_sign: bool = False

    hidden_dim: int = 32
    lr: float = 0.01
    epochs: int = 200
    weight_decay: float = 5e-4

    trials: int = 10
    seed: int = 0
    workers: int = 1
    out: str | None = None

    def validate(self, n_nodes: int | None = None) -> None:
        if not self.strategies:
            raise ConfigError("no strategies given")
        for s in self.strategies:
            if s not in STRATEGIES and s != "none":
                raise ConfigError(f"unknown strategy {s!r}")
        if not self.r > 0:
            raise ConfigError(f"r must be positive, got {self.r}")
        if self.r >= 1 and self.r != int(self.r):
            raise ConfigError(f"r >= 1 must be a whole node count, got {self.r}")
        if not 0 < self.degree_percentile <= 1:
            raise ConfigError(f"degree_percentile must lie in (0, 1], got {self.degree_percentile}")
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.trials < 1 or self.n_proxies < 1 or self.workers < 1:
            raise ConfigError("trials, n_proxies and workers must be >= 1")
        if n_nodes is not None and self.budget(n_nodes) > n_nodes:
            raise ConfigError(f"r={self.budget(n_nodes)} exceeds the graph size {n_nodes}")

    def budget(self, n_nodes: int) -> int:
        if self.r < 1:
            return max(1, int(math.floor(self.r * n_nodes + 0.5)))
        return int(self.r)

    def sbm(self) -> SBMConfig:
        return SBMConfig(self.n_communities, self.nodes_per_community, self.p_in, self.p_out,
                         self.feature_dim, self.signal, self.noise_sd, self.informative, self.synth_seed)

    def train_config(self, seed: int = 0) -> TrainConfig:
        return TrainConfig(self.hidden_dim, self.lr, self.epochs, self.weight_decay, seed)

    def perturbation(self) -> PerturbationSpec:
        return PerturbationSpec(self.lam, self.top_fraction, self.sign_agreement, self.n_proxies, self.flip_sign)

    def to_json(self) -> dict:
        return asdict(self)


_ALIASES = {"lambda": "lam", "percentile": "degree_percentile"}


def _coerce(name: str, raw: str):
    if name == "strategies":
        return [s.strip() for s in raw.split(",") if s.strip()]
    default = ExperimentConfig.__dataclass_fields__[name].default
    if raw.lower() in ("none", "null", ""):
        return None
    if isinstance(default, bool):
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    if isinstance(default, int) and name != "r":
        return int(raw)
    if isinstance(default, float) or name == "r":
        return float(raw)
    return raw


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` comments); unknown keys are rejected."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        key = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if key not in known:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {n}: bad value for {key}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), **overrides)


def load_dataset(cfg: ExperimentConfig) -> Graph:
    if cfg.dataset is None:
        return generate_sbm(cfg.sbm())
    d = Path(cfg.dataset)
    return io.load_graph(d / "edges.txt", d / "features.csv", d / "labels.csv")


def _trial_seeds(master: int, trials: int):
    out = []
    for child in np.random.SeedSequence(master).spawn(trials):
        proxy, victim, rnd = child.spawn(3)
        split_seed, init_seed = (int(x) for x in victim.generate_state(2))
        out.append((int(proxy.generate_state(1)[0]), split_seed, init_seed, int(rnd.generate_state(1)[0])))
    return out


def structural_plans(g: Graph, cfg: ExperimentConfig) -> dict[str, AttackPlan]:
    """Plans that depend on the graph alone and can be shared by every trial."""
    c = SelectionConstraint(cfg.budget(g.n_nodes), percentile=cfg.degree_percentile)
    plans = {}
    for name in cfg.strategies:
        if name != "random":
            plans[name] = select(g, c, name, L=cfg.L, a=cfg.a, sigma=cfg.sigma, l=cfg.l, k=cfg.k)
    return plans


def run_trial(g: Graph, cfg: ExperimentConfig, index: int, seeds, plans: dict[str, AttackPlan]) -> dict:
    proxy_seed, split_seed, init_seed, random_seed = seeds
    walk = transition_matrix(g)
    scores = proxy_scores(g, cfg.n_proxies, cfg.train_config(), proxy_seed, walk)
    eps = build_epsilon(scores, cfg.perturbation())
    split = random_split(g.n_nodes, split_seed)
    model = train(g, split, cfg.train_config(init_seed), walk)
    c = SelectionConstraint(cfg.budget(g.n_nodes), percentile=cfg.degree_percentile)
    accs, selected = {}, {}
    clean = None
    for name in cfg.strategies:
        plan = plans.get(name)
        if plan is None:
            plan = select(g, c, name, seed=random_seed)
        outcome = evaluate_attack(model, g, plan, eps, split.test, walk)
        clean = outcome.clean_accuracy
        accs[name] = outcome.attacked_accuracy
        selected[name] = g.ids_of(plan.selected)
    if clean is None:
        clean = evaluate_attack(model, g, AttackPlan([], "none"), eps, split.test, walk).clean_accuracy
    return {
        "trial": index,
        "clean": clean,
        "accuracy": accs,
        "selected": selected,
        "epsilon_nonzero": np.flatnonzero(eps).tolist(),
    }


def _run_one(args):
    g, cfg, index, seeds, plans = args
    try:
        return run_trial(g, cfg, index, seeds, plans)
    except (TrainingError, ConvergenceError, ValueError) as exc:
        return {"trial": index, "error": f"{type(exc).__name__}: {exc}"}


def paired_ttest(x, y) -> tuple[float | None, float | None]:
    """Two-sided paired t-test; identical samples give ``p = 1``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2:
        return None, None
    d = x - y
    if np.all(d == d[0]):
        return (0.0, 1.0) if d[0] == 0 else (math.copysign(math.inf, d[0]), 0.0)
    res = stats.ttest_rel(x, y)
    return float(res.statistic), float(res.pvalue)


def summarize(trials: list[dict], strategies: list[str]) -> dict:
    ok = [t for t in trials if "error" not in t]
    rows = []
    series = {"none": [t["clean"] for t in ok]}
    for s in strategies:
        series[s] = [t["accuracy"][s] for t in ok]
    for name, vals in series.items():
        v = np.asarray(vals, dtype=float)
        sem = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
        rows.append({"strategy": name, "mean": float(v.mean()) if len(v) else float("nan"),
                     "sem": sem, "n": int(len(v))})
    tests = []
    names = list(series)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            t, p = paired_ttest(series[a], series[b])
            tests.append({"a": a, "b": b, "t": t, "p": p})
    return {"summary": rows, "ttests": tests}


def run_attack_experiment(cfg: ExperimentConfig, g: Graph | None = None) -> dict:
    g = load_dataset(cfg) if g is None else g
    cfg.validate(g.n_nodes)
    if g.features is None or g.labels is None:
        raise ConfigError("the dataset needs features and labels")
    plans = structural_plans(g, cfg)
    jobs = [(g, cfg, i, s, plans) for i, s in enumerate(_trial_seeds(cfg.seed, cfg.trials))]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            trials = list(pool.map(_run_one, jobs))
    else:
        trials = [_run_one(j) for j in jobs]
    trials.sort(key=lambda t: t["trial"])
    failed = [t for t in trials if "error" in t]
    for t in failed:
        log.warning("trial %d failed: %s", t["trial"], t["error"])
    if len(failed) > MAX_FAILURE_RATE * len(trials):
        raise ExperimentError(f"{len(failed)} of {len(trials)} trials failed; first: {failed[0]['error']}")
    out = {
        "config": cfg.to_json(),
        "dataset": "sbm" if cfg.dataset is None else Path(cfg.dataset).name,
        "model": "GCN",
        "n_nodes": g.n_nodes,
        "budget": cfg.budget(g.n_nodes),
        "degree_cap": SelectionConstraint(cfg.budget(g.n_nodes), percentile=cfg.degree_percentile).degree_cap(g),
        "trials": trials,
        "failures": len(failed),
    }
    out.update(summarize(trials, cfg.strategies))
    return out


def run_theta_hist(g: Graph, epsilon: np.ndarray, config: TrainConfig, trials: int, seed: int):
    if not np.any(epsilon):
        log.warning("epsilon is zero: every threshold is infinite")
    return theta_histogram(g, g.features, g.labels, epsilon, config, trials, seed)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


CSV_HEADER = ["dataset", "model", "strategy", "mean", "sem", "n"]


def report_csv(results: dict | None) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    if results:
        for row in results["summary"]:
            w.writerow([results.get("dataset", ""), results.get("model", ""), row["strategy"],
                        _fmt(row["mean"]), _fmt(row["sem"]), row["n"]])
    return buf.getvalue()


def read_report_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(_io.StringIO(text)))
    return [{"strategy": r["strategy"], "mean": float(r["mean"]), "sem": float(r["sem"]), "n": int(r["n"])}
            for r in rows]


def report_markdown(results: dict | None) -> str:
    col = "" if not results else f"{results.get('dataset', '')} / {results.get('model', '')}"
    lines = [f"| Method | {col} |", "|---|---|"]
    if results:
        for row in results["summary"]:
            name = "None" if row["strategy"] == "none" else row["strategy"]
            lines.append(f"| {name} | {100 * row['mean']:.1f} ± {100 * row['sem']:.1f} |")
    return "\n".join(lines) + "\n"


def report(results: dict | None, out_dir, formats=("json", "csv", "markdown")) -> list[str]:
    """Write result files; output bytes depend only on ``results``."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "json":
            io.dump_json(d / "results.json", results or {})
            written.append("results.json")
        elif fmt == "csv":
            (d / "results.csv").write_text(report_csv(results))
            written.append("results.csv")
        elif fmt in ("markdown", "md"):
            (d / "results.md").write_text(report_markdown(results))
            written.append("results.md")
        else:
            raise ConfigError(f"unknown report format {fmt!r}")
    return written
