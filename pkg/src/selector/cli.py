"""Command-line entry point: extract, build-graph, select, compare, pipeline.

Exit codes: 0 success, 2 configuration error, 3 data integrity error,
4 statistical precondition warning under --strict.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

from selector import cluster, ela, graph_select, harness, report, similarity
from selector.config import HEURISTIC_CHOICES, HarnessConfig, PipelineConfig, load_config
from selector.datamodel import (
    FeatureTable,
    PerformanceTable,
    load_feature_table,
    load_performance_table,
    save_feature_table,
    save_performance_table,
)
from selector.errors import (
    ConfigError,
    DataError,
    SelectorError,
    StatisticalPreconditionWarning,
)
from selector.stats import FRIEDMAN_MIN_INSTANCES

log = logging.getLogger("selector")


def _dump(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _tag(t: float) -> str:
    return f"threshold_{t:.2f}"


def _out(cfg: PipelineConfig) -> Path:
    return Path(cfg.out)


def _features_path(cfg):
    return Path(cfg.features) if cfg.features else _out(cfg) / "features.csv"


def _performance_path(cfg):
    return Path(cfg.performance) if cfg.performance else _out(cfg) / "performance.csv"


def _read_header(path: Path) -> list[str]:
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            return next(csv.reader(fh), [])
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def load_features(cfg: PipelineConfig) -> FeatureTable:
    path = _features_path(cfg)
    if not path.exists():
        raise DataError(f"feature file {path} not found")
    header = [h.strip() for h in _read_header(path)]
    drop = [c for c in cfg.drop if c in header[4:]]
    for c in cfg.drop:
        if c not in drop:
            log.info("column %s not present in %s; nothing to drop", c, path)
    return load_feature_table(path, drop)


def load_performance(cfg: PipelineConfig) -> PerformanceTable:
    path = _performance_path(cfg)
    if not path.exists():
        raise DataError(f"performance file {path} not found")
    return load_performance_table(path)


def cmd_extract(cfg: PipelineConfig) -> int:
    if cfg.source != "harness":
        raise ConfigError("extract needs the harness data source")
    h = cfg.harness_or_default()
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    problems = harness.builtin_problems(h.dimension, h.instances, seed=cfg.seed)
    status = 0
    try:
        table = ela.extract_features(
            problems, h.feature_repetitions, cfg.seed, h.sample_factor, cfg.drop
        )
    except ela.FeatureExtractionError as exc:
        for key, msg in exc.failures:
            print(f"feature extraction failed for {key}: {msg}", file=sys.stderr)
        table, status = exc.table, DataError.exit_code
    save_feature_table(table, out / "features.csv")
    perf = harness.run_experiment(
        problems, h.optimizers, runs=h.runs, master_seed=cfg.seed,
        budget_per_dim=h.budget_per_dim,
    )
    save_performance_table(perf, out / "performance.csv")
    _dump(out / "run_config.json", {"config": cfg.resolved()})
    log.info("extracted %d instances x %d features", len(table), len(table.feature_names))
    return status


def cmd_build_graph(cfg: PipelineConfig, table: FeatureTable | None = None) -> int:
    table = table if table is not None else load_features(cfg)
    base = _out(cfg) / "graphs"
    conf = cfg.resolved()
    for t in cfg.thresholds:
        g = similarity.build_graph(table, t, cfg.rescale)
        d = base / _tag(t)
        d.mkdir(parents=True, exist_ok=True)
        similarity.export_graph(g, d / "graph.txt", conf)
        similarity.export_degrees(g, d / "degrees.csv")
        stats = similarity.degree_statistics(g)
        comps = similarity.connected_components(g)
        _dump(d / "summary.json", {
            "config": conf,
            "threshold": t,
            "nodes": g.n,
            "edges": len(g.edges),
            "degree": {"min": stats.minimum, "max": stats.maximum, "mean": stats.mean,
                       "ecdf": [list(p) for p in stats.ecdf]},
            "components": [sorted(str(g.nodes[i]) for i in c) for c in comps],
            "component_sizes": [len(c) for c in comps],
            "isolated": sum(1 for c in comps if len(c) == 1),
        })
    return 0


def _warn_small(name: str, sizes) -> None:
    small = [s for s in sizes if s < FRIEDMAN_MIN_INSTANCES]
    if small:
        warnings.warn(
            f"{name}: {len(small)} suite(s) below Friedman minimum "
            f"({min(small)} < {FRIEDMAN_MIN_INSTANCES} instances)",
            StatisticalPreconditionWarning,
            stacklevel=2,
        )


def _select_cluster(cfg, table, conf, index):
    base = _out(cfg) / "selections"
    lo, hi = cfg.clusters_range
    hi = min(hi, len(table))
    k = cluster.choose_k(table, (lo, hi), cfg.min_total, cfg.linkage)
    model = cluster.agglomerative_cluster(table, k, cfg.linkage, cfg.centroid)
    if cfg.sub_split:
        model = cluster.split_largest(table, model, cfg.sub_split, cfg.linkage)
    params = {"heuristic": "cluster", "k": k, "final_clusters": model.k,
              "sub_split": cfg.sub_split, "linkage": cfg.linkage, "centroid": cfg.centroid,
              "seed": cfg.seed}
    d = base / "cluster"
    d.mkdir(parents=True, exist_ok=True)
    cluster.export_assignments(model, d / "assignments.csv")
    suites = [cluster.centroid_representatives(table, model)]
    cluster.export_suites(suites, d / "suites.json", {**params, "config": conf})
    index["cluster"] = {"files": ["cluster/suites.json"], "parameters": params}
    _warn_small("cluster", [len(s) for s in suites])
    if cfg.pool_fraction is not None:
        pools = cluster.representative_pools(table, model, cfg.pool_fraction)
        suites = cluster.sample_suite(pools, cfg.cluster_repetitions, cfg.seed)
        pparams = {**params, "pool_fraction": cfg.pool_fraction,
                   "repetitions": cfg.cluster_repetitions}
        d = base / "cluster_pool"
        d.mkdir(parents=True, exist_ok=True)
        cluster.export_suites(suites, d / "suites.json", {**pparams, "config": conf})
        index["cluster_pool"] = {"files": ["cluster_pool/suites.json"], "parameters": pparams}


def _select_graph(cfg, table, conf, index, heuristic):
    base = _out(cfg) / "selections"
    seeds = [cfg.seed + r for r in range(cfg.graph_repetitions)]
    for t in cfg.thresholds:
        g = similarity.build_graph(table, t, cfg.rescale)
        batch = graph_select.run_batch(g, heuristic, seeds)
        rel = Path(heuristic.lower()) / _tag(t)
        written = graph_select.export_batch(batch, base / rel, conf)
        name = f"{heuristic.lower()}_{t:.2f}"
        index[name] = {
            "files": [str(rel / p.name) for p in written if p.name != "summary.json"],
            "parameters": {"heuristic": heuristic, "threshold": t, "seeds": seeds,
                           "min": batch.minimum, "max": batch.maximum, "mean": batch.mean},
        }
        _warn_small(name, [r.size for r in batch.runs])


def cmd_select(cfg: PipelineConfig, table: FeatureTable | None = None) -> int:
    table = table if table is not None else load_features(cfg)
    conf = cfg.resolved()
    index: dict = {}
    for h in cfg.heuristics():
        if h == "cluster":
            _select_cluster(cfg, table, conf, index)
        else:
            _select_graph(cfg, table, conf, index, h.upper())
    _dump(_out(cfg) / "selections" / "index.json", {"config": conf, "selections": index})
    return 0


def _read_selections(cfg: PipelineConfig, perf: PerformanceTable):
    base = _out(cfg) / "selections"
    idx_path = base / "index.json"
    if not idx_path.exists():
        raise DataError(f"no selections found at {idx_path}; run 'select' first")
    index = json.loads(idx_path.read_text(encoding="utf-8"))["selections"]
    by_name = {}
    for key in perf.keys:
        if str(key) in by_name:
            raise DataError(f"instance label {key} is ambiguous in the performance data")
        by_name[str(key)] = key

    def resolve(label):
        if label not in by_name:
            raise DataError(f"selected instance {label} has no performance data")
        return by_name[label]

    selections, params = {}, {}
    for name, entry in index.items():
        suites = []
        for f in entry["files"]:
            doc = json.loads((base / f).read_text(encoding="utf-8"))
            if "suites" in doc:
                suites += [[resolve(x) for x in s] for s in doc["suites"]]
            else:
                suites.append([resolve(x) for x in doc["instances"]])
        selections[name] = suites
        params[name] = entry["parameters"]
    return selections, params


def cmd_compare(cfg: PipelineConfig, perf: PerformanceTable | None = None) -> int:
    perf = perf if perf is not None else load_performance(cfg)
    selections, params = _read_selections(cfg, perf)
    with warnings.catch_warnings():
        # replaced below by one warning per selection, naming it
        warnings.simplefilter("ignore", StatisticalPreconditionWarning)
        rep = report.build_report(perf, selections, cfg.alpha, cfg.resolved(), params)
    for name, suites in selections.items():
        _warn_small(name, [len(s) for s in suites])
    report.write_report(rep, _out(cfg))
    return 0


def cmd_pipeline(cfg: PipelineConfig) -> int:
    status = 0
    if cfg.source == "harness":
        status = cmd_extract(cfg)
        if status:
            return status
    # load everything up front so bad inputs fail before any report is written
    table = load_features(cfg)
    perf = load_performance(cfg)
    if any(h in ("ds", "mis") for h in cfg.heuristics()):
        cmd_build_graph(cfg, table)
    cmd_select(cfg, table)
    cmd_compare(cfg, perf)
    return status


COMMANDS = {
    "extract": cmd_extract,
    "build-graph": cmd_build_graph,
    "select": cmd_select,
    "compare": cmd_compare,
    "pipeline": cmd_pipeline,
}


def _range(text: str) -> list[int]:
    try:
        lo, hi = (int(x) for x in text.replace("-", ":").split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    return [lo, hi]


def _add_options(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--features", default=S, help="feature table CSV")
    p.add_argument("--performance", default=S, help="performance table CSV")
    p.add_argument("--heuristic", choices=HEURISTIC_CHOICES, default=S)
    p.add_argument("--threshold", dest="thresholds", type=float, action="append", default=S,
                   help="similarity threshold (repeatable)")
    p.add_argument("--clusters-range", dest="clusters_range", type=_range, default=S,
                   help="silhouette sweep range LO:HI")
    p.add_argument("--min-total", dest="min_total", type=int, default=S)
    p.add_argument("--sub-split", dest="sub_split", type=int, default=S)
    p.add_argument("--pool-fraction", dest="pool_fraction", type=float, default=S)
    p.add_argument("--repetitions", type=int, default=S,
                   help="repetitions for cluster pool sampling and graph heuristics")
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--out", default=S)
    p.add_argument("--drop", action="append", default=S, help="feature column to drop")
    p.add_argument("--strict", action="store_true", default=S)
    p.add_argument("--dimension", type=int, default=S, help="harness problem dimension")
    p.add_argument("--instances", type=int, default=S, help="harness instances per function")
    p.add_argument("--runs", type=int, default=S, help="harness runs per optimizer")
    p.add_argument("--budget-per-dim", dest="budget_per_dim", type=int, default=S)
    p.add_argument("--sample-factor", dest="sample_factor", type=int, default=S)
    p.add_argument("--feature-repetitions", dest="feature_repetitions", type=int, default=S)


_HARNESS_FLAGS = ("dimension", "instances", "runs", "budget_per_dim", "sample_factor",
                  "feature_repetitions")


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "command", "verbose")}
    harness_flags = {k: flags.pop(k) for k in _HARNESS_FLAGS if k in flags}
    if "repetitions" in flags:
        reps = flags.pop("repetitions")
        cfg.cluster_repetitions = cfg.graph_repetitions = reps
    if flags.get("drop") == [""]:
        flags["drop"] = []
    for k, v in flags.items():
        setattr(cfg, k, v)
    if harness_flags:
        if cfg.features or cfg.performance:
            raise ConfigError("harness flags given together with input files")
        h = cfg.harness or HarnessConfig()
        for k, v in harness_flags.items():
            setattr(h, k, v)
        cfg.harness = h
    return cfg.validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selector",
        description="Select representative benchmark suites and check statistical robustness.",
    )
    parser.add_argument("--config", help="JSON or YAML pipeline configuration")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=argparse.SUPPRESS)
        _add_options(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", StatisticalPreconditionWarning)
        try:
            status = COMMANDS[args.command](cfg)
        except SelectorError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return exc.exit_code
    stat_warnings = []
    for w in caught:
        if issubclass(w.category, StatisticalPreconditionWarning):
            if str(w.message) not in map(str, (x.message for x in stat_warnings)):
                stat_warnings.append(w)
    for w in stat_warnings:
        print(f"warning: {w.message}", file=sys.stderr)
    for w in caught:
        if not issubclass(w.category, StatisticalPreconditionWarning):
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    if status == 0 and cfg.strict and stat_warnings:
        return 4
    return status


if __name__ == "__main__":
    sys.exit(main())
