"""``toolinertia`` command line.

Every command writes its outputs plus a ``manifest.json`` into ``--out``.
Exit codes: 0 success, 1 data error, 2 configuration or graph error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import fields
from importlib import resources
from pathlib import Path

from . import __version__
from .bench import BASE_VARIANTS, BenchConfig, benchmark, parse_variant, run_cell
from .chainworld import ChainWorldConfig
from .entropy import analyze, preprocess
from .errors import (AdapterError, ArgumentError, ConflictError, NotFoundError, ParseError, SchemaError,
                     ToolInertiaError, UnknownToolError)
from .graph import ToolInertiaGraph, ToolSpec, export_graph, import_graph, infer_tool_specs
from .harness import validate_trace
from .predictor import PredictorConfig, predict_next_tool
from .trajectory import TrajectoryLog, dump_log, iter_records, load_log, parse_trajectory_record, validate_log

EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 1, 2

PREDICTOR_KEYS = tuple(f.name for f in fields(PredictorConfig))
ENV_KEYS = tuple(f.name for f in fields(ChainWorldConfig) if f.name != "seed")
RUN_KEYS = ("noise", "episodes", "n_seeds", "variants", "variant", "ngram_order", "recovery", "adapter",
            "orders", "drop_self_transitions", "min_length", "max_k")


class UsageError(ToolInertiaError):
    pass


def load_schema(name: str) -> dict:
    """One of the JSON schemas shipped in ``toolinertia/schemas``."""
    text = resources.files("toolinertia").joinpath("schemas", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


# -- config ---------------------------------------------------------------

def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict) or any(isinstance(v, dict) for v in doc.values()):
        raise UsageError("config must be a flat JSON object of key/value pairs")
    unknown = set(doc) - set(PREDICTOR_KEYS) - set(ENV_KEYS) - set(RUN_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return doc


def effective_config(args) -> dict:
    """Config file values overridden by any flag given explicitly on the command line."""
    cfg = load_config(args.config)
    for key in PREDICTOR_KEYS + ENV_KEYS + RUN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def predictor_config(cfg: dict) -> PredictorConfig:
    return PredictorConfig.from_mapping({k: cfg[k] for k in PREDICTOR_KEYS if k in cfg})


def env_config(cfg: dict, seed: int) -> ChainWorldConfig:
    kw = {k: cfg[k] for k in ENV_KEYS if k in cfg and cfg[k] is not None}
    return ChainWorldConfig(seed=seed, **kw)


# -- manifest ---------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects outputs of one command and writes them with a manifest."""

    def __init__(self, command: str, args, config: dict, inputs=()):
        self.command = command
        self.out = Path(args.out)
        self.seed = args.seed
        self.config = config
        self.inputs = [str(p) for p in inputs]
        self.outputs: list[str] = []
        self.out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text, encoding="utf-8")
        return p

    def write_json(self, name: str, doc) -> Path:
        return self.write_text(name, json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n")

    def finish(self) -> dict:
        manifest = {
            "command": self.command,
            "config": self.config,
            "inputs": [{"path": p, "sha256": sha256_file(p)} for p in self.inputs],
            "seed": self.seed,
            "version": __version__,
            "outputs": [{"path": n, "sha256": sha256_file(self.out / n)} for n in sorted(set(self.outputs))],
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                                encoding="utf-8")
        return manifest


# -- commands ---------------------------------------------------------------

def cmd_ingest(args) -> int:
    cfg = effective_config(args)
    run = Run("ingest", args, cfg, args.paths)
    trajectories, violations, seen = [], [], set()
    for path in args.paths:
        try:
            fh = open(path, encoding="utf-8")
        except OSError as exc:
            violations.append({"file": path, "line": None, "kind": "unreadable", "detail": str(exc)})
            continue
        with fh:
            for lineno, line in iter_records(fh):
                try:
                    t = parse_trajectory_record(line)
                except (ParseError, SchemaError) as exc:
                    kind = "parse_error" if isinstance(exc, ParseError) else "schema_error"
                    violations.append({"file": path, "line": lineno, "kind": kind, "detail": str(exc)})
                    continue
                if t.id in seen:
                    violations.append({"file": path, "line": lineno, "kind": "duplicate_id", "detail": t.id})
                    continue
                seen.add(t.id)
                trajectories.append(t)
    if not trajectories and not violations:
        violations.append({"file": None, "line": None, "kind": "empty", "detail": "no trajectories"})
    log = TrajectoryLog(tuple(trajectories))
    for v in validate_log(log):
        violations.append({"file": None, "line": None, "kind": v.kind, "detail": v.detail,
                           "step_index": v.step_index})
    dump_log(log, run.path("trajectories.jsonl"))
    report = {"trajectories": len(trajectories), "tools": sorted(log.tool_universe),
              "violations": violations, "ok": not violations}
    run.write_json("validation.json", report)
    run.finish()
    for v in violations:
        where = f"{v['file']}:{v['line']}" if v.get("line") else (v.get("file") or "-")
        print(f"{where}: {v['kind']}: {v['detail']}", file=sys.stderr)
    print(f"ingested {len(trajectories)} trajectories, {len(violations)} violations")
    return EXIT_OK if not violations else EXIT_DATA


def _orders(text) -> list[int]:
    if isinstance(text, list):
        return [int(x) for x in text]
    parts = [p for p in str(text).split(",") if p.strip()]
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise UsageError(f"orders must be comma-separated integers, got {text!r}") from None


def cmd_analyze(args) -> int:
    cfg = effective_config(args)
    cfg.setdefault("orders", "0,1,2")
    cfg.setdefault("drop_self_transitions", True)
    cfg.setdefault("min_length", 2)
    cfg.setdefault("max_k", 5)
    orders = _orders(cfg["orders"])
    if not orders or min(orders) < 0:
        raise UsageError("order list must be non-empty and non-negative")
    run = Run("analyze", args, cfg, [args.log])
    log = load_log(args.log)
    seqs = preprocess(log, cfg["drop_self_transitions"], int(cfg["min_length"]))
    if not seqs:
        raise SchemaError("no sequences left after preprocessing")
    report = analyze(seqs, orders, int(cfg["max_k"]))
    run.write_json("analysis.json", report)
    run.finish()
    for row in report["entropy"]:
        print(f"order {row['order']}: H = {row['entropy_bits']:.4f} bits "
              f"({row['reduction_percent']:.1f}% below max)")
    return EXIT_OK


def _tool_specs(args, log) -> list[ToolSpec]:
    if args.tools:
        try:
            doc = json.loads(Path(args.tools).read_text(encoding="utf-8"))
            return [ToolSpec.from_dict(d) for d in doc]
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"cannot read tool specs {args.tools}: {exc}") from None
    if args.infer_tools:
        return infer_tool_specs(log)
    return []


def cmd_build(args) -> int:
    cfg = effective_config(args)
    pcfg = predictor_config(cfg)
    inputs = [args.log] + ([args.tools] if args.tools else [])
    run = Run("build", args, cfg, inputs)
    log = load_log(args.log)
    graph = ToolInertiaGraph()
    for spec in _tool_specs(args, log):
        graph.register_tool(spec)
    for t in log:
        graph.record_trajectory(t, pcfg.window)
    run.path("graph.json").write_bytes(export_graph(graph, "json"))
    run.finish()
    print(f"graph: {len(graph.nodes)} tools, {len(graph.paths)} paths")
    return EXIT_OK


def _load_graph(path) -> ToolInertiaGraph:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read graph {path}: {exc}") from None
    try:
        return import_graph(data)
    except SchemaError as exc:
        raise UsageError(f"invalid graph {path}: {exc}") from None


def cmd_predict(args) -> int:
    cfg = effective_config(args)
    pcfg = predictor_config(cfg)
    run = Run("predict", args, cfg, [args.graph])
    graph = _load_graph(args.graph)
    for tool in args.history:
        if tool not in graph.nodes:
            raise UnknownToolError(tool)
    result = predict_next_tool(graph, args.history, args.intuition, config=pcfg)
    doc = result.to_dict()
    run.write_json("prediction.json", doc)
    run.finish()
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def _bench_config(cfg: dict, seed: int, variants) -> BenchConfig:
    n_seeds = int(cfg.get("n_seeds", 10))
    return BenchConfig(
        env=env_config(cfg, seed), predictor=predictor_config(cfg),
        noise=float(cfg.get("noise", 0.1)), episodes=int(cfg.get("episodes", 40)),
        seeds=tuple(range(seed, seed + n_seeds)), variants=tuple(variants),
        ngram_order=int(cfg.get("ngram_order", 3)),
    )


def cmd_simulate(args) -> int:
    cfg = effective_config(args)
    variant = cfg.get("variant", "autotool")
    if cfg.get("recovery") and not variant.endswith("+recovery"):
        variant += "+recovery"
    cfg["variant"] = variant
    cfg.setdefault("episodes", 40)
    parse_variant(variant)
    bcfg = _bench_config({**cfg, "n_seeds": 1}, args.seed, [variant])
    run = Run("simulate", args, cfg)
    cell = run_cell(variant, args.seed, bcfg)
    lines, problems = [], []
    for m, _ in cell:
        lines.append(json.dumps({"variant": variant, "seed": args.seed, **m.to_dict()}, sort_keys=True) + "\n")
        problems += [f"episode {m.episode}: {p}" for p in
                     validate_trace(m.trace, bcfg.predictor.inertial_cap, bcfg.predictor.forbid_consecutive)]
    run.write_text("episodes.jsonl", "".join(lines))
    dump_log([t for _, t in cell], run.path("trajectories.jsonl"))
    n = len(cell)
    summary = {
        "variant": variant, "seed": args.seed, "episodes": n,
        "mean_oracle_calls": sum(m.oracle_calls for m, _ in cell) / n,
        "mean_inertial_calls": sum(m.inertial_calls for m, _ in cell) / n,
        "mean_progress": sum(m.final_progress for m, _ in cell) / n,
        "errors": sum(1 for m, _ in cell if m.error), "trace_violations": problems,
    }
    run.write_json("summary.json", summary)
    run.finish()
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if not problems and not summary["errors"] else EXIT_DATA


def cmd_bench(args) -> int:
    cfg = effective_config(args)
    variants = cfg.get("variants", ",".join(BASE_VARIANTS))
    if isinstance(variants, str):
        variants = [v.strip() for v in variants.split(",") if v.strip()]
    cfg["variants"] = list(variants)
    bcfg = _bench_config(cfg, args.seed, variants)
    run = Run("bench", args, cfg)
    report = benchmark(bcfg, keep_trajectories=args.trajectories)
    run.write_json("bench.json", report.to_dict())
    run.write_text("episodes.jsonl", report.episodes_jsonl())
    run.write_text("table.txt", report.table())
    for (variant, seed), trajs in sorted(report.trajectories.items()):
        dump_log(trajs, run.path(f"trajectories/{variant}_seed{seed}.jsonl"))
    run.finish()
    print(report.table(), end="")
    return EXIT_OK


def cmd_export(args) -> int:
    cfg = effective_config(args)
    run = Run("export", args, cfg, [args.graph])
    graph = _load_graph(args.graph)
    run.path(f"graph.{args.format}").write_bytes(export_graph(graph, args.format))
    run.finish()
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    common.add_argument("--config", help="flat JSON key/value config file; explicit flags override it")
    common.add_argument("--out", default="out", help="output directory (default ./out)")

    pred = argparse.ArgumentParser(add_help=False)
    g = pred.add_argument_group("predictor")
    g.add_argument("--window", type=int, help="inertia window length (default 2)")
    g.add_argument("--theta-inertial", dest="theta_inertial", type=float, help="CIPS threshold (default 0.1)")
    g.add_argument("--alpha", type=float, help="weight of the contextual score (default 0.5)")
    g.add_argument("--icf-base", dest="icf_base", type=float, help="ICF base k > 1 (default 1.1)")
    g.add_argument("--inertial-cap", dest="inertial_cap", type=float,
                   help="max fraction of inertial actions (default 0.30)")
    g.add_argument("--forbid-consecutive", dest="forbid_consecutive", type=_bool,
                   help="forbid back-to-back inertial actions (default true)")

    env = argparse.ArgumentParser(add_help=False)
    e = env.add_argument_group("chainworld")
    e.add_argument("--n-tools", dest="n_tools", type=int, help="tool count (default 12)")
    e.add_argument("--rho", type=float, help="dominant-successor probability (default 0.887)")
    e.add_argument("--goal-length", dest="goal_length", type=int, help="goal steps per task (default 10)")
    e.add_argument("--n-start-tools", dest="n_start_tools", type=int, help="possible first tools (default 3)")
    e.add_argument("--max-steps", dest="max_steps", type=int, help="action budget (default 2*goal+6)")
    e.add_argument("--noise", type=float, help="oracle wrong-action rate (default 0.1)")
    e.add_argument("--episodes", type=int, help="episodes per seed (default 40)")
    e.add_argument("--ngram-order", dest="ngram_order", type=int, help="n for the n-gram baseline (default 3)")

    parser = argparse.ArgumentParser(prog="toolinertia", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse and validate trajectory JSONL files")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", parents=[common], help="entropy, G2 and successor statistics")
    p.add_argument("log")
    p.add_argument("--orders", help="comma-separated Markov orders (default 0,1,2)")
    p.add_argument("--keep-self-transitions", dest="drop_self_transitions", action="store_false", default=None,
                   help="do not collapse immediate tool repeats")
    p.add_argument("--min-length", dest="min_length", type=int, help="drop shorter sequences (default 2)")
    p.add_argument("--max-k", dest="max_k", type=int, help="largest k for top-k mass (default 5)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("build", parents=[common, pred], help="build a graph from a trajectory log")
    p.add_argument("log")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--tools", help="JSON list of tool specs to register")
    src.add_argument("--infer-tools", action="store_true", help="derive tool specs from the log")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("predict", parents=[common, pred], help="predict the next tool from a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--history", nargs="*", default=[], help="recent successful tools, oldest first")
    p.add_argument("--intuition", default="", help="text scored against tool descriptions")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", parents=[common, pred, env], help="run one variant on ChainWorld")
    p.add_argument("--variant", choices=BASE_VARIANTS, help="default autotool")
    p.add_argument("--recovery", action="store_true", default=None, help="enable the recovery check")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", parents=[common, pred, env], help="compare variants on ChainWorld")
    p.add_argument("--variants", help="comma-separated, e.g. baseline,autotool,ngram+recovery")
    p.add_argument("--n-seeds", dest="n_seeds", type=int, help="seeds run: seed..seed+n-1 (default 10)")
    p.add_argument("--trajectories", action="store_true", help="also write per-cell trajectory logs")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export", parents=[common], help="export a graph as JSON or DOT")
    p.add_argument("--graph", required=True)
    p.add_argument("--format", choices=("json", "dot"), default="dot")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ArgumentError, UnknownToolError, ConflictError, AdapterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, SchemaError, NotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
