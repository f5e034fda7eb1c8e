"""Variant comparison on ChainWorld: pure oracle, inertial fast path, n-gram fast path.

Each (variant, seed) cell owns one graph that is shared, in order, across all
of that cell's episodes; episode ``i`` always runs task ``i`` so every variant
sees the same task sequence.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from typing import Sequence

from .chainworld import ChainWorld, ChainWorldAdapter, ChainWorldConfig, ChainWorldOracle
from .errors import ArgumentError
from .graph import ToolInertiaGraph
from .harness import EpisodeMetrics, InertiaFastPath, NGramFastPath, run_episode
from .predictor import PredictorConfig
from .trajectory import Trajectory

BASE_VARIANTS = ("baseline", "autotool", "ngram")
RECOVERY_SUFFIX = "+recovery"
METRICS = ("PR", "tok_in", "tok_out", "LLMC", "inertial_calls", "recovery_calls")
SPEEDUP_METRICS = ("tok_in", "tok_out", "LLMC")


def parse_variant(name: str) -> tuple[str, bool]:
    base, recovery = name, False
    if name.endswith(RECOVERY_SUFFIX):
        base, recovery = name[: -len(RECOVERY_SUFFIX)], True
    if base not in BASE_VARIANTS:
        raise ArgumentError(f"unknown variant {name!r}; expected one of {BASE_VARIANTS} "
                            f"optionally suffixed with {RECOVERY_SUFFIX!r}")
    return base, recovery


@dataclass(frozen=True)
class BenchConfig:
    env: ChainWorldConfig = field(default_factory=ChainWorldConfig)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    noise: float = 0.1
    episodes: int = 40
    seeds: tuple = tuple(range(10))
    variants: tuple = BASE_VARIANTS
    ngram_order: int = 3

    def __post_init__(self):
        if self.episodes < 1:
            raise ArgumentError("at least one episode per variant is required")
        if not self.seeds:
            raise ArgumentError("at least one seed is required")
        if not self.variants:
            raise ArgumentError("at least one variant is required")
        for v in self.variants:
            parse_variant(v)

    def to_dict(self) -> dict:
        env = {f.name: getattr(self.env, f.name) for f in fields(self.env)}
        return {"env": env, "predictor": self.predictor.to_dict(), "noise": self.noise,
                "episodes": self.episodes, "seeds": list(self.seeds),
                "variants": list(self.variants), "ngram_order": self.ngram_order}


def make_fastpath(base: str, env: ChainWorld, config: BenchConfig):
    if base == "baseline":
        return None
    graph = ToolInertiaGraph()
    for spec in env.tool_specs():
        graph.register_tool(spec)
    if base == "autotool":
        return InertiaFastPath(graph, config.predictor)
    return NGramFastPath(graph, config.predictor, config.ngram_order)


def run_cell(variant: str, seed: int, config: BenchConfig) -> list[tuple[EpisodeMetrics, Trajectory]]:
    base, recovery = parse_variant(variant)
    env_cfg = ChainWorldConfig(**{**{f.name: getattr(config.env, f.name) for f in fields(config.env)},
                                  "seed": seed})
    env = ChainWorld(env_cfg)
    oracle = ChainWorldOracle(env, config.noise, seed)
    fastpath = make_fastpath(base, env, config)
    out = []
    for ep in range(config.episodes):
        out.append(run_episode(env, oracle, ChainWorldAdapter(), ep, fastpath,
                               seed=seed, recovery=recovery, episode=ep))
    return out


def _row(m: EpisodeMetrics) -> dict:
    return {"PR": m.final_progress, "tok_in": m.tokens_in, "tok_out": m.tokens_out,
            "LLMC": m.oracle_calls, "inertial_calls": m.inertial_calls,
            "recovery_calls": m.recovery_calls}


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def speedup(baseline_mean: float, variant_mean: float) -> float | None:
    return None if variant_mean == 0 else baseline_mean / variant_mean


@dataclass
class ComparisonReport:
    config: dict
    means: dict
    speedup: dict
    learning_curves: dict
    per_seed_inertial: dict
    episodes: list = field(default_factory=list)
    trajectories: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config": self.config, "means": self.means, "speedup": self.speedup,
                "learning_curves": self.learning_curves, "per_seed_inertial": self.per_seed_inertial}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def episodes_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.episodes)

    def table(self) -> str:
        header = ["variant", *METRICS, *(f"speedup_{m}" for m in SPEEDUP_METRICS)]
        rows = [header]
        for v in self.means:
            cells = [v] + [f"{self.means[v][m]:.4f}" for m in METRICS]
            for m in SPEEDUP_METRICS:
                s = self.speedup.get(v, {}).get(m)
                cells.append("-" if s is None else f"{s:.4f}")
            rows.append(cells)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
                 for r in rows]
        return "\n".join(lines) + "\n"


def compare(per_variant: dict[str, list[list[EpisodeMetrics]]], baseline: str = "baseline") -> tuple[dict, dict]:
    """Means over every (seed, episode) and SpeedUp = baseline mean / variant mean.

    ``per_variant[v][s]`` is the episode list for seed index ``s``.
    """
    means = {}
    for v, cells in per_variant.items():
        rows = [_row(m) for cell in cells for m in cell]
        if not rows:
            raise ArgumentError(f"variant {v!r} has no episodes")
        means[v] = {k: _mean([r[k] for r in rows]) for k in METRICS}
    ratios = {}
    if baseline in means:
        for v in means:
            ratios[v] = {m: speedup(means[baseline][m], means[v][m]) for m in SPEEDUP_METRICS}
    return means, ratios


def benchmark(config: BenchConfig | None = None, keep_trajectories: bool = False) -> ComparisonReport:
    config = config or BenchConfig()
    per_variant: dict[str, list[list[EpisodeMetrics]]] = {}
    episodes, trajectories = [], {}
    for v in config.variants:
        per_variant[v] = []
        for seed in config.seeds:
            cell = run_cell(v, seed, config)
            per_variant[v].append([m for m, _ in cell])
            for m, t in cell:
                episodes.append({"variant": v, "seed": seed, **m.to_dict(with_trace=False)})
            if keep_trajectories:
                trajectories[(v, seed)] = [t for _, t in cell]
    means, ratios = compare(per_variant)
    curves = {v: [_mean([cells[s][e].inertial_calls for s in range(len(cells))])
                  for e in range(config.episodes)]
              for v, cells in per_variant.items()}
    per_seed = {v: {str(seed): [m.inertial_calls for m in cells[i]] for i, seed in enumerate(config.seeds)}
                for v, cells in per_variant.items()}
    return ComparisonReport(config.to_dict(), means, ratios, curves, per_seed, episodes, trajectories)
