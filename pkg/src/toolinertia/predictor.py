"""Next-tool prediction over a :class:`~toolinertia.graph.ToolInertiaGraph`.

Candidates are the tools that followed the recent tool window in stored
paths, weighted by path frequency. Each candidate gets

* a frequency score ``(w / W_total) * (1 - k_icf ** -W_total)``, which stays
  small while evidence is sparse, and
* a contextual score from a :class:`RelevanceScorer`,

mixed as ``(1 - alpha) * freq + alpha * ctx``. The best candidate is executed
without consulting the oracle only when :func:`gate_inertial_call` agrees.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field, fields
from typing import Protocol, Sequence

from .errors import ArgumentError
from .graph import ToolInertiaGraph

_TOKEN = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class PredictorConfig:
    window: int = 2
    theta_inertial: float = 0.1
    alpha: float = 0.5
    icf_base: float = 1.1
    inertial_cap: float = 0.30
    forbid_consecutive: bool = True

    def __post_init__(self):
        if not isinstance(self.window, int) or self.window < 1:
            raise ArgumentError("window must be a positive integer")
        for name in ("theta_inertial", "alpha", "inertial_cap"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ArgumentError(f"{name} must lie in [0, 1], got {value}")
        if self.icf_base <= 1:
            raise ArgumentError("icf_base must be > 1")

    @classmethod
    def from_mapping(cls, mapping) -> "PredictorConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(mapping) - set(known)
        if unknown:
            raise ArgumentError(f"unknown predictor config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in mapping.items():
            if key == "window":
                kwargs[key] = int(value)
            elif key == "forbid_consecutive":
                kwargs[key] = value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class Candidate:
    tool: str
    weight: float


@dataclass
class PredictionResult:
    tool: str | None = None
    score_freq: float = 0.0
    score_ctx: float = 0.0
    cips: float = 0.0
    W_total: float = 0.0
    icf: float = 0.0
    weight: float = 0.0
    window: tuple = ()
    candidates: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tool": self.tool, "score_freq": self.score_freq, "score_ctx": self.score_ctx,
            "cips": self.cips, "W_total": self.W_total, "icf": self.icf, "weight": self.weight,
            "window": list(self.window),
            "candidates": [{"tool": t, "cips": c} for t, c in self.candidates],
        }


class RelevanceScorer(Protocol):
    def score(self, intuition: str, description: str) -> float: ...


def _tf(text: str) -> Counter:
    return Counter(_TOKEN.findall(text.lower()))


class LexicalScorer:
    """Cosine similarity of term-frequency vectors over lowercase alphanumeric tokens."""

    def score(self, intuition: str, description: str) -> float:
        a, b = _tf(intuition or ""), _tf(description or "")
        if not a or not b:
            return 0.0
        dot = sum(n * b[tok] for tok, n in a.items() if tok in b)
        if dot == 0:
            return 0.0
        norm = math.sqrt(sum(n * n for n in a.values())) * math.sqrt(sum(n * n for n in b.values()))
        return min(1.0, dot / norm)


def candidate_successors(graph: ToolInertiaGraph, window_tools: Sequence[str]) -> tuple[list[Candidate], float]:
    """Aggregate successor weights over every stored occurrence of the window.

    Tools whose net weight is not positive are dropped before the total is taken.
    """
    window_tools = tuple(window_tools)
    if not window_tools:
        return [], 0
    weights: dict[str, float] = {}
    for pid, nxt in graph.successor_occurrences(window_tools):
        weights[nxt] = weights.get(nxt, 0) + graph.paths[pid].frequency
    kept = [Candidate(t, w) for t, w in sorted(weights.items()) if w > 0]
    return kept, sum(c.weight for c in kept)


def inertia_confidence_factor(W_total: float, k_icf: float = 1.1) -> float:
    if k_icf <= 1:
        raise ArgumentError("k_icf must be > 1")
    if W_total < 0:
        raise ArgumentError("W_total must be non-negative")
    return -math.expm1(-W_total * math.log(k_icf))


def inertia_confidence_score(w_j: float, W_total: float, icf: float) -> float:
    if W_total <= 0:
        raise ArgumentError("W_total must be positive")
    if not 0 < w_j <= W_total:
        raise ArgumentError("candidate weight must lie in (0, W_total]")
    return (w_j / W_total) * icf


def cips(score_freq: float, score_ctx: float, alpha: float) -> float:
    for name, v in (("score_freq", score_freq), ("score_ctx", score_ctx), ("alpha", alpha)):
        if not 0.0 <= v <= 1.0:
            raise ArgumentError(f"{name} must lie in [0, 1], got {v}")
    return (1 - alpha) * score_freq + alpha * score_ctx


def recent_window(history: Sequence[str], window: int) -> tuple:
    """Last ``window`` tools; shorter (but non-empty) histories are used whole."""
    return tuple(history[-window:]) if history else ()


def predict_next_tool(graph: ToolInertiaGraph, history: Sequence[str], intuition: str = "",
                      scorer: RelevanceScorer | None = None,
                      config: PredictorConfig | None = None) -> PredictionResult:
    config = config or PredictorConfig()
    scorer = scorer or LexicalScorer()
    window = recent_window(list(history), config.window)
    candidates, W_total = candidate_successors(graph, window)
    if not candidates:
        return PredictionResult(window=window)
    icf = inertia_confidence_factor(W_total, config.icf_base)
    scored = []
    for c in candidates:
        freq = inertia_confidence_score(c.weight, W_total, icf)
        if config.alpha > 0:
            ctx = float(scorer.score(intuition, graph.nodes[c.tool].description))
        else:
            ctx = 0.0
        scored.append((cips(freq, ctx, config.alpha), c, freq, ctx))
    scored.sort(key=lambda s: (-s[0], s[1].tool))
    best, cand, freq, ctx = scored[0]
    return PredictionResult(
        tool=cand.tool, score_freq=freq, score_ctx=ctx, cips=best, W_total=W_total,
        icf=icf, weight=cand.weight, window=window,
        candidates=[(s[1].tool, s[0]) for s in scored],
    )


@dataclass(frozen=True)
class GateStats:
    total_actions: int = 0
    inertial_actions: int = 0
    last_action_was_inertial: bool = False


@dataclass(frozen=True)
class Decision:
    proceed: bool
    reason: str | None = None


NO_CANDIDATE = "no_candidate"
BELOW_THRESHOLD = "below_threshold"
CAP_EXCEEDED = "cap_exceeded"
CONSECUTIVE_FORBIDDEN = "consecutive_forbidden"
_CAP_SLACK = 1e-9


def gate_inertial_call(result: PredictionResult, config: PredictorConfig, stats: GateStats) -> Decision:
    if result.tool is None:
        return Decision(False, NO_CANDIDATE)
    if not result.cips > config.theta_inertial:
        return Decision(False, BELOW_THRESHOLD)
    if stats.inertial_actions + 1 > config.inertial_cap * (stats.total_actions + 1) + _CAP_SLACK:
        return Decision(False, CAP_EXCEEDED)
    if config.forbid_consecutive and stats.last_action_was_inertial:
        return Decision(False, CONSECUTIVE_FORBIDDEN)
    return Decision(True)
