"""Episode runner wiring an oracle policy, an environment and an inertial fast path.

Before each oracle call the fast path proposes a tool; if the gate allows it
and every required parameter can be filled without the oracle, the action is
executed directly and costs no tokens. The graph is updated online after
every step.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from .graph import ToolInertiaGraph, ToolSpec
from .params import EnvironmentAdapter, FillConfig, UsedValueRecord, fill_parameters
from .predictor import (GateStats, LexicalScorer, PredictionResult, PredictorConfig, RelevanceScorer,
                        gate_inertial_call, predict_next_tool)
from .trajectory import Source, Status, ToolInvocation, Trajectory

INERTIA_NOTE = "Think: Using graph inertia to predict next action {tool} with parameters {params}."
UNPARSED = "unparsed_action"
RECOVERY = "recovery"


class OraclePolicy(Protocol):
    def decide(self, observation: str, task_goal: str, history: Trajectory): ...


class Environment(Protocol):
    recovery_action: str
    task_goal: str

    def reset(self, task_id: int) -> str: ...
    def step(self, action_text: str): ...
    def tool_specs(self) -> list[ToolSpec]: ...
    def valid_actions(self) -> list[str]: ...


@dataclass
class EpisodeMetrics:
    episode: int = 0
    task_id: int = 0
    oracle_calls: int = 0
    inertial_calls: int = 0
    inertial_attempts: int = 0
    recovery_calls: int = 0
    fallbacks: Counter = field(default_factory=Counter)
    tokens_in: int = 0
    tokens_out: int = 0
    steps: int = 0
    final_progress: float = 0.0
    error: str | None = None
    trace: list = field(default_factory=list)

    def to_dict(self, with_trace: bool = True) -> dict:
        d = {
            "episode": self.episode, "task_id": self.task_id,
            "oracle_calls": self.oracle_calls, "inertial_calls": self.inertial_calls,
            "inertial_attempts": self.inertial_attempts, "recovery_calls": self.recovery_calls,
            "fallbacks": dict(sorted(self.fallbacks.items())),
            "tokens_in": self.tokens_in, "tokens_out": self.tokens_out,
            "steps": self.steps, "final_progress": self.final_progress, "error": self.error,
        }
        if with_trace:
            d["trace"] = self.trace
        return d


def recovery_check(statuses: Sequence, enabled: bool, action: str = "check_valid_actions") -> str | None:
    """Return the recovery action when the last two executed actions both failed."""
    if not enabled or len(statuses) < 2:
        return None
    if Status(statuses[-1]) == Status.FAILURE and Status(statuses[-2]) == Status.FAILURE:
        return action
    return None


class InertiaFastPath:
    """Graph-backed next-tool proposals with online path/efficacy updates."""

    name = "autotool"

    def __init__(self, graph: ToolInertiaGraph, config: PredictorConfig | None = None,
                 scorer: RelevanceScorer | None = None):
        self.graph = graph
        self.config = config or PredictorConfig()
        self.scorer = scorer or LexicalScorer()

    def propose(self, history_tools: Sequence[str], intuition: str) -> PredictionResult:
        return predict_next_tool(self.graph, history_tools, intuition, self.scorer, self.config)

    def learn(self, trajectory: Trajectory, step: int) -> None:
        self.graph.record_step(trajectory, step, self.config.window)

    def feedback(self, prediction: PredictionResult, status: Status) -> None:
        chain = tuple(prediction.window) + (prediction.tool,)
        if status == Status.SUCCESS:
            pid = self.graph.path_id(chain)
            if pid is not None:
                self.graph.update_path_efficacy(pid, Status.SUCCESS)
        elif len(chain) > self.config.window:
            self.graph.record_failure_path(chain, self.config.window)
        else:
            pid = self.graph.path_id(chain)
            if pid is not None:
                self.graph.update_path_efficacy(pid, Status.FAILURE)


class NGramPredictor:
    """Maximum-likelihood successor of the last ``n - 1`` tools from raw counts."""

    def __init__(self, n: int = 3, counts: dict | None = None):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        self.counts: dict[tuple, Counter] = {k: Counter(v) for k, v in (counts or {}).items()}

    def observe(self, context: Sequence[str], nxt: str) -> None:
        self.counts.setdefault(tuple(context), Counter())[nxt] += 1

    def predict(self, history: Sequence[str]) -> PredictionResult:
        k = self.n - 1
        if len(history) < k:
            return PredictionResult()
        context = tuple(history[len(history) - k:])
        succ = self.counts.get(context)
        if not succ:
            return PredictionResult(window=context)
        total = sum(succ.values())
        ranked = sorted(succ.items(), key=lambda kv: (-kv[1], kv[0]))
        tool, count = ranked[0]
        return PredictionResult(tool=tool, score_freq=count / total, cips=count / total,
                                W_total=total, weight=count, window=context,
                                candidates=[(t, c / total) for t, c in ranked])


def ngram_policy(n: int, counts: dict | None = None) -> NGramPredictor:
    return NGramPredictor(n, counts)


class NGramFastPath:
    """Baseline fast path: n-gram tool prediction plus the shared parameter filler.

    The graph is kept only for parameter-dependency edges.
    """

    name = "ngram"

    def __init__(self, graph: ToolInertiaGraph, config: PredictorConfig | None = None, n: int = 3):
        self.graph = graph
        self.config = config or PredictorConfig()
        self.model = NGramPredictor(n)

    def propose(self, history_tools, intuition) -> PredictionResult:
        return self.model.predict(history_tools)

    def learn(self, trajectory: Trajectory, step: int) -> None:
        self.graph.record_step(trajectory, step, self.config.window)
        k = self.model.n - 1
        invs = trajectory.invocations
        if step < k:
            return
        span = invs[step - k:step + 1]
        if all(i.status == Status.SUCCESS and i.source == Source.ORACLE for i in span):
            self.model.observe([i.tool_name for i in span[:-1]], span[-1].tool_name)

    def feedback(self, prediction, status) -> None:
        pass


def run_episode(env: Environment, policy: OraclePolicy, adapter: EnvironmentAdapter, task_id: int,
                fastpath=None, *, seed: int = 0, recovery: bool = False, max_steps: int | None = None,
                episode: int = 0, fill_config: FillConfig | None = None,
                reflection_hook: Callable[[Trajectory], str | None] | None = None,
                ) -> tuple[EpisodeMetrics, Trajectory]:
    """Run one task to completion (or budget) and return its metrics and trajectory.

    Exceptions from the policy or environment end the episode early; the
    partial metrics carry the message in ``error``.
    """
    metrics = EpisodeMetrics(episode=episode, task_id=task_id)
    obs = env.reset(task_id)
    adapter.reset(obs)
    goal = env.task_goal
    descriptions = {s.name: s.description for s in env.tool_specs()}
    budget = max_steps if max_steps is not None else getattr(env.config, "step_budget", 50)
    used = UsedValueRecord(seed)
    invocations: list[ToolInvocation] = []
    observations: list[str] = []
    metadata: dict[str, str] = {}
    executed: list[tuple[str, Status]] = []
    success_tools: list[str] = []
    traj_id = f"task{task_id}-ep{episode}"

    def snapshot() -> Trajectory:
        return Trajectory(traj_id, goal, tuple(invocations), tuple(observations), dict(metadata))

    done = False
    try:
        while not done and len(executed) < budget:
            rec = recovery_check([s for _, s in executed], recovery, env.recovery_action)
            if rec is not None:
                result = env.step(rec)
                executed.append((RECOVERY, result.status))
                metrics.recovery_calls += 1
                metadata[f"recovery_{len(executed) - 1}"] = f"before step {len(invocations)}"
                metrics.trace.append({"action": len(executed) - 1, "source": RECOVERY,
                                      "tool": rec, "status": Status(result.status).value})
                obs, done = result.observation, result.done
                metrics.final_progress = result.progress
                continue

            action_text, source, prediction, provenance = None, Source.ORACLE, None, None
            if fastpath is not None:
                prediction = fastpath.propose(success_tools, obs)
                stats = GateStats(len(executed), metrics.inertial_calls,
                                  bool(executed) and executed[-1][0] == Source.INERTIAL.value)
                decision = gate_inertial_call(prediction, fastpath.config, stats)
                if decision.proceed:
                    metrics.inertial_attempts += 1
                    fill = fill_parameters(fastpath.graph, adapter, prediction.tool, snapshot(), used,
                                           fill_config)
                    if fill.complete:
                        action_text = adapter.generate_action_from_params(prediction.tool, fill.filled)
                        source = Source.INERTIAL
                        provenance = dict(fill.provenance)
                        metadata[f"thought_{len(invocations)}"] = INERTIA_NOTE.format(
                            tool=prediction.tool, params=fill.filled)
                    else:
                        metrics.fallbacks["param_incomplete"] += 1
                else:
                    metrics.fallbacks[decision.reason] += 1

            if action_text is None:
                decision = policy.decide(obs, goal, snapshot())
                action_text = decision.action_text
                metrics.oracle_calls += 1
                metrics.tokens_in += decision.tokens_in
                metrics.tokens_out += decision.tokens_out
            else:
                metrics.inertial_calls += 1

            result = env.step(action_text)
            status = Status(result.status)
            parsed = adapter.parse_action(action_text, descriptions)
            if parsed is None:
                tool, inputs, outputs = UNPARSED, {}, {}
            else:
                tool, inputs = parsed["tool_name"], dict(parsed["inputs"])
                outputs = adapter.infer_output(tool, inputs, result.observation) if status == Status.SUCCESS else {}
                adapter.update_state(parsed, outputs)
            step = len(invocations)
            observations.append(obs)
            invocations.append(ToolInvocation(step, tool, inputs, outputs, status, source, action_text))
            executed.append((source.value, status))
            metrics.steps += 1
            if status == Status.SUCCESS:
                success_tools.append(tool)

            entry = {"action": len(executed) - 1, "step": step, "source": source.value,
                     "tool": tool, "status": status.value}
            if source == Source.INERTIAL:
                entry.update(cips=prediction.cips, weight=prediction.weight,
                             window=list(prediction.window), provenance=provenance)
            metrics.trace.append(entry)

            if fastpath is not None and tool in fastpath.graph.nodes:
                fastpath.learn(snapshot(), step)
                if source == Source.INERTIAL:
                    fastpath.feedback(prediction, status)
            if status == Status.FAILURE and reflection_hook is not None:
                note = reflection_hook(snapshot())
                if note:
                    metadata[f"reflection_{step}"] = note

            obs, done = result.observation, result.done
            metrics.final_progress = result.progress
    except Exception as exc:  # partial metrics are still useful
        metrics.error = f"{type(exc).__name__}: {exc}"
    return metrics, snapshot()


def validate_trace(trace: Sequence[dict], cap: float, forbid_consecutive: bool = True) -> list[str]:
    """Re-check gate invariants on an emitted trace, independently of the gate code."""
    problems = []
    inertial = total = 0
    prev = None
    for entry in trace:
        total += 1
        src = entry["source"]
        if src == Source.INERTIAL.value:
            inertial += 1
            if forbid_consecutive and prev == Source.INERTIAL.value:
                problems.append(f"consecutive inertial actions at {entry['action']}")
            if not entry.get("weight", 0) > 0:
                problems.append(f"inertial action at {entry['action']} had net weight {entry.get('weight')}")
        if inertial > cap * total + 1e-9:
            problems.append(f"inertial fraction {inertial}/{total} exceeds cap {cap} at {entry['action']}")
        prev = src
    return problems
