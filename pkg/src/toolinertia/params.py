"""Non-oracle parameter filling.

Three sources are tried in a fixed order and never overwrite each other:

1. parameter dependency edges learned in the graph (copy the value the
   strongest source parameter last held in this episode),
2. the environment adapter's tracked state,
3. a token-overlap heuristic over the task goal.

If a required input is still missing afterwards the inertial call must be
abandoned and the oracle consulted instead.
"""
from __future__ import annotations

import abc
import json
import random
import re
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Set

from .errors import AdapterError, ArgumentError, SchemaError
from .graph import OUTPUT, ToolInertiaGraph
from .trajectory import Trajectory, TrajectoryLog, Value, normalize_value

DEPENDENCY_GRAPH = "dependency_graph"
ENVIRONMENT = "environment"
HEURISTIC = "heuristic"


class EnvironmentAdapter(abc.ABC):
    """Bridges one environment's action syntax and state to the generic filler."""

    def __init__(self, debug: bool = False):
        self.debug = debug

    @abc.abstractmethod
    def reset(self, init_observation: str | None = None) -> None: ...

    @abc.abstractmethod
    def parse_action(self, action_text: str, tool_descriptions: Dict) -> Optional[Dict[str, Any]]:
        """Return ``{"tool_name": str, "inputs": dict}`` or None if unparseable."""

    @abc.abstractmethod
    def infer_output(self, tool_name: str, inputs: Dict[str, Any], result: Any) -> Dict[str, Any]: ...

    @abc.abstractmethod
    def update_state(self, action_parsed: Dict[str, Any], structured_outputs: Dict[str, Any]) -> None: ...

    @abc.abstractmethod
    def get_contextual_params(self, action_type: str, missing_params: Set[str],
                              required_params_info: Dict) -> Dict[str, Any]: ...

    @abc.abstractmethod
    def generate_action_from_params(self, action_type: str, params: Dict[str, Any]) -> str: ...


@dataclass
class FillResult:
    filled: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    complete: bool = False


class UsedValueRecord:
    """Values already consumed for filling in the current task, plus the tie-break RNG."""

    def __init__(self, seed: int | None = 0):
        self.seed = seed
        self.values: set = set()
        self.rng = random.Random(seed)

    def __contains__(self, value) -> bool:
        return value in self.values

    def __len__(self):
        return len(self.values)

    def add(self, value: Value) -> None:
        self.values.add(value)

    def reset(self, seed: int | None = None) -> None:
        self.values.clear()
        self.rng = random.Random(self.seed if seed is None else seed)


@dataclass(frozen=True)
class FillConfig:
    use_environment: bool = True
    use_heuristic: bool = True


def select_from_list(values: Iterable, used: UsedValueRecord):
    """Pick uniformly among the not-yet-used elements; None when all are used."""
    fresh = []
    for v in values:
        if v not in used and v not in fresh:
            fresh.append(v)
    if not fresh:
        return None
    choice = used.rng.choice(fresh)
    used.add(choice)
    return choice


def coerce(value: Value, type_tag: str | None):
    """``(ok, value)``: same variant, or a lossless string/number conversion."""
    if type_tag in (None, "", "any"):
        return True, value
    if type_tag == "boolean":
        return isinstance(value, bool), value
    if type_tag == "list":
        return isinstance(value, tuple), value
    if isinstance(value, bool) or isinstance(value, tuple):
        return False, value
    if type_tag == "string":
        if isinstance(value, str):
            return True, value
        return True, repr(value) if isinstance(value, float) else str(value)
    if type_tag == "number":
        if isinstance(value, (int, float)):
            return True, value
        text = value.strip()
        for parse in (int, float):
            try:
                num = parse(text)
            except ValueError:
                continue
            if (repr(num) if isinstance(num, float) else str(num)) == text:
                return True, num
        return False, value
    return isinstance(value, str), value


def _latest_value(history: Trajectory, tool: str, param: str, direction: str):
    for inv in reversed(history.invocations):
        if inv.tool_name != tool:
            continue
        mapping = inv.outputs if direction == OUTPUT else inv.inputs
        if param in mapping:
            return inv.step_index, mapping[param]
    return None


def fill_from_dependency_graph(graph: ToolInertiaGraph, target_tool: str, history: Trajectory,
                               used: UsedValueRecord) -> dict:
    node = graph.node(target_tool)
    filled = {}
    for spec in node.args:
        if not spec.required:
            continue
        ranked = []
        for edge in graph.sources_for(target_tool, spec.name):
            found = _latest_value(history, *edge.source)
            if found is not None:
                ranked.append((-edge.count, -found[0], found[1]))
        ranked.sort(key=lambda r: (r[0], r[1]))
        for _, _, value in ranked:
            if isinstance(value, tuple) and spec.type != "list":
                value = select_from_list(value, used)
                if value is None:
                    continue
            ok, value = coerce(value, spec.type)
            if ok:
                filled[spec.name] = value
                used.add(value)
                break
    return filled


def fill_from_environment(adapter: EnvironmentAdapter, target_tool: str, missing: Iterable[str],
                          specs: dict) -> dict:
    missing = set(missing)
    if not missing:
        return {}
    info = {name: specs[name].to_dict() for name in sorted(missing) if name in specs}
    try:
        proposed = adapter.get_contextual_params(target_tool, set(missing), info) or {}
    except AdapterError:
        raise
    except Exception as exc:
        raise AdapterError(f"adapter failed for {target_tool!r}: {exc}") from exc
    out = {}
    for name, value in proposed.items():
        if name not in missing:
            continue
        try:
            value = normalize_value(value)
        except SchemaError:
            continue
        ok, value = coerce(value, specs[name].type if name in specs else None)
        if ok:
            out[name] = value
    return out


_WORD = re.compile(r"[A-Za-z0-9_]+")
STOPWORDS = frozenset(
    "a an the to of on in into onto at for with and or then from by is are be it its this that "
    "these those some any your you please as up".split()
)


def _best_phrase(text: str, keywords: set) -> tuple[int, int, str] | None:
    words = _WORD.findall(text or "")
    lower = [w.lower() for w in words]
    best = None
    i, n = 0, len(words)
    while i < n:
        if lower[i] not in keywords:
            i += 1
            continue
        j = i
        while j < n and lower[j] in keywords:
            j += 1
        k = j
        while k < n and lower[k] in STOPWORDS:
            k += 1
        phrase = []
        while k < n and lower[k] not in STOPWORDS and lower[k] not in keywords:
            phrase.append(words[k])
            k += 1
        if phrase:
            cand = (j - i, -i, " ".join(phrase))
            if best is None or cand[:2] > best[:2]:
                best = cand
        i = j
    return best


def fill_heuristic(task_goal: str, current_state_summary: str, target_tool: str,
                   missing: Iterable[str], specs: dict) -> dict:
    """Fill string params with the phrase that follows the goal's longest run of description words.

    Ties go to the earliest run; the state summary is only consulted when the
    goal yields nothing.
    """
    out = {}
    for name in sorted(set(missing)):
        spec = specs.get(name)
        if spec is None or spec.type not in ("string", "any"):
            continue
        keywords = {w.lower() for w in _WORD.findall(spec.description)} - STOPWORDS
        if not keywords:
            continue
        for text in (task_goal, current_state_summary):
            best = _best_phrase(text, keywords)
            if best is not None:
                out[name] = best[2]
                break
    return out


def fill_parameters(graph: ToolInertiaGraph, adapter: EnvironmentAdapter | None, target_tool: str,
                    history: Trajectory, used: UsedValueRecord,
                    config: FillConfig | None = None) -> FillResult:
    config = config or FillConfig()
    node = graph.node(target_tool)
    specs = {p.name: p for p in node.args}
    required = [p.name for p in node.args if p.required]
    result = FillResult()

    def take(values: dict, tier: str):
        for name, value in values.items():
            if name not in result.filled:
                result.filled[name] = value
                result.provenance[name] = tier

    take(fill_from_dependency_graph(graph, target_tool, history, used), DEPENDENCY_GRAPH)
    missing = [n for n in required if n not in result.filled]
    if missing and adapter is not None and config.use_environment:
        take(fill_from_environment(adapter, target_tool, missing, specs), ENVIRONMENT)
        missing = [n for n in required if n not in result.filled]
    if missing and config.use_heuristic:
        state = history.observations[-1] if history.observations else ""
        take(fill_heuristic(history.task_goal, state, target_tool, missing, specs), HEURISTIC)
    result.complete = all(n in result.filled for n in required)
    return result


# -- action text --------------------------------------------------------

_NAME = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_.\-]*)\s*\(")
_KEY = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*")
_decoder = json.JSONDecoder()


def format_action(tool: str, params: dict) -> str:
    """``tool(key="value", n=3)`` with JSON-encoded values."""
    body = ", ".join(f"{k}={json.dumps(list(v) if isinstance(v, tuple) else v, ensure_ascii=False)}"
                     for k, v in params.items())
    return f"{tool}({body})"


def parse_action_text(text: str) -> tuple[str, dict] | None:
    m = _NAME.match(text or "")
    if not m:
        return None
    tool, pos, params = m.group(1), m.end(), {}
    while True:
        rest = text[pos:].lstrip()
        pos = len(text) - len(rest)
        if rest.startswith(")"):
            return (tool, params) if not rest[1:].strip() else None
        km = _KEY.match(text, pos)
        if not km:
            return None
        try:
            value, end = _decoder.raw_decode(text, km.end())
            params[km.group(1)] = normalize_value(value)
        except (json.JSONDecodeError, SchemaError):
            return None
        pos = end
        rest = text[pos:].lstrip()
        pos = len(text) - len(rest)
        if rest.startswith(","):
            pos += 1


class ReplayAdapter(EnvironmentAdapter):
    """Answers from recorded trajectories; state is the latest value seen per parameter name."""

    def __init__(self, log: TrajectoryLog | Iterable[Trajectory] = (), debug: bool = False):
        super().__init__(debug)
        self._recorded: dict[tuple, dict] = {}
        for t in log:
            for inv in t.invocations:
                key = (inv.tool_name, tuple(sorted(inv.inputs.items(), key=lambda kv: kv[0])))
                self._recorded[key] = dict(inv.outputs)
        self.state: dict[str, Value] = {}

    def reset(self, init_observation=None):
        self.state = {}

    def parse_action(self, action_text, tool_descriptions):
        parsed = parse_action_text(action_text)
        if parsed is None:
            return None
        tool, inputs = parsed
        if tool_descriptions and tool not in tool_descriptions:
            return None
        return {"tool_name": tool, "inputs": inputs}

    def infer_output(self, tool_name, inputs, result):
        key = (tool_name, tuple(sorted(inputs.items(), key=lambda kv: kv[0])))
        return dict(self._recorded.get(key, {}))

    def update_state(self, action_parsed, structured_outputs):
        self.state.update(action_parsed.get("inputs", {}))
        self.state.update(structured_outputs)

    def get_contextual_params(self, action_type, missing_params, required_params_info):
        return {p: self.state[p] for p in sorted(missing_params) if p in self.state}

    def generate_action_from_params(self, action_type, params):
        return format_action(action_type, params)


def make_adapter(name: str, **kwargs) -> EnvironmentAdapter:
    if name == "replay":
        return ReplayAdapter(**kwargs)
    if name == "chainworld":
        from .chainworld import ChainWorldAdapter
        return ChainWorldAdapter(**kwargs)
    raise ArgumentError(f"unknown adapter {name!r} (expected 'chainworld' or 'replay')")


__all__ = [
    "EnvironmentAdapter", "FillResult", "FillConfig", "UsedValueRecord", "ReplayAdapter",
    "select_from_list", "coerce", "fill_from_dependency_graph", "fill_from_environment",
    "fill_heuristic", "fill_parameters", "format_action", "parse_action_text", "make_adapter",
    "DEPENDENCY_GRAPH", "ENVIRONMENT", "HEURISTIC",
]
