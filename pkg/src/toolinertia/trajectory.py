"""Agent trajectories: in-memory types, JSONL ingestion and validation.

One JSONL record holds one trajectory::

    {"id": "t1", "task_goal": "boil water",
     "steps": [{"step_index": 0, "observation": "...", "tool": "go_to",
                "inputs": {"target": "kitchen"}, "outputs": {},
                "status": "success", "source": "oracle", "raw_text": "..."}],
     "metadata": {"split": "train"}}

Values inside ``inputs``/``outputs`` are restricted to strings, numbers,
booleans and lists of strings so that value equality stays decidable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Union

from .errors import ArgumentError, ParseError, SchemaError

Value = Union[str, int, float, bool, tuple]

_STEP_FIELDS = ("step_index", "observation", "tool", "inputs", "outputs", "status", "source")
_TOP_FIELDS = ("id", "task_goal", "steps")


class Status(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"


class Source(str, Enum):
    ORACLE = "oracle"
    INERTIAL = "inertial"


def normalize_value(value) -> Value:
    """Coerce a JSON value into the closed Value set; lists become tuples of str."""
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float, str)):
        return value
    if isinstance(value, (list, tuple)):
        if all(isinstance(v, str) for v in value):
            return tuple(value)
        raise SchemaError("unsupported value type: list elements must be strings")
    raise SchemaError(f"unsupported value type: {type(value).__name__}")


def _normalize_map(mapping, what: str) -> dict:
    if not isinstance(mapping, Mapping):
        raise SchemaError(f"{what} must be an object")
    out = {}
    for key, value in mapping.items():
        if not isinstance(key, str) or not key:
            raise SchemaError(f"{what} keys must be non-empty strings")
        out[key] = normalize_value(value)
    return out


def value_to_json(value: Value):
    return list(value) if isinstance(value, tuple) else value


@dataclass(frozen=True)
class ToolInvocation:
    step_index: int
    tool_name: str
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    status: Status = Status.SUCCESS
    source: Source = Source.ORACLE
    raw_text: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == Status.SUCCESS


@dataclass(frozen=True)
class Trajectory:
    id: str
    task_goal: str
    invocations: tuple = ()
    observations: tuple = ()
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.invocations)

    @property
    def tools(self) -> list[str]:
        return [inv.tool_name for inv in self.invocations]


@dataclass(frozen=True)
class TrajectoryLog:
    trajectories: tuple = ()

    @property
    def tool_universe(self) -> frozenset:
        return frozenset(inv.tool_name for t in self.trajectories for inv in t.invocations)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    def __len__(self):
        return len(self.trajectories)


@dataclass(frozen=True)
class Violation:
    kind: str
    step_index: int | None = None
    detail: str = ""


def validate_trajectory(t: Trajectory) -> list[Violation]:
    """Check every Trajectory/ToolInvocation invariant. Never raises."""
    found: list[Violation] = []
    if len(t.observations) != len(t.invocations):
        found.append(Violation(
            "length_mismatch", None,
            f"{len(t.observations)} observations for {len(t.invocations)} invocations"))
    for expected, inv in enumerate(t.invocations):
        if inv.step_index != expected:
            found.append(Violation("step_gap", expected, f"step_index gap at {expected}"))
            break
    for inv in t.invocations:
        if not isinstance(inv.tool_name, str) or not inv.tool_name:
            found.append(Violation("empty_tool", inv.step_index))
        if inv.status not in (Status.SUCCESS, Status.FAILURE):
            found.append(Violation("bad_status", inv.step_index, repr(inv.status)))
        if inv.source not in (Source.ORACLE, Source.INERTIAL):
            found.append(Violation("bad_source", inv.step_index, repr(inv.source)))
        for what, mapping in (("inputs", inv.inputs), ("outputs", inv.outputs)):
            for key, value in mapping.items():
                if not isinstance(key, str) or not key:
                    found.append(Violation("empty_key", inv.step_index, what))
                try:
                    normalize_value(value)
                    if isinstance(value, list):
                        raise SchemaError("list values must be tuples")
                except SchemaError as exc:
                    found.append(Violation("bad_value", inv.step_index, f"{what}[{key!r}]: {exc}"))
    return found


def validate_log(log: TrajectoryLog) -> list[Violation]:
    found: list[Violation] = []
    seen: set[str] = set()
    for t in log.trajectories:
        if t.id in seen:
            found.append(Violation("duplicate_id", None, t.id))
        seen.add(t.id)
        found.extend(validate_trajectory(t))
    return found


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def trajectory_from_record(record) -> Trajectory:
    if not isinstance(record, Mapping):
        raise SchemaError("record must be a JSON object")
    for name in _TOP_FIELDS:
        if name not in record:
            raise SchemaError(f"missing required field {name!r}")
    if not isinstance(record["id"], str) or not isinstance(record["task_goal"], str):
        raise SchemaError("fields 'id' and 'task_goal' must be strings")
    steps = record["steps"]
    if not isinstance(steps, list):
        raise SchemaError("field 'steps' must be a list")

    metadata = {}
    raw_meta = record.get("metadata", {})
    if not isinstance(raw_meta, Mapping):
        raise SchemaError("field 'metadata' must be an object")
    for key, value in raw_meta.items():
        if not isinstance(value, str):
            raise SchemaError(f"metadata value for {key!r} must be a string")
        metadata[key] = value
    for key, value in record.items():
        if key not in _TOP_FIELDS and key != "metadata":
            metadata[key] = value if isinstance(value, str) else json.dumps(value, sort_keys=True)

    invocations, observations = [], []
    for pos, step in enumerate(steps):
        if not isinstance(step, Mapping):
            raise SchemaError(f"step {pos} must be an object")
        for name in _STEP_FIELDS:
            if name not in step:
                raise SchemaError(f"missing required field 'steps[{pos}].{name}'")
        index = step["step_index"]
        if isinstance(index, bool) or not isinstance(index, int) or index < 0:
            raise SchemaError(f"steps[{pos}].step_index must be a non-negative integer")
        if index != pos:
            raise SchemaError(f"step_index gap at {pos}")
        if not isinstance(step["tool"], str) or not step["tool"]:
            raise SchemaError(f"steps[{pos}].tool must be a non-empty string")
        if not isinstance(step["observation"], str):
            raise SchemaError(f"steps[{pos}].observation must be a string")
        try:
            status = Status(step["status"])
            source = Source(step["source"])
        except ValueError as exc:
            raise SchemaError(f"steps[{pos}]: {exc}") from None
        raw_text = step.get("raw_text")
        if raw_text is not None and not isinstance(raw_text, str):
            raise SchemaError(f"steps[{pos}].raw_text must be a string")
        for key, value in step.items():
            if key in _STEP_FIELDS or key == "raw_text":
                continue
            metadata[f"{key}_{pos}"] = value if isinstance(value, str) else json.dumps(value, sort_keys=True)
        invocations.append(ToolInvocation(
            step_index=index,
            tool_name=step["tool"],
            inputs=_normalize_map(step["inputs"], f"steps[{pos}].inputs"),
            outputs=_normalize_map(step["outputs"], f"steps[{pos}].outputs"),
            status=status,
            source=source,
            raw_text=raw_text,
        ))
        observations.append(step["observation"])

    return Trajectory(
        id=record["id"],
        task_goal=record["task_goal"],
        invocations=tuple(invocations),
        observations=tuple(observations),
        metadata=metadata,
    )


def parse_trajectory_record(line: str) -> Trajectory:
    """Parse one JSONL line into a validated :class:`Trajectory`.

    Raises ParseError (with byte offset) on malformed JSON and SchemaError on
    missing fields, step-index gaps or values outside the supported set.
    """
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, _byte_offset(line, exc.pos)) from None
    return trajectory_from_record(record)


def trajectory_to_record(t: Trajectory) -> dict:
    steps = []
    for inv, obs in zip(t.invocations, t.observations):
        step = {
            "step_index": inv.step_index,
            "observation": obs,
            "tool": inv.tool_name,
            "inputs": {k: value_to_json(v) for k, v in inv.inputs.items()},
            "outputs": {k: value_to_json(v) for k, v in inv.outputs.items()},
            "status": Status(inv.status).value,
            "source": Source(inv.source).value,
        }
        if inv.raw_text is not None:
            step["raw_text"] = inv.raw_text
        steps.append(step)
    record = {"id": t.id, "task_goal": t.task_goal, "steps": steps}
    if t.metadata:
        record["metadata"] = dict(t.metadata)
    return record


def serialize_trajectory(t: Trajectory) -> str:
    return json.dumps(trajectory_to_record(t), ensure_ascii=False)


def tool_windows(t: Trajectory, k: int) -> list[tuple]:
    """All contiguous k-windows of tool names, in order."""
    if k < 1:
        raise ArgumentError("window size must be >= 1")
    tools = t.tools if isinstance(t, Trajectory) else list(t)
    return [tuple(tools[i:i + k]) for i in range(len(tools) - k + 1)]


def iter_records(lines: Iterable[str]) -> Iterator[tuple[int, str]]:
    for lineno, line in enumerate(lines, start=1):
        if line.strip():
            yield lineno, line


def load_log(path) -> TrajectoryLog:
    """Read a JSONL file; the first bad line aborts with its line number attached."""
    trajectories = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in iter_records(fh):
            try:
                trajectories.append(parse_trajectory_record(line))
            except (ParseError, SchemaError) as exc:
                exc.args = (f"{path}:{lineno}: {exc}",)
                raise
    log = TrajectoryLog(tuple(trajectories))
    dupes = [v for v in validate_log(log) if v.kind == "duplicate_id"]
    if dupes:
        raise SchemaError(f"{path}: duplicate trajectory id {dupes[0].detail!r}")
    return log


def dump_log(log: Iterable[Trajectory], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for t in log:
            fh.write(serialize_trajectory(t))
            fh.write("\n")
