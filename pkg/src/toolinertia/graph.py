"""The Tool Inertia Graph.

Tool nodes carry an embedded parameter graph; tool sequences are stored as
:class:`ToolPath` objects with (possibly negative) frequencies; data flow
between parameters is stored as :class:`ParamEdge` counts keyed
``target_tool -> target_param -> (source_tool, source_param, direction)``.

Two indices make lookups cheap: ``path_index`` maps a tool name to the ids of
every path containing it, and ``paths_lookup`` maps a tool tuple to its path id.
"""
from __future__ import annotations

import json
import re
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from . import kernels
from .errors import ArgumentError, ConflictError, NotFoundError, SchemaError, UnknownToolError
from .trajectory import Source, Status, Trajectory, Value, normalize_value, value_to_json

INPUT = "input"
OUTPUT = "output"
DEFAULT_EXAMPLE_CAPACITY = 16


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str = "string"
    required: bool = True
    description: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "type": self.type, "required": self.required,
                "description": self.description}

    @classmethod
    def from_dict(cls, d) -> "ParamSpec":
        if isinstance(d, str):
            return cls(d)
        return cls(d["name"], d.get("type", "string"), bool(d.get("required", True)),
                   d.get("description", ""))


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str = ""
    args: tuple = ()
    returns: tuple = ()

    def __post_init__(self):
        for group in (self.args, self.returns):
            names = [p.name for p in group]
            if len(set(names)) != len(names):
                raise ArgumentError(f"duplicate parameter names in tool {self.name!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "description": self.description,
                "args": [p.to_dict() for p in self.args],
                "returns": [p.to_dict() for p in self.returns]}

    @classmethod
    def from_dict(cls, d) -> "ToolSpec":
        return cls(d["name"], d.get("description", ""),
                   tuple(ParamSpec.from_dict(p) for p in d.get("args", ())),
                   tuple(ParamSpec.from_dict(p) for p in d.get("returns", ())))

    def signature(self):
        return (tuple(self.args), tuple(self.returns))

    def arg(self, name: str) -> ParamSpec | None:
        for p in self.args:
            if p.name == name:
                return p
        return None


class ParamNode:
    """One input or output parameter of a tool, with an LRU cache of observed values."""

    def __init__(self, tool: str, param: str, direction: str, capacity: int = DEFAULT_EXAMPLE_CAPACITY):
        self.tool = tool
        self.param = param
        self.direction = direction
        self.capacity = capacity
        self._examples: OrderedDict = OrderedDict()

    @property
    def example_values(self) -> list:
        return list(self._examples)

    def observe(self, value: Value) -> None:
        self._examples.pop(value, None)
        self._examples[value] = None
        while len(self._examples) > self.capacity:
            self._examples.popitem(last=False)


class ToolNode:
    def __init__(self, spec: ToolSpec, example_capacity: int = DEFAULT_EXAMPLE_CAPACITY):
        self.spec = spec
        self.success_count = 0
        self.failure_count = 0
        self.param_graph: dict[tuple[str, str], ParamNode] = {}
        for p in spec.args:
            self.param_graph[(INPUT, p.name)] = ParamNode(spec.name, p.name, INPUT, example_capacity)
        for p in spec.returns:
            self.param_graph[(OUTPUT, p.name)] = ParamNode(spec.name, p.name, OUTPUT, example_capacity)

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def description(self) -> str:
        return self.spec.description

    @property
    def args(self) -> tuple:
        return self.spec.args

    @property
    def returns(self) -> tuple:
        return self.spec.returns


@dataclass
class ParamEdge:
    source: tuple  # (tool, param, direction)
    target: tuple  # (tool, param); always an input
    count: int = 1


@dataclass
class ToolPath:
    id: int
    tools: tuple
    frequency: float = 1


@dataclass
class UpdateSummary:
    paths_created: int = 0
    paths_reinforced: int = 0
    edges_created: int = 0
    edges_reinforced: int = 0

    def __iadd__(self, other: "UpdateSummary"):
        self.paths_created += other.paths_created
        self.paths_reinforced += other.paths_reinforced
        self.edges_created += other.edges_created
        self.edges_reinforced += other.edges_reinforced
        return self


class ParamSource(NamedTuple):
    target_param: str
    source_step: int
    source_tool: str
    source_param: str
    source_direction: str


def _norm(value):
    return value.strip() if isinstance(value, str) else value


def same_value(a: Value, b: Value) -> bool:
    """Exact equality on the Value set; strings compared after trimming."""
    if isinstance(a, bool) or isinstance(b, bool):
        return type(a) is type(b) and a == b
    if isinstance(a, str) and isinstance(b, str):
        a = a.strip()
        return a != "" and a == b.strip()
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) > 0 and tuple(map(_norm, a)) == tuple(map(_norm, b))
    return False


def value_matches(target: Value, source: Value) -> bool:
    """Would ``target`` be an inherited copy of ``source``? Lists match their elements."""
    if isinstance(source, tuple) and not isinstance(target, tuple):
        if not isinstance(target, str) or not target.strip():
            return False
        return any(_norm(s) == target.strip() for s in source)
    return same_value(target, source)


def backtrack_param_sources(t: Trajectory, step: int) -> list[ParamSource]:
    """Find, for each input of ``step``, the most recent earlier parameter holding its value.

    Earlier steps are scanned newest first. Within one step outputs are
    preferred over inputs, then declaration order decides.
    """
    if not 0 <= step < len(t.invocations):
        raise ArgumentError(f"step {step} out of range")
    found = []
    for name, value in t.invocations[step].inputs.items():
        hit = None
        for j in range(step - 1, -1, -1):
            prev = t.invocations[j]
            for direction, mapping in ((OUTPUT, prev.outputs), (INPUT, prev.inputs)):
                for pname, pvalue in mapping.items():
                    if value_matches(value, pvalue):
                        hit = ParamSource(name, j, prev.tool_name, pname, direction)
                        break
                if hit:
                    break
            if hit:
                break
        if hit:
            found.append(hit)
    return found


def _learnable(inv) -> bool:
    return inv.status == Status.SUCCESS and inv.source == Source.ORACLE


class ToolInertiaGraph:
    def __init__(self, example_capacity: int = DEFAULT_EXAMPLE_CAPACITY):
        self.example_capacity = example_capacity
        self.nodes: dict[str, ToolNode] = {}
        self.param_edges: dict[str, dict[str, dict[tuple, ParamEdge]]] = {}
        self.paths: list[ToolPath] = []
        self.path_index: dict[str, set[int]] = {}
        self.paths_lookup: dict[tuple, int] = {}
        self._ids: dict[str, int] = {}
        self._codes: list = []

    def __repr__(self):
        return f"<ToolInertiaGraph tools={len(self.nodes)} paths={len(self.paths)}>"

    def __eq__(self, other):
        if not isinstance(other, ToolInertiaGraph):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    # -- nodes -----------------------------------------------------------

    def register_tool(self, spec: ToolSpec | dict) -> ToolNode:
        if isinstance(spec, dict):
            spec = ToolSpec.from_dict(spec)
        existing = self.nodes.get(spec.name)
        if existing is not None:
            if existing.spec.signature() != spec.signature():
                raise ConflictError(f"tool {spec.name!r} already registered with a different signature")
            return existing
        node = ToolNode(spec, self.example_capacity)
        self.nodes[spec.name] = node
        self._ids[spec.name] = len(self._ids)
        self.path_index.setdefault(spec.name, set())
        return node

    def node(self, name: str, step: int | None = None) -> ToolNode:
        try:
            return self.nodes[name]
        except KeyError:
            raise UnknownToolError(name, step) from None

    def _encode(self, tools: Iterable[str]):
        return kernels.encode([self._ids[t] for t in tools])

    # -- paths -----------------------------------------------------------

    def _new_path(self, tools: tuple, frequency) -> ToolPath:
        path = ToolPath(len(self.paths), tools, frequency)
        self.paths.append(path)
        self.paths_lookup[tools] = path.id
        for t in set(tools):
            self.path_index.setdefault(t, set()).add(path.id)
        self._codes.append(self._encode(tools))
        return path

    def _upsert_path(self, tools: tuple, summary: UpdateSummary) -> None:
        pid = self.paths_lookup.get(tools)
        if pid is None:
            self._new_path(tools, 1)
            summary.paths_created += 1
        else:
            self.paths[pid].frequency += 1
            summary.paths_reinforced += 1

    def path_id(self, tools) -> int | None:
        return self.paths_lookup.get(tuple(tools))

    def record_failure_path(self, tools, window: int) -> ToolPath:
        """Store (or further decrement) a known-bad tool chain longer than ``window``."""
        tools = tuple(tools)
        if len(tools) <= window:
            raise ArgumentError(f"failure path length {len(tools)} must exceed window {window}")
        for t in tools:
            self.node(t)
        pid = self.paths_lookup.get(tools)
        if pid is None:
            return self._new_path(tools, -1)
        self.paths[pid].frequency -= 1
        return self.paths[pid]

    def update_path_efficacy(self, path_id: int, outcome: str | Status,
                             dw_success: float = 1, dw_failure: float = 1):
        if dw_success <= 0 or dw_failure <= 0:
            raise ArgumentError("weight deltas must be positive")
        if not 0 <= path_id < len(self.paths):
            raise NotFoundError(f"no path with id {path_id}")
        path = self.paths[path_id]
        if Status(outcome) == Status.SUCCESS:
            path.frequency += dw_success
        else:
            path.frequency -= dw_failure
        return path.frequency

    def find_paths_containing(self, sequence) -> set[int]:
        """Ids of paths containing ``sequence`` contiguously and in order."""
        sequence = tuple(sequence)
        if not sequence:
            raise ArgumentError("sequence must be non-empty")
        for t in sequence:
            self.node(t)
        return {self.paths[pos].id for pos in self._matching(sequence)}

    def _candidate_ids(self, sequence: tuple) -> list[int]:
        sets = sorted((self.path_index.get(t, set()) for t in set(sequence)), key=len)
        ids = set(sets[0])
        for s in sets[1:]:
            ids &= s
            if not ids:
                break
        return sorted(ids)

    def _matching(self, sequence: tuple) -> list[int]:
        window = self._encode(sequence)
        return [pid for pid in self._candidate_ids(sequence)
                if kernels.occurrences(self._codes[pid], window)]

    def successor_occurrences(self, sequence) -> list[tuple[int, str]]:
        """``(path_id, next_tool)`` for every contiguous occurrence of ``sequence`` with a successor."""
        sequence = tuple(sequence)
        if not sequence or any(t not in self._ids for t in sequence):
            return []
        ids = self._candidate_ids(sequence)
        hits = kernels.successor_hits([self._codes[i] for i in ids], self._encode(sequence))
        names = list(self._ids)
        return [(ids[pos], names[code]) for pos, code in hits]

    # -- learning --------------------------------------------------------

    def _upsert_edge(self, target_tool, target_param, source, summary) -> None:
        by_param = self.param_edges.setdefault(target_tool, {}).setdefault(target_param, {})
        edge = by_param.get(source)
        if edge is None:
            by_param[source] = ParamEdge(source, (target_tool, target_param), 1)
            summary.edges_created += 1
        else:
            edge.count += 1
            summary.edges_reinforced += 1

    def record_step(self, t: Trajectory, step: int, window: int) -> UpdateSummary:
        """Fold one step of ``t`` into the graph.

        Only paths *ending* at ``step`` are upserted, so calling this for each
        step in order is the same as :meth:`record_trajectory`.
        """
        if window < 1:
            raise ArgumentError("window must be >= 1")
        summary = UpdateSummary()
        inv = t.invocations[step]
        node = self.node(inv.tool_name, step)
        if inv.status == Status.SUCCESS:
            node.success_count += 1
        else:
            node.failure_count += 1
        for direction, mapping in ((INPUT, inv.inputs), (OUTPUT, inv.outputs)):
            for name, value in mapping.items():
                pnode = node.param_graph.get((direction, name))
                if pnode is not None:
                    pnode.observe(value)

        for src in backtrack_param_sources(t, step):
            source = (src.source_tool, src.source_param, src.source_direction)
            if (inv.tool_name, src.target_param, INPUT) == source:
                continue
            if (INPUT, src.target_param) not in node.param_graph:
                continue
            src_node = self.nodes.get(src.source_tool)
            if src_node is None or (src.source_direction, src.source_param) not in src_node.param_graph:
                continue
            self._upsert_edge(inv.tool_name, src.target_param, source, summary)

        if _learnable(inv):
            segment = [inv.tool_name]
            j = step - 1
            while j >= 0 and len(segment) < window + 1 and _learnable(t.invocations[j]):
                segment.insert(0, t.invocations[j].tool_name)
                j -= 1
            for length in range(2, len(segment) + 1):
                self._upsert_path(tuple(segment[-length:]), summary)
        return summary

    def record_trajectory(self, t: Trajectory, window: int = 2) -> UpdateSummary:
        """Learn paths from success/oracle segments and param edges from every step."""
        for inv in t.invocations:
            self.node(inv.tool_name, inv.step_index)
        summary = UpdateSummary()
        for step in range(len(t.invocations)):
            summary += self.record_step(t, step, window)
        return summary

    def sources_for(self, target_tool: str, target_param: str) -> list[ParamEdge]:
        return list(self.param_edges.get(target_tool, {}).get(target_param, {}).values())

    def check_indices(self) -> bool:
        """Rebuild both indices from ``paths`` and compare with the live ones."""
        index: dict[str, set[int]] = {name: set() for name in self.nodes}
        lookup = {}
        for pos, path in enumerate(self.paths):
            if path.id != pos:
                return False
            lookup[path.tools] = path.id
            for tool in path.tools:
                index.setdefault(tool, set()).add(path.id)
        live = {k: v for k, v in self.path_index.items() if v or k in self.nodes}
        return index == live and lookup == self.paths_lookup and len(lookup) == len(self.paths)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        tools = []
        for node in self.nodes.values():
            d = node.spec.to_dict()
            d["success_count"] = node.success_count
            d["failure_count"] = node.failure_count
            d["examples"] = [
                {"param": p.param, "direction": p.direction,
                 "values": [value_to_json(v) for v in p.example_values]}
                for p in node.param_graph.values() if p.example_values
            ]
            tools.append(d)
        edges = []
        for by_param in self.param_edges.values():
            for per_source in by_param.values():
                for e in per_source.values():
                    edges.append({"src_tool": e.source[0], "src_param": e.source[1],
                                  "src_dir": e.source[2], "dst_tool": e.target[0],
                                  "dst_param": e.target[1], "count": e.count})
        return {
            "example_capacity": self.example_capacity,
            "tools": tools,
            "paths": [{"id": p.id, "tools": list(p.tools), "frequency": p.frequency} for p in self.paths],
            "param_edges": edges,
        }

    @classmethod
    def from_dict(cls, doc) -> "ToolInertiaGraph":
        try:
            graph = cls(int(doc.get("example_capacity", DEFAULT_EXAMPLE_CAPACITY)))
            for d in doc["tools"]:
                node = graph.register_tool(ToolSpec.from_dict(d))
                node.success_count = int(d.get("success_count", 0))
                node.failure_count = int(d.get("failure_count", 0))
                for ex in d.get("examples", ()):
                    pnode = node.param_graph[(ex["direction"], ex["param"])]
                    for v in ex["values"]:
                        pnode.observe(normalize_value(v))
            for pos, p in enumerate(doc["paths"]):
                if p["id"] != pos:
                    raise SchemaError(f"path ids must be 0..n-1 in order (got {p['id']} at {pos})")
                tools = tuple(p["tools"])
                if len(tools) < 2:
                    raise SchemaError(f"path {pos} has fewer than 2 tools")
                if tools in graph.paths_lookup:
                    raise SchemaError(f"duplicate path {list(tools)}")
                for t in tools:
                    if t not in graph.nodes:
                        raise SchemaError(f"path {pos} references unknown tool {t!r}")
                graph._new_path(tools, p["frequency"])
            for e in doc["param_edges"]:
                for t in (e["src_tool"], e["dst_tool"]):
                    if t not in graph.nodes:
                        raise SchemaError(f"param edge references unknown tool {t!r}")
                if e["src_dir"] not in (INPUT, OUTPUT):
                    raise SchemaError(f"bad src_dir {e['src_dir']!r}")
                if int(e["count"]) < 1:
                    raise SchemaError("param edge count must be >= 1")
                source = (e["src_tool"], e["src_param"], e["src_dir"])
                by_param = graph.param_edges.setdefault(e["dst_tool"], {}).setdefault(e["dst_param"], {})
                by_param[source] = ParamEdge(source, (e["dst_tool"], e["dst_param"]), int(e["count"]))
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise SchemaError(f"invalid graph document: {exc!r}") from None
        return graph


_DOT_ID = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _dot_id(name: str) -> str:
    return name if _DOT_ID.match(name) else json.dumps(name)


def export_graph(graph: ToolInertiaGraph, format: str = "json") -> bytes:
    if format == "json":
        return (json.dumps(graph.to_dict(), indent=1, ensure_ascii=False) + "\n").encode("utf-8")
    if format == "dot":
        lines = ["digraph TIG {"]
        lines += [f"  {_dot_id(name)};" for name in graph.nodes]
        for path in graph.paths:
            if len(path.tools) == 2:
                a, b = path.tools
                lines.append(f'  {_dot_id(a)} -> {_dot_id(b)} [label="{path.frequency}"];')
        lines.append("}")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ArgumentError(f"unknown export format {format!r}")


def import_graph(data: bytes | str) -> ToolInertiaGraph:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"graph is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("graph document must be a JSON object")
    return ToolInertiaGraph.from_dict(doc)


def infer_tool_specs(trajectories: Iterable[Trajectory]) -> list[ToolSpec]:
    """Derive tool specs from the parameter names seen in trajectories (sorted by name)."""
    seen: dict[str, tuple[dict, dict]] = {}
    for t in trajectories:
        for inv in t.invocations:
            args, rets = seen.setdefault(inv.tool_name, ({}, {}))
            for k, v in inv.inputs.items():
                args.setdefault(k, _type_tag(v))
            for k, v in inv.outputs.items():
                rets.setdefault(k, _type_tag(v))
    specs = []
    for name in sorted(seen):
        args, rets = seen[name]
        specs.append(ToolSpec(
            name, "",
            tuple(ParamSpec(k, args[k]) for k in sorted(args)),
            tuple(ParamSpec(k, rets[k], required=False) for k in sorted(rets)),
        ))
    return specs


def _type_tag(value) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, tuple):
        return "list"
    return "string"
