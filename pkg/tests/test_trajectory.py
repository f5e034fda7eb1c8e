import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import traj
from toolinertia.errors import ArgumentError, ParseError, SchemaError
from toolinertia.trajectory import (Source, Status, ToolInvocation, Trajectory, TrajectoryLog, dump_log,
                                    load_log, parse_trajectory_record, serialize_trajectory, tool_windows,
                                    validate_log, validate_trajectory)


def record(steps, **extra):
    rec = {"id": "t1", "task_goal": "boil water", "steps": steps}
    rec.update(extra)
    return json.dumps(rec)


def step(i, tool="go_to", **kw):
    s = {"step_index": i, "observation": f"o{i}", "tool": tool, "inputs": {"target": "kitchen"},
         "outputs": {}, "status": "success", "source": "oracle"}
    s.update(kw)
    return s


def test_parse_two_steps():
    t = parse_trajectory_record(record([step(0), step(1, "open")]))
    assert len(t.invocations) == 2 and len(t.observations) == 2
    assert t.task_goal == "boil water"
    assert t.tools == ["go_to", "open"]


def test_step_gap():
    with pytest.raises(SchemaError, match="step_index gap at 1"):
        parse_trajectory_record(record([step(0), step(2)]))


def test_nested_object_value_rejected():
    with pytest.raises(SchemaError, match="unsupported value type"):
        parse_trajectory_record(record([step(0, inputs={"x": {"nested": 1}})]))


def test_list_of_non_strings_rejected():
    with pytest.raises(SchemaError, match="unsupported value type"):
        parse_trajectory_record(record([step(0, inputs={"x": [1, 2]})]))


@pytest.mark.parametrize("missing", ["id", "task_goal", "steps"])
def test_missing_top_level_field(missing):
    rec = json.loads(record([step(0)]))
    del rec[missing]
    with pytest.raises(SchemaError, match=missing):
        parse_trajectory_record(json.dumps(rec))


def test_missing_step_field_named():
    s = step(0)
    del s["status"]
    with pytest.raises(SchemaError, match=r"steps\[0\]\.status"):
        parse_trajectory_record(record([s]))


def test_malformed_json_reports_byte_offset():
    line = '{"id": "é", "task_goal": x}'
    with pytest.raises(ParseError) as info:
        parse_trajectory_record(line)
    # "é" is two bytes, so the byte offset is one past the character offset
    assert info.value.offset == line.index("x") + 1
    assert "byte offset" in str(info.value)


def test_unknown_fields_kept_in_metadata():
    t = parse_trajectory_record(record([step(0, thought="go to kitchen")], split="train", extra={"a": 1}))
    assert t.metadata["split"] == "train"
    assert json.loads(t.metadata["extra"]) == {"a": 1}
    assert t.metadata["thought_0"] == "go to kitchen"


def test_list_values_become_tuples():
    t = parse_trajectory_record(record([step(0, outputs={"items": ["a", "b"]})]))
    assert t.invocations[0].outputs["items"] == ("a", "b")


def test_validate_well_formed():
    t = traj([("a", {}, {}), ("b", {"x": "1"}, {}), ("c", {}, {"y": 2})])
    assert validate_trajectory(t) == []


def test_validate_length_mismatch():
    t = traj([("a", {}, {}), ("b", {}, {})])
    bad = Trajectory(t.id, t.task_goal, t.invocations, t.observations[:1])
    assert [v.kind for v in validate_trajectory(bad)] == ["length_mismatch"]


def test_validate_step_gap_and_bad_values():
    invs = (ToolInvocation(0, "a"), ToolInvocation(2, "", {"": 1}, {"k": {"x": 1}}))
    kinds = {v.kind for v in validate_trajectory(Trajectory("t", "g", invs, ("o", "o")))}
    assert kinds == {"step_gap", "empty_tool", "empty_key", "bad_value"}


def test_duplicate_id_at_log_level():
    t = traj([("a", {}, {})], tid="t1")
    assert [v.kind for v in validate_log(TrajectoryLog((t, t)))] == ["duplicate_id"]


def test_tool_universe():
    log = TrajectoryLog((traj([("a", {}, {}), ("b", {}, {})], tid="1"), traj([("c", {}, {})], tid="2")))
    assert log.tool_universe == {"a", "b", "c"}


@pytest.mark.parametrize("tools,k,expected", [
    (["A", "B", "C"], 2, [("A", "B"), ("B", "C")]),
    (["A"], 2, []),
    (["A", "B", "A", "B"], 3, [("A", "B", "A"), ("B", "A", "B")]),
])
def test_tool_windows(tools, k, expected):
    assert tool_windows(traj([(x, {}, {}) for x in tools]), k) == expected


def test_tool_windows_zero():
    with pytest.raises(ArgumentError):
        tool_windows(["A"], 0)


@given(st.lists(st.sampled_from("ABCD"), max_size=12), st.integers(1, 5))
def test_tool_windows_length(tools, k):
    assert len(tool_windows(tools, k)) == max(0, len(tools) - k + 1)


values = st.one_of(
    st.text(max_size=8), st.integers(-10**6, 10**6), st.booleans(),
    st.floats(allow_nan=False, allow_infinity=False, width=32),
    st.lists(st.text(max_size=4), max_size=3).map(tuple),
)
params = st.dictionaries(st.text(min_size=1, max_size=5), values, max_size=3)
invocation_args = st.tuples(st.sampled_from(["a", "b", "go_to"]), params, params,
                            st.sampled_from(list(Status)), st.sampled_from(list(Source)))


@settings(max_examples=150)
@given(st.lists(invocation_args, max_size=6), st.text(max_size=10),
       st.dictionaries(st.text(min_size=1, max_size=4), st.text(max_size=4), max_size=2))
def test_round_trip(steps, goal, metadata):
    t = traj(steps, goal=goal, metadata=metadata)
    back = parse_trajectory_record(serialize_trajectory(t))
    assert back == t
    assert validate_trajectory(back) == []


def test_load_log_reports_line(tmp_path):
    p = tmp_path / "log.jsonl"
    p.write_text(record([step(0)]) + "\n\n{broken\n", encoding="utf-8")
    with pytest.raises(ParseError, match=r"log\.jsonl:3:"):
        load_log(p)


def test_dump_then_load(tmp_path):
    ts = [traj([("a", {"x": "1"}, {"y": ("p", "q")})], tid=str(i)) for i in range(3)]
    dump_log(ts, tmp_path / "sub" / "log.jsonl")
    assert list(load_log(tmp_path / "sub" / "log.jsonl")) == ts


def test_load_log_rejects_duplicates(tmp_path):
    p = tmp_path / "log.jsonl"
    p.write_text(record([step(0)]) + "\n" + record([step(0)]) + "\n", encoding="utf-8")
    with pytest.raises(SchemaError, match="duplicate"):
        load_log(p)
