"""Marker grammar tests: examples, round-trip, append monotonicity."""

from __future__ import annotations

import string

from hypothesis import given, settings
from hypothesis import strategies as st

from triphase.markers import (
    FINAL_ANSWER,
    INTERVENTION,
    SKILL,
    TOOL_CALL,
    Marker,
    SkillPayload,
    TextPayload,
    ToolCallPayload,
    extract_thinking,
    parse_markers,
    reconstruct,
    serialize_marker,
)


# ---------------------------------------------------------------------------
# parse_markers examples
# ---------------------------------------------------------------------------

def test_single_tool_call():
    s = parse_markers(r"[TOOL_CALL: list files in C:\data | type: file_ops]")
    assert len(s.items) == 1
    m = s.items[0]
    assert m.kind == TOOL_CALL
    assert m.payload.instruction == r"list files in C:\data"
    assert m.payload.raw_type == "file_ops"
    assert m.payload.context is None
    assert s.residual_text == ""


def test_empty_input():
    s = parse_markers("")
    assert s.items == [] and s.residual_text == "" and s.warnings == []


def test_tool_call_then_final_answer_order():
    # Hand-parse oracle: the bracketed marker spans chars 5..63; "then"
    # prose stays residual; the bare FINAL_ANSWER head owns the tail.
    text = ("do X [TOOL_CALL: ping example.com | type: network | context: latency]"
            " then FINAL_ANSWER: done")
    s = parse_markers(text)
    kinds = [m.kind for m in s.items]
    assert kinds == [TOOL_CALL, FINAL_ANSWER]
    assert s.items[0].payload.instruction == "ping example.com"
    assert s.items[0].payload.context == "latency"
    assert s.items[1].payload.text == "done"
    assert s.residual_text == "do X  then "


def test_skill_marker():
    s = parse_markers("[SKILL: open-app | name: notepad]")
    assert len(s.items) == 1
    m = s.items[0]
    assert m.kind == SKILL
    assert m.payload.name == "open-app"
    assert m.payload.params == {"name": "notepad"}


def test_missing_type_left_in_residual_with_warning():
    text = "[TOOL_CALL: do something with no type]"
    s = parse_markers(text)
    assert s.items == []
    assert s.residual_text == text
    assert s.warnings


def test_unbalanced_bracket_is_warning_not_error():
    text = "[TOOL_CALL: oops | type: cli"
    s = parse_markers(text)
    assert s.items == []
    assert s.residual_text == text
    assert any("unbalanced" in w for w in s.warnings)


def test_escaped_pipe_in_value():
    s = parse_markers(r"[TOOL_CALL: grep 'a\|b' file.txt | type: cli]")
    assert s.items[0].payload.instruction == "grep 'a|b' file.txt"


def test_final_answer_payload_extends_to_end_of_message():
    s = parse_markers("FINAL_ANSWER: first line\nsecond line")
    assert len(s.items) == 1
    assert s.items[0].payload.text == "first line\nsecond line"


def test_intervention_marker():
    s = parse_markers("INTERVENTION_NEEDED: which account should I use?")
    m = s.items[0]
    assert m.kind == INTERVENTION
    assert m.payload.text == "which account should I use?"


def test_bracketed_terminal_forms():
    s = parse_markers("x [FINAL_ANSWER: done] y [INTERVENTION_NEEDED: help] z")
    assert [m.kind for m in s.items] == [FINAL_ANSWER, INTERVENTION]
    assert s.residual_text == "x  y  z"


def test_skill_param_without_colon_is_malformed():
    text = "[SKILL: open-app | notepad]"
    s = parse_markers(text)
    assert s.items == []
    assert s.warnings


# ---------------------------------------------------------------------------
# round-trip and append properties
# ---------------------------------------------------------------------------

_plain_text = st.text(
    alphabet=string.ascii_letters + string.digits + " \n.,;:/\\'\"()-_",
    max_size=80,
)

_tool_markers = st.builds(
    lambda instr, typ, ctx: Marker(
        TOOL_CALL, ToolCallPayload(instr, typ, ctx or None), (0, 0), ""
    ),
    st.text(alphabet=string.ascii_letters + string.digits + " ._/|\\", min_size=1, max_size=30)
    .filter(lambda s: s.strip()),
    st.sampled_from(["cli", "file_ops", "web_read", "shell", "weird-type"]),
    st.one_of(st.none(), st.text(alphabet=string.ascii_letters + " ", max_size=10)
              .filter(lambda s: s is None or s.strip() or s == "")),
)

_skill_markers = st.builds(
    lambda name, params: Marker(SKILL, SkillPayload(name, params), (0, 0), ""),
    st.text(alphabet=string.ascii_lowercase + "-", min_size=1, max_size=15)
    .filter(lambda s: s.strip("-")),
    st.dictionaries(
        st.text(alphabet=string.ascii_lowercase, min_size=1, max_size=6),
        st.text(alphabet=string.ascii_letters + string.digits + " |", max_size=12),
        max_size=3,
    ),
)

_terminal_markers = st.builds(
    lambda kind, text: Marker(kind, TextPayload(text), (0, 0), ""),
    st.sampled_from([FINAL_ANSWER, INTERVENTION]),
    st.text(alphabet=string.ascii_letters + " ", max_size=20),
)

_any_marker = st.one_of(_tool_markers, _skill_markers, _terminal_markers)


@settings(max_examples=200)
@given(st.lists(st.tuples(_plain_text, _any_marker), max_size=5), _plain_text)
def test_roundtrip_byte_exact(pairs, tail):
    text = "".join(p + serialize_marker(m) for p, m in pairs) + tail
    stream = parse_markers(text)
    assert reconstruct(stream) == text


@settings(max_examples=200)
@given(_plain_text, _any_marker)
def test_append_bracketed_marker_adds_exactly_one_item(prefix, marker):
    before = parse_markers(prefix)
    after = parse_markers(prefix + serialize_marker(marker))
    assert len(after.items) == len(before.items) + 1


def test_roundtrip_with_malformed_and_valid_mixed():
    text = "a [TOOL_CALL: broken | no-type] b [SKILL: ok | k: v] c FINAL_ANSWER: end"
    assert reconstruct(parse_markers(text)) == text


# ---------------------------------------------------------------------------
# extract_thinking
# ---------------------------------------------------------------------------

def test_thinking_single_block():
    t = extract_thinking("<think>plan it</think>ok")
    assert t.thinking == "plan it"
    assert t.visible == "ok"


def test_thinking_absent():
    t = extract_thinking("no tags here")
    assert t.thinking == ""
    assert t.visible == "no tags here"


def test_thinking_two_blocks_hand_parse():
    # Hand parse: segments "a" and "b" join with newline; remaining "x"+"y".
    t = extract_thinking("<think>a</think>x<think>b</think>y")
    assert t.thinking == "a\nb"
    assert t.visible == "xy"


def test_thinking_unterminated_open():
    t = extract_thinking("pre<think>rest is thought")
    assert t.thinking == "rest is thought"
    assert t.visible == "pre"


def test_thinking_stray_closer_treats_prefix_as_thinking():
    t = extract_thinking("implicit</think>visible")
    assert t.thinking == "implicit"
    assert t.visible == "visible"


@settings(max_examples=200)
@given(st.lists(st.tuples(_plain_text, _plain_text), max_size=4), _plain_text)
def test_thinking_idempotent(pairs, tail):
    text = "".join(f"{v}<think>{t}</think>" for v, t in pairs) + tail
    first = extract_thinking(text)
    second = extract_thinking(first.visible)
    assert second.thinking == ""
    assert second.visible == first.visible
