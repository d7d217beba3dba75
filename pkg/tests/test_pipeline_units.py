"""Review gate boundaries, search cache arithmetic, mode decisions."""

from __future__ import annotations

import itertools
import string

import pytest

from triphase.pipeline import (
    PipelineConfig,
    PlanRecord,
    SearchCache,
    classify_request,
    decide_execution_mode,
    parse_review_score,
    plan_final_answer,
    review_gate,
    select_conclusion,
    strip_meta_review,
)
from triphase.memomap import MemoryEntry
from triphase.router import ToolResult


def mem_entry(content: str) -> MemoryEntry:
    return MemoryEntry(id="m1", kind="session", created_at=0.0,
                       content=content)


def plan_of(text: str, rnd: int = 1) -> PlanRecord:
    return PlanRecord.from_text(text, rnd)


def alpha_words(n: int) -> list[str]:
    # Distinct pure-alpha info tokens (length >= 4, no digits).
    letters = string.ascii_lowercase
    out = []
    for combo in itertools.product(letters, repeat=3):
        out.append("tok" + "".join(combo) + "word")
        if len(out) == n:
            return out
    raise AssertionError("not enough words")


# ---------------------------------------------------------------------------
# score parsing
# ---------------------------------------------------------------------------

def test_score_parsing_variants():
    assert parse_review_score("score: 0.85") == (0.85, False)
    assert parse_review_score("I scored 0.2 overall") == (0.2, False)
    assert parse_review_score("Score = .9 for this") == (0.9, False)
    assert parse_review_score("score: 1") == (1.0, False)


def test_score_absent_is_zero_with_warning():
    value, malformed = parse_review_score("this plan looks fine to me")
    assert value == 0.0 and malformed


# ---------------------------------------------------------------------------
# guard 1: forbidden phrases
# ---------------------------------------------------------------------------

def test_forbidden_phrase_zeroes_score():
    plan = plan_of("As an AI, I cannot browse the web, so here goes.")
    record = review_gate(plan, "score: 0.95 looks great", 0.95, [], [])
    assert record.adjusted_score == 0.0
    assert "forbidden_phrase" in record.guards_fired


def test_forbidden_phrase_dominates_other_guards():
    plan = plan_of("as an AI I will reuse what memory says")
    review = "score: 0.85 but it does not meet the bar and is insufficient"
    record = review_gate(plan, review, 0.85, [], [])
    assert record.adjusted_score == 0.0


def test_clean_plan_passes_through():
    plan = plan_of("1. list the folder [TOOL_CALL: list /tmp | type: file_ops]")
    record = review_gate(plan, "score: 0.88 all good", 0.88, [], [])
    assert record.adjusted_score == 0.88
    assert record.guards_fired == set()


# ---------------------------------------------------------------------------
# guard 2: memory duplication boundaries
# ---------------------------------------------------------------------------

def test_duplication_boundary_at_40_percent():
    words = alpha_words(100)
    memory = [mem_entry(" ".join(words))]
    plan_39 = plan_of("plan " + " ".join(words[:39]))
    rec = review_gate(plan_39, "score: 0.8", 0.8, memory, [])
    assert "memory_duplication" not in rec.guards_fired
    assert rec.adjusted_score == 0.8

    plan_40 = plan_of("plan " + " ".join(words[:40]))
    rec = review_gate(plan_40, "score: 0.8", 0.8, memory, [])
    assert "memory_duplication" in rec.guards_fired
    assert rec.adjusted_score == 0.30


def test_duplication_boundary_at_three_hits():
    words = alpha_words(5)
    memory = [mem_entry(" ".join(words))]
    # 2 hits of 5 tokens: 0.4 overlap but below the hit floor.
    rec = review_gate(plan_of("use " + " ".join(words[:2])),
                      "score: 0.8", 0.8, memory, [])
    assert "memory_duplication" not in rec.guards_fired
    # 3 hits of 5 tokens: 0.6 overlap, 3 hits -> fires.
    rec = review_gate(plan_of("use " + " ".join(words[:3])),
                      "score: 0.8", 0.8, memory, [])
    assert "memory_duplication" in rec.guards_fired


def test_duplication_needs_zero_tool_calls():
    words = alpha_words(6)
    memory = [mem_entry(" ".join(words))]
    text = ("reuse " + " ".join(words[:4])
            + " [TOOL_CALL: verify the data | type: web_search]")
    rec = review_gate(plan_of(text), "score: 0.8", 0.8, memory, [])
    assert "memory_duplication" not in rec.guards_fired
    assert rec.adjusted_score == 0.8


def test_duplication_penalty_is_min_of_raw_and_030():
    words = alpha_words(6)
    memory = [mem_entry(" ".join(words))]
    rec = review_gate(plan_of("cite " + " ".join(words[:4])),
                      "score: 0.2", 0.2, memory, [])
    assert rec.adjusted_score == 0.2  # min(raw, 0.30) keeps lower raw


def test_shared_numbers_warning():
    memory = [mem_entry("the widget price 499 was set in 2024")]
    plan = plan_of("the widget price is 499, set in 2024, no need to check "
                   "[TOOL_CALL: noop | type: cli]")
    rec = review_gate(plan, "score: 0.8", 0.8, memory, [])
    assert any("numbers" in w for w in rec.warnings)


def test_one_shared_number_no_warning():
    memory = [mem_entry("the widget price 499 remains")]
    plan = plan_of("price 499 [TOOL_CALL: verify | type: web_search]")
    rec = review_gate(plan, "score: 0.8", 0.8, memory, [])
    assert not any("numbers" in w for w in rec.warnings)


# ---------------------------------------------------------------------------
# guard 3: score-text contradiction
# ---------------------------------------------------------------------------

def test_two_rejection_phrases_with_high_score_clamps_to_exactly_040():
    plan = plan_of("a plan [TOOL_CALL: x | type: cli]")
    review = ("score: 0.85\nThe plan does not meet requirements and "
              "provides insufficient coverage.")
    rec = review_gate(plan, review, 0.85, [], [])
    assert rec.adjusted_score == 0.40
    assert "score_text_contradiction" in rec.guards_fired


def test_one_rejection_phrase_no_clamp():
    plan = plan_of("a plan")
    rec = review_gate(plan, "score: 0.85\nit is insufficient", 0.85, [], [])
    assert rec.adjusted_score == 0.85


def test_rejection_phrases_with_low_score_untouched():
    plan = plan_of("a plan")
    review = "score: 0.30 does not meet the bar, insufficient work, lacks detail"
    rec = review_gate(plan, review, 0.30, [], [])
    assert rec.adjusted_score == 0.30
    assert "score_text_contradiction" not in rec.guards_fired


def test_boundary_raw_060_fires():
    plan = plan_of("p")
    review = "score: 0.60 it does not meet the bar and lacks rigor"
    rec = review_gate(plan, review, 0.60, [], [])
    assert rec.adjusted_score == 0.40


def test_adjusted_never_exceeds_raw_when_guard_fires():
    plan = plan_of("as an ai plan")
    for raw in (0.0, 0.2, 0.5, 0.9):
        rec = review_gate(plan, f"score: {raw}", raw, [], [])
        assert rec.adjusted_score <= raw


# ---------------------------------------------------------------------------
# search cache
# ---------------------------------------------------------------------------

def fake_result(text="cached") -> ToolResult:
    return ToolResult(ok=True, summary=text, body=text, timestamp=1.0)


def test_overlap_075_dedup_hit():
    cache = SearchCache()
    cache.admit("best rust http server")
    cache.store("best rust http server", fake_result())
    decision = cache.admit("best rust http framework")
    # Oracle: |{best,rust,http}| / min(4,4) = 0.75 >= 0.70
    assert decision.status == "dedup_hit"
    assert decision.cached.summary == "cached"
    assert cache.count == 1


def test_below_threshold_is_fresh():
    cache = SearchCache()
    cache.admit("rust web framework comparison")
    cache.store("rust web framework comparison", fake_result())
    decision = cache.admit("python packaging guide today")
    assert decision.status == "fresh"
    assert cache.count == 2


def test_limit_blocks_eleventh_fresh_search():
    cache = SearchCache()
    for i in range(9):
        assert cache.admit(f"distinct query number {i} "
                           f"{'x' * (i + 1)}").status == "fresh"
    assert cache.admit("ninth distinct unique query words").status == "fresh"
    assert cache.count == 10
    blocked = cache.admit("totally different eleventh search attempt")
    assert blocked.status == "limit_blocked"
    assert cache.count == 10


def test_dedup_still_served_after_limit():
    cache = SearchCache()
    for i in range(10):
        q = f"query {i} alpha beta gamma{i}"
        assert cache.admit(q).status == "fresh"
        cache.store(q, fake_result(f"r{i}"))
    hit = cache.admit("query 3 alpha beta gamma3")
    assert hit.status == "dedup_hit" and hit.cached.summary == "r3"


# ---------------------------------------------------------------------------
# classification and mode decision
# ---------------------------------------------------------------------------

def test_poem_is_generative_without_indicators():
    generative, indicators = classify_request(
        "write a short poem about rain", "Here is a poem plan with no files")
    assert generative and not indicators


def test_code_plus_save_keeps_tools():
    generative, indicators = classify_request(
        "write code and save it to x.py then run it",
        "1. write the code 2. save it to x.py 3. run it")
    assert generative and indicators


def test_list_folder_not_generative():
    generative, _ = classify_request("list my downloads folder", "plan")
    assert not generative


def plan_with_calls(n: int, generative=False, indicators=False) -> PlanRecord:
    text = " ".join(f"[TOOL_CALL: step {i} | type: cli]" for i in range(n))
    plan = PlanRecord.from_text(text or "no calls", 1)
    plan.generative = generative
    plan.has_tool_indicators = indicators
    return plan


def test_four_calls_reuse_planner():
    assert decide_execution_mode(plan_with_calls(4)) == "reuse_planner"


def test_five_calls_switch_models():
    assert decide_execution_mode(plan_with_calls(5)) == "switch_models"


def test_generative_no_indicators_direct():
    assert decide_execution_mode(
        plan_with_calls(0, generative=True)) == "direct_output"


def test_generative_with_indicators_not_direct():
    mode = decide_execution_mode(
        plan_with_calls(2, generative=True, indicators=True))
    assert mode == "reuse_planner"


# ---------------------------------------------------------------------------
# conclusion selection
# ---------------------------------------------------------------------------

def test_planning_like_final_skipped():
    c = select_conclusion("Step 1: gather data from the sources",
                          "The answer is 42 units.", "executor text")
    assert c.source == "reviewer"
    assert "42" in c.text


def test_substantive_planner_wins():
    c = select_conclusion("The file was moved successfully.", "review", "x")
    assert c.source == "planner"
    assert c.text == "The file was moved successfully."


def test_executor_fallback():
    c = select_conclusion(None, "", "only the executor spoke here.")
    assert c.source == "executor"


def test_meta_review_sentences_stripped():
    review = ("The plan misses the copy step. The result is 7 files moved. "
              "Planner should add verification.")
    stripped = strip_meta_review(review)
    assert "plan" not in stripped.lower()
    assert "7 files moved" in stripped


def test_no_candidates_errors():
    import pytest as _p
    from triphase.pipeline import PipelineError
    with _p.raises(PipelineError) as exc:
        select_conclusion("", "", "")
    assert exc.value.kind == "no_candidates"


def test_plan_final_answer_extraction():
    assert plan_final_answer("steps...\nFINAL_ANSWER: done and dusted") == \
        "done and dusted"
    assert plan_final_answer("no answer here") is None


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(quality_threshold=0.0)
    with pytest.raises(ValueError):
        PipelineConfig(max_rounds=0)


def test_defaults_match_published_constants():
    cfg = PipelineConfig()
    assert cfg.max_rounds == 3
    assert cfg.quality_threshold == 0.70
    assert cfg.max_exec_steps == 10
    assert cfg.simple_plan_max_calls == 4
    assert cfg.search_limit == 10
    assert cfg.search_overlap == 0.70
    assert len(cfg.forbidden_phrases) == 6
    assert cfg.rejection_phrases == ("does not meet", "insufficient", "lacks")
    assert cfg.duplication_overlap == 0.40
    assert cfg.duplication_min_hits == 3
    assert cfg.duplication_min_shared_numbers == 2
