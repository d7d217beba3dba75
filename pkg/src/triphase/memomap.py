"""Hierarchical memory: four entry kinds, dual merges, rated retrieval.

Entries live in one JSONL store per kind with an index file; merges
rewrite atomically. Merge A is fast dedup (hash + token-set Jaccard),
triggered when the session count passes a threshold. Merge B is the
model-backed daily consolidation supervised by a reviewer session.
Retrieval is rating-weighted token overlap returning up to 2 positive
and 1 negative entries plus an anti-duplication notice. Numeric facts
are extracted at store time and power contradiction detection against
fresh tool results.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

SESSION = "session"
PIPELINE = "pipeline"
DAILY_SUMMARY = "daily_summary"
REFINED = "refined"
KINDS = (SESSION, PIPELINE, DAILY_SUMMARY, REFINED)

MERGE_A_THRESHOLD = 20
JACCARD_NEAR_DUP = 0.9

ANTI_DUPLICATION_NOTICE = (
    "Loaded memories are historical context only. Do not present "
    "remembered values as fresh results; verify anything time-sensitive "
    "with a tool call before citing it.")

_STOPWORDS = {
    "the", "a", "an", "is", "are", "was", "were", "be", "been", "of", "to",
    "in", "on", "at", "for", "and", "or", "it", "its", "this", "that",
    "now", "with", "by", "from", "as", "has", "have", "had", "will", "would",
}

_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")
_WORD_RE = re.compile(r"[A-Za-z0-9_]+")


@dataclass
class NumericFact:
    context_phrase: str
    value: float
    tokens: list[str] = field(default_factory=list)


@dataclass
class MemoryEntry:
    id: str
    kind: str
    created_at: float
    content: str
    tags: list[str] = field(default_factory=list)
    rating_internal: int | None = None
    reflection: str = ""
    numeric_facts: list[NumericFact] = field(default_factory=list)
    superseded_by: str | None = None
    source_day: str | None = None
    source_ids: list[str] = field(default_factory=list)
    consolidated: bool = False

    def to_json(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "MemoryEntry":
        facts = [NumericFact(**f) for f in d.pop("numeric_facts", [])]
        return cls(numeric_facts=facts, **d)


@dataclass
class RetrievalBundle:
    positives: list[MemoryEntry] = field(default_factory=list)
    negative: MemoryEntry | None = None
    anti_duplication_notice: str = ANTI_DUPLICATION_NOTICE

    def all_entries(self) -> list[MemoryEntry]:
        out = list(self.positives)
        if self.negative is not None:
            out.append(self.negative)
        return out


@dataclass
class ContradictionFlag:
    entry_id: str
    context_phrase: str
    memory_value: float
    observed_value: float
    warning: str


class MemomapError(Exception):
    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in _WORD_RE.findall(text)]


def info_tokens(text: str) -> set[str]:
    """Information-bearing tokens: alnum length >= 4 minus stopwords,
    plus all numeric tokens (decimals kept whole)."""
    out = {m.group(0) for m in _NUMBER_RE.finditer(text)}
    for tok in tokenize(text):
        if tok.isdigit():
            continue  # already captured with any decimal part
        if len(tok) >= 4 and tok not in _STOPWORDS:
            out.add(tok)
    return out


def is_nontrivial_number(literal: str) -> bool:
    return len(literal) >= 2 or "." in literal


def extract_numeric_facts(text: str) -> list[NumericFact]:
    """Numbers paired with the nearest preceding 3-token word window."""
    facts: list[NumericFact] = []
    tokens = [(m.group(0), m.start()) for m in
              re.finditer(r"[A-Za-z0-9_.]+", text)]
    for i, (tok, _) in enumerate(tokens):
        m = _NUMBER_RE.fullmatch(tok.rstrip("."))
        if not m or not is_nontrivial_number(m.group(0)):
            continue
        window = [t.lower().strip(".") for t, _ in tokens[max(0, i - 3):i]]
        words = [w for w in window
                 if w and not _NUMBER_RE.fullmatch(w) and w not in _STOPWORDS]
        if not words:
            continue
        facts.append(NumericFact(
            context_phrase=" ".join(words), value=float(m.group(0)),
            tokens=words))
    return facts


def nontrivial_numbers(text: str) -> set[str]:
    return {m.group(0) for m in _NUMBER_RE.finditer(text)
            if is_nontrivial_number(m.group(0))}


class MemoMap:
    """Single-writer multi-reader memory store over JSONL files."""

    def __init__(self, root: str | Path,
                 merge_threshold: int = MERGE_A_THRESHOLD,
                 wall_clock: Callable[[], float] = time.time) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.merge_threshold = merge_threshold
        self.wall_clock = wall_clock
        self._lock = threading.RLock()
        self._entries: dict[str, MemoryEntry] = {}
        self._load()

    # -- persistence ---------------------------------------------------------

    def _file_for(self, kind: str) -> Path:
        return self.root / f"{kind}.jsonl"

    def _load(self) -> None:
        for kind in KINDS:
            path = self._file_for(kind)
            if not path.exists():
                continue
            for line in path.read_text().splitlines():
                if not line.strip():
                    continue
                entry = MemoryEntry.from_json(json.loads(line))
                self._entries[entry.id] = entry

    def _append(self, entry: MemoryEntry) -> None:
        with self._file_for(entry.kind).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry.to_json()) + "\n")

    def _rewrite_all(self) -> None:
        """Atomic replace of every kind file plus the index."""
        by_kind: dict[str, list[MemoryEntry]] = {k: [] for k in KINDS}
        for entry in self._entries.values():
            by_kind[entry.kind].append(entry)
        for kind, entries in by_kind.items():
            entries.sort(key=lambda e: e.created_at)
            tmp = self._file_for(kind).with_suffix(".jsonl.tmp")
            tmp.write_text(
                "".join(json.dumps(e.to_json()) + "\n" for e in entries))
            tmp.replace(self._file_for(kind))
        index = {
            "counts": {k: len(v) for k, v in by_kind.items()},
            "updated_at": self.wall_clock(),
            "merge_threshold": self.merge_threshold,
        }
        tmp = self.root / "index.json.tmp"
        tmp.write_text(json.dumps(index, indent=2))
        tmp.replace(self.root / "index.json")

    # -- core operations -----------------------------------------------------

    def entries(self, kind: str | None = None,
                include_superseded: bool = False) -> list[MemoryEntry]:
        with self._lock:
            out = [e for e in self._entries.values()
                   if (kind is None or e.kind == kind)
                   and (include_superseded or e.superseded_by is None)]
        return sorted(out, key=lambda e: e.created_at)

    def get(self, entry_id: str) -> MemoryEntry | None:
        with self._lock:
            return self._entries.get(entry_id)

    def count(self, kind: str) -> int:
        with self._lock:
            return sum(1 for e in self._entries.values() if e.kind == kind)

    def store_entry(self, kind: str, content: str,
                    tags: Iterable[str] = (),
                    rating_internal: int | None = None,
                    source_day: str | None = None,
                    source_ids: Iterable[str] = ()) -> str:
        if kind not in KINDS:
            raise MemomapError("persistence_error", f"unknown kind {kind}")
        if kind == DAILY_SUMMARY and not source_day:
            raise MemomapError("persistence_error",
                               "daily_summary requires source_day")
        entry = MemoryEntry(
            id=uuid.uuid4().hex[:16], kind=kind,
            created_at=self.wall_clock(), content=content,
            tags=[t.lower() for t in tags],
            rating_internal=rating_internal,
            numeric_facts=extract_numeric_facts(content),
            source_day=source_day, source_ids=list(source_ids))
        with self._lock:
            self._entries[entry.id] = entry
            self._append(entry)
            if kind == SESSION and self.count(SESSION) > self.merge_threshold:
                self.merge_a()
        return entry.id

    # -- merge A: fast dedup ---------------------------------------------------

    @staticmethod
    def _content_hash(content: str) -> str:
        normalized = re.sub(r"\s+", " ", content.lower()).strip()
        return hashlib.sha256(normalized.encode()).hexdigest()

    @staticmethod
    def _jaccard(a: set[str], b: set[str]) -> float:
        if not a and not b:
            return 1.0
        return len(a & b) / len(a | b)

    def merge_a(self) -> int:
        """Remove exact and near-duplicate sessions; idempotent."""
        with self._lock:
            sessions = [e for e in self.entries(SESSION)]
            removed: set[str] = set()

            by_hash: dict[str, MemoryEntry] = {}
            for entry in sessions:
                h = self._content_hash(entry.content)
                keeper = by_hash.get(h)
                if keeper is None:
                    by_hash[h] = entry
                    continue
                victim, keeper = self._pick_duplicate(keeper, entry)
                by_hash[h] = keeper
                removed.add(victim.id)

            survivors = [e for e in sessions if e.id not in removed]
            token_sets = {e.id: set(tokenize(e.content)) for e in survivors}
            for i, a in enumerate(survivors):
                if a.id in removed:
                    continue
                for b in survivors[i + 1:]:
                    if b.id in removed:
                        continue
                    if self._jaccard(token_sets[a.id], token_sets[b.id]) \
                            >= JACCARD_NEAR_DUP:
                        victim, _ = self._pick_duplicate(a, b)
                        removed.add(victim.id)
                        if victim is a:
                            break

            for entry_id in removed:
                self._entries.pop(entry_id, None)
            if removed:
                self._rewrite_all()
            return len(removed)

    @staticmethod
    def _pick_duplicate(a: MemoryEntry, b: MemoryEntry) \
            -> tuple[MemoryEntry, MemoryEntry]:
        """Return (victim, keeper): keep higher rating, then more recent."""
        ra = a.rating_internal or 0
        rb = b.rating_internal or 0
        if (rb, b.created_at) >= (ra, a.created_at):
            return a, b
        return b, a

    # -- merge B: model-based daily consolidation ------------------------------

    def unconsolidated_days(self) -> list[str]:
        days = set()
        for entry in self.entries(SESSION):
            if not entry.consolidated:
                days.add(self.day_of(entry))
        return sorted(days)

    def day_of(self, entry: MemoryEntry) -> str:
        return time.strftime("%Y-%m-%d", time.gmtime(entry.created_at))

    def merge_b(self, day: str, summarizer_session, reviewer_session) \
            -> MemoryEntry | None:
        """Consolidate one day's sessions into a daily summary.

        The reviewer supervises: a rejection triggers exactly one
        regeneration. Model errors leave the day unconsolidated for the
        next pulse.
        """
        with self._lock:
            sources = [e for e in self.entries(SESSION)
                       if not e.consolidated and self.day_of(e) == day]
        if not sources:
            return None
        digest = "\n---\n".join(e.content for e in sources)
        prompt = (f"Summarize the following {len(sources)} session notes "
                  f"from {day} into one coherent daily summary:\n{digest}")
        try:
            summary = summarizer_session.generate(prompt)
            review = reviewer_session.generate(
                "Review this daily summary for accuracy and coverage. "
                "Answer ACCEPT or REJECT with reasons.\n" + summary)
            if "reject" in review.lower():
                summary = summarizer_session.generate(
                    prompt + "\nThe previous attempt was rejected: "
                    + review + "\nRegenerate the summary.")
        except Exception:
            return None

        with self._lock:
            entry_id = self.store_entry(
                DAILY_SUMMARY, summary,
                tags=sorted({t for e in sources for t in e.tags}),
                source_day=day, source_ids=[e.id for e in sources])
            for src in sources:
                src.consolidated = True
            self._rewrite_all()
            return self._entries[entry_id]

    def consolidate_summaries(self, summarizer_session, reviewer_session) \
            -> MemoryEntry | None:
        """Weekly pass: re-consolidate daily summaries into a refined entry."""
        with self._lock:
            summaries = [e for e in self.entries(DAILY_SUMMARY)
                         if not e.consolidated]
        if not summaries:
            return None
        digest = "\n---\n".join(e.content for e in summaries)
        try:
            refined = summarizer_session.generate(
                "Distill these daily summaries into durable long-term "
                "knowledge:\n" + digest)
            review = reviewer_session.generate(
                "Review this refined knowledge. Answer ACCEPT or REJECT.\n"
                + refined)
            if "reject" in review.lower():
                refined = summarizer_session.generate(
                    "Regenerate the distilled knowledge; the previous "
                    "attempt was rejected: " + review)
        except Exception:
            return None
        with self._lock:
            entry_id = self.store_entry(
                REFINED, refined, source_ids=[e.id for e in summaries])
            for s in summaries:
                s.consolidated = True
            self._rewrite_all()
            return self._entries[entry_id]

    # -- retrieval -------------------------------------------------------------

    def _relevance(self, query_tokens: set[str], entry: MemoryEntry) -> float:
        entry_tokens = set(tokenize(entry.content)) | set(entry.tags)
        overlap = len(query_tokens & entry_tokens)
        weight = entry.rating_internal if entry.rating_internal else 3
        score = overlap * weight
        if entry.consolidated:
            score *= 0.5
        return score

    def rank(self, query: str) -> list[MemoryEntry]:
        """All retrievable entries ranked by rating-weighted relevance."""
        query_tokens = set(tokenize(query))
        candidates = self.entries()
        return sorted(
            candidates,
            key=lambda e: (self._relevance(query_tokens, e),
                           e.rating_internal or 0, e.created_at),
            reverse=True)

    def retrieve_context(self, query: str) -> RetrievalBundle:
        ranked = self.rank(query)
        positives = [e for e in ranked
                     if e.rating_internal is not None and e.rating_internal >= 4]
        negatives = [e for e in ranked
                     if e.rating_internal is not None and e.rating_internal <= 2]
        chosen = positives[:2]
        chosen.sort(key=lambda e: (e.rating_internal, e.created_at),
                    reverse=True)
        return RetrievalBundle(
            positives=chosen,
            negative=negatives[0] if negatives else None)

    # -- ratings ---------------------------------------------------------------

    def apply_rating(self, entry_id: str, raw: int,
                     reflection: str | None = None) -> MemoryEntry:
        if not isinstance(raw, int) or not 1 <= raw <= 10:
            raise MemomapError("out_of_range", f"rating {raw!r} not in 1..10")
        with self._lock:
            entry = self._entries.get(entry_id)
            if entry is None:
                raise MemomapError("not_found", f"no entry {entry_id}")
            entry.rating_internal = math.ceil(raw / 2)
            if reflection is not None:
                entry.reflection = reflection
            self._rewrite_all()
            return entry

    # -- contradiction detection ------------------------------------------------

    def detect_contradictions(self, tool_results: Iterable[str],
                              loaded: Iterable[MemoryEntry]) \
            -> list[ContradictionFlag]:
        """Flag and supersede memory facts contradicted by fresh results."""
        flags: list[ContradictionFlag] = []
        observed: list[NumericFact] = []
        for text in tool_results:
            observed.extend(extract_numeric_facts(text))
        if not observed:
            return flags
        with self._lock:
            for entry in loaded:
                live = self._entries.get(entry.id)
                if live is None or live.superseded_by is not None:
                    continue
                for fact in live.numeric_facts:
                    hit = next(
                        (o for o in observed
                         if set(o.tokens) & set(fact.tokens)
                         and o.value != fact.value), None)
                    if hit is None:
                        continue
                    mark = f"contradiction:{uuid.uuid4().hex[:8]}"
                    live.superseded_by = mark
                    flags.append(ContradictionFlag(
                        entry_id=live.id,
                        context_phrase=fact.context_phrase,
                        memory_value=fact.value,
                        observed_value=hit.value,
                        warning=(
                            f"memory {live.id} says {fact.context_phrase} = "
                            f"{fact.value:g} but a fresh result reports "
                            f"{hit.value:g}; the stale entry was superseded")))
                    break
            if flags:
                self._rewrite_all()
        return flags

    # -- export / import ---------------------------------------------------------

    def export_document(self) -> dict:
        return {"entries": [e.to_json() for e in
                            self.entries(include_superseded=True)]}

    def import_document(self, doc: dict) -> int:
        with self._lock:
            n = 0
            for raw in doc.get("entries", ()):
                entry = MemoryEntry.from_json(raw)
                if entry.id not in self._entries:
                    self._entries[entry.id] = entry
                    n += 1
            self._rewrite_all()
        return n
