"""Vectorized skill repository: embed, search, expand, learn, correct.

Embeddings are 768-component unit vectors. A provider session supplies
them when configured; otherwise a deterministic fallback hashes word
1-2-grams into signed bins, so tests and offline runs are reproducible
bit-for-bit. Search is an exact flat cosine scan (desk scale), which is
oracle-equal to brute force by construction.

Skills are one JSON document each. The packaged innate set is read-only;
the store seeds working copies into its own directory and writes learned
skills beside them.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

EMBED_DIM = 768
EMBED_SEED = "skill-embed-v1"
NOVELTY_DISTANCE = 0.5
LEARN_RATING_GATE = 7
CORRECTION_RATING_GATE = 3
EXPAND_DEPTH_LIMIT = 3

_SKILL_REF_RE = re.compile(r"\[SKILL:\s*([^|\]]+?)\s*(?:\|[^\]]*)?\]")
_WORD_RE = re.compile(r"[A-Za-z0-9_]+")

_CJK_RANGES = (
    (0x3040, 0x30FF),   # kana
    (0x3400, 0x4DBF),   # CJK ext A
    (0x4E00, 0x9FFF),   # CJK unified
    (0xAC00, 0xD7AF),   # hangul
    (0xF900, 0xFAFF),   # compatibility ideographs
)

_TAG_STOPWORDS = {
    "the", "a", "an", "and", "or", "to", "of", "in", "on", "for", "with",
    "into", "from", "this", "that", "file", "type",
}


class SkillError(Exception):
    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


@dataclass
class SkillParam:
    name: str
    description: str = ""


@dataclass
class Skill:
    name: str
    category: str
    tags: list[str] = field(default_factory=list)
    procedure: list[str] = field(default_factory=list)
    params: list[SkillParam] = field(default_factory=list)
    success_count: int = 0
    failure_count: int = 0
    origin: str = "innate"
    embedding: np.ndarray | None = None

    def doc_text(self) -> str:
        return " ".join([self.name.replace("-", " ")] + self.tags
                        + self.procedure)

    def to_json(self, include_embedding: bool = False) -> dict:
        d = {
            "name": self.name, "category": self.category, "tags": self.tags,
            "procedure": self.procedure,
            "params": [asdict(p) for p in self.params],
            "success_count": self.success_count,
            "failure_count": self.failure_count, "origin": self.origin,
        }
        if include_embedding and self.embedding is not None:
            d["embedding"] = [float(x) for x in self.embedding]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Skill":
        emb = d.get("embedding")
        return cls(
            name=d["name"], category=d.get("category", ""),
            tags=list(d.get("tags", ())),
            procedure=list(d.get("procedure", ())),
            params=[SkillParam(**p) for p in d.get("params", ())],
            success_count=int(d.get("success_count", 0)),
            failure_count=int(d.get("failure_count", 0)),
            origin=d.get("origin", "innate"),
            embedding=np.asarray(emb, dtype=float) if emb else None)


@dataclass
class SkillMatch:
    skill: Skill
    cosine_distance: float


@dataclass
class ExecutedCall:
    instruction: str
    tool_type: str
    ok: bool


@dataclass
class ExecutionRecord:
    request: str
    summary: str = ""
    calls: list[ExecutedCall] = field(default_factory=list)
    inputs: dict[str, str] = field(default_factory=dict)


@dataclass
class Rejection:
    reason: str


@dataclass
class CorrectionTask:
    skill_name: str
    reason: str
    seed_request: str


# ---------------------------------------------------------------------------
# embedding
# ---------------------------------------------------------------------------

def _words(text: str) -> list[str]:
    return [w.lower() for w in _WORD_RE.findall(text)]


def fallback_embed(text: str, dim: int = EMBED_DIM,
                   seed: str = EMBED_SEED) -> np.ndarray:
    """Deterministic hash embedding: signed 1-2-gram bins, unit norm."""
    words = _words(text)
    if not words:
        raise SkillError("empty_text", "cannot embed empty text")
    grams = list(words)
    grams.extend(f"{a} {b}" for a, b in zip(words, words[1:]))
    vec = np.zeros(dim, dtype=float)
    for gram in grams:
        digest = hashlib.sha256(f"{seed}\x1f{gram}".encode()).digest()
        idx = int.from_bytes(digest[:4], "big") % dim
        sign = 1.0 if digest[4] % 2 == 0 else -1.0
        vec[idx] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:  # all contributions cancelled; keep a unit axis
        vec[0] = 1.0
        norm = 1.0
    return vec / norm


def embed(text: str, provider=None) -> np.ndarray:
    """Provider-backed embedding with the deterministic fallback."""
    if not text or not text.strip():
        raise SkillError("empty_text", "cannot embed empty text")
    if provider is not None:
        raw = np.asarray(provider.embed(text), dtype=float)
        if raw.shape != (EMBED_DIM,):
            raise SkillError(
                "empty_text",
                f"provider returned shape {raw.shape}, want ({EMBED_DIM},)")
        norm = float(np.linalg.norm(raw))
        if norm == 0.0:
            raise SkillError("empty_text", "provider returned a zero vector")
        return raw / norm
    return fallback_embed(text)


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(1.0 - float(np.dot(a, b)))


# ---------------------------------------------------------------------------
# language normalization
# ---------------------------------------------------------------------------

def contains_cjk(text: str) -> bool:
    return any(lo <= ord(ch) <= hi for ch in text for lo, hi in _CJK_RANGES)


class DictionaryTranslator:
    """Demo translator: longest-match dictionary substitution."""

    def __init__(self, table: dict[str, str] | None = None) -> None:
        if table is None:
            table = json.loads(
                (resources.files("triphase") / "assets"
                 / "translation_demo.json").read_text())
        self.table = dict(table)
        self._keys = sorted(self.table, key=len, reverse=True)

    def translate(self, text: str) -> str:
        out = text
        for key in self._keys:
            out = out.replace(key, " " + self.table[key] + " ")
        return re.sub(r"\s+", " ", out).strip()


def normalize_query_language(text: str, translator=None) -> str:
    """English normalization hook: identity unless CJK is present."""
    if not contains_cjk(text):
        return text
    translator = translator or DictionaryTranslator()
    return translator.translate(text)


# ---------------------------------------------------------------------------
# store
# ---------------------------------------------------------------------------

class SkillStore:
    def __init__(self, root: str | Path,
                 provider=None,
                 innate_dir: Path | None = None,
                 translator=None,
                 wall_clock: Callable[[], float] = time.time) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.provider = provider
        self.translator = translator
        self.wall_clock = wall_clock
        self._lock = threading.RLock()
        self._skills: dict[str, Skill] = {}
        self._seed_innate(innate_dir)
        self._load()

    def _seed_innate(self, innate_dir: Path | None) -> None:
        if innate_dir is None:
            src = resources.files("triphase") / "assets" / "skills"
            docs = [json.loads(f.read_text())
                    for f in src.iterdir() if f.name.endswith(".json")]
        else:
            docs = [json.loads(p.read_text())
                    for p in Path(innate_dir).glob("*.json")]
        for doc in docs:
            target = self.root / f"{doc['name']}.json"
            if not target.exists():
                target.write_text(json.dumps(doc, indent=2))

    def _load(self) -> None:
        for path in sorted(self.root.glob("*.json")):
            skill = Skill.from_json(json.loads(path.read_text()))
            if skill.embedding is None:
                skill.embedding = embed(skill.doc_text(), self.provider)
            self._skills[skill.name] = skill

    def _persist(self, skill: Skill) -> None:
        path = self.root / f"{skill.name}.json"
        path.write_text(json.dumps(
            skill.to_json(include_embedding=skill.origin == "learned"),
            indent=2))

    # -- queries ---------------------------------------------------------------

    def get(self, name: str) -> Skill | None:
        with self._lock:
            return self._skills.get(name)

    def all_skills(self) -> list[Skill]:
        with self._lock:
            return sorted(self._skills.values(), key=lambda s: s.name)

    def search_skills(self, query: str, k: int = 5) -> list[SkillMatch]:
        """Exact top-k by cosine distance over a flat scan."""
        query = normalize_query_language(query, self.translator)
        qvec = embed(query, self.provider)
        skills = self.all_skills()
        if not skills:
            return []
        matrix = np.stack([s.embedding for s in skills])
        distances = 1.0 - matrix @ qvec
        order = sorted(range(len(skills)),
                       key=lambda i: (distances[i], skills[i].name))
        return [SkillMatch(skills[i], float(distances[i]))
                for i in order[:max(0, k)]]

    def nearest_distance(self, text: str) -> float:
        matches = self.search_skills(text, k=1)
        return matches[0].cosine_distance if matches else float("inf")

    # -- expansion ---------------------------------------------------------------

    def expand_procedure(self, skill: Skill,
                         depth_limit: int = EXPAND_DEPTH_LIMIT) -> list[str]:
        """Inline nested skill references up to depth_limit levels.

        Deeper references stay literal; cycles terminate with a note.
        """
        def walk(current: Skill, depth: int, path: tuple[str, ...]) -> list[str]:
            steps: list[str] = []
            for step in current.procedure:
                refs = list(_SKILL_REF_RE.finditer(step))
                if not refs:
                    steps.append(step)
                    continue
                cursor = 0
                for m in refs:
                    before = step[cursor:m.start()].strip()
                    if before:
                        steps.append(before)
                    cursor = m.end()
                    name = m.group(1).strip()
                    target = self.get(name)
                    if name in path:
                        steps.append(f"{m.group(0)} (cycle detected, "
                                     "not expanded)")
                    elif depth >= depth_limit or target is None:
                        steps.append(m.group(0))
                    else:
                        steps.extend(walk(target, depth + 1, path + (name,)))
                tail = step[cursor:].strip()
                if tail:
                    steps.append(tail)
            return steps

        return walk(skill, 0, (skill.name,))

    # -- learning -----------------------------------------------------------------

    def learn_from_execution(self, record: ExecutionRecord,
                             rating_raw: int) -> Skill | Rejection:
        successful = [c for c in record.calls if c.ok]
        if not successful:
            return Rejection("no_successful_calls")
        if rating_raw < LEARN_RATING_GATE:
            return Rejection("rating_below_gate")
        seed_text = record.summary or record.request
        distance = self.nearest_distance(seed_text)
        if distance <= NOVELTY_DISTANCE:
            return Rejection("not_novel")

        name = self._unique_name(self._slug(seed_text))
        tags = self._derive_tags(successful)
        procedure = []
        params: list[SkillParam] = []
        for call in successful:
            instruction = call.instruction
            for key, value in record.inputs.items():
                if value and value in instruction:
                    instruction = instruction.replace(value, "{%s}" % key)
                    if all(p.name != key for p in params):
                        params.append(SkillParam(
                            name=key, description=f"example value: {value}"))
            procedure.append(
                f"[TOOL_CALL: {instruction} | type: {call.tool_type}]")

        skill = Skill(
            name=name, category=successful[0].tool_type, tags=tags,
            procedure=procedure, params=params, origin="learned")
        skill.embedding = embed(skill.doc_text(), self.provider)
        with self._lock:
            self._skills[name] = skill
            self._persist(skill)
        return skill

    def request_correction(self, skill: Skill,
                           rating_raw: int) -> CorrectionTask | None:
        with self._lock:
            live = self._skills.get(skill.name)
            if live is None:
                raise SkillError("not_found", f"no skill {skill.name}")
            if rating_raw <= CORRECTION_RATING_GATE:
                live.failure_count += 1
                self._persist(live)
                return CorrectionTask(
                    skill_name=live.name,
                    reason=f"rated {rating_raw} (at or below "
                           f"{CORRECTION_RATING_GATE})",
                    seed_request=(
                        f"Review and correct the skill '{live.name}'. "
                        f"Current procedure: " + " ; ".join(live.procedure)))
            if rating_raw >= LEARN_RATING_GATE:
                live.success_count += 1
                self._persist(live)
            return None

    # -- helpers --------------------------------------------------------------------

    @staticmethod
    def _slug(text: str) -> str:
        words = [w for w in _words(text) if w not in _TAG_STOPWORDS][:5]
        return "-".join(words) or "learned-skill"

    def _unique_name(self, base: str) -> str:
        with self._lock:
            if base not in self._skills:
                return base
            for i in range(2, 1000):
                cand = f"{base}-{i}"
                if cand not in self._skills:
                    return cand
        return f"{base}-{uuid.uuid4().hex[:6]}"

    @staticmethod
    def _derive_tags(calls: Iterable[ExecutedCall], top: int = 5) -> list[str]:
        counts: dict[str, int] = {}
        for call in calls:
            for w in _words(call.instruction):
                if len(w) >= 3 and w not in _TAG_STOPWORDS:
                    counts[w] = counts.get(w, 0) + 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return [w for w, _ in ranked[:top]]
