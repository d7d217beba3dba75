"""Model-backed text classification with nearest-label coercion."""

from __future__ import annotations

import re
import time

from triphase.router import ToolResult


class ClassifyError(Exception):
    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


def _norm(s: str) -> str:
    return re.sub(r"[^a-z0-9 ]+", "", s.lower()).strip()


def coerce_label(answer: str, labels: list[str]) -> str | None:
    """Map a model answer onto one provided label, or None.

    Nearest-match is deterministic: normalized equality first, then a
    unique prefix/containment match in either direction.
    """
    norm_answer = _norm(answer)
    normed = {_norm(lbl): lbl for lbl in labels}
    if norm_answer in normed:
        return normed[norm_answer]
    hits = [lbl for key, lbl in normed.items()
            if key and (norm_answer.startswith(key) or key.startswith(norm_answer)
                        or key in norm_answer)]
    if len(set(hits)) == 1:
        return hits[0]
    return None


def classify(text: str, labels: list[str], model_session) -> str:
    """Return exactly one of *labels* for *text* via the model session."""
    if len(labels) < 2:
        raise ClassifyError("model_error", "need at least two labels")
    prompt = (
        "Classify the text into exactly one of these labels and answer "
        f"with the label only: {', '.join(labels)}\n\nText: {text}")
    try:
        answer = model_session.generate(prompt)
    except Exception as exc:
        raise ClassifyError("model_error", str(exc)) from exc
    label = coerce_label(answer, labels)
    if label is None:
        raise ClassifyError(
            "label_not_in_set",
            f"model answered {answer!r}, not one of {labels}")
    return label


def classify_result(text: str, labels: list[str], model_session) -> ToolResult:
    try:
        label = classify(text, labels, model_session)
    except ClassifyError as exc:
        return ToolResult(ok=False, summary=str(exc), body=str(exc),
                          timestamp=time.time(), error_kind=exc.kind)
    return ToolResult(ok=True, summary=label, body=label,
                      timestamp=time.time())
