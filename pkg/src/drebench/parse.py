"""Answer cleansing: free-form completions -> label sets or judgments.

The cleansing rule mirrors how the prompts are phrased: only the part of the
answer that first satisfies the expected answer format counts, and an answer
that never satisfies the format is treated as negative (for judgments) or as
abstention (for label sets).  Abstention is expressed by the ``unanswerable``
label and never coexists with positive labels.
"""

from __future__ import annotations

import re

from .corpus import ArgumentPair
from .schema import UNANSWERABLE, RelationSchema, normalize_label

_LABEL_SPAN_RE = re.compile(r"\b(?:per|org|gpe)\s*:\s*[a-zA-Z0-9_/ -]+", re.IGNORECASE)
_TRUE_FALSE_RE = re.compile(r"\b(true|false)\b", re.IGNORECASE)
_YES_NO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def _normalize_ws(text: str) -> str:
    return " ".join(text.split()).lower()


def cleanse_direct_answer(text: str, schema: RelationSchema) -> list[str]:
    """Ordered canonical labels recovered from a direct answer, possibly empty.

    Splits on list delimiters and normalizes each piece; when nothing
    normalizes, falls back to scanning for type-prefixed label spans inside
    prose (trimming trailing words until a span matches).  The empty result
    signals an unparseable answer.
    """
    labels: list[str] = []

    def push(label: str | None) -> bool:
        if label and label not in labels:
            labels.append(label)
        return label is not None

    for token in re.split(r"[,;\n|]+", text):
        push(normalize_label(token, schema))
    if not labels:
        pos = 0
        while (match := _LABEL_SPAN_RE.search(text, pos)) is not None:
            words = match.group(0).split()
            # spans are greedy ("per:siblings and per:title"); trim words off
            # the end until a prefix normalizes, then rescan the remainder
            for cut in range(len(words), 0, -1):
                if push(normalize_label(" ".join(words[:cut]), schema)):
                    break
            pos = match.start() + 1
    return labels


def parse_direct_answer(text: str, schema: RelationSchema) -> frozenset[str]:
    """Predicted label set for a direct answer; abstention when unparseable."""
    labels = cleanse_direct_answer(text, schema)
    positives = [l for l in labels if l != UNANSWERABLE]
    return frozenset(positives) if positives else frozenset({UNANSWERABLE})


def parse_boolean_answer(text: str, style: str) -> bool:
    """First True/False (restrictive) or Yes/No (yes_no) token; default False."""
    if style == "restrictive":
        match = _TRUE_FALSE_RE.search(text)
        return match is not None and match.group(1).lower() == "true"
    if style == "yes_no":
        match = _YES_NO_RE.search(text)
        return match is not None and match.group(1).lower() == "yes"
    raise ValueError(f"not a boolean answer style: {style!r}")


def parse_open_ended_answer(text: str, pair: ArgumentPair) -> bool:
    """Does the first sentence of the answer name the expected object?"""
    for sentence in re.split(r"[.?!\n]", text):
        sentence = sentence.strip()
        if sentence:
            return _normalize_ws(pair.object) in _normalize_ws(sentence)
    return False


def aggregate_indirect(judgments: list[tuple[str, bool]]) -> frozenset[str]:
    """Combine per-relation judgments into a label set (abstain when all no)."""
    positives = [label for label, positive in judgments if positive]
    for label in positives:
        if label == UNANSWERABLE:
            raise ValueError("unanswerable is not a candidate relation")
    return frozenset(positives) if positives else frozenset({UNANSWERABLE})


def parse_landre_output(text: str, schema: RelationSchema) -> frozenset[str]:
    """Labels recovered from a delimiter-format answer ``| r1 | r2 | ... |``.

    Only the first pipe-delimited run in the answer counts.  Cells that do
    not normalize to a candidate label are dropped; no surviving cell means
    abstention.
    """
    match = re.search(r"\|[^|]*(?:\|[^|]*)+", text)
    labels: list[str] = []
    if match:
        for cell in match.group(0).split("|"):
            label = normalize_label(cell, schema)
            if label and label != UNANSWERABLE and label not in labels:
                labels.append(label)
    else:
        label = normalize_label(text, schema)
        if label and label != UNANSWERABLE:
            labels.append(label)
    return frozenset(labels) if labels else frozenset({UNANSWERABLE})
