"""Relation label inventory: canonical labels, inversion map, question templates.

The schema ships as a TSV data file with one row per relation label.  Each row
carries the label, its inverse (empty when none), and the three question
templates used by the indirect prompting strategies.  Labels fall into three
symmetry classes:

* ``asymmetric`` -- the label has a distinct inverse (e.g. per:children and
  per:parents invert each other),
* ``symmetric`` -- the label is its own inverse (e.g. per:friends),
* ``other`` -- no inverse is defined.

``unanswerable`` is part of the inventory but is never offered as a candidate
relation; it marks abstention.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import DataError

UNANSWERABLE = "unanswerable"

ASYMMETRIC = "asymmetric"
SYMMETRIC = "symmetric"
OTHER = "other"

_SCHEMA_COLUMNS = ["label", "inverse", "restrictive", "yes_no", "open_ended"]
_RESTRICTIVE_SUFFIX = "Output True or False?"


@dataclass(frozen=True)
class QuestionTemplates:
    """Question templates for one relation, with {subj} / {obj} placeholders."""

    restrictive: str
    yes_no: str
    open_ended: str

    def fill(self, template: str, subj: str, obj: str) -> str:
        return template.replace("{subj}", subj).replace("{obj}", obj)


@dataclass(frozen=True)
class RelationEntry:
    label: str
    inverse: str | None
    templates: QuestionTemplates

    @property
    def symmetry(self) -> str:
        if self.inverse is None:
            return OTHER
        if self.inverse == self.label:
            return SYMMETRIC
        return ASYMMETRIC


class RelationSchema:
    """Ordered, validated collection of relation entries."""

    def __init__(self, entries: list[RelationEntry]):
        self.entries: tuple[RelationEntry, ...] = tuple(entries)
        self._by_label: dict[str, RelationEntry] = {}
        for entry in self.entries:
            if entry.label in self._by_label:
                raise DataError(f"duplicate relation label: {entry.label!r}")
            self._by_label[entry.label] = entry
        self._validate()
        # Suffix index used by normalize(): the part after the type prefix.
        self._by_suffix: dict[str, list[str]] = {}
        for label in self._by_label:
            suffix = label.split(":", 1)[-1]
            self._by_suffix.setdefault(suffix, []).append(label)

    def _validate(self) -> None:
        if UNANSWERABLE not in self._by_label:
            raise DataError(f"schema must include the {UNANSWERABLE!r} label")
        for entry in self.entries:
            if not entry.label or entry.label != entry.label.strip():
                raise DataError(f"bad relation label: {entry.label!r}")
            if entry.inverse is not None:
                other = self._by_label.get(entry.inverse)
                if other is None:
                    raise DataError(
                        f"{entry.label}: inverse {entry.inverse!r} is not in the schema"
                    )
                if other.inverse != entry.label:
                    raise DataError(
                        f"inversion is not an involution: {entry.label} -> "
                        f"{entry.inverse} -> {other.inverse}"
                    )
            for name in ("restrictive", "yes_no", "open_ended"):
                template = getattr(entry.templates, name)
                if "{subj}" not in template:
                    raise DataError(
                        f"{entry.label}: {name} template is missing the "
                        "{subj} placeholder"
                    )
            if not entry.templates.restrictive.endswith(_RESTRICTIVE_SUFFIX):
                raise DataError(
                    f"{entry.label}: restrictive template must end with "
                    f"{_RESTRICTIVE_SUFFIX!r}"
                )
            if not entry.templates.yes_no.endswith("?"):
                raise DataError(f"{entry.label}: yes/no template must be a question")
            if not entry.templates.open_ended.endswith("?"):
                raise DataError(f"{entry.label}: open-ended template must be a question")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, label: str) -> bool:
        return label in self._by_label

    def __iter__(self):
        return iter(self.entries)

    def entry(self, label: str) -> RelationEntry:
        try:
            return self._by_label[label]
        except KeyError:
            raise DataError(f"unknown relation label: {label!r}") from None

    def labels(self) -> list[str]:
        """All canonical labels in schema order, including unanswerable."""
        return [entry.label for entry in self.entries]

    def candidates(self) -> list[str]:
        """Candidate relation labels in schema order (unanswerable excluded)."""
        return [e.label for e in self.entries if e.label != UNANSWERABLE]

    def normalize(self, text: str) -> str | None:
        return normalize_label(text, self)


def normalize_label(text: str, schema: RelationSchema) -> str | None:
    """Map a free-form label mention onto a canonical label, or None.

    Lowercases, trims surrounding whitespace/punctuation, collapses spaces
    around ':' and '/', and rewrites internal whitespace or hyphens as
    underscores.  A bare suffix without a type prefix (e.g. "alternate names")
    resolves only when exactly one canonical label carries that suffix.
    """
    t = text.strip().lower()
    t = t.strip(" \t\r\n.,;!?\"'()[]")
    t = re.sub(r"\s*:\s*", ":", t)
    t = re.sub(r"\s*/\s*", "/", t)
    if not t:
        return None
    if ":" in t:
        prefix, suffix = t.split(":", 1)
        candidate = prefix + ":" + re.sub(r"[-\s]+", "_", suffix)
        return candidate if candidate in schema else None
    candidate = re.sub(r"[-\s]+", "_", t)
    if candidate in schema:
        return candidate
    matches = schema._by_suffix.get(candidate, [])
    if len(matches) == 1:
        return matches[0]
    return None


def load_schema(path: str | Path | None = None) -> RelationSchema:
    """Load a relation schema from a TSV file (the shipped one by default)."""
    if path is None:
        ref = resources.files("drebench").joinpath("data/relation_schema.tsv")
        content = ref.read_text(encoding="utf-8")
    else:
        content = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(content.splitlines(), delimiter="\t")
    rows = list(reader)
    if not rows or rows[0] != _SCHEMA_COLUMNS:
        raise DataError(
            f"schema file must have header {_SCHEMA_COLUMNS!r}, got {rows[:1]!r}"
        )
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(_SCHEMA_COLUMNS):
            raise DataError(f"schema line {lineno}: expected {len(_SCHEMA_COLUMNS)} columns")
        label, inverse, restrictive, yes_no, open_ended = row
        entries.append(
            RelationEntry(
                label=label,
                inverse=inverse or None,
                templates=QuestionTemplates(restrictive, yes_no, open_ended),
            )
        )
    return RelationSchema(entries)
