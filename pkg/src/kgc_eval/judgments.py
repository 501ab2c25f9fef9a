"""Graded labels per (question, entity) with provenance and pool depth.

Original test answers are positives at depth 0. Entities that entered a
judgment pool carry the minimum pool depth at which any system contributed
them, which is what depth-restricted qrels slices are computed from.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import DataFormatError, EvaluationError
from .kg import AnswerSet, TripleQuestion

POSITIVE = "positive"
NEGATIVE = "negative"
LABELS = (POSITIVE, NEGATIVE)

PROV_ORIGINAL = "original"
PROV_ANNOTATED = "annotated"
PROV_TRIVIAL = "trivial-filtered"
PROVENANCES = (PROV_ORIGINAL, PROV_ANNOTATED, PROV_TRIVIAL)


@dataclass(frozen=True)
class JudgmentRecord:
    label: str
    provenance: str
    depth: int


class JudgmentSet:
    """Mapping (qid, entity) -> JudgmentRecord, one record per pair."""

    def __init__(self) -> None:
        self.records: dict[tuple[str, str], JudgmentRecord] = {}
        self._positives: dict[str, set[str]] | None = None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[tuple[tuple[str, str], JudgmentRecord]]:
        return iter(sorted(self.records.items()))

    def add(self, qid: str, entity: str, label: str, provenance: str, depth: int) -> None:
        if label not in LABELS:
            raise ValueError(f"unknown label {label!r}")
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        key = (qid, entity)
        if key in self.records:
            raise EvaluationError(f"duplicate judgment for {key}")
        self.records[key] = JudgmentRecord(label=label, provenance=provenance, depth=depth)
        self._positives = None

    def label_of(self, qid: str, entity: str) -> str | None:
        rec = self.records.get((qid, entity))
        return rec.label if rec else None

    def positives(self, qid: str) -> frozenset[str]:
        if self._positives is None:
            by_qid: dict[str, set[str]] = {}
            for (q, e), rec in self.records.items():
                if rec.label == POSITIVE:
                    by_qid.setdefault(q, set()).add(e)
            self._positives = by_qid
        return frozenset(self._positives.get(qid, ()))

    @property
    def n_positive(self) -> int:
        return sum(1 for rec in self.records.values() if rec.label == POSITIVE)

    @property
    def n_negative(self) -> int:
        return len(self.records) - self.n_positive

    @classmethod
    def from_answer_sets(
        cls, questions: Sequence[tuple[TripleQuestion, AnswerSet]]
    ) -> "JudgmentSet":
        """The sparse regime: every original test answer positive at depth 0."""
        js = cls()
        for q, answers in questions:
            for e in answers.answers:
                js.add(q.qid, e, POSITIVE, PROV_ORIGINAL, 0)
        return js

    def at_depth(self, d: int) -> "JudgmentSet":
        """Records whose entry depth is at most d (originals are depth 0)."""
        js = JudgmentSet()
        for (qid, entity), rec in self.records.items():
            if rec.depth <= d:
                js.add(qid, entity, rec.label, rec.provenance, rec.depth)
        return js

    def save(self, path: str) -> None:
        """Full-fidelity codec: qid<TAB>entity<TAB>label<TAB>provenance<TAB>depth."""
        with open(path, "w", encoding="utf-8") as f:
            for (qid, entity), rec in sorted(self.records.items()):
                f.write(f"{qid}\t{entity}\t{rec.label}\t{rec.provenance}\t{rec.depth}\n")

    @classmethod
    def load(cls, path: str) -> "JudgmentSet":
        js = cls()
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                fields = line.split("\t")
                if len(fields) != 5:
                    raise DataFormatError(f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
                qid, entity, label, provenance, depth_s = fields
                try:
                    depth = int(depth_s)
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: non-integer depth {depth_s!r}")
                js.add(qid, entity, label, provenance, depth)
        return js

    def qrels_lines(self) -> Iterable[str]:
        """Plain qrels lines (qid 0 entity rel), labels only, sorted."""
        for (qid, entity), rec in sorted(self.records.items()):
            rel = 1 if rec.label == POSITIVE else 0
            yield f"{qid} 0 {entity} {rel}"

    @classmethod
    def from_qrels(cls, path: str, provenance: str = PROV_ANNOTATED, depth: int = 0) -> "JudgmentSet":
        """Read plain qrels; provenance/depth are not recoverable from qrels."""
        js = cls()
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                fields = line.split()
                if len(fields) != 4:
                    raise DataFormatError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
                qid, _iter, entity, rel_s = fields
                try:
                    rel = int(rel_s)
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: non-integer relevance {rel_s!r}")
                js.add(qid, entity, POSITIVE if rel > 0 else NEGATIVE, provenance, depth)
        return js
