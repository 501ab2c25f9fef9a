"""TREC-style judgment pools over the top-ranked candidates of many systems.

The pool of a question set is the union, over systems, of the top-d
entities of each macro-filtered candidate list. Original test answers are
marked judged-positive on entry and never need annotation; trivially false
candidates are marked negative by rule instead of being deleted, so depth
accounting stays exact.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .errors import DataFormatError, EvaluationError
from .judgments import (
    NEGATIVE,
    POSITIVE,
    PROV_ORIGINAL,
    PROV_TRIVIAL,
    JudgmentSet,
)
from .kg import HEAD, TAIL, AnswerSet, GraphSplits, RelationStats, TripleQuestion
from .ranking import RunSet, filtered_candidates

log = logging.getLogger(__name__)

PENDING = "pending"
TRIVIAL_NEGATIVE = "trivial-negative"
JUDGED_POSITIVE = "judged:positive"


@dataclass
class PoolEntry:
    qid: str
    entity: str
    system_ranks: dict[str, int] = field(default_factory=dict)
    status: str = PENDING

    @property
    def min_depth(self) -> int:
        return min(self.system_ranks.values())

    def contributors(self) -> str:
        return ",".join(f"{tag}:{rank}" for tag, rank in sorted(self.system_ranks.items()))


@dataclass
class Pool:
    questions: dict[str, TripleQuestion]
    answers: dict[str, frozenset[str]]
    entries: dict[tuple[str, str], PoolEntry]
    systems: list[str]
    depth: int

    def pending(self) -> list[PoolEntry]:
        return [e for _, e in sorted(self.entries.items()) if e.status == PENDING]

    def status_counts(self) -> dict[str, int]:
        counts: dict[str, int] = defaultdict(int)
        for entry in self.entries.values():
            counts[entry.status] += 1
        return dict(counts)


@dataclass(frozen=True)
class TypeProfile:
    """Admissible entities per relation slot, by default profiled from train."""

    heads: Mapping[str, frozenset[str]]
    tails: Mapping[str, frozenset[str]]

    def admits(self, relation: str, direction: str, entity: str) -> bool:
        slots = self.heads if direction == HEAD else self.tails
        return entity in slots.get(relation, frozenset())


def derive_type_profile(splits: GraphSplits) -> TypeProfile:
    """An entity is slot-consistent iff it fills that slot in training."""
    heads: dict[str, set[str]] = defaultdict(set)
    tails: dict[str, set[str]] = defaultdict(set)
    for s, p, o in splits.train:
        heads[p].add(s)
        tails[p].add(o)
    return TypeProfile(
        heads={p: frozenset(v) for p, v in heads.items()},
        tails={p: frozenset(v) for p, v in tails.items()},
    )


DEFAULT_FALLBACK = "is ({subject}, {relation}, {object}) a true fact?"


@dataclass(frozen=True)
class TemplateSet:
    """Natural-language question patterns per relation, plus a fallback."""

    patterns: Mapping[str, str]
    fallback: str = DEFAULT_FALLBACK

    def __post_init__(self) -> None:
        for relation, pattern in self.patterns.items():
            _check_pattern(pattern, f"template for {relation!r}")
        _check_pattern(self.fallback, "fallback template")


def _check_pattern(pattern: str, what: str) -> None:
    for placeholder in ("{subject}", "{object}"):
        if pattern.count(placeholder) != 1:
            raise DataFormatError(f"{what} must contain {placeholder} exactly once: {pattern!r}")


def load_templates(path: str, fallback: str = DEFAULT_FALLBACK) -> TemplateSet:
    """Read relation<TAB>pattern lines."""
    patterns: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected 2 fields, got {len(fields)}")
            patterns[fields[0]] = fields[1]
    return TemplateSet(patterns=patterns, fallback=fallback)


def load_entity_labels(path: str) -> dict[str, str]:
    """Optional labels.tsv: entity id<TAB>human-readable name."""
    labels: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected 2 fields, got {len(fields)}")
            labels[fields[0]] = fields[1]
    return labels


def build_pool(
    questions: Sequence[tuple[TripleQuestion, AnswerSet]],
    runs: Sequence[RunSet],
    depth: int,
    macro_filters: Mapping[str, frozenset[str]] | None = None,
) -> Pool:
    """Union of each system's top-depth candidates per question.

    Candidate lists are macro-filtered before pooling when filters are
    given, so train/valid positives never enter the pool. Entries matching
    an original test answer are marked judged-positive immediately.
    """
    if depth < 1:
        raise EvaluationError(f"pool depth must be >= 1, got {depth}")
    tags = [run.tag for run in runs]
    if len(set(tags)) != len(tags):
        raise EvaluationError(f"system tags must be unique, got {tags}")

    pool = Pool(
        questions={q.qid: q for q, _ in questions},
        answers={q.qid: a.answers for q, a in questions},
        entries={},
        systems=tags,
        depth=depth,
    )
    for run in runs:
        for q, answers in questions:
            ranked = run.list_for(q.qid)  # raises if the run misses a seed question
            if macro_filters is not None:
                ranked = filtered_candidates(ranked, macro_filters[q.qid])
            for pos, (entity, _score) in enumerate(ranked.entries[:depth], start=1):
                entry = pool.entries.get((q.qid, entity))
                if entry is None:
                    status = JUDGED_POSITIVE if entity in answers.answers else PENDING
                    entry = PoolEntry(qid=q.qid, entity=entity, status=status)
                    pool.entries[(q.qid, entity)] = entry
                prev = entry.system_ranks.get(run.tag)
                if prev is None or pos < prev:
                    entry.system_ranks[run.tag] = pos
    return pool


def filter_trivial(
    pool: Pool,
    stats: Mapping[str, RelationStats],
    types: TypeProfile,
) -> Pool:
    """Mark trivially false entries as negatives, never deleting them.

    Rules: (1) the candidate entity is inconsistent with the relation's
    slot profile; (2) head-question entries of 1-1 and 1-N relations;
    (3) tail-question entries of 1-1 and N-1 relations. Judged-positive
    entries (original answers) are never marked.
    """
    entries: dict[tuple[str, str], PoolEntry] = {}
    for key, entry in pool.entries.items():
        question = pool.questions[entry.qid]
        relation = question.relation
        if relation not in stats:
            raise EvaluationError(f"no relation stats for pooled relation {relation!r}")
        new_status = entry.status
        if entry.status == PENDING:
            category = stats[relation].category
            if not types.admits(relation, question.direction, entry.entity):
                new_status = TRIVIAL_NEGATIVE
            elif question.direction == HEAD and category in ("1-1", "1-N"):
                new_status = TRIVIAL_NEGATIVE
            elif question.direction == TAIL and category in ("1-1", "N-1"):
                new_status = TRIVIAL_NEGATIVE
        entries[key] = replace(entry, system_ranks=dict(entry.system_ranks), status=new_status)
    return Pool(
        questions=pool.questions,
        answers=pool.answers,
        entries=entries,
        systems=list(pool.systems),
        depth=pool.depth,
    )


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    qid: str
    entity: str
    question_text: str
    subject: str
    relation: str
    object: str
    used_fallback: bool


def render_tasks(
    pool: Pool,
    templates: TemplateSet,
    entity_labels: Mapping[str, str] | None = None,
) -> list[AnnotationTask]:
    """One natural-language task per pending pool entry.

    Task ids are assigned over entries sorted by (qid, entity). Relations
    without a template use the fallback pattern and are flagged.
    """
    labels = entity_labels or {}
    tasks: list[AnnotationTask] = []
    for i, entry in enumerate(pool.pending(), start=1):
        question = pool.questions[entry.qid]
        if question.direction == TAIL:
            subject, obj = question.anchor, entry.entity
        else:
            subject, obj = entry.entity, question.anchor
        pattern = templates.patterns.get(question.relation)
        used_fallback = pattern is None
        if used_fallback:
            pattern = templates.fallback.replace("{relation}", question.relation)
        text = pattern.replace("{subject}", labels.get(subject, subject)).replace(
            "{object}", labels.get(obj, obj)
        )
        tasks.append(
            AnnotationTask(
                task_id=f"t{i:07d}",
                qid=entry.qid,
                entity=entry.entity,
                question_text=text,
                subject=subject,
                relation=question.relation,
                object=obj,
                used_fallback=used_fallback,
            )
        )
    return tasks


def trivial_judgments(pool: Pool) -> JudgmentSet:
    """Trivially filtered entries as negative judgments at their pool depth."""
    js = JudgmentSet()
    for (qid, entity), entry in sorted(pool.entries.items()):
        if entry.status == TRIVIAL_NEGATIVE:
            js.add(qid, entity, NEGATIVE, PROV_TRIVIAL, entry.min_depth)
    return js


def qrels_at_depth(pool: Pool, judgments: JudgmentSet, d: int) -> JudgmentSet:
    """Labels visible at pooling depth d.

    Keeps every original (depth-0) label plus the labels of pool entries
    first contributed at rank <= d; deeper entries revert to unjudged.
    Requires the pool to be fully judged: every non-original entry must
    have a record in the judgment set.
    """
    if not 0 <= d <= pool.depth:
        raise EvaluationError(f"depth {d} outside 0..{pool.depth}")
    out = JudgmentSet()
    for (qid, entity), rec in judgments.records.items():
        if rec.provenance == PROV_ORIGINAL:
            out.add(qid, entity, rec.label, rec.provenance, rec.depth)
    unjudged = 0
    for key, entry in sorted(pool.entries.items()):
        if entry.status == JUDGED_POSITIVE:
            continue  # an original answer, already covered above
        rec = judgments.records.get(key)
        if rec is None:
            unjudged += 1
            continue
        if rec.provenance != PROV_ORIGINAL and entry.min_depth <= d:
            out.add(key[0], key[1], rec.label, rec.provenance, entry.min_depth)
    if unjudged:
        raise EvaluationError(
            f"pool is not fully judged: {unjudged} entries lack a judgment record"
        )
    return out


def save_pool(pool: Pool, path: str, header_lines: Sequence[str] = ()) -> None:
    """Write the pool export, one line per entry, byte-stable."""
    with open(path, "w", encoding="utf-8") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        f.write(f"# pool-depth: {pool.depth}\n")
        f.write(f"# systems: {','.join(pool.systems)}\n")
        for (qid, entity), entry in sorted(pool.entries.items()):
            f.write(
                f"{qid}\t{entity}\t{entry.min_depth}\t{entry.status}\t{entry.contributors()}\n"
            )


def load_pool(path: str, questions: Sequence[tuple[TripleQuestion, AnswerSet]]) -> Pool:
    depth = None
    systems: list[str] = []
    entries: dict[tuple[str, str], PoolEntry] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("pool-depth:"):
                    depth = int(body.split(":", 1)[1].strip())
                elif body.startswith("systems:"):
                    systems = body.split(":", 1)[1].strip().split(",")
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise DataFormatError(f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
            qid, entity, _min_depth, status, contributors = fields
            ranks: dict[str, int] = {}
            for item in contributors.split(","):
                tag, _, rank_s = item.rpartition(":")
                ranks[tag] = int(rank_s)
            entries[(qid, entity)] = PoolEntry(
                qid=qid, entity=entity, system_ranks=ranks, status=status
            )
    if depth is None:
        raise DataFormatError(f"{path}: missing '# pool-depth:' header")
    return Pool(
        questions={q.qid: q for q, _ in questions},
        answers={q.qid: a.answers for q, a in questions},
        entries=entries,
        systems=systems,
        depth=depth,
    )
