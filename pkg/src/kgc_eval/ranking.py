"""Per-system ranked candidate lists and filtered-rank computation.

A run is either a TREC-format ranked list per question or a target-ranks
table mapping (question, answer) to the system-reported filtered rank.
Within a list, the canonical order is score descending with ties broken by
entity id descending, matching the reference trec_eval sort so that macro
metrics computed here and by the reference tool agree line for line.

Ranks of score-tied entities follow a tie policy: "mean" assigns the mean
of the tied positions (kept exact as a possibly half-integer float),
"optimistic" the best position, "pessimistic" the worst.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataFormatError, EvaluationError
from .kg import TAIL, AnswerSet, GraphSplits, Triple, TripleQuestion

log = logging.getLogger(__name__)

TIE_POLICIES = ("mean", "optimistic", "pessimistic")

RANKED = "ranked"
TARGET_RANKS = "target-ranks"


class RankBeyondDepthError(EvaluationError):
    """The target entity lies beyond a truncated list's visible depth."""


@dataclass
class RankedList:
    """Scored candidates for one question, sorted score desc / entity desc."""

    qid: str
    entries: list[tuple[str, float]]
    complete: bool = False

    _scores: dict[str, float] | None = field(default=None, repr=False)

    @property
    def depth(self) -> int:
        return len(self.entries)

    def score_of(self, entity: str) -> float | None:
        if self._scores is None:
            self._scores = {e: s for e, s in self.entries}
        return self._scores.get(entity)

    def sort(self) -> None:
        # Score desc, entity id desc (stable two-pass): trec_eval's order.
        self.entries.sort(key=lambda es: es[0], reverse=True)
        self.entries.sort(key=lambda es: es[1], reverse=True)
        self._scores = None


@dataclass
class RunSet:
    """One system's output: ranked lists or a target-rank table per question."""

    tag: str
    format: str = RANKED
    lists: dict[str, RankedList] = field(default_factory=dict)
    target_ranks: dict[tuple[str, str | None], float] = field(default_factory=dict)

    def list_for(self, qid: str) -> RankedList:
        try:
            return self.lists[qid]
        except KeyError:
            raise EvaluationError(f"run {self.tag!r} has no ranked list for question {qid}")


def filtered_rank(
    ranked: RankedList,
    target: str,
    filter_entities: frozenset[str] | set[str],
    ties: str = "mean",
) -> float:
    """Rank of the target after removing filtered entities from the list.

    rank = 1 + #unfiltered entities scored strictly above the target, plus
    the tie adjustment over unfiltered non-target entities sharing the
    target's score (mean: half of them; optimistic: none; pessimistic: all).
    """
    if ties not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {ties!r}")
    if target in filter_entities:
        raise ValueError(f"target {target!r} must not be in its own filter set")
    target_score = ranked.score_of(target)
    if target_score is None:
        if ranked.complete:
            raise EvaluationError(
                f"full list for {ranked.qid} is missing candidate {target!r}"
            )
        raise RankBeyondDepthError(
            f"target {target!r} lies beyond the depth-{ranked.depth} list for {ranked.qid}"
        )
    above = 0
    tied = 0
    for entity, score in ranked.entries:
        if score < target_score:
            break  # entries are score-sorted
        if entity == target or entity in filter_entities:
            continue
        if score > target_score:
            above += 1
        else:
            tied += 1
    if ties == "optimistic":
        return float(1 + above)
    if ties == "pessimistic":
        return float(1 + above + tied)
    return 1 + above + tied / 2


def filtered_candidates(
    ranked: RankedList, filter_entities: frozenset[str] | set[str]
) -> RankedList:
    """Remove filtered entities, preserving order and completeness."""
    return RankedList(
        qid=ranked.qid,
        entries=[(e, s) for e, s in ranked.entries if e not in filter_entities],
        complete=ranked.complete,
    )


def load_run(
    path: str,
    format: str = RANKED,
    tag: str | None = None,
    known_qids: set[str] | None = None,
    complete: bool = False,
) -> RunSet:
    """Load a run file.

    TREC format: `qid Q0 entity rank score tag`, single spaces. Ranks are
    re-derived from the scores; a file rank column disagreeing with the
    score ordering is reported once as a warning. Target-ranks format:
    `qid<TAB>answer<TAB>filtered_rank`, or the two-field shorthand
    `qid<TAB>filtered_rank` for a question's sole answer.
    """
    if format == RANKED:
        return _load_trec_run(path, tag, known_qids, complete)
    if format == TARGET_RANKS:
        return _load_target_ranks(path, tag, known_qids)
    raise ValueError(f"unknown run format {format!r}")


def _load_trec_run(
    path: str, tag: str | None, known_qids: set[str] | None, complete: bool
) -> RunSet:
    per_qid: dict[str, list[tuple[str, float, int]]] = defaultdict(list)
    seen: set[tuple[str, str]] = set()
    file_tag = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 6:
                raise DataFormatError(f"{path}:{lineno}: expected 6 fields, got {len(fields)}")
            qid, _q0, entity, rank_s, score_s, line_tag = fields
            if known_qids is not None and qid not in known_qids:
                raise DataFormatError(f"{path}:{lineno}: unknown question id {qid!r}")
            if (qid, entity) in seen:
                raise DataFormatError(f"{path}:{lineno}: duplicate pair ({qid}, {entity})")
            seen.add((qid, entity))
            try:
                score = float(score_s)
                rank = int(rank_s)
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric rank/score {rank_s!r} {score_s!r}")
            if file_tag is None:
                file_tag = line_tag
            per_qid[qid].append((entity, score, rank))

    run = RunSet(tag=tag or file_tag or Path(path).stem, format=RANKED)
    rank_mismatches = 0
    for qid, rows in per_qid.items():
        ranked = RankedList(
            qid=qid, entries=[(e, s) for e, s, _ in rows], complete=complete
        )
        ranked.sort()
        file_order = {e: r for e, _, r in rows}
        for pos, (entity, _) in enumerate(ranked.entries, start=1):
            if file_order[entity] != pos:
                rank_mismatches += 1
        run.lists[qid] = ranked
    if rank_mismatches:
        log.warning(
            "%s: rank column disagrees with score ordering on %d entries; scores win",
            path,
            rank_mismatches,
        )
    return run


def _load_target_ranks(path: str, tag: str | None, known_qids: set[str] | None) -> RunSet:
    run = RunSet(tag=tag or Path(path).stem, format=TARGET_RANKS)
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) == 3:
                qid, entity, rank_s = fields
                key: tuple[str, str | None] = (qid, entity)
            elif len(fields) == 2:
                qid, rank_s = fields
                key = (qid, None)
            else:
                raise DataFormatError(f"{path}:{lineno}: expected 2 or 3 fields, got {len(fields)}")
            if known_qids is not None and qid not in known_qids:
                raise DataFormatError(f"{path}:{lineno}: unknown question id {qid!r}")
            if key in run.target_ranks:
                raise DataFormatError(f"{path}:{lineno}: duplicate pair {key}")
            try:
                rank = float(rank_s)
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric rank {rank_s!r}")
            if rank < 1:
                raise DataFormatError(f"{path}:{lineno}: rank must be >= 1, got {rank}")
            run.target_ranks[key] = rank
    return run


def save_run(run: RunSet, path: str, depth: int | None = None) -> None:
    """Write a ranked RunSet in TREC format, byte-stable across calls."""
    if run.format != RANKED:
        raise EvaluationError("only ranked runs can be written in TREC format")
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(run.lists):
            entries = run.lists[qid].entries
            if depth is not None:
                entries = entries[:depth]
            for pos, (entity, score) in enumerate(entries, start=1):
                f.write(f"{qid} Q0 {entity} {pos} {score!r} {run.tag}\n")


def observed_answers(
    splits: GraphSplits,
    questions: Sequence[tuple[TripleQuestion, AnswerSet]],
    parts: Iterable[str] = ("train", "valid"),
) -> dict[str, frozenset[str]]:
    """Per-question entities answering it within the chosen splits.

    With the default train+valid parts this is the macro filter: candidates
    already observed during training are dropped before ranking.
    """
    by_sp: dict[tuple[str, str], set[str]] = defaultdict(set)
    by_po: dict[tuple[str, str], set[str]] = defaultdict(set)
    for part in parts:
        for s, p, o in getattr(splits, part):
            by_sp[(s, p)].add(o)
            by_po[(p, o)].add(s)
    out: dict[str, frozenset[str]] = {}
    for q, _ in questions:
        if q.direction == TAIL:
            out[q.qid] = frozenset(by_sp.get((q.anchor, q.relation), ()))
        else:
            out[q.qid] = frozenset(by_po.get((q.relation, q.anchor), ()))
    return out


def build_macro_filters(
    splits: GraphSplits, questions: Sequence[tuple[TripleQuestion, AnswerSet]]
) -> dict[str, frozenset[str]]:
    """Entities to exclude from each question's macro candidate list."""
    return observed_answers(splits, questions, parts=("train", "valid"))


def baseline_run(
    splits: GraphSplits,
    questions: Sequence[tuple[TripleQuestion, AnswerSet]],
    mode: str,
    seed: int = 0,
    swap_rate: float = 0.0,
    tag: str | None = None,
) -> RunSet:
    """Synthetic systems for harness tests and known-quality orderings.

    frequency: candidates ordered by how often each entity answers the
    question's (relation, direction) in the train split, ties broken by
    entity id; scores are the raw counts, so score ties are real and
    exercise the tie policies. random: an independent uniform shuffle per
    question. oracle-noise: true answers first, then the rest, degraded by
    round(swap_rate * list length) random adjacent transpositions. All
    modes are deterministic given the seed.
    """
    if mode not in ("frequency", "random", "oracle-noise"):
        raise ValueError(f"unknown baseline mode {mode!r}")
    entities = splits.vocab.entities
    run = RunSet(tag=tag or mode, format=RANKED)

    freq: dict[tuple[str, str], dict[str, int]] = {}
    if mode == "frequency":
        counts: dict[tuple[str, str], dict[str, int]] = defaultdict(lambda: defaultdict(int))
        for s, p, o in splits.train:
            counts[(p, TAIL)][o] += 1
            counts[(p, "head")][s] += 1
        freq = counts

    for q, answers in questions:
        if mode == "frequency":
            counts_q = freq.get((q.relation, q.direction), {})
            entries = [(e, float(counts_q.get(e, 0))) for e in entities]
        else:
            rng = np.random.default_rng(np.random.SeedSequence((seed, int(q.qid[1:]))))
            if mode == "random":
                order = [entities[i] for i in rng.permutation(len(entities))]
            else:
                first = sorted(answers.answers)
                rest = sorted(set(entities) - answers.answers)
                order = first + rest
                n_swaps = round(swap_rate * len(order))
                for _ in range(n_swaps):
                    i = int(rng.integers(0, len(order) - 1))
                    order[i], order[i + 1] = order[i + 1], order[i]
            entries = [(e, float(len(order) - i)) for i, e in enumerate(order)]
        ranked = RankedList(qid=q.qid, entries=entries, complete=True)
        ranked.sort()
        run.lists[q.qid] = ranked
    return run
