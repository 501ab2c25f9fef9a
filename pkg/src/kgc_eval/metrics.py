"""Micro (per-answer) and macro (per-question) ranking metrics.

Micro metrics average a rank function over every (question, answer)
evaluation: each test triple is evaluated once per direction under the
filtered setting, where all other known positives of the question are
removed from the candidates. The relation-weighted aggregation

    sum_p (c_p / |test|) * (1 / (2 c_p)) * sum_{triples of p} (f_head + f_tail)

collapses algebraically to the plain average over all 2*|test| evaluations;
both are computed and cross-checked on every call.

Macro metrics treat each aggregated question as one query over its
macro-filtered candidate list (train/valid positives removed) and follow
the reference trec_eval toolkit's recip_rank, map_cut.20 and ndcg_cut.20
semantics with binary gains, unjudged entities counting as non-relevant.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import EvaluationError
from .judgments import JudgmentSet
from .kg import (
    HEAD,
    TAIL,
    AnswerSet,
    GraphSplits,
    RelationDistribution,
    RelationStats,
    TripleQuestion,
    aggregate_questions,
    classify_relations,
)
from .ranking import (
    RANKED,
    TARGET_RANKS,
    RankBeyondDepthError,
    RunSet,
    build_macro_filters,
    filtered_candidates,
    filtered_rank,
    observed_answers,
)

log = logging.getLogger(__name__)

DEFAULT_KS = (1, 3, 10)
MACRO_CUTOFF = 20


@dataclass(frozen=True, order=True)
class MetricId:
    """A metric family (micro/macro) plus a name like mr, mrr, hits@10."""

    family: str
    name: str

    def __post_init__(self) -> None:
        if self.family not in ("micro", "macro"):
            raise ValueError(f"unknown metric family {self.family!r}")
        base = self.name.split("@")[0]
        if base not in ("mr", "mrr", "hits", "map", "ndcg"):
            raise ValueError(f"unknown metric name {self.name!r}")
        if self.name == "mr" and self.family != "micro":
            raise ValueError("mr is a micro-only metric")
        if base in ("map", "ndcg") and self.family != "macro":
            raise ValueError(f"{self.name} is a macro-only metric")

    @property
    def ascending(self) -> bool:
        """True when smaller values are better (mean rank only)."""
        return self.name == "mr"

    @property
    def cutoff(self) -> int | None:
        if "@" in self.name:
            return int(self.name.split("@")[1])
        return None

    def __str__(self) -> str:
        return f"{self.family}_{self.name}"

    @classmethod
    def parse(cls, text: str) -> "MetricId":
        family, _, name = text.partition("_")
        return cls(family=family, name=name)


def micro_metric_ids(ks: Sequence[int] = DEFAULT_KS) -> list[MetricId]:
    ids = [MetricId("micro", "mr"), MetricId("micro", "mrr")]
    ids += [MetricId("micro", f"hits@{k}") for k in ks]
    return ids


def macro_metric_ids(ks: Sequence[int] = DEFAULT_KS) -> list[MetricId]:
    ids = [MetricId("macro", "mrr")]
    ids += [MetricId("macro", f"hits@{k}") for k in ks]
    ids += [MetricId("macro", f"map@{MACRO_CUTOFF}"), MetricId("macro", f"ndcg@{MACRO_CUTOFF}")]
    return ids


@dataclass
class MetricReport:
    """Scalar metric values plus the per-unit vectors behind them.

    Micro units are (triple index, direction) pairs in test-split order,
    head before tail; macro units are question ids in ascending order. The
    ordering is identical for every system, so vectors align for paired
    significance tests.
    """

    system: str
    regime: str
    values: dict[MetricId, float] = field(default_factory=dict)
    vectors: dict[MetricId, np.ndarray] = field(default_factory=dict)
    units: list = field(default_factory=list)
    unit_relations: list[str] = field(default_factory=list)
    excluded_questions: int = 0


@dataclass(frozen=True)
class MicroUnit:
    triple_index: int
    direction: str
    relation: str
    qid: str
    answer: str
    rank: float


def question_index(
    questions: Sequence[tuple[TripleQuestion, AnswerSet]]
) -> dict[tuple[str, str, str], tuple[TripleQuestion, AnswerSet]]:
    return {(q.relation, q.direction, q.anchor): (q, a) for q, a in questions}


def micro_rank_table(
    run: RunSet,
    splits: GraphSplits,
    judgments: JudgmentSet | None = None,
    ties: str = "mean",
    include_annotated_positives: bool = True,
    questions: Sequence[tuple[TripleQuestion, AnswerSet]] | None = None,
) -> list[MicroUnit]:
    """Filtered rank of every (test answer, direction) under one system.

    The filter for answer a on question q contains every known positive of
    q except a: answers observed in train/valid, the other test answers,
    and (under the inclusive regime) annotated positives from the judgment
    set. Annotated negatives always remain candidates.
    """
    if questions is None:
        questions = aggregate_questions(splits.test)
    qindex = question_index(questions)
    train_valid = observed_answers(splits, questions, parts=("train", "valid"))

    units: list[MicroUnit] = []
    unresolved: list[tuple[str, str]] = []
    for triple_index, (s, p, o) in enumerate(splits.test):
        for direction, anchor, answer in ((HEAD, o, s), (TAIL, s, o)):
            question, answers = qindex[(p, direction, anchor)]
            qid = question.qid
            positives = set(answers.answers)
            if judgments is not None and include_annotated_positives:
                positives |= judgments.positives(qid)
            fset = (positives - {answer}) | train_valid[qid]

            if run.format == TARGET_RANKS:
                rank = run.target_ranks.get((qid, answer))
                if rank is None and len(answers.answers) == 1:
                    # two-field shorthand: the question's sole answer
                    rank = run.target_ranks.get((qid, None))
                if rank is None:
                    unresolved.append((qid, answer))
                    continue
            else:
                try:
                    rank = filtered_rank(run.list_for(qid), answer, fset, ties)
                except RankBeyondDepthError:
                    unresolved.append((qid, answer))
                    continue
            units.append(
                MicroUnit(
                    triple_index=triple_index,
                    direction=direction,
                    relation=p,
                    qid=qid,
                    answer=answer,
                    rank=float(rank),
                )
            )
    if unresolved:
        shown = ", ".join(f"({q}, {a})" for q, a in unresolved[:5])
        raise EvaluationError(
            f"run {run.tag!r}: {len(unresolved)} answers have no resolvable filtered rank "
            f"(first: {shown}); supply full lists or a target-ranks file"
        )
    return units


def _fmean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def _rank_value(metric: MetricId, rank: float) -> float:
    if metric.name == "mr":
        return rank
    if metric.name == "mrr":
        return 1.0 / rank
    if metric.name.startswith("hits@"):
        return 1.0 if rank <= metric.cutoff else 0.0
    raise ValueError(f"{metric} is not a rank-function metric")


def _aggregate_micro(
    units: Sequence[MicroUnit], metrics: Sequence[MetricId], system: str, regime: str
) -> MetricReport:
    if not units:
        raise EvaluationError("no micro evaluation units (empty test split?)")
    report = MetricReport(system=system, regime=regime)
    report.units = [(u.triple_index, u.direction) for u in units]
    report.unit_relations = [u.relation for u in units]
    for metric in metrics:
        vec = np.array([_rank_value(metric, u.rank) for u in units], dtype=float)
        report.vectors[metric] = vec
        report.values[metric] = _fmean(vec.tolist())
    return report


def _check_eq1_identity(units: Sequence[MicroUnit], report: MetricReport) -> None:
    # Relation-weighted aggregation must equal the plain average.
    n_test = len({u.triple_index for u in units})
    by_rel: dict[str, list[int]] = {}
    for i, u in enumerate(units):
        by_rel.setdefault(u.relation, []).append(i)
    for metric, vec in report.vectors.items():
        weighted = math.fsum(
            (len(idx) / 2 / n_test) * _fmean([vec[i] for i in idx])
            for idx in by_rel.values()
        )
        plain = report.values[metric]
        tol = 1e-12 * max(1.0, abs(plain))
        if abs(weighted - plain) > tol:
            raise EvaluationError(
                f"aggregation identity violated for {metric}: {weighted!r} != {plain!r}"
            )


def micro_eval(
    run: RunSet,
    splits: GraphSplits,
    judgments: JudgmentSet | None = None,
    ties: str = "mean",
    ks: Sequence[int] = DEFAULT_KS,
    include_annotated_positives: bool = True,
    questions: Sequence[tuple[TripleQuestion, AnswerSet]] | None = None,
    regime: str = "",
) -> MetricReport:
    """Micro MR / MRR / Hits@K for one system over the test split."""
    units = micro_rank_table(
        run, splits, judgments, ties, include_annotated_positives, questions
    )
    report = _aggregate_micro(units, micro_metric_ids(ks), run.tag, regime)
    _check_eq1_identity(units, report)
    return report


def grouped_micro_eval(
    run: RunSet,
    splits: GraphSplits,
    judgments: JudgmentSet | None = None,
    group_by: str = "relation",
    ties: str = "mean",
    ks: Sequence[int] = DEFAULT_KS,
    include_annotated_positives: bool = True,
    questions: Sequence[tuple[TripleQuestion, AnswerSet]] | None = None,
    stats: Mapping[str, RelationStats] | None = None,
    regime: str = "",
) -> dict:
    """Micro metrics restricted to groups of evaluations.

    group_by "relation" keys the result by relation id; "category-direction"
    keys it by (category, direction) using the relation categorization.
    """
    if group_by not in ("relation", "category-direction"):
        raise ValueError(f"unknown grouping {group_by!r}")
    units = micro_rank_table(
        run, splits, judgments, ties, include_annotated_positives, questions
    )
    if group_by == "category-direction" and stats is None:
        stats = classify_relations(splits)
    groups: dict = {}
    for u in units:
        key = u.relation if group_by == "relation" else (stats[u.relation].category, u.direction)
        groups.setdefault(key, []).append(u)
    out = {}
    for key in sorted(groups):
        out[key] = _aggregate_micro(groups[key], micro_metric_ids(ks), run.tag, regime)
    return out


def reweighted_micro_eval(
    run: RunSet,
    splits: GraphSplits,
    weights: RelationDistribution,
    judgments: JudgmentSet | None = None,
    ties: str = "mean",
    ks: Sequence[int] = DEFAULT_KS,
    include_annotated_positives: bool = True,
    questions: Sequence[tuple[TripleQuestion, AnswerSet]] | None = None,
    regime: str = "",
) -> MetricReport:
    """Micro metrics with the relation ratio c_p/|test| replaced by weights.

    The per-relation inner means are unchanged; only the mixture over
    relations follows the supplied distribution. Weight mass on relations
    absent from the evaluated set contributes nothing.
    """
    units = micro_rank_table(
        run, splits, judgments, ties, include_annotated_positives, questions
    )
    present = {u.relation for u in units}
    missing = sorted(present - set(weights.probs))
    if missing:
        raise EvaluationError(
            f"reweighting distribution lacks {len(missing)} relations present in the "
            f"evaluated set (first: {missing[0]!r})"
        )
    by_rel: dict[str, list[MicroUnit]] = {}
    for u in units:
        by_rel.setdefault(u.relation, []).append(u)
    report = MetricReport(system=run.tag, regime=regime)
    for metric in micro_metric_ids(ks):
        report.values[metric] = math.fsum(
            weights.probs[rel] * _fmean([_rank_value(metric, u.rank) for u in rel_units])
            for rel, rel_units in sorted(by_rel.items())
        )
    return report


def _discount(position: int) -> float:
    return 1.0 / math.log2(position + 1)


def macro_eval(
    run: RunSet,
    questions: Sequence[tuple[TripleQuestion, AnswerSet]],
    judgments: JudgmentSet,
    macro_filters: Mapping[str, frozenset[str]],
    ks: Sequence[int] = DEFAULT_KS,
    regime: str = "",
) -> MetricReport:
    """Macro MRR / Hits@K / MAP@20 / nDCG@20 for one system.

    Every aggregated question contributes once; its positives are the
    judged positive entities. Questions with no positives left after macro
    filtering are excluded (counted and logged, never silently dropped).
    """
    if run.format != RANKED:
        raise EvaluationError("macro metrics need ranked candidate lists, not target ranks")
    metrics = macro_metric_ids(ks)
    _check_truncation(run, questions, ks)

    per_metric: dict[MetricId, list[float]] = {m: [] for m in metrics}
    units: list[str] = []
    excluded = 0
    for q, _answers in sorted(questions, key=lambda qa: qa[0].qid):
        fset = macro_filters[q.qid]
        positives = judgments.positives(q.qid) - fset
        if not positives:
            excluded += 1
            continue
        ranked = filtered_candidates(run.list_for(q.qid), fset)
        units.append(q.qid)

        first_pos = 0
        hits_in_cut = []  # positions (1-based) of positives within the macro cutoff
        for pos, (entity, _score) in enumerate(ranked.entries, start=1):
            if pos > MACRO_CUTOFF and first_pos:
                break
            if entity in positives:
                if first_pos == 0:
                    first_pos = pos
                if pos <= MACRO_CUTOFF:
                    hits_in_cut.append(pos)

        n_rel = len(positives)
        for metric in metrics:
            if metric.name == "mrr":
                value = 1.0 / first_pos if first_pos else 0.0
            elif metric.name.startswith("hits@"):
                value = 1.0 if first_pos and first_pos <= metric.cutoff else 0.0
            elif metric.name.startswith("map@"):
                value = (
                    math.fsum((i + 1) / pos for i, pos in enumerate(hits_in_cut)) / n_rel
                )
            else:  # ndcg@20
                dcg = math.fsum(_discount(pos) for pos in hits_in_cut)
                idcg = math.fsum(_discount(i) for i in range(1, min(n_rel, MACRO_CUTOFF) + 1))
                value = dcg / idcg
            per_metric[metric].append(value)
    if excluded:
        log.warning(
            "macro eval of %s: %d questions excluded for having no positives after filtering",
            run.tag,
            excluded,
        )
    if not units:
        raise EvaluationError("no questions with positives remain for macro evaluation")
    report = MetricReport(
        system=run.tag, regime=regime, units=units, excluded_questions=excluded
    )
    for metric in metrics:
        vec = np.array(per_metric[metric], dtype=float)
        report.vectors[metric] = vec
        report.values[metric] = _fmean(vec.tolist())
    return report


def _check_truncation(
    run: RunSet, questions: Sequence[tuple[TripleQuestion, AnswerSet]], ks: Sequence[int]
) -> None:
    needed = max(max(ks, default=0), MACRO_CUTOFF)
    for q, _ in questions:
        ranked = run.list_for(q.qid)
        if not ranked.complete and ranked.depth < needed:
            raise EvaluationError(
                f"run {run.tag!r}: truncated list for {q.qid} has depth {ranked.depth} "
                f"< required cutoff {needed}"
            )


def export_trec(
    questions: Sequence[tuple[TripleQuestion, AnswerSet]],
    judgments: JudgmentSet,
    runs: Sequence[RunSet],
    macro_filters: Mapping[str, frozenset[str]],
    out_dir: str,
    depth: int = 1000,
) -> dict[str, str]:
    """Write qrels and macro-filtered run files for the reference toolkit.

    Returns {"qrels": path, <tag>: path, ...}. Output is byte-stable: lines
    are sorted and scores are written with shortest round-trip formatting.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths: dict[str, str] = {}
    qids = {q.qid for q, _ in questions}

    qrels_path = os.path.join(out_dir, "qrels.txt")
    with open(qrels_path, "w", encoding="utf-8") as f:
        for (qid, entity), rec in sorted(judgments.records.items()):
            if qid not in qids or entity in macro_filters.get(qid, frozenset()):
                continue
            f.write(f"{qid} 0 {entity} {1 if rec.label == 'positive' else 0}\n")
    paths["qrels"] = qrels_path

    for run in runs:
        if run.format != RANKED:
            raise EvaluationError(f"run {run.tag!r} has no ranked lists to export")
        run_path = os.path.join(out_dir, f"run_{run.tag}.txt")
        with open(run_path, "w", encoding="utf-8") as f:
            for q, _ in sorted(questions, key=lambda qa: qa[0].qid):
                ranked = filtered_candidates(run.list_for(q.qid), macro_filters[q.qid])
                for pos, (entity, score) in enumerate(ranked.entries[:depth], start=1):
                    f.write(f"{q.qid} Q0 {entity} {pos} {score!r} {run.tag}\n")
        paths[run.tag] = run_path
    return paths
