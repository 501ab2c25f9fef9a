"""Knowledge-graph splits, triple questions, and relation statistics.

Triples are (subject, relation, object) over opaque string identifiers;
Freebase MIDs and WordNet synset ids pass through unmodified. A test triple
is masked in both directions, giving a head question (?, p, o) and a tail
question (s, p, ?); identical questions arising from different triples are
aggregated into a single question with a multi-entity answer set.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataFormatError, EvaluationError

log = logging.getLogger(__name__)

Triple = tuple[str, str, str]

HEAD = "head"
TAIL = "tail"
DIRECTIONS = (HEAD, TAIL)


class Vocab:
    """Interned entity and relation identifiers, stable in insertion order."""

    def __init__(self) -> None:
        self.entities: list[str] = []
        self.relations: list[str] = []
        self._entity_set: set[str] = set()
        self._relation_set: set[str] = set()

    def add_entity(self, e: str) -> None:
        if e not in self._entity_set:
            self._entity_set.add(e)
            self.entities.append(e)

    def add_relation(self, r: str) -> None:
        if r not in self._relation_set:
            self._relation_set.add(r)
            self.relations.append(r)

    def has_entity(self, e: str) -> bool:
        return e in self._entity_set

    def has_relation(self, r: str) -> bool:
        return r in self._relation_set


@dataclass
class GraphSplits:
    """Train/valid/test triple lists plus the interned vocabulary.

    Splits are pairwise disjoint and duplicate-free; the union of all three
    is the observed graph used for filtered evaluation.
    """

    train: list[Triple]
    valid: list[Triple]
    test: list[Triple]
    vocab: Vocab

    _observed: frozenset[Triple] | None = field(default=None, repr=False)

    def all_triples(self) -> Iterable[Triple]:
        yield from self.train
        yield from self.valid
        yield from self.test

    @property
    def observed(self) -> frozenset[Triple]:
        """All triples in train ∪ valid ∪ test."""
        if self._observed is None:
            self._observed = frozenset(self.all_triples())
        return self._observed


@dataclass(frozen=True, order=True)
class TripleQuestion:
    """A masked test triple: direction 'tail' asks (anchor, relation, ?),
    direction 'head' asks (?, relation, anchor)."""

    qid: str
    direction: str
    anchor: str
    relation: str

    def triple_for(self, answer: str) -> Triple:
        """Reconstruct the source triple obtained by substituting an answer."""
        if self.direction == TAIL:
            return (self.anchor, self.relation, answer)
        return (answer, self.relation, self.anchor)

    def subject_object(self, answer: str) -> tuple[str, str]:
        s, _, o = self.triple_for(answer)
        return s, o


@dataclass(frozen=True)
class AnswerSet:
    qid: str
    answers: frozenset[str]


@dataclass(frozen=True)
class RelationStats:
    relation: str
    test_count: int
    avg_tails_per_head: Fraction
    avg_heads_per_tail: Fraction
    category: str  # one of "1-1", "1-N", "N-1", "N-N"


@dataclass(frozen=True)
class RelationDistribution:
    """Probability of each relation among the triples of one split."""

    probs: Mapping[str, float]
    support_size: int

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "RelationDistribution":
        total = sum(counts.values())
        if total == 0:
            raise EvaluationError("cannot build a relation distribution from zero triples")
        return cls(
            probs={r: c / total for r, c in counts.items() if c > 0},
            support_size=sum(1 for c in counts.values() if c > 0),
        )


def _parse_triple_file(path: str, split_name: str, vocab: Vocab) -> list[Triple]:
    triples: list[Triple] = []
    seen: set[Triple] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DataFormatError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
                )
            s, p, o = fields
            t = (s, p, o)
            if t in seen:
                raise DataFormatError(
                    f"{path}:{lineno}: duplicate triple {t} within {split_name} split"
                )
            seen.add(t)
            triples.append(t)
            vocab.add_entity(s)
            vocab.add_relation(p)
            vocab.add_entity(o)
    return triples


def load_triples(path: str) -> list[Triple]:
    """Load a single triple file without split bookkeeping."""
    return _parse_triple_file(path, Path(path).name, Vocab())


def load_graph_splits(train_path: str, valid_path: str, test_path: str) -> GraphSplits:
    """Load train/valid/test triple files (subject<TAB>relation<TAB>object).

    Rejects malformed lines, duplicate triples within a split, and any
    overlap between splits. The vocabulary is interned in file order
    (train, then valid, then test; subject before object on each line).
    """
    vocab = Vocab()
    train = _parse_triple_file(train_path, "train", vocab)
    valid = _parse_triple_file(valid_path, "valid", vocab)
    test = _parse_triple_file(test_path, "test", vocab)

    train_set, valid_set, test_set = set(train), set(valid), set(test)
    for a_name, a, b_name, b in (
        ("train", train_set, "valid", valid_set),
        ("train", train_set, "test", test_set),
        ("valid", valid_set, "test", test_set),
    ):
        overlap = a & b
        if overlap:
            t = sorted(overlap)[0]
            raise DataFormatError(
                f"splits must be disjoint: triple {t} appears in both {a_name} and {b_name}"
            )
    return GraphSplits(train=train, valid=valid, test=test, vocab=vocab)


def aggregate_questions(split: Sequence[Triple]) -> list[tuple[TripleQuestion, AnswerSet]]:
    """Aggregate a triple split into deduplicated head and tail questions.

    Every triple (s, p, o) contributes o to the tail question (s, p, ?) and
    s to the head question (?, p, o). Question ids are assigned by sorting
    all questions on (relation, direction, anchor) with head < tail, so the
    result is independent of the input order: qid = "q" + 7-digit index.
    """
    if not split:
        raise EvaluationError("cannot aggregate questions from an empty split")
    answers: dict[tuple[str, str, str], set[str]] = defaultdict(set)
    for s, p, o in split:
        answers[(p, TAIL, s)].add(o)
        answers[(p, HEAD, o)].add(s)

    out: list[tuple[TripleQuestion, AnswerSet]] = []
    for i, key in enumerate(sorted(answers), start=1):
        relation, direction, anchor = key
        qid = f"q{i:07d}"
        out.append(
            (
                TripleQuestion(qid=qid, direction=direction, anchor=anchor, relation=relation),
                AnswerSet(qid=qid, answers=frozenset(answers[key])),
            )
        )
    return out


def write_question_mapping(
    questions: Sequence[tuple[TripleQuestion, AnswerSet]], path: str
) -> None:
    """Write the qid sidecar: qid<TAB>direction<TAB>anchor<TAB>relation."""
    with open(path, "w", encoding="utf-8") as f:
        for q, _ in sorted(questions, key=lambda qa: qa[0].qid):
            f.write(f"{q.qid}\t{q.direction}\t{q.anchor}\t{q.relation}\n")


def load_question_mapping(path: str) -> list[TripleQuestion]:
    questions = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise DataFormatError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            qid, direction, anchor, relation = fields
            if direction not in DIRECTIONS:
                raise DataFormatError(f"{path}:{lineno}: unknown direction {direction!r}")
            questions.append(
                TripleQuestion(qid=qid, direction=direction, anchor=anchor, relation=relation)
            )
    return questions


def classify_relations(
    splits: GraphSplits, threshold: Fraction | float = Fraction(3, 2)
) -> dict[str, RelationStats]:
    """Categorize every relation as 1-1, 1-N, N-1, or N-N.

    The average number of distinct objects per subject and subjects per
    object is computed over train ∪ valid ∪ test, so the category does not
    depend on the test sample. Averages at or below the threshold count as
    "1"; the default threshold 3/2 is compared exactly via Fractions.
    """
    threshold = Fraction(threshold)
    if threshold <= 0:
        raise EvaluationError(f"category threshold must be positive, got {threshold}")
    pairs: dict[str, set[tuple[str, str]]] = defaultdict(set)
    for s, p, o in set(splits.all_triples()):
        pairs[p].add((s, o))
    test_counts = Counter(p for _, p, _ in splits.test)

    stats: dict[str, RelationStats] = {}
    for relation in splits.vocab.relations:
        rel_pairs = pairs.get(relation)
        if not rel_pairs:
            log.warning("relation %s has zero occurrences; excluded from categories", relation)
            continue
        heads = {s for s, _ in rel_pairs}
        tails = {o for _, o in rel_pairs}
        tails_per_head = Fraction(len(rel_pairs), len(heads))
        heads_per_tail = Fraction(len(rel_pairs), len(tails))
        one_tail = tails_per_head <= threshold
        one_head = heads_per_tail <= threshold
        if one_tail and one_head:
            category = "1-1"
        elif one_head:  # many tails per head
            category = "1-N"
        elif one_tail:  # many heads per tail
            category = "N-1"
        else:
            category = "N-N"
        stats[relation] = RelationStats(
            relation=relation,
            test_count=test_counts.get(relation, 0),
            avg_tails_per_head=tails_per_head,
            avg_heads_per_tail=heads_per_tail,
            category=category,
        )
    return stats


def relation_distribution(split: Sequence[Triple]) -> RelationDistribution:
    """Relative frequency of each relation in one split."""
    if not split:
        raise EvaluationError("cannot build a relation distribution from an empty split")
    return RelationDistribution.from_counts(Counter(p for _, p, _ in split))


def kl_divergence(
    p: RelationDistribution, q: RelationDistribution, epsilon: float = 1e-9
) -> float:
    """KL(p ‖ q) = Σ p(r)·ln(p(r)/q(r)), natural log.

    With epsilon > 0, both distributions are smoothed by adding epsilon to
    every relation in the union of their supports and renormalizing, which
    makes the divergence total. With epsilon = 0, any relation carrying
    p-mass but absent from q is an error.
    """
    support = set(p.probs) | set(q.probs)
    if epsilon > 0:
        p_sm = {r: p.probs.get(r, 0.0) + epsilon for r in support}
        q_sm = {r: q.probs.get(r, 0.0) + epsilon for r in support}
        p_total = sum(p_sm.values())
        q_total = sum(q_sm.values())
        p_sm = {r: v / p_total for r, v in p_sm.items()}
        q_sm = {r: v / q_total for r, v in q_sm.items()}
    else:
        missing = [r for r, v in p.probs.items() if v > 0 and q.probs.get(r, 0.0) == 0.0]
        if missing:
            raise EvaluationError(
                f"relation {sorted(missing)[0]!r} has probability mass in p but none in q "
                "(enable smoothing or fix the inputs)"
            )
        p_sm, q_sm = dict(p.probs), dict(q.probs)
    total = 0.0
    for r, pv in p_sm.items():
        if pv > 0:
            total += pv * math.log(pv / q_sm[r])
    # Gibbs: the sum is nonnegative; absorb float cancellation noise near 0.
    if -1e-12 < total < 0.0:
        return 0.0
    return total
