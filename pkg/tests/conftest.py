import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from kgc_eval.kg import GraphSplits, Triple, Vocab


def build_splits(
    train: list[Triple],
    valid: list[Triple] | None = None,
    test: list[Triple] | None = None,
    extra_entities: tuple[str, ...] = (),
) -> GraphSplits:
    """Assemble GraphSplits in memory, interning ids in list order."""
    valid = valid or []
    test = test or []
    vocab = Vocab()
    for s, p, o in [*train, *valid, *test]:
        vocab.add_entity(s)
        vocab.add_relation(p)
        vocab.add_entity(o)
    for e in extra_entities:
        vocab.add_entity(e)
    return GraphSplits(train=list(train), valid=list(valid), test=list(test), vocab=vocab)


@pytest.fixture
def visited_splits() -> GraphSplits:
    """Two test triples sharing (subject, relation): the aggregation example."""
    return build_splits(
        train=[("trump", "visited", "france")],
        test=[("trump", "visited", "china"), ("trump", "visited", "japan")],
        extra_entities=("india", "spain"),
    )


@pytest.fixture
def single_triple_splits() -> GraphSplits:
    return build_splits(
        train=[("a", "r", "b")],
        test=[("c", "r", "d")],
        extra_entities=("e1", "e2", "e3"),
    )
