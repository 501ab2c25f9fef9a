"""Meta-evaluation of metrics: ranking correlation, depth sweeps,
subsample stability, and discriminative power.

All sweeps are deterministic given the master seed: the RNG of each
(size, repeat) task is numpy SeedSequence(master_seed) spawned with
spawn_key=(size_index, repeat_index), so serial and parallel execution
produce identical output.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import EvaluationError
from .judgments import JudgmentSet
from .kg import AnswerSet, GraphSplits, TripleQuestion, classify_relations
from .metrics import (
    DEFAULT_KS,
    MetricId,
    MetricReport,
    grouped_micro_eval,
    macro_eval,
    micro_eval,
)
from .pooling import Pool, qrels_at_depth
from .ranking import RunSet
from .stats import kendall_tau, paired_t_pvalue

DEFAULT_SIZES = (0.01,) + tuple(round(0.05 * i, 2) for i in range(1, 20))  # 1%, 5%..95%
DEFAULT_REPEATS = 50
DEFAULT_DEPTHS = tuple(range(1, 11))


@dataclass
class EvalSetup:
    """Everything needed to evaluate systems under one judgment regime."""

    splits: GraphSplits
    questions: Sequence[tuple[TripleQuestion, AnswerSet]]
    macro_filters: Mapping[str, frozenset[str]]
    judgments: JudgmentSet | None = None
    ties: str = "mean"
    include_annotated_positives: bool = True
    ks: Sequence[int] = DEFAULT_KS

    def evaluate(self, run: RunSet, metrics: Sequence[MetricId], regime: str = "") -> MetricReport:
        """Merged micro+macro report restricted to the requested metrics."""
        merged = MetricReport(system=run.tag, regime=regime)
        families = {m.family for m in metrics}
        if "micro" in families:
            rep = micro_eval(
                run,
                self.splits,
                self.judgments,
                self.ties,
                self.ks,
                self.include_annotated_positives,
                self.questions,
                regime,
            )
            _merge(merged, rep, [m for m in metrics if m.family == "micro"], "micro")
        if "macro" in families:
            if self.judgments is None:
                raise EvaluationError("macro metrics need a judgment set")
            rep = macro_eval(
                run, self.questions, self.judgments, self.macro_filters, self.ks, regime
            )
            _merge(merged, rep, [m for m in metrics if m.family == "macro"], "macro")
        return merged


def _merge(target: MetricReport, source: MetricReport, metrics: Sequence[MetricId], family: str) -> None:
    for m in metrics:
        if m not in source.values:
            raise EvaluationError(f"metric {m} was not produced (requested Ks mismatch?)")
        target.values[m] = source.values[m]
        target.vectors[m] = source.vectors[m]
    if family == "micro":
        target.units = source.units or target.units
        target.unit_relations = source.unit_relations
    else:
        target.excluded_questions = source.excluded_questions
        if not target.units:
            target.units = source.units


@dataclass(frozen=True)
class SystemRanking:
    metric: MetricId
    ordered: tuple[tuple[str, float], ...]
    regime: str = ""

    def values(self) -> dict[str, float]:
        return {tag: value for tag, value in self.ordered}

    def tags(self) -> tuple[str, ...]:
        return tuple(tag for tag, _ in self.ordered)


@dataclass(frozen=True)
class CorrelationReport:
    metric: MetricId
    regime_a: str
    regime_b: str
    tau: float
    n_systems: int


@dataclass(frozen=True)
class PValueCurve:
    metric: MetricId
    pvalues: tuple[float, ...]  # descending
    pairs: tuple[tuple[str, str], ...]  # aligned with pvalues

    @property
    def area(self) -> float:
        """Normalized area under the sorted curve: the mean p-value."""
        return float(np.mean(self.pvalues))


@dataclass
class StabilityReport:
    metrics: tuple[MetricId, ...]
    sizes: tuple[float, ...]
    repeats: int
    seed: int
    mean_tau: dict[MetricId, dict[float, float]] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = []
        for metric in self.metrics:
            for size in self.sizes:
                out.append(f"{metric}\t{size:g}\t{self.mean_tau[metric][size]:.6f}")
        return out


def rank_systems(reports: Sequence[MetricReport], metric: MetricId) -> SystemRanking:
    """Order systems by a metric value, mean rank ascending, others descending.

    Exact value ties are broken by system tag for display; correlation is
    computed on the values themselves, so display order never affects tau.
    """
    for r in reports:
        if metric not in r.values:
            raise EvaluationError(f"report for {r.system!r} lacks metric {metric}")
    rows = sorted(
        ((r.system, r.values[metric]) for r in reports),
        key=lambda sv: (sv[1] if metric.ascending else -sv[1], sv[0]),
    )
    regimes = {r.regime for r in reports}
    regime = regimes.pop() if len(regimes) == 1 else ""
    return SystemRanking(metric=metric, ordered=tuple(rows), regime=regime)


def ranking_tau(a: SystemRanking, b: SystemRanking) -> float:
    if a.metric.ascending != b.metric.ascending:
        raise EvaluationError("cannot correlate rankings with opposite orientations")
    return kendall_tau(
        a.values(), b.values(), ascending_a=a.metric.ascending, ascending_b=b.metric.ascending
    )


def task_rng(master_seed: int, *key: int) -> np.random.Generator:
    """The documented seed-splitting rule for parallel-safe determinism."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(key)))


def _run_keyed(
    worker: Callable, payloads: Sequence[tuple], workers: int
) -> list:
    """Run tasks serially or in a process pool; order follows the payloads."""
    if workers <= 1:
        return [worker(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, payloads))


# ---------------------------------------------------------------------------
# Depth sweep


def _depth_task(payload: tuple) -> tuple[int, dict[str, dict[str, float]]]:
    d, runs, setup, pool, judgments, metrics = payload
    sliced = qrels_at_depth(pool, judgments, d)
    regime_setup = EvalSetup(
        splits=setup.splits,
        questions=setup.questions,
        macro_filters=setup.macro_filters,
        judgments=sliced,
        ties=setup.ties,
        include_annotated_positives=setup.include_annotated_positives,
        ks=setup.ks,
    )
    values: dict[str, dict[str, float]] = {}
    for run in runs:
        report = regime_setup.evaluate(run, metrics, regime=f"depth-{d}")
        values[run.tag] = {str(m): report.values[m] for m in metrics}
    return d, values


def depth_sweep(
    runs: Sequence[RunSet],
    setup: EvalSetup,
    pool: Pool,
    judgments: JudgmentSet,
    metrics: Sequence[MetricId],
    depths: Sequence[int] = DEFAULT_DEPTHS,
    workers: int = 1,
) -> dict[tuple[MetricId, int], CorrelationReport]:
    """Correlation of system rankings at each pooling depth vs sparse labels.

    For every depth d the systems are re-evaluated under the labels visible
    at depth d and the induced ranking is compared (Kendall tau-b) against
    the ranking under the original depth-0 labels.
    """
    if len(runs) < 2:
        raise EvaluationError("depth sweep needs at least 2 systems")
    for d in depths:
        if not 0 <= d <= pool.depth:
            raise EvaluationError(f"depth {d} outside pool depth 0..{pool.depth}")

    _, sparse_values = _depth_task((0, runs, setup, pool, judgments, metrics))
    payloads = [(d, runs, setup, pool, judgments, metrics) for d in depths]
    results = _run_keyed(_depth_task, payloads, workers)

    out: dict[tuple[MetricId, int], CorrelationReport] = {}
    for d, values in results:
        for metric in metrics:
            key = str(metric)
            tau = kendall_tau(
                {tag: vals[key] for tag, vals in sparse_values.items()},
                {tag: vals[key] for tag, vals in values.items()},
                ascending_a=metric.ascending,
                ascending_b=metric.ascending,
            )
            out[(metric, d)] = CorrelationReport(
                metric=metric,
                regime_a="sparse",
                regime_b=f"depth-{d}",
                tau=tau,
                n_systems=len(runs),
            )
    return out


# ---------------------------------------------------------------------------
# Subsample stability


def _stability_size_task(payload: tuple) -> tuple[int, dict[str, float]]:
    (
        size_index,
        size,
        seed,
        repeats,
        metric_keys,
        micro_keys,
        micro_by_triple,
        micro_vectors,
        macro_vectors,
        full_values,
    ) = payload
    sums = {key: 0.0 for key in metric_keys}
    for repeat in range(repeats):
        rng = task_rng(seed, size_index, repeat)
        micro_rows = None
        if micro_by_triple is not None:
            n = micro_by_triple.shape[0]
            k = max(1, round(size * n))
            chosen = rng.choice(n, size=k, replace=False)
            micro_rows = micro_by_triple[chosen].reshape(-1)
        macro_rows = None
        if macro_vectors:
            first = next(iter(macro_vectors.values()))
            n = len(next(iter(first.values())))
            k = max(1, round(size * n))
            macro_rows = rng.choice(n, size=k, replace=False)
        for key, ascending in metric_keys.items():
            is_micro = key in micro_keys
            vectors = micro_vectors if is_micro else macro_vectors
            rows = micro_rows if is_micro else macro_rows
            sampled = {tag: float(np.mean(vecs[key][rows])) for tag, vecs in vectors.items()}
            tau = kendall_tau(
                full_values[key], sampled, ascending_a=ascending, ascending_b=ascending
            )
            sums[key] += tau
    return size_index, {key: total / repeats for key, total in sums.items()}


def subsample_stability(
    runs: Sequence[RunSet],
    setup: EvalSetup,
    metrics: Sequence[MetricId],
    sizes: Sequence[float] = DEFAULT_SIZES,
    repeats: int = DEFAULT_REPEATS,
    seed: int = 0,
    workers: int = 1,
) -> StabilityReport:
    """Mean ranking correlation between subsampled and full test sets.

    Micro metrics are subsampled by test triple (both directions travel
    together); macro metrics by aggregated question. Each (size, repeat)
    draws without replacement and re-ranks the systems; the report carries
    the mean tau per size. A subsample that ties every system exactly has
    no ordering signal; its tau is NaN and propagates into the mean rather
    than being silently dropped.
    """
    if len(runs) < 2:
        raise EvaluationError("stability analysis needs at least 2 systems")
    if repeats < 1:
        raise EvaluationError("repeats must be >= 1")
    for size in sizes:
        if not 0 < size <= 1:
            raise EvaluationError(f"sample sizes must lie in (0, 1], got {size}")

    reports = {run.tag: setup.evaluate(run, metrics, regime="full") for run in runs}
    micro_metrics = [m for m in metrics if m.family == "micro"]
    macro_metrics = [m for m in metrics if m.family == "macro"]

    # Unit index per test triple (2 rows per triple, aligned across systems).
    micro_by_triple = None
    micro_vectors: dict[str, dict[str, np.ndarray]] = {}
    if micro_metrics:
        any_report = next(iter(reports.values()))
        micro_units = [u for u in any_report.units if isinstance(u, tuple)]
        triples = sorted({ti for ti, _ in micro_units})
        pos_by_triple: dict[int, list[int]] = {ti: [] for ti in triples}
        for pos, (ti, _) in enumerate(micro_units):
            pos_by_triple[ti].append(pos)
        micro_by_triple = np.array([pos_by_triple[ti] for ti in triples], dtype=int)
        for tag, report in reports.items():
            if [u for u in report.units if isinstance(u, tuple)] != micro_units:
                raise EvaluationError(f"micro unit ordering differs for system {tag!r}")
            micro_vectors[tag] = {str(m): report.vectors[m] for m in micro_metrics}

    macro_vectors: dict[str, dict[str, np.ndarray]] = {}
    if macro_metrics:
        for tag, report in reports.items():
            macro_vectors[tag] = {str(m): report.vectors[m] for m in macro_metrics}
        lengths = {len(v) for vecs in macro_vectors.values() for v in vecs.values()}
        if len(lengths) != 1:
            raise EvaluationError("macro unit vectors are misaligned across systems")

    metric_keys = {str(m): m.ascending for m in metrics}
    full_values = {
        str(m): {tag: reports[tag].values[m] for tag in reports} for m in metrics
    }

    micro_keys = frozenset(str(m) for m in micro_metrics)
    payloads = [
        (
            i,
            size,
            seed,
            repeats,
            metric_keys,
            micro_keys,
            micro_by_triple,
            micro_vectors,
            macro_vectors,
            full_values,
        )
        for i, size in enumerate(sizes)
    ]
    results = _run_keyed(_stability_size_task, payloads, workers)

    report = StabilityReport(
        metrics=tuple(metrics), sizes=tuple(sizes), repeats=repeats, seed=seed
    )
    for metric in metrics:
        report.mean_tau[metric] = {}
    for size_index, means in results:
        for metric in metrics:
            report.mean_tau[metric][sizes[size_index]] = means[str(metric)]
    return report


# ---------------------------------------------------------------------------
# Discriminative power


def discriminative_power(
    reports: Sequence[MetricReport], metric: MetricId, unit: str = "answer"
) -> PValueCurve:
    """Paired two-tailed t-test p-values over every unordered system pair.

    Per-unit vectors must be aligned across systems. For micro metrics,
    unit="triple" first averages the head and tail evaluations of each
    test triple, halving the number of paired units.
    """
    if unit not in ("answer", "triple"):
        raise ValueError(f"unknown pairing unit {unit!r}")
    if len(reports) < 2:
        raise EvaluationError("discriminative power needs at least 2 systems")
    units0 = reports[0].units
    for r in reports[1:]:
        if r.units != units0:
            raise EvaluationError(
                f"per-unit vectors are misaligned between {reports[0].system!r} "
                f"and {r.system!r}"
            )
    vectors = {}
    for r in reports:
        vec = r.vectors.get(metric)
        if vec is None:
            raise EvaluationError(f"report for {r.system!r} lacks metric {metric}")
        if unit == "triple" and metric.family == "micro":
            by_triple: dict[int, list[float]] = {}
            for (ti, _), v in zip(r.units, vec):
                by_triple.setdefault(ti, []).append(float(v))
            vec = np.array([np.mean(by_triple[ti]) for ti in sorted(by_triple)])
        vectors[r.system] = vec

    scored = []
    for a, b in itertools.combinations(sorted(vectors), 2):
        scored.append((paired_t_pvalue(vectors[a], vectors[b]), (a, b)))
    scored.sort(key=lambda pv: (-pv[0], pv[1]))
    return PValueCurve(
        metric=metric,
        pvalues=tuple(p for p, _ in scored),
        pairs=tuple(pair for _, pair in scored),
    )


# ---------------------------------------------------------------------------
# Per-category correlation


def category_correlation(
    runs: Sequence[RunSet],
    setup_sparse: EvalSetup,
    setup_complete: EvalSetup,
    metrics: Sequence[MetricId] | None = None,
    workers: int = 1,
) -> dict[tuple[str, str, MetricId], float]:
    """Kendall tau per (relation category, direction, micro metric) cell
    between the sparse-label and complete-label system rankings."""
    if metrics is None:
        metrics = [m for m in _default_micro(setup_sparse.ks)]
    if any(m.family != "micro" for m in metrics):
        raise EvaluationError("category correlation is defined for micro metrics")
    stats = classify_relations(setup_sparse.splits)

    def grouped_values(setup: EvalSetup) -> dict[str, dict]:
        out = {}
        for run in runs:
            out[run.tag] = grouped_micro_eval(
                run,
                setup.splits,
                setup.judgments,
                "category-direction",
                setup.ties,
                setup.ks,
                setup.include_annotated_positives,
                setup.questions,
                stats,
            )
        return out

    sparse = grouped_values(setup_sparse)
    complete = grouped_values(setup_complete)

    cells: set[tuple[str, str]] = set()
    for groups in sparse.values():
        cells.update(groups.keys())

    out: dict[tuple[str, str, MetricId], float] = {}
    for cell in sorted(cells):
        if not all(cell in sparse[t] and cell in complete[t] for t in sparse):
            continue  # cell absent for some system; reported as absent
        for metric in metrics:
            tau = kendall_tau(
                {tag: sparse[tag][cell].values[metric] for tag in sparse},
                {tag: complete[tag][cell].values[metric] for tag in complete},
                ascending_a=metric.ascending,
                ascending_b=metric.ascending,
            )
            category, direction = cell
            out[(category, direction, metric)] = tau
    return out


def _default_micro(ks: Sequence[int]) -> list[MetricId]:
    from .metrics import micro_metric_ids

    return micro_metric_ids(ks)
