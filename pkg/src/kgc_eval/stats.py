"""Rank correlation and paired significance testing.

Kendall's tau is the tie-corrected tau-b: with C concordant pairs, D
discordant pairs, n0 = n(n-1)/2 total pairs, and n1/n2 the tied pairs
within each input,

    tau_b = (C - D) / sqrt((n0 - n1) * (n0 - n2)).

For tie-free inputs this coincides with tau-a, so values stay comparable
with plain pair counting. All counts are integers, which keeps the final
division bit-for-bit reproducible.

The paired two-tailed t-test computes p through the regularized incomplete
beta identity p = I_{df/(df + t^2)}(df/2, 1/2) with df = n - 1. Degenerate
difference vectors follow a documented convention: all differences exactly
zero gives p = 1 (the systems are indistinguishable); nonzero differences
with zero variance give p = 0 (a systematic difference).
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Mapping, Sequence

import numpy as np
from scipy.special import betainc

from .errors import EvaluationError


def kendall_tau_vectors(a: Sequence[float], b: Sequence[float]) -> float:
    """Tau-b between two aligned value vectors (bigger = ranked higher)."""
    n = len(a)
    if n != len(b):
        raise EvaluationError(f"value vectors differ in length: {n} vs {len(b)}")
    if n < 2:
        raise EvaluationError("kendall tau needs at least 2 systems")
    av = np.asarray(a, dtype=float)
    bv = np.asarray(b, dtype=float)
    da = np.sign(av[:, None] - av[None, :])
    db = np.sign(bv[:, None] - bv[None, :])
    prod = da * db
    iu = np.triu_indices(n, k=1)
    concordant = int(np.sum(prod[iu] > 0))
    discordant = int(np.sum(prod[iu] < 0))
    n0 = n * (n - 1) // 2
    n1 = sum(t * (t - 1) // 2 for t in Counter(av.tolist()).values())
    n2 = sum(t * (t - 1) // 2 for t in Counter(bv.tolist()).values())
    denom = math.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0:
        return math.nan  # one input is fully tied; the ordering carries no signal
    return (concordant - discordant) / denom


def kendall_tau(
    values_a: Mapping[str, float],
    values_b: Mapping[str, float],
    ascending_a: bool = False,
    ascending_b: bool = False,
) -> float:
    """Tau-b between the system orderings induced by two value maps.

    Both maps must cover the same systems. Metrics where smaller is better
    (mean rank) are flagged ascending so that +1 still means "identical
    ordering".
    """
    if set(values_a) != set(values_b):
        only_a = sorted(set(values_a) - set(values_b))
        only_b = sorted(set(values_b) - set(values_a))
        raise EvaluationError(
            f"system sets differ (only in a: {only_a}, only in b: {only_b})"
        )
    keys = sorted(values_a)
    a = [-values_a[k] if ascending_a else values_a[k] for k in keys]
    b = [-values_b[k] if ascending_b else values_b[k] for k in keys]
    return kendall_tau_vectors(a, b)


def paired_t_pvalue(x: Sequence[float], y: Sequence[float]) -> float:
    """Two-tailed p-value of the paired Student t-test between two vectors."""
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if xv.shape != yv.shape:
        raise EvaluationError(f"paired vectors differ in shape: {xv.shape} vs {yv.shape}")
    n = xv.size
    if n < 2:
        raise EvaluationError("paired t-test needs at least 2 units")
    d = xv - yv
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))
