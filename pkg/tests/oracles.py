"""Independent oracles used by the test suite.

Each oracle deliberately avoids the implementation path it checks:
kendall_tau_bruteforce enumerates pairs with explicit comparisons,
t_pvalue_quadrature integrates the Student-t density numerically, and the
trec_measures function re-implements the reference trec_eval toolkit's
recip_rank / map_cut.20 / ndcg_cut.20 directly from qrels and run files,
including the tool's score-descending, doc-id-descending sort.
"""

from __future__ import annotations

import math
from collections import defaultdict

from scipy.integrate import quad


def kendall_tau_bruteforce(a: list[float], b: list[float]) -> float:
    """Tau-b by explicit O(n^2) concordant/discordant/tie counting."""
    n = len(a)
    concordant = discordant = ties_a = ties_b = 0
    for i in range(n):
        for j in range(i + 1, n):
            if a[i] == a[j] and b[i] == b[j]:
                ties_a += 1
                ties_b += 1
            elif a[i] == a[j]:
                ties_a += 1
            elif b[i] == b[j]:
                ties_b += 1
            elif (a[i] < a[j]) == (b[i] < b[j]):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - ties_a) * (n0 - ties_b))
    if denom == 0:
        return math.nan
    return (concordant - discordant) / denom


def _t_pdf(x: float, df: int) -> float:
    log_density = (
        math.lgamma((df + 1) / 2)
        - math.lgamma(df / 2)
        - 0.5 * math.log(df * math.pi)
        - ((df + 1) / 2) * math.log1p(x * x / df)
    )
    return math.exp(log_density)


def t_pvalue_quadrature(diffs: list[float]) -> float:
    """Two-tailed paired-t p-value with the t CDF tail integrated numerically."""
    n = len(diffs)
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / math.sqrt(var / n)
    df = n - 1
    tail, _err = quad(_t_pdf, abs(t), math.inf, args=(df,), epsabs=1e-12, epsrel=1e-10)
    return 2.0 * tail


def parse_qrels(path: str) -> dict[str, dict[str, int]]:
    qrels: dict[str, dict[str, int]] = defaultdict(dict)
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            qid, _iteration, docno, rel = line.split()
            qrels[qid][docno] = int(rel)
    return qrels


def parse_run(path: str) -> dict[str, list[tuple[str, float]]]:
    run: dict[str, list[tuple[str, float]]] = defaultdict(list)
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            qid, _q0, docno, _rank, score, _tag = line.split()
            run[qid].append((docno, float(score)))
    return run


def trec_measures(qrels_path: str, run_path: str, cutoff: int = 20) -> dict[str, dict[str, float]]:
    """Per-query recip_rank, map_cut.<cutoff>, ndcg_cut.<cutoff>.

    Follows trec_eval: docs re-sorted by (score desc, docno desc); queries
    with no relevant document are skipped; AP is divided by the number of
    relevant docs; nDCG uses gain/log2(rank+1) against the ideal ranking.
    """
    qrels = parse_qrels(qrels_path)
    run = parse_run(run_path)
    out: dict[str, dict[str, float]] = {}
    for qid, docs in run.items():
        judged = qrels.get(qid, {})
        num_rel = sum(1 for rel in judged.values() if rel > 0)
        if num_rel == 0:
            continue
        ordered = sorted(docs, key=lambda ds: ds[0], reverse=True)
        ordered.sort(key=lambda ds: ds[1], reverse=True)  # score desc, docno desc

        recip = 0.0
        ap_sum = 0.0
        rel_seen = 0
        dcg = 0.0
        for rank, (docno, _score) in enumerate(ordered, start=1):
            rel = judged.get(docno, 0)
            if rel > 0:
                if recip == 0.0:
                    recip = 1.0 / rank
                if rank <= cutoff:
                    rel_seen += 1
                    ap_sum += rel_seen / rank
                    dcg += rel / math.log2(rank + 1)
        idcg = sum(1.0 / math.log2(r + 1) for r in range(1, min(num_rel, cutoff) + 1))
        out[qid] = {
            "recip_rank": recip,
            f"map_cut.{cutoff}": ap_sum / num_rel,
            f"ndcg_cut.{cutoff}": dcg / idcg if idcg else 0.0,
        }
    return out
