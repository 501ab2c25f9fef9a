"""kgc-eval command-line interface.

Subcommands: evaluate, pool build|filter|render, annotate
serve|import|export|agreement, meta tau|depth-sweep|stability|power|
categories, dist kld, baseline. Exit codes: 0 success, 1 usage error,
2 data error.

Toolkit-native artifacts begin with a comment header recording the tool
version, the resolved-config hash, and the master seed. TREC-interchange
files (qrels, run files) are written bare so the reference trec_eval
toolkit can read them.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Sequence

from . import __version__
from .annotation import (
    Campaign,
    export_batch,
    export_judgments,
    import_batch,
    init_campaign_dir,
    load_campaign,
)
from .config import ExperimentConfig, load_config, seed_from_env, set_field
from .errors import KgcEvalError
from .judgments import JudgmentSet
from .kg import (
    aggregate_questions,
    classify_relations,
    kl_divergence,
    load_graph_splits,
    load_triples,
    relation_distribution,
    write_question_mapping,
)
from .meta import (
    EvalSetup,
    category_correlation,
    depth_sweep,
    discriminative_power,
    subsample_stability,
)
from .metrics import (
    MetricId,
    export_trec,
    macro_eval,
    macro_metric_ids,
    micro_eval,
    micro_metric_ids,
)
from .pooling import (
    TemplateSet,
    build_pool,
    derive_type_profile,
    filter_trivial,
    load_entity_labels,
    load_pool,
    load_templates,
    render_tasks,
    save_pool,
)
from .ranking import RANKED, baseline_run, load_run, save_run
from .stats import kendall_tau


class CliParser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def header_lines(config: ExperimentConfig) -> list[str]:
    return [f"# kgc-eval {__version__} config={config.hash()} seed={config.seed}"]


def write_artifact(path: str, lines: Sequence[str], config: ExperimentConfig) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for line in header_lines(config) + list(lines):
            f.write(line + "\n")


# ---------------------------------------------------------------------------
# shared loading


def resolve_config(args) -> ExperimentConfig:
    config = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    for key in vars(args):
        if hasattr(config, key):
            value = getattr(args, key)
            if value is not None:
                set_field(config, key, str(value))
    runs = getattr(args, "run", None)
    if runs:
        config.runs = ",".join(runs)
    return seed_from_env(config)


def load_environment(config: ExperimentConfig, need_runs: bool = True):
    for name in ("train", "valid", "test"):
        if not getattr(config, name):
            raise KgcEvalError(f"missing required input: --{name} (or config key '{name}')")
    splits = load_graph_splits(config.train, config.valid, config.test)
    questions = aggregate_questions(splits.test)
    from .ranking import build_macro_filters

    macro_filters = build_macro_filters(splits, questions)
    runs = []
    if need_runs:
        if not config.runs:
            raise KgcEvalError("no runs given: use --run tag=path (repeatable)")
        tags = [tag for tag, _ in config.parsed_runs()]
        if len(set(tags)) != len(tags):
            raise KgcEvalError(f"system tags must be unique, got {tags}")
        known = {q.qid for q, _ in questions}
        for tag, path in config.parsed_runs():
            runs.append(
                load_run(
                    path,
                    format=config.run_format,
                    tag=tag,
                    known_qids=known,
                    complete=config.runs_complete,
                )
            )
    judgments = (
        JudgmentSet.load(config.judgments)
        if config.judgments
        else JudgmentSet.from_answer_sets(questions)
    )
    return splits, questions, macro_filters, runs, judgments


def selected_metrics(config: ExperimentConfig) -> list[MetricId]:
    if config.metrics:
        return [MetricId.parse(m.strip()) for m in config.metrics.split(",") if m.strip()]
    ks = config.parsed_ks()
    return micro_metric_ids(ks) + macro_metric_ids(ks)


# ---------------------------------------------------------------------------
# subcommands


def cmd_evaluate(args) -> int:
    config = resolve_config(args)
    splits, questions, macro_filters, runs, judgments = load_environment(config)
    metrics = selected_metrics(config)
    ks = config.parsed_ks()

    report_lines = []
    for run in runs:
        families = {m.family for m in metrics}
        reports = {}
        if "micro" in families:
            reports["micro"] = micro_eval(
                run,
                splits,
                judgments,
                config.ties,
                ks,
                config.include_annotated_positives,
                questions,
            )
        if "macro" in families and run.format == RANKED:
            reports["macro"] = macro_eval(run, questions, judgments, macro_filters, ks)
        for metric in metrics:
            report = reports.get(metric.family)
            if report is None:
                continue
            report_lines.append(f"{run.tag}\t{metric}\t{report.values[metric]:.6f}")
            vec_lines = []
            for unit, value in zip(report.units, report.vectors[metric]):
                unit_key = f"{unit[0]}:{unit[1]}" if isinstance(unit, tuple) else unit
                vec_lines.append(f"{unit_key}\t{value:.6f}")
            write_artifact(
                os.path.join(config.out, "vectors", f"{run.tag}__{metric}.tsv"),
                vec_lines,
                config,
            )
    write_artifact(os.path.join(config.out, "report.tsv"), report_lines, config)
    if args.grouped:
        from .metrics import grouped_micro_eval

        grouped_lines = []
        for run in runs:
            groups = grouped_micro_eval(
                run,
                splits,
                judgments,
                args.grouped,
                config.ties,
                ks,
                config.include_annotated_positives,
                questions,
            )
            for key, report in sorted(groups.items(), key=lambda kv: str(kv[0])):
                group_name = key if isinstance(key, str) else f"{key[0]}:{key[1]}"
                for metric in (m for m in metrics if m.family == "micro"):
                    grouped_lines.append(
                        f"{run.tag}\t{group_name}\t{metric}\t{report.values[metric]:.6f}"
                    )
        write_artifact(
            os.path.join(config.out, f"grouped_{args.grouped}.tsv"), grouped_lines, config
        )
    write_question_mapping(questions, os.path.join(config.out, "questions.tsv"))
    if any(run.format == RANKED for run in runs):
        export_trec(
            questions,
            judgments,
            [r for r in runs if r.format == RANKED],
            macro_filters,
            os.path.join(config.out, "trec"),
        )
    print(f"wrote {os.path.join(config.out, 'report.tsv')} ({len(report_lines)} values)")
    return 0


def cmd_baseline(args) -> int:
    config = resolve_config(args)
    splits, questions, _filters, _runs, _judgments = load_environment(config, need_runs=False)
    run = baseline_run(
        splits, questions, args.mode, seed=config.seed, swap_rate=args.swap_rate, tag=args.tag
    )
    os.makedirs(os.path.dirname(args.out_run) or ".", exist_ok=True)
    save_run(run, args.out_run)
    print(f"wrote {args.out_run}")
    return 0


def cmd_dist_kld(args) -> int:
    value = kl_divergence(
        relation_distribution(load_triples(args.p)),
        relation_distribution(load_triples(args.q)),
        epsilon=args.epsilon,
    )
    print(f"{value:.6f}")
    return 0


def cmd_dist_relations(args) -> int:
    """Per-relation counts and probabilities, binning left to plotting."""
    from collections import Counter

    triples = load_triples(args.split)
    counts = Counter(p for _, p, _ in triples)
    total = len(triples)
    lines = [
        f"{relation}\t{count}\t{count / total:.6f}"
        for relation, count in sorted(counts.items(), key=lambda rc: (-rc[1], rc[0]))
    ]
    config = resolve_config(args)
    write_artifact(args.out_counts, lines, config)
    print(f"wrote {args.out_counts} ({len(counts)} relations)")
    return 0


def cmd_pool_build(args) -> int:
    config = resolve_config(args)
    splits, questions, macro_filters, runs, _ = load_environment(config)
    pool = build_pool(questions, runs, args.depth, macro_filters)
    save_pool(pool, args.out_pool, header_lines=[h[2:] for h in header_lines(config)])
    counts = pool.status_counts()
    print(f"wrote {args.out_pool}: {len(pool.entries)} entries {counts}")
    return 0


def cmd_pool_filter(args) -> int:
    config = resolve_config(args)
    splits, questions, _filters, _runs, _judgments = load_environment(config, need_runs=False)
    pool = load_pool(config.pool, questions)
    stats = classify_relations(splits)
    types = derive_type_profile(splits)
    filtered = filter_trivial(pool, stats, types)
    save_pool(filtered, args.out_pool, header_lines=[h[2:] for h in header_lines(config)])
    counts = filtered.status_counts()
    print(f"wrote {args.out_pool}: {counts}")
    return 0


def cmd_pool_render(args) -> int:
    config = resolve_config(args)
    splits, questions, _f, _r, _j = load_environment(config, need_runs=False)
    pool = load_pool(config.pool, questions)
    templates = (
        load_templates(config.templates) if config.templates else TemplateSet(patterns={})
    )
    labels = load_entity_labels(config.labels) if config.labels else None
    tasks = render_tasks(pool, templates, labels)
    lines = []
    for t in tasks:
        depth = pool.entries[(t.qid, t.entity)].min_depth
        lines.append(
            "\t".join(
                (
                    t.task_id,
                    t.qid,
                    t.entity,
                    t.question_text,
                    t.subject,
                    t.relation,
                    t.object,
                    "1" if t.used_fallback else "0",
                    str(depth),
                )
            )
        )
    write_artifact(args.out_tasks, lines, config)
    print(f"wrote {args.out_tasks}: {len(tasks)} tasks")
    return 0


def _campaign_from_args(args, config: ExperimentConfig) -> Campaign:
    tasks_path = os.path.join(args.campaign, "tasks.tsv")
    if not os.path.exists(tasks_path):
        if not config.pool:
            raise KgcEvalError(
                f"campaign dir {args.campaign!r} is not initialized and no --pool was given"
            )
        splits, questions, _f, _r, _j = load_environment(config, need_runs=False)
        pool = load_pool(config.pool, questions)
        templates = (
            load_templates(config.templates) if config.templates else TemplateSet(patterns={})
        )
        labels = load_entity_labels(config.labels) if config.labels else None
        tasks = render_tasks(pool, templates, labels)
        depths = {t.task_id: pool.entries[(t.qid, t.entity)].min_depth for t in tasks}
        roster = args.roster.split(",") if args.roster else []
        if not roster:
            raise KgcEvalError("an annotator roster is required: --roster a1,a2,...")
        allowlist = args.allowlist.split(",") if args.allowlist else ["wikipedia.org"]
        init_campaign_dir(args.campaign, tasks, depths, roster, allowlist)
    return load_campaign(args.campaign)


def cmd_annotate_serve(args) -> int:
    config = resolve_config(args)
    campaign = _campaign_from_args(args, config)
    pool = None
    if config.pool:
        _splits, questions, _f, _r, _j = load_environment(config, need_runs=False)
        pool = load_pool(config.pool, questions)
    from .server import serve

    print(f"serving campaign {args.campaign} on {args.host}:{args.port}")
    serve(campaign, pool, host=args.host, port=args.port, ui_dir=args.ui_dir)
    return 0


def cmd_annotate_import(args) -> int:
    config = resolve_config(args)
    campaign = _campaign_from_args(args, config)
    n = import_batch(campaign, args.batch)
    counts = campaign.counts()
    print(f"imported {n} judgments; state: {counts}")
    return 0


def cmd_annotate_export(args) -> int:
    config = resolve_config(args)
    campaign = _campaign_from_args(args, config)
    if not config.pool:
        raise KgcEvalError("--pool is required to export judgments")
    _splits, questions, _f, _r, _j = load_environment(config, need_runs=False)
    pool = load_pool(config.pool, questions)
    judgment_set, stats = export_judgments(campaign, pool)
    os.makedirs(config.out, exist_ok=True)
    judgments_path = os.path.join(config.out, "judgments.tsv")
    judgment_set.save(judgments_path)
    qrels_path = os.path.join(config.out, "qrels.txt")
    with open(qrels_path, "w", encoding="utf-8") as f:
        for line in judgment_set.qrels_lines():
            f.write(line + "\n")
    batch_path = os.path.join(config.out, "batch.tsv")
    export_batch(campaign, batch_path)
    print(
        f"exported {stats['total']} judgments ({stats['positives']} positive, "
        f"{stats['negatives']} negative) to {config.out}"
    )
    return 0


def cmd_annotate_agreement(args) -> int:
    config = resolve_config(args)
    campaign = _campaign_from_args(args, config)
    report = campaign.agreement()
    print(f"double-judged: {report.double_judged}")
    print(f"agreement-rate: {report.rate:.6f}")
    print(f"open-conflicts: {report.open_conflicts}")
    for annotator, n in sorted(report.throughput.items()):
        print(f"throughput\t{annotator}\t{n}")
    return 0


def _read_report_values(path: str, metric: MetricId) -> dict[str, float]:
    values: dict[str, float] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            system, metric_s, value = line.split("\t")
            if metric_s == str(metric):
                values[system] = float(value)
    if not values:
        raise KgcEvalError(f"{path} carries no values for metric {metric}")
    return values


def cmd_meta_tau(args) -> int:
    metric = MetricId.parse(args.metric)
    a = _read_report_values(args.report_a, metric)
    b = _read_report_values(args.report_b, metric)
    tau = kendall_tau(a, b, ascending_a=metric.ascending, ascending_b=metric.ascending)
    print(f"{tau:.6f}")
    return 0


def cmd_meta_depth_sweep(args) -> int:
    config = resolve_config(args)
    splits, questions, macro_filters, runs, judgments = load_environment(config)
    if not config.pool:
        raise KgcEvalError("--pool is required for a depth sweep")
    pool = load_pool(config.pool, questions)
    setup = EvalSetup(
        splits=splits,
        questions=questions,
        macro_filters=macro_filters,
        judgments=None,
        ties=config.ties,
        include_annotated_positives=config.include_annotated_positives,
        ks=config.parsed_ks(),
    )
    metrics = selected_metrics(config)
    out = depth_sweep(
        runs, setup, pool, judgments, metrics, config.parsed_depths(), workers=config.effective_workers()
    )
    lines = [
        f"{metric}\t{d}\t{report.tau:.6f}"
        for (metric, d), report in sorted(out.items(), key=lambda kv: (str(kv[0][0]), kv[0][1]))
    ]
    path = os.path.join(config.out, "depth_sweep.tsv")
    write_artifact(path, lines, config)
    print(f"wrote {path}")
    return 0


def cmd_meta_stability(args) -> int:
    config = resolve_config(args)
    splits, questions, macro_filters, runs, judgments = load_environment(config)
    setup = EvalSetup(
        splits=splits,
        questions=questions,
        macro_filters=macro_filters,
        judgments=judgments,
        ties=config.ties,
        include_annotated_positives=config.include_annotated_positives,
        ks=config.parsed_ks(),
    )
    report = subsample_stability(
        runs,
        setup,
        selected_metrics(config),
        sizes=config.parsed_sizes(),
        repeats=config.repeats,
        seed=config.seed,
        workers=config.effective_workers(),
    )
    path = os.path.join(config.out, "stability.tsv")
    write_artifact(path, report.lines(), config)
    print(f"wrote {path}")
    return 0


def cmd_meta_power(args) -> int:
    config = resolve_config(args)
    splits, questions, macro_filters, runs, judgments = load_environment(config)
    setup = EvalSetup(
        splits=splits,
        questions=questions,
        macro_filters=macro_filters,
        judgments=judgments,
        ties=config.ties,
        include_annotated_positives=config.include_annotated_positives,
        ks=config.parsed_ks(),
    )
    metric = MetricId.parse(args.metric)
    reports = [setup.evaluate(run, [metric]) for run in runs]
    curve = discriminative_power(reports, metric, unit=args.unit)
    lines = [f"# area={curve.area:.6f}"]
    for i, (p, pair) in enumerate(zip(curve.pvalues, curve.pairs), start=1):
        lines.append(f"{metric}\t{i}\t{p:.6f}\t{pair[0]}:{pair[1]}")
    path = os.path.join(config.out, f"power_{metric}.tsv")
    write_artifact(path, lines, config)
    print(f"wrote {path} (area {curve.area:.6f})")
    return 0


def cmd_meta_categories(args) -> int:
    config = resolve_config(args)
    splits, questions, macro_filters, runs, judgments_sparse = load_environment(config)
    if not args.judgments_complete:
        raise KgcEvalError("--judgments-complete is required for category correlations")
    judgments_complete = JudgmentSet.load(args.judgments_complete)
    common = dict(
        splits=splits,
        questions=questions,
        macro_filters=macro_filters,
        ties=config.ties,
        include_annotated_positives=config.include_annotated_positives,
        ks=config.parsed_ks(),
    )
    setup_sparse = EvalSetup(judgments=judgments_sparse, **common)
    setup_complete = EvalSetup(judgments=judgments_complete, **common)
    metrics = [m for m in selected_metrics(config) if m.family == "micro"]
    table = category_correlation(runs, setup_sparse, setup_complete, metrics)
    cells = sorted({(c, d) for c, d, _ in table})
    lines = ["category\tdirection\t" + "\t".join(str(m) for m in metrics)]
    for category, direction in cells:
        row = [category, direction]
        for metric in metrics:
            tau = table.get((category, direction, metric))
            row.append("absent" if tau is None else f"{tau:.6f}")
        lines.append("\t".join(row))
    path = os.path.join(config.out, "categories.tsv")
    write_artifact(path, lines, config)
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _add_common(parser: argparse.ArgumentParser, runs: bool = True) -> None:
    parser.add_argument("--config", help="key=value config file; flags override")
    parser.add_argument("--train")
    parser.add_argument("--valid")
    parser.add_argument("--test")
    parser.add_argument("--judgments")
    parser.add_argument("--ks")
    parser.add_argument("--ties", choices=("mean", "optimistic", "pessimistic"))
    parser.add_argument("--metrics", help="comma-joined metric ids, e.g. micro_mrr,macro_map@20")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out")
    parser.add_argument(
        "--include-annotated-positives",
        dest="include_annotated_positives",
        choices=("true", "false"),
    )
    if runs:
        parser.add_argument(
            "--run", action="append", metavar="TAG=PATH", help="repeatable run entry"
        )
        parser.add_argument("--run-format", dest="run_format", choices=("ranked", "target-ranks"))
        parser.add_argument(
            "--runs-complete",
            dest="runs_complete",
            action="store_const",
            const="true",
            help="treat ranked lists as full candidate rankings",
        )


def build_parser() -> CliParser:
    parser = CliParser(prog="kgc-eval", description=__doc__)
    parser.add_argument("--version", action="version", version=f"kgc-eval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="micro and macro metric reports")
    _add_common(p)
    p.add_argument(
        "--grouped",
        choices=("relation", "category-direction"),
        help="also write micro metrics grouped by relation or category x direction",
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="generate a synthetic baseline run")
    _add_common(p, runs=False)
    p.add_argument("--mode", required=True, choices=("frequency", "random", "oracle-noise"))
    p.add_argument("--swap-rate", dest="swap_rate", type=float, default=0.0)
    p.add_argument("--tag")
    p.add_argument("--out-run", dest="out_run", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("dist", help="distribution statistics")
    dist_sub = p.add_subparsers(dest="dist_command", required=True)
    kld = dist_sub.add_parser("kld", help="KL divergence between two splits' relations")
    kld.add_argument("--config")
    kld.add_argument("--p", required=True, help="triple file for the left distribution")
    kld.add_argument("--q", required=True, help="triple file for the right distribution")
    kld.add_argument("--epsilon", type=float, default=1e-9)
    kld.set_defaults(func=cmd_dist_kld)
    rel = dist_sub.add_parser("relations", help="per-relation counts for a split")
    rel.add_argument("--config")
    rel.add_argument("--seed", type=int)
    rel.add_argument("--split", required=True, help="triple file")
    rel.add_argument("--out-counts", dest="out_counts", required=True)
    rel.set_defaults(func=cmd_dist_relations)

    p = sub.add_parser("pool", help="judgment pool construction")
    pool_sub = p.add_subparsers(dest="pool_command", required=True)
    b = pool_sub.add_parser("build", help="pool the top-depth candidates of all runs")
    _add_common(b)
    b.add_argument("--depth", type=int, default=10)
    b.add_argument("--out-pool", dest="out_pool", required=True)
    b.set_defaults(func=cmd_pool_build)
    f = pool_sub.add_parser("filter", help="mark trivially false entries")
    _add_common(f, runs=False)
    f.add_argument("--pool", required=True)
    f.add_argument("--out-pool", dest="out_pool", required=True)
    f.set_defaults(func=cmd_pool_filter)
    r = pool_sub.add_parser("render", help="render annotation tasks")
    _add_common(r, runs=False)
    r.add_argument("--pool", required=True)
    r.add_argument("--templates")
    r.add_argument("--labels")
    r.add_argument("--out-tasks", dest="out_tasks", required=True)
    r.set_defaults(func=cmd_pool_render)

    p = sub.add_parser("annotate", help="judgment campaign operations")
    ann_sub = p.add_subparsers(dest="annotate_command", required=True)
    for name, handler in (
        ("serve", cmd_annotate_serve),
        ("import", cmd_annotate_import),
        ("export", cmd_annotate_export),
        ("agreement", cmd_annotate_agreement),
    ):
        a = ann_sub.add_parser(name)
        _add_common(a, runs=False)
        a.add_argument("--campaign", required=True, help="campaign directory")
        a.add_argument("--pool")
        a.add_argument("--templates")
        a.add_argument("--labels")
        a.add_argument("--roster", help="comma-joined annotator ids (campaign init)")
        a.add_argument("--allowlist", help="comma-joined source hosts (campaign init)")
        if name == "serve":
            a.add_argument("--host", default="127.0.0.1")
            a.add_argument("--port", type=int, default=8100)
            a.add_argument("--ui-dir", dest="ui_dir")
        if name == "import":
            a.add_argument("--batch", required=True)
        a.set_defaults(func=handler)

    p = sub.add_parser("meta", help="meta-evaluation of metrics")
    meta_sub = p.add_subparsers(dest="meta_command", required=True)
    t = meta_sub.add_parser("tau", help="Kendall tau between two metric reports")
    t.add_argument("--report-a", dest="report_a", required=True)
    t.add_argument("--report-b", dest="report_b", required=True)
    t.add_argument("--metric", required=True)
    t.set_defaults(func=cmd_meta_tau)
    d = meta_sub.add_parser("depth-sweep", help="ranking correlation vs pooling depth")
    _add_common(d)
    d.add_argument("--pool", required=True)
    d.add_argument("--depths")
    d.set_defaults(func=cmd_meta_depth_sweep)
    s = meta_sub.add_parser("stability", help="subsample stability of system rankings")
    _add_common(s)
    s.add_argument("--sizes")
    s.add_argument("--repeats", type=int)
    s.set_defaults(func=cmd_meta_stability)
    w = meta_sub.add_parser("power", help="discriminative power (paired t-tests)")
    _add_common(w)
    w.add_argument("--metric", required=True)
    w.add_argument("--unit", choices=("answer", "triple"), default="answer")
    w.set_defaults(func=cmd_meta_power)
    c = meta_sub.add_parser("categories", help="per-category ranking correlations")
    _add_common(c)
    c.add_argument(
        "--judgments-complete",
        dest="judgments_complete",
        required=True,
        help="judgment set of the complete regime (the sparse one comes from --judgments)",
    )
    c.set_defaults(func=cmd_meta_categories)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KgcEvalError as exc:
        print(f"kgc-eval: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"kgc-eval: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
