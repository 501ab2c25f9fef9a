"""Human judgment campaigns over pooled triple questions.

Every accepted judgment is appended to a JSON-lines log; campaign state is
a pure function of the task list and the log, so replaying the log from an
empty state reproduces the campaign exactly. Each task needs two agreeing
primary judgments; a disagreement parks it as conflicted until a third
annotator (never one of the two primaries) adjudicates.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence
from urllib.parse import urlparse

from .errors import CampaignError, DataFormatError
from .judgments import (
    NEGATIVE,
    POSITIVE,
    PROV_ANNOTATED,
    PROV_ORIGINAL,
    JudgmentSet,
)
from .pooling import AnnotationTask, Pool, trivial_judgments

YES = "yes"
NO = "no"

PRIMARY = "primary"
ADJUDICATOR = "adjudicator"

PENDING = "pending"
CONFLICTED = "conflicted"
RESOLVED = "resolved"

DEFAULT_ALLOWLIST = ("wikipedia.org",)


@dataclass(frozen=True)
class Judgment:
    task_id: str
    annotator: str
    label: str
    source_url: str
    timestamp: str = ""
    role: str = PRIMARY


@dataclass
class AgreementReport:
    double_judged: int
    agreements: int
    open_conflicts: int
    throughput: dict[str, int]

    @property
    def rate(self) -> float:
        return self.agreements / self.double_judged


class Campaign:
    """Tasks, roster, allowlist, and the append-only judgment log."""

    def __init__(
        self,
        tasks: Sequence[AnnotationTask],
        roster: Sequence[str],
        allowlist: Sequence[str] = DEFAULT_ALLOWLIST,
        entry_depths: Mapping[str, int] | None = None,
        log_path: str | None = None,
    ) -> None:
        self.tasks: dict[str, AnnotationTask] = {t.task_id: t for t in tasks}
        if len(self.tasks) != len(tasks):
            raise CampaignError("task ids must be unique")
        self.roster = list(roster)
        self.allowlist = list(allowlist)
        self.entry_depths = dict(entry_depths or {})
        self.log_path = log_path
        self.log: list[Judgment] = []
        self._primary: dict[str, dict[str, str]] = {tid: {} for tid in self.tasks}
        self._adjudicated: dict[str, str] = {}

    # -- state ------------------------------------------------------------

    def state_of(self, task_id: str) -> str:
        if task_id in self._adjudicated:
            return RESOLVED
        primaries = self._primary[task_id]
        if len(primaries) < 2:
            return PENDING
        labels = set(primaries.values())
        return RESOLVED if len(labels) == 1 else CONFLICTED

    def resolved_label(self, task_id: str) -> str | None:
        if task_id in self._adjudicated:
            return self._adjudicated[task_id]
        primaries = self._primary[task_id]
        if len(primaries) == 2 and len(set(primaries.values())) == 1:
            return next(iter(primaries.values()))
        return None

    def counts(self) -> dict[str, int]:
        counts = {PENDING: 0, CONFLICTED: 0, RESOLVED: 0}
        for tid in self.tasks:
            counts[self.state_of(tid)] += 1
        return counts

    # -- operations ---------------------------------------------------------

    def assign(self, annotator: str) -> AnnotationTask | None:
        """Lowest-id task still needing a primary judgment this annotator
        has not given; None once the annotator is exhausted."""
        if annotator not in self.roster:
            raise CampaignError(f"unknown annotator {annotator!r}")
        for task_id in sorted(self.tasks):
            primaries = self._primary[task_id]
            if len(primaries) < 2 and annotator not in primaries:
                return self.tasks[task_id]
        return None

    def submit(self, judgment: Judgment) -> str:
        """Validate, append to the log, and return the task's new state."""
        role = self._validate(judgment)
        judgment = Judgment(
            task_id=judgment.task_id,
            annotator=judgment.annotator,
            label=judgment.label,
            source_url=judgment.source_url,
            timestamp=judgment.timestamp,
            role=role,
        )
        self._apply(judgment)
        self.log.append(judgment)
        if self.log_path:
            with open(self.log_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(asdict(judgment), sort_keys=True) + "\n")
        return self.state_of(judgment.task_id)

    def _validate(self, j: Judgment) -> str:
        if j.annotator not in self.roster:
            raise CampaignError(f"unknown annotator {j.annotator!r}")
        if j.task_id not in self.tasks:
            raise CampaignError(f"unknown task {j.task_id!r}")
        if j.label not in (YES, NO):
            raise CampaignError(f"label must be yes or no, got {j.label!r}")
        self._check_source(j.source_url)
        state = self.state_of(j.task_id)
        if state == RESOLVED:
            raise CampaignError(f"task {j.task_id} is already resolved")
        if state == CONFLICTED:
            # any third annotator submitting on a conflict is the adjudicator
            if j.annotator in self._primary[j.task_id]:
                raise CampaignError(
                    f"annotator {j.annotator!r} gave a primary judgment on {j.task_id} "
                    "and cannot adjudicate it"
                )
            return ADJUDICATOR
        if j.role == ADJUDICATOR:
            raise CampaignError(f"task {j.task_id} is not conflicted; nothing to adjudicate")
        if j.annotator in self._primary[j.task_id]:
            raise CampaignError(
                f"annotator {j.annotator!r} already judged task {j.task_id}"
            )
        return PRIMARY

    def _check_source(self, url: str) -> None:
        if not url:
            raise CampaignError("a source link is required")
        host = urlparse(url).hostname
        if host is None:
            raise CampaignError(f"source link {url!r} has no hostname")
        for allowed in self.allowlist:
            if host == allowed or host.endswith("." + allowed):
                return
        raise CampaignError(
            f"source host {host!r} is not in the verified-source allowlist"
        )

    def _apply(self, j: Judgment) -> None:
        if j.role == ADJUDICATOR:
            self._adjudicated[j.task_id] = j.label
        else:
            self._primary[j.task_id][j.annotator] = j.label

    # -- reports ------------------------------------------------------------

    def agreement(self) -> AgreementReport:
        """Raw inter-annotator agreement over tasks with two primary judgments."""
        double = 0
        agree = 0
        for tid in self.tasks:
            primaries = self._primary[tid]
            if len(primaries) == 2:
                double += 1
                if len(set(primaries.values())) == 1:
                    agree += 1
        if double == 0:
            raise CampaignError("no task has two primary judgments yet")
        throughput: dict[str, int] = {}
        for j in self.log:
            throughput[j.annotator] = throughput.get(j.annotator, 0) + 1
        return AgreementReport(
            double_judged=double,
            agreements=agree,
            open_conflicts=self.counts()[CONFLICTED],
            throughput=throughput,
        )

    def conflicts(self) -> list[dict]:
        out = []
        for tid in sorted(self.tasks):
            if self.state_of(tid) != CONFLICTED:
                continue
            task = self.tasks[tid]
            judgments = [
                {"annotator": j.annotator, "label": j.label, "source_url": j.source_url}
                for j in self.log
                if j.task_id == tid and j.role == PRIMARY
            ]
            out.append(
                {"task_id": tid, "question_text": task.question_text, "judgments": judgments}
            )
        return out


def export_judgments(campaign: Campaign, pool: Pool) -> tuple[JudgmentSet, dict[str, int]]:
    """Merge resolved labels, trivial negatives, and original positives.

    Every non-trivial pool entry must be resolved; annotated records carry
    the pool depth at which the entry first appeared.
    """
    unresolved = [tid for tid in campaign.tasks if campaign.state_of(tid) != RESOLVED]
    if unresolved:
        raise CampaignError(f"{len(unresolved)} tasks are not resolved yet")
    js = trivial_judgments(pool)
    for qid, answers in sorted(pool.answers.items()):
        for entity in sorted(answers):
            js.add(qid, entity, POSITIVE, PROV_ORIGINAL, 0)
    for tid in sorted(campaign.tasks):
        task = campaign.tasks[tid]
        label = POSITIVE if campaign.resolved_label(tid) == YES else NEGATIVE
        depth = campaign.entry_depths.get(tid)
        if depth is None:
            entry = pool.entries.get((task.qid, task.entity))
            depth = entry.min_depth if entry else 0
        js.add(task.qid, task.entity, label, PROV_ANNOTATED, depth)
    stats = {"total": len(js), "positives": js.n_positive, "negatives": js.n_negative}
    return js, stats


# ---------------------------------------------------------------------------
# Campaign persistence


def save_tasks(tasks: Sequence[AnnotationTask], entry_depths: Mapping[str, int], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in tasks:
            f.write(
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
                        str(entry_depths.get(t.task_id, 0)),
                    )
                )
                + "\n"
            )


def load_tasks(path: str) -> tuple[list[AnnotationTask], dict[str, int]]:
    tasks: list[AnnotationTask] = []
    depths: dict[str, int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 9:
                raise DataFormatError(f"{path}:{lineno}: expected 9 fields, got {len(fields)}")
            tasks.append(
                AnnotationTask(
                    task_id=fields[0],
                    qid=fields[1],
                    entity=fields[2],
                    question_text=fields[3],
                    subject=fields[4],
                    relation=fields[5],
                    object=fields[6],
                    used_fallback=fields[7] == "1",
                )
            )
            depths[fields[0]] = int(fields[8])
    return tasks, depths


def init_campaign_dir(
    directory: str,
    tasks: Sequence[AnnotationTask],
    entry_depths: Mapping[str, int],
    roster: Sequence[str],
    allowlist: Sequence[str] = DEFAULT_ALLOWLIST,
) -> None:
    os.makedirs(directory, exist_ok=True)
    save_tasks(tasks, entry_depths, os.path.join(directory, "tasks.tsv"))
    with open(os.path.join(directory, "campaign.json"), "w", encoding="utf-8") as f:
        json.dump({"roster": list(roster), "allowlist": list(allowlist)}, f, indent=2, sort_keys=True)
        f.write("\n")
    log_path = os.path.join(directory, "log.jsonl")
    if not os.path.exists(log_path):
        open(log_path, "w").close()


def load_campaign(directory: str) -> Campaign:
    """Rebuild campaign state by replaying the judgment log."""
    with open(os.path.join(directory, "campaign.json"), encoding="utf-8") as f:
        config = json.load(f)
    tasks, depths = load_tasks(os.path.join(directory, "tasks.tsv"))
    log_path = os.path.join(directory, "log.jsonl")
    campaign = Campaign(
        tasks=tasks,
        roster=config["roster"],
        allowlist=config.get("allowlist", list(DEFAULT_ALLOWLIST)),
        entry_depths=depths,
        log_path=None,  # silence appends during replay
    )
    if os.path.exists(log_path):
        with open(log_path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                campaign.submit(Judgment(**json.loads(line)))
    campaign.log_path = log_path
    return campaign


def import_batch(campaign: Campaign, path: str) -> int:
    """Apply batch judgments: task_id<TAB>annotator<TAB>label<TAB>source_url."""
    n = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise DataFormatError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            task_id, annotator, label, source_url = fields
            try:
                campaign.submit(
                    Judgment(task_id=task_id, annotator=annotator, label=label, source_url=source_url)
                )
            except CampaignError as exc:
                raise CampaignError(f"{path}:{lineno}: {exc}") from exc
            n += 1
    return n


def export_batch(campaign: Campaign, path: str) -> None:
    """Write the accepted judgments in log order as the batch TSV."""
    with open(path, "w", encoding="utf-8") as f:
        for j in campaign.log:
            f.write(f"{j.task_id}\t{j.annotator}\t{j.label}\t{j.source_url}\n")


def now_utc() -> str:
    return datetime.now(timezone.utc).isoformat()


def iter_log(path: str) -> Iterable[Judgment]:
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                yield Judgment(**json.loads(line))
