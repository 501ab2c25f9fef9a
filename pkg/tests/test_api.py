import pytest
from fastapi.testclient import TestClient

from kgc_eval.server import create_app
from test_annotation import WIKI, make_campaign, submit


@pytest.fixture
def client():
    campaign, pool, tasks = make_campaign(n_tasks=2)
    app = create_app(campaign, pool)
    return TestClient(app), campaign, tasks


def judge(client, task_id, annotator, label, url=WIKI):
    return client.post(
        "/api/judgments",
        json={"task_id": task_id, "annotator": annotator, "label": label, "source_url": url},
    )


class TestTasksNext:
    def test_returns_task_json(self, client):
        http, _, tasks = client
        response = http.get("/api/tasks/next", params={"annotator": "ann1"})
        assert response.status_code == 200
        body = response.json()
        assert body["task_id"] == tasks[0].task_id
        assert set(body["triple"]) == {"subject", "relation", "object"}
        assert body["question_text"]

    def test_204_when_exhausted(self, client):
        http, campaign, tasks = client
        for task in tasks:
            submit(campaign, task.task_id, "ann1", "yes")
            submit(campaign, task.task_id, "ann2", "yes")
        assert http.get("/api/tasks/next", params={"annotator": "ann3"}).status_code == 204

    def test_unknown_annotator_422(self, client):
        http, _, _ = client
        assert http.get("/api/tasks/next", params={"annotator": "nope"}).status_code == 422


class TestJudgments:
    def test_happy_path_and_conflict_flow(self, client):
        http, _, tasks = client
        assert judge(http, tasks[0].task_id, "ann1", "yes").json()["state"] == "pending"
        assert judge(http, tasks[0].task_id, "ann2", "no").json()["state"] == "conflicted"
        conflicts = http.get("/api/conflicts").json()
        assert len(conflicts) == 1
        assert {j["label"] for j in conflicts[0]["judgments"]} == {"yes", "no"}
        assert judge(http, tasks[0].task_id, "ann3", "no").json()["state"] == "resolved"
        assert http.get("/api/conflicts").json() == []

    def test_allowlist_violation_422(self, client):
        http, _, tasks = client
        response = judge(http, tasks[0].task_id, "ann1", "yes", url="https://bad.example/x")
        assert response.status_code == 422
        assert "allowlist" in response.json()["detail"]

    def test_duplicate_422(self, client):
        http, _, tasks = client
        judge(http, tasks[0].task_id, "ann1", "yes")
        response = judge(http, tasks[0].task_id, "ann1", "yes")
        assert response.status_code == 422
        assert "already judged" in response.json()["detail"]


class TestProgressAndExport:
    def test_progress_counts(self, client):
        http, _, tasks = client
        assert http.get("/api/progress").json() == {
            "pending": 2,
            "conflicted": 0,
            "resolved": 0,
            "agreement_rate": None,
        }
        judge(http, tasks[0].task_id, "ann1", "yes")
        judge(http, tasks[0].task_id, "ann2", "yes")
        body = http.get("/api/progress").json()
        assert body["resolved"] == 1
        assert body["agreement_rate"] == 1.0

    def test_export_blocked_until_complete_then_text(self, client):
        http, _, tasks = client
        assert http.get("/api/export/qrels").status_code == 409
        for task in tasks:
            judge(http, task.task_id, "ann1", "yes")
            judge(http, task.task_id, "ann2", "yes")
        response = http.get("/api/export/qrels")
        assert response.status_code == 200
        lines = response.text.strip().splitlines()
        # 2 originals + 2 annotated positives
        assert len(lines) == 4
        assert all(line.split()[3] in ("0", "1") for line in lines)
