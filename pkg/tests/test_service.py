"""Service endpoint contracts and the session-synchronization invariant."""

from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from conftest import make_png
from f2m.mermaid import parse_flowchart, serialize
from f2m.providers import ConvertRequest, MockProvider, RefineRequest
from f2m.service import SessionStore, create_app

PNG = make_png((7, 7, 7))
# canonical form: the session stores serialize(graph), so a canonical
# fixture comes back byte-identical
FIXTURE_CODE = "flowchart TD\nA[Start]\nB[End]\nA --> B"


@pytest.fixture
def client(tmp_path, monkeypatch):
    fixtures = tmp_path / "fixtures"
    MockProvider(fixtures).record(ConvertRequest(PNG, "image/png"), FIXTURE_CODE)
    monkeypatch.setenv("F2M_MOCK_FIXTURES", str(fixtures))
    app = create_app(session_cap=8)
    with TestClient(app) as test_client:
        test_client.fixtures = fixtures
        yield test_client


def convert(client) -> dict:
    resp = client.post("/api/convert",
                       files={"image": ("simple.png", PNG, "image/png")},
                       data={"model": "mock"})
    assert resp.status_code == 200, resp.text
    return resp.json()


class TestConvert:
    def test_mock_fixture_round(self, client):
        body = convert(client)
        assert body["code"] == FIXTURE_CODE
        assert body["revision"] == 1
        assert body["document_id"]

    def test_unknown_model(self, client):
        resp = client.post("/api/convert",
                           files={"image": ("x.png", PNG, "image/png")},
                           data={"model": "made-up"})
        assert resp.status_code == 400

    def test_unsupported_media_type(self, client):
        resp = client.post("/api/convert",
                           files={"image": ("x.gif", b"GIF89a", "image/gif")},
                           data={"model": "mock"})
        assert resp.status_code == 400

    def test_oversized_image(self, tmp_path):
        app = create_app(max_image_bytes=64)
        with TestClient(app) as client:
            resp = client.post("/api/convert",
                               files={"image": ("x.png", b"\x89" * 100, "image/png")},
                               data={"model": "mock"})
        assert resp.status_code == 400
        assert "limit" in resp.json()["error"]

    def test_judgeless_provider_unreachable_is_502(self, client, monkeypatch):
        monkeypatch.delenv("F2M_OPENAI_API_KEY", raising=False)
        monkeypatch.setenv("F2M_PROVIDER_BASE_URL_OPENAI", "http://127.0.0.1:9")
        resp = client.post("/api/convert",
                           files={"image": ("x.png", PNG, "image/png")},
                           data={"model": "gpt-4.1"})
        assert resp.status_code == 502


class TestEdit:
    def test_add_edge_bumps_revision(self, client):
        doc = convert(client)
        resp = client.post("/api/edit", json={
            "document_id": doc["document_id"],
            "command": {"op": "add_edge", "source": "A", "target": "B",
                        "label": "Yes"},
        })
        assert resp.status_code == 409  # edge exists in the fixture
        resp = client.post("/api/edit", json={
            "document_id": doc["document_id"],
            "command": {"op": "add_node", "label": "Review"},
        })
        body = resp.json()
        assert resp.status_code == 200
        assert body["revision"] == 2
        assert "N1[Review]" in body["code"]

    def test_unknown_document(self, client):
        resp = client.post("/api/edit", json={
            "document_id": "missing", "command": {"op": "delete_node", "id": "A"}})
        assert resp.status_code == 404

    def test_unknown_id_maps_409(self, client):
        doc = convert(client)
        resp = client.post("/api/edit", json={
            "document_id": doc["document_id"],
            "command": {"op": "delete_node", "id": "ZZZ"}})
        assert resp.status_code == 409

    def test_malformed_command_maps_400(self, client):
        doc = convert(client)
        resp = client.post("/api/edit", json={
            "document_id": doc["document_id"], "command": {"op": "explode"}})
        assert resp.status_code == 400

    def test_sequential_edits_strictly_ordered(self, client):
        doc = convert(client)
        revisions = []
        for i in range(3):
            resp = client.post("/api/edit", json={
                "document_id": doc["document_id"],
                "command": {"op": "add_node", "label": f"step {i}"}})
            revisions.append(resp.json()["revision"])
        assert revisions == [2, 3, 4]


class TestRefine:
    def test_mock_refinement_applies(self, client):
        doc = convert(client)
        refined = FIXTURE_CODE + "\nB --> C[Review]"
        MockProvider(client.fixtures).record(
            RefineRequest(doc["code"], "add a review step"), refined)
        resp = client.post("/api/refine", json={
            "document_id": doc["document_id"],
            "instruction": "add a review step", "model": "mock"})
        body = resp.json()
        assert resp.status_code == 200
        assert body["revision"] == 2
        assert "C[Review]" in body["code"]
        assert "warning" not in body

    def test_garbage_reply_keeps_code_and_revision(self, client):
        doc = convert(client)
        MockProvider(client.fixtures).record(
            RefineRequest(doc["code"], "do nonsense"), "cannot do that, sorry")
        resp = client.post("/api/refine", json={
            "document_id": doc["document_id"],
            "instruction": "do nonsense", "model": "mock"})
        body = resp.json()
        assert resp.status_code == 200
        assert body["code"] == doc["code"]
        assert body["revision"] == 1
        assert body["warning"]

    def test_empty_instruction_400(self, client):
        doc = convert(client)
        resp = client.post("/api/refine", json={
            "document_id": doc["document_id"], "instruction": "  ",
            "model": "mock"})
        assert resp.status_code == 400


class TestEvaluate:
    def test_identity_report(self, client):
        code = "flowchart TD\nA[a] --> B[b]"
        resp = client.post("/api/evaluate", json={"pred": code, "gold": code})
        body = resp.json()
        assert resp.status_code == 200
        assert body["symbolic"]["entity_f1"] == 1.0
        assert body["structural"]["override_applied"] is True

    def test_invalid_gold_400(self, client):
        resp = client.post("/api/evaluate",
                           json={"pred": "x", "gold": "not a diagram"})
        assert resp.status_code == 400

    def test_judge_without_credentials_502(self, client, monkeypatch):
        monkeypatch.delenv("F2M_OPENAI_API_KEY", raising=False)
        code = "flowchart TD\nA[a]"
        resp = client.post("/api/evaluate", json={
            "pred": code, "gold": code, "mode": "judge",
            "judge_model": "gpt-4.1"})
        assert resp.status_code == 502

    def test_documented_pair(self, client):
        resp = client.post("/api/evaluate", json={
            "pred": "flowchart TD\nA[a] --> B[b]",
            "gold": "flowchart TD\nA[a] --> B[b]\nB --> C[c]"})
        body = resp.json()
        assert body["symbolic"]["entity_f1"] == pytest.approx(0.8, abs=1e-9)
        assert body["structural"]["structural_accuracy"] == pytest.approx(0.6, abs=1e-9)


class TestExport:
    def test_mmd_is_exact_code_bytes(self, client):
        doc = convert(client)
        resp = client.get(f"/api/export/{doc['document_id']}?format=mmd")
        assert resp.status_code == 200
        assert resp.content == doc["code"].encode()
        assert "attachment" in resp.headers["content-disposition"]

    def test_svg_redirected_to_client(self, client):
        doc = convert(client)
        resp = client.get(f"/api/export/{doc['document_id']}?format=svg")
        assert resp.status_code == 400
        assert "client" in resp.json()["error"]

    def test_unknown_document(self, client):
        assert client.get("/api/export/nope?format=mmd").status_code == 404


class TestMeta:
    def test_health(self, client):
        assert client.get("/api/health").json() == {"status": "ok"}

    def test_models_lists_mock(self, client):
        body = client.get("/api/models").json()
        ids = {m["id"]: m for m in body["models"]}
        assert ids["mock"]["configured"] is True
        assert ids["gpt-4.1"]["provider"] == "openai"


class TestSessionInvariant:
    def test_code_always_matches_graph(self, client):
        doc = convert(client)
        session = None
        for i in range(5):
            resp = client.post("/api/edit", json={
                "document_id": doc["document_id"],
                "command": {"op": "add_node", "label": f"step {i}"}})
            body = resp.json()
            export = client.get(f"/api/export/{doc['document_id']}?format=mmd")
            assert export.text == body["code"]
            assert serialize(parse_flowchart(body["code"])) == body["code"]

    def test_concurrent_edits_yield_consecutive_revisions(self, client):
        doc = convert(client)

        def one_edit(i: int) -> int:
            resp = client.post("/api/edit", json={
                "document_id": doc["document_id"],
                "command": {"op": "add_node", "label": f"concurrent {i}"}})
            assert resp.status_code == 200
            return resp.json()["revision"]

        with ThreadPoolExecutor(max_workers=8) as pool:
            revisions = sorted(pool.map(one_edit, range(30)))
        assert revisions == list(range(2, 32))


def test_lru_eviction():
    store = SessionStore(capacity=2)
    g = parse_flowchart("flowchart TD\nA")
    first = store.create(g)
    store.create(g)
    store.create(g)  # evicts the first
    assert store.get(first.document_id) is None
    assert len(store) == 2
