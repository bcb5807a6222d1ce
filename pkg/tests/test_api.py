import json
import time

import pytest
from fastapi.testclient import TestClient

from trialgrid.api import create_app
from trialgrid.metrics import EngineConfig
from trialgrid.sweep import filter_rows

SPEC_TEXT = (
    'INTERVENTION: has_event("hydrocortisone")\n'
    "INCLUDE age: age >= $age_min\n"
    "EXCLUDE obesity: bmi > $bmi_max\n"
    "ADJUST $age_min IN {18, 60} years\n"
    "ADJUST $bmi_max IN {30, 35}\n"
)


def wait_for(client, job_id, timeout=60.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = client.get(f"/api/jobs/{job_id}").json()
        if job["state"] in ("done", "failed"):
            return job
        time.sleep(0.05)
    raise AssertionError(f"job {job_id} did not finish")


@pytest.fixture(scope="module")
def client(synth_store, tmp_path_factory):
    session_dir = tmp_path_factory.mktemp("sessions")
    app = create_app(synth_store, EngineConfig(), default_threads=1,
                     session_dir=str(session_dir))
    with TestClient(app) as tc:
        yield tc


@pytest.fixture(scope="module")
def evaluated_grid(client):
    resp = client.post("/api/grid/evaluate", json={"text": SPEC_TEXT})
    assert resp.status_code == 200
    body = resp.json()
    job = wait_for(client, body["job_id"])
    assert job["state"] == "done"
    assert job["completed"] == job["total"] == 4
    return body["grid_id"]


class TestHealthAndSpec:
    def test_health(self, client, synth_store):
        body = client.get("/api/health").json()
        assert body["status"] == "ok"
        assert body["patients"] == len(synth_store)

    def test_spec_summary(self, client):
        resp = client.post("/api/spec", json={"text": SPEC_TEXT})
        assert resp.status_code == 200
        body = resp.json()
        assert body["grid_size"] == 4
        assert body["inclusions"] == ["age"]
        assert body["has_intervention"]
        assert [a["name"] for a in body["adjustables"]] == ["age_min", "bmi_max"]

    def test_spec_error_names_parameter(self, client):
        resp = client.post("/api/spec", json={"text": "INCLUDE a: age >= $x"})
        assert resp.status_code == 422
        body = resp.json()
        assert body["code"] == "spec_error"
        assert "$x" in body["message"]

    def test_syntax_error_line_two(self, client):
        resp = client.post("/api/spec",
                           json={"text": "INCLUDE a: age >= 18\nINCLUDE b: >= 5"})
        assert resp.status_code == 422
        assert resp.json()["location"]["line"] == 2


class TestEvaluation:
    def test_cache_hit_gets_fresh_job_id(self, client, evaluated_grid):
        resp = client.post("/api/grid/evaluate", json={"text": SPEC_TEXT})
        body = resp.json()
        assert body["cached"] is True
        assert body["grid_id"] == evaluated_grid
        job = client.get(f"/api/jobs/{body['job_id']}").json()
        assert job["state"] == "done"

    def test_oversized_grid_413(self, client):
        lines = []
        for i in range(3):
            values = ", ".join(str(v) for v in range(50))
            lines.append(f"INCLUDE c{i}: age >= $p{i}")
            lines.append(f"ADJUST $p{i} IN {{{values}}}")
        resp = client.post("/api/grid/evaluate", json={"text": "\n".join(lines)})
        assert resp.status_code == 413
        assert resp.json()["code"] == "grid_too_large"

    def test_unknown_job_404(self, client):
        resp = client.get("/api/jobs/nope")
        assert resp.status_code == 404
        assert resp.json()["code"] == "job_not_found"

    def test_manifest(self, client, evaluated_grid):
        body = client.get(f"/api/grid/{evaluated_grid}/manifest").json()
        assert body["count"] == 4
        assert [a["name"] for a in body["adjustables"]] == ["age_min", "bmi_max"]

    def test_unevaluated_grid_404(self, client):
        resp = client.get("/api/grid/deadbeef/manifest")
        assert resp.status_code == 404
        assert resp.json()["code"] == "grid_not_found"


class TestCandidateQueries:
    def test_all_candidates(self, client, evaluated_grid):
        body = client.get(f"/api/grid/{evaluated_grid}/candidates").json()
        assert len(body["results"]) == 4
        assert [r["candidate_id"] for r in body["results"]] == [0, 1, 2, 3]

    def test_constraint_filter(self, client, evaluated_grid):
        resp = client.get(
            f"/api/grid/{evaluated_grid}/candidates",
            params={"constraints": json.dumps({"age_min": [18]})},
        )
        rows = resp.json()["results"]
        assert len(rows) == 2
        assert all(r["bindings"]["age_min"] == 18 for r in rows)

    def test_conflicting_constraints_empty_200(self, client, evaluated_grid):
        resp = client.get(
            f"/api/grid/{evaluated_grid}/candidates",
            params={"constraints": json.dumps({"age_min": []})},
        )
        assert resp.status_code == 200
        assert resp.json()["results"] == []

    def test_region_matches_local_refilter(self, client, evaluated_grid):
        all_rows = client.get(f"/api/grid/{evaluated_grid}/candidates").json()["results"]
        region = {"x_metric": "n", "y_metric": "hr",
                  "polygon": [[0, 0], [10000, 0], [10000, 2.0], [0, 2.0]]}
        served = client.get(
            f"/api/grid/{evaluated_grid}/candidates",
            params={"region": json.dumps(region)},
        ).json()["results"]
        assert served == filter_rows(all_rows, None, region)
        assert served  # the box is wide enough to catch the ok candidates

    def test_unknown_adjustable_400(self, client, evaluated_grid):
        resp = client.get(
            f"/api/grid/{evaluated_grid}/candidates",
            params={"constraints": json.dumps({"nope": [1]})},
        )
        assert resp.status_code == 400
        assert "nope" in resp.json()["message"]

    def test_malformed_query_json_400(self, client, evaluated_grid):
        resp = client.get(
            f"/api/grid/{evaluated_grid}/candidates",
            params={"constraints": "{not json"},
        )
        assert resp.status_code == 400
        assert resp.json()["code"] == "bad_query"


class TestProfiles:
    def test_profile_shape(self, client, evaluated_grid):
        rows = client.get(f"/api/grid/{evaluated_grid}/candidates").json()["results"]
        ok = next(r for r in rows if r["status"] == "ok")
        body = client.get(
            f"/api/candidates/{evaluated_grid}/{ok['candidate_id']}/profile"
        ).json()
        assert set(body["gender_dist"]) == {"treatment", "control"}
        assert len(body["age_hist"]["treatment"]) == 10
        assert body["hr"] == pytest.approx(ok["hr"])
        assert body["kidney_curve"]["treatment"]

    def test_profile_out_of_range_404(self, client, evaluated_grid):
        resp = client.get(f"/api/candidates/{evaluated_grid}/99/profile")
        assert resp.status_code == 404

    def test_group_compare(self, client, evaluated_grid):
        rows = client.get(f"/api/grid/{evaluated_grid}/candidates").json()["results"]
        ok_ids = [r["candidate_id"] for r in rows if r["status"] == "ok"]
        assert len(ok_ids) >= 2
        resp = client.post("/api/groups/compare", json={
            "grid_id": evaluated_grid,
            "group_a": ok_ids[:1],
            "group_b": ok_ids[1:],
        })
        assert resp.status_code == 200
        body = resp.json()
        for key in ("group_a", "group_b"):
            assert "metric_means" in body[key]
            assert body[key]["metric_means"]["n"] > 0

    def test_group_compare_empty_group_400(self, client, evaluated_grid):
        resp = client.post("/api/groups/compare", json={
            "grid_id": evaluated_grid, "group_a": [], "group_b": [0],
        })
        assert resp.status_code == 400
        assert resp.json()["code"] == "empty_group"


class TestSessions:
    def test_crud_roundtrip(self, client, evaluated_grid):
        sess = client.post("/api/sessions", json={"spec_hash": evaluated_grid}).json()
        sid = sess["session_id"]
        assert sess["schema_version"] == 1

        stage = client.post(f"/api/sessions/{sid}/stages",
                            json={"importance": 4, "keywords": ["broad"]}).json()
        assert stage["stage_id"] == 1

        patched = client.patch(f"/api/sessions/{sid}/stages/1",
                               json={"importance": 2}).json()
        assert patched["importance"] == 2

        record = client.post(f"/api/sessions/{sid}/stages/1/records", json={
            "grid_id": evaluated_grid,
            "kind": "lasso_select",
            "selected_candidates": [0, 1],
            "axes": ["n", "hr"],
        }).json()
        assert record["record_id"] == 1
        assert record["metric_means"] is not None

        fetched = client.get(f"/api/sessions/{sid}").json()
        assert fetched["stages"][0]["records"][0]["record_id"] == 1

        matrix = client.get(f"/api/sessions/{sid}/stages/1/matrix",
                            params={"grid_id": evaluated_grid}).json()
        assert set(matrix["matrix"]) == {"age_min", "bmi_max"}

    def test_bad_importance_422(self, client):
        sid = client.post("/api/sessions", json={}).json()["session_id"]
        resp = client.post(f"/api/sessions/{sid}/stages", json={"importance": 9})
        assert resp.status_code == 422
        assert resp.json()["code"] == "invalid_stage"

    def test_unknown_session_404(self, client):
        assert client.get("/api/sessions/nope").status_code == 404

    def test_sessions_persist_across_restart(self, synth_store, tmp_path):
        session_dir = str(tmp_path / "sessions")
        app1 = create_app(synth_store, EngineConfig(), session_dir=session_dir)
        with TestClient(app1) as tc:
            sid = tc.post("/api/sessions", json={"spec_hash": "abc"}).json()["session_id"]
            tc.post(f"/api/sessions/{sid}/stages", json={"importance": 5})
        app2 = create_app(synth_store, EngineConfig(), session_dir=session_dir)
        with TestClient(app2) as tc:
            body = tc.get(f"/api/sessions/{sid}").json()
            assert body["spec_hash"] == "abc"
            assert body["stages"][0]["importance"] == 5
