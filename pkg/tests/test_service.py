import copy
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from doeopt import pipeline
from doeopt.fixtures import fixture_config_dict, write_fixture
from doeopt.service import create_app, sanitize


def wait_for(predicate, timeout=60.0, interval=0.05):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return False


@pytest.fixture(scope="module")
def api(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("svc")
    fx = write_fixture(str(tmp / "data"))
    doc = fixture_config_dict(str(tmp / "data"), iterations=12, population=16)
    app = create_app(str(tmp / "store"))
    client = TestClient(app)
    return client, doc


def start_run(client, doc, **tweaks):
    body = copy.deepcopy(doc)
    for path, value in tweaks.items():
        section, _, key = path.partition(".")
        if key:
            body.setdefault(section, {})[key] = value
        else:
            body[section] = value
    r = client.post("/api/v1/runs", json={"config": body})
    assert r.status_code == 201, r.text
    return r.json()["run_id"]


def wait_done(client, run_id, timeout=120.0):
    assert wait_for(
        lambda: client.get(f"/api/v1/runs/{run_id}").json()["status"] in ("done", "failed"),
        timeout=timeout,
    )
    return client.get(f"/api/v1/runs/{run_id}").json()


class TestRunLifecycle:
    def test_empty_store_lists_nothing(self, tmp_path):
        app = create_app(str(tmp_path / "empty"))
        client = TestClient(app)
        assert client.get("/api/v1/runs").json() == {"runs": []}

    def test_run_to_done(self, api):
        client, doc = api
        run_id = start_run(client, doc)
        state = wait_done(client, run_id)
        assert state["status"] == "done", state
        runs = client.get("/api/v1/runs").json()["runs"]
        assert any(r["run_id"] == run_id for r in runs)

    def test_missing_run_404(self, api):
        client, _ = api
        assert client.get("/api/v1/runs/nope").status_code == 404

    def test_config_required(self, api):
        client, _ = api
        assert client.post("/api/v1/runs", json={}).status_code == 400

    def test_bad_config_rejected(self, api):
        client, doc = api
        bad = copy.deepcopy(doc)
        bad["nonsense"] = True
        r = client.post("/api/v1/runs", json={"config": bad})
        assert r.status_code == 400


class TestArtifacts:
    @pytest.fixture(scope="class")
    def done_run(self, api):
        client, doc = api
        run_id = start_run(client, doc)
        state = wait_done(client, run_id)
        assert state["status"] == "done"
        return client, run_id

    def test_curve_matches_artifact(self, done_run, api):
        client, run_id = done_run
        payload = client.get(f"/api/v1/runs/{run_id}/curve").json()
        store_dir = client.app.state.store.get(run_id).run_dir
        assert payload["curve"] == pipeline.read_artifact(store_dir, "curve.json")

    def test_front_decodes_native_units(self, done_run):
        client, run_id = done_run
        front = client.get(f"/api/v1/runs/{run_id}/front").json()
        assert front["points"], front
        p = front["points"][0]
        assert set(p["y"]) == {"conversion", "uniformity"}
        assert 300.0 <= p["x"]["temp"] <= 800.0

    def test_front_specific_k(self, done_run):
        client, run_id = done_run
        front = client.get(f"/api/v1/runs/{run_id}/front", params={"k": 1}).json()
        assert front["k"] == 1
        assert client.get(f"/api/v1/runs/{run_id}/front", params={"k": 999}).status_code == 404

    def test_metrics_series(self, done_run):
        client, run_id = done_run
        series = client.get(f"/api/v1/runs/{run_id}/metrics").json()["series"]
        assert len(series) == 12
        assert series[0]["wasserstein_to_previous"] is None
        assert all(s["hypervolume"] is not None for s in series[1:])

    def test_iterations_cursor(self, done_run):
        client, run_id = done_run
        recs = client.get(f"/api/v1/runs/{run_id}/iterations", params={"after": 10}).json()
        assert [r["k"] for r in recs["records"]] == [11, 12]

    def test_slice_1d_matches_model(self, done_run):
        client, run_id = done_run
        payload = client.get(f"/api/v1/runs/{run_id}/slice", params={"x": "temp", "resolution": 5}).json()
        store_dir = client.app.state.store.get(run_id).run_dir
        from doeopt.surrogate import SurrogateModel

        model = SurrogateModel.from_dict(pipeline.read_artifact(store_dir, "model.json"))
        base = [(c.lo + c.hi) / 2 for c in model.record.codecs]
        expected = model.predict_slice(base, "temp", 5, allow_extrapolation=True)
        assert len(payload["points"]) == 5
        for point, (v, y, band) in zip(payload["points"], expected):
            assert point["value"] == v
            for name in model.output_names:
                assert point["predicted"][name] == float(y[model.output_names.index(name)])

    def test_slice_2d_dimensions(self, done_run):
        client, run_id = done_run
        payload = client.get(
            f"/api/v1/runs/{run_id}/slice", params={"x": "temp", "y": "flow", "resolution": 4}
        ).json()
        assert len(payload["cells"]) == 16
        assert payload["axes"] == {"x": "temp", "y": "flow"}

    def test_recipes_and_export(self, done_run):
        client, run_id = done_run
        recipes = client.get(f"/api/v1/runs/{run_id}/recipes").json()["recipes"]
        assert len(recipes) == 10
        flat = client.get(f"/api/v1/runs/{run_id}/recipes/0/export").json()
        assert flat["recipe_index"] == 0
        assert "predicted_conversion" in flat
        assert flat["temp"] == recipes[0]["values"]["temp"]
        assert client.get(f"/api/v1/runs/{run_id}/recipes/99/export").status_code == 404

    def test_steering_done_run_conflict(self, done_run):
        client, run_id = done_run
        r = client.post(f"/api/v1/runs/{run_id}/steer", json={"rho": 0.5})
        assert r.status_code == 409

    def test_overrides_after_training_conflict(self, done_run):
        client, run_id = done_run
        r = client.post(f"/api/v1/runs/{run_id}/overrides", json={"add": [], "remove": []})
        assert r.status_code == 409


class TestSteeringLive:
    def test_steer_event_lands_in_next_record(self, api, tmp_path):
        client, doc = api
        slow = copy.deepcopy(doc)
        slow["optimizer"]["iterations"] = 30
        slow["optimizer"]["population"] = 30
        run_id = start_run(client, slow)
        # wait until optimizing with at least one iteration
        assert wait_for(
            lambda: client.get(f"/api/v1/runs/{run_id}").json()["latest_k"] >= 1, timeout=90
        )
        k_now = client.get(f"/api/v1/runs/{run_id}").json()["latest_k"]
        r = client.post(f"/api/v1/runs/{run_id}/steer", json={"rho": 0.77})
        if r.status_code == 409:
            pytest.skip("run finished before steering could land")
        assert r.json()["accepted"]
        state = wait_done(client, run_id)
        assert state["status"] == "done"
        recs = client.get(f"/api/v1/runs/{run_id}/iterations", params={"after": k_now}).json()["records"]
        steered = [rec for rec in recs if any("rho" in ev for ev in rec["steering"])]
        assert steered, "steering event never recorded"
        k_applied = steered[0]["k"]
        assert k_applied > k_now
        assert all(rec["rho"] == 0.77 for rec in recs if rec["k"] >= k_applied)

    def test_interactive_override_gate(self, api):
        client, doc = api
        inter = copy.deepcopy(doc)
        inter["service"] = {"interactive_selection": True}
        inter["optimizer"]["iterations"] = 4
        run_id = start_run(client, inter)
        assert wait_for(
            lambda: client.get(f"/api/v1/runs/{run_id}").json()["status"] == "selecting", timeout=60
        )
        r = client.post(f"/api/v1/runs/{run_id}/overrides", json={"remove": ["conc"]})
        assert r.status_code == 200
        state = wait_done(client, run_id)
        assert state["status"] == "done"
        final = client.get(f"/api/v1/runs/{run_id}/curve").json()["curve"]["final_features"]
        assert "conc" not in final

    def test_long_poll_returns_quickly_after_done(self, api):
        client, doc = api
        fast = copy.deepcopy(doc)
        fast["optimizer"]["iterations"] = 2
        run_id = start_run(client, fast)
        wait_done(client, run_id)
        t0 = time.monotonic()
        recs = client.get(
            f"/api/v1/runs/{run_id}/iterations", params={"after": 99, "wait": 10}
        ).json()
        assert time.monotonic() - t0 < 5.0
        assert recs["records"] == []


class TestWireFormat:
    def test_sanitize_replaces_nonfinite(self):
        doc, bad = sanitize({"a": float("nan"), "b": [1.0, float("inf")], "c": 2.0})
        assert doc["a"] is None
        assert doc["b"][1] is None
        assert doc["c"] == 2.0
        assert set(bad) == {"$.a", "$.b[1]"}

    def test_payload_floats_roundtrip(self, api):
        client, doc = api
        run_id = start_run(client, doc)
        state = wait_done(client, run_id)
        assert state["status"] == "done"
        # decode-reencode stability: the wire float equals the artifact float
        recipes_api = client.get(f"/api/v1/runs/{run_id}/recipes").json()["recipes"]
        store_dir = client.app.state.store.get(run_id).run_dir
        recipes_disk = pipeline.read_artifact(store_dir, "recipes.json")
        assert recipes_api == recipes_disk
