"""HTTP session service: lifecycle, SSE stream shape, and error codes."""

import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from trajguide.formats import parse_run_config
from trajguide.geometry import Trajectory, rasterize_polyline
from trajguide.guidance import GuidanceConfig, guided_sample
from trajguide.model import SandboxModel, embed_tokens
from trajguide.service import SessionStore, create_app

FAST_GUIDANCE = {"total_steps": 12, "guided_steps": 3, "repeats_per_step": 2}

TRAJ = {"token_index": 0, "polylines": [[[3.0, 12.0], [12.0, 12.0]]], "weights": [1.0]}


def _body(**extra):
    data = {"prompt": ["cat", "moon"], "guidance": dict(FAST_GUIDANCE),
            "trajectories": [dict(TRAJ)]}
    data.update(extra)
    return data


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    app = create_app(runs_root=tmp_path_factory.mktemp("svc"))
    return TestClient(app)


def _create(client, **extra):
    resp = client.post("/sessions", json=_body(**extra))
    assert resp.status_code == 201
    return resp.json()


def _run(client, sid, overrides=None):
    # A raw string body lets tests send JSON that json.dumps refuses to
    # emit, such as the out-of-range literal 1e400.
    if isinstance(overrides, str):
        kwargs = {"content": overrides,
                  "headers": {"content-type": "application/json"}}
    else:
        kwargs = {"json": overrides or {}}
    events = []
    with client.stream("POST", f"/sessions/{sid}/run", **kwargs) as resp:
        status = resp.status_code
        text = "".join(resp.iter_text())
    if status == 202:
        for block in text.strip().split("\n\n"):
            kind_line, data_line = block.split("\n", 1)
            events.append((kind_line.split(": ", 1)[1],
                           json.loads(data_line.split(": ", 1)[1])))
    return status, events


def test_health_and_vocabulary(client):
    assert client.get("/healthz").json() == {"status": "ok"}
    vocab = client.get("/vocab").json()
    assert "cat" in vocab["vocab"]
    assert "full" in vocab["modes"]


def test_session_creation_reports_canvas_geometry(client):
    created = _create(client)
    assert created["grid"] == [16, 16]
    assert created["render_scale"] == 8
    assert created["prompt"] == [0, 5]
    assert created["revision"] == 0


def test_invalid_session_configs_are_rejected_with_codes(client):
    resp = client.post("/sessions", json={"prompt": []})
    assert resp.status_code == 400
    assert resp.json()["error"] == "invalid_config"
    resp = client.post("/sessions", json=_body(trajectories=[{"polylines": []}]))
    assert resp.status_code == 400
    assert resp.json()["error"] == "malformed_trajectory"


def test_unknown_sessions_are_404(client):
    assert client.get("/sessions/nope/result").status_code == 404
    assert client.put("/sessions/nope/trajectories", json=[]).status_code == 404
    assert client.post("/sessions/nope/run", json={}).status_code == 404


def test_trajectory_edit_echoes_the_rasterization(client):
    sid = _create(client)["session_id"]
    resp = client.put(f"/sessions/{sid}/trajectories", json=[TRAJ])
    assert resp.status_code == 200
    payload = resp.json()
    assert payload["revision"] == 1
    want = rasterize_polyline(Trajectory.from_json(TRAJ), (16, 16)).cells
    assert payload["cells"] == {"0": sorted(list(c) for c in want)}


def test_trajectory_edit_validates_tokens(client):
    sid = _create(client)["session_id"]
    resp = client.put(f"/sessions/{sid}/trajectories",
                      json=[{"token_index": 9, "polylines": [[[0, 0]]]}])
    assert resp.status_code == 400
    assert resp.json()["error"] == "token_index_out_of_range"
    resp = client.put(f"/sessions/{sid}/trajectories", json=[{"bogus": 1}])
    assert resp.status_code == 400
    assert resp.json()["error"] == "malformed_trajectory"


def test_run_streams_one_event_per_step_then_done(client):
    sid = _create(client)["session_id"]
    status, events = _run(client, sid)
    assert status == 202
    kinds = [k for k, _ in events]
    assert kinds[-1] == "done"
    steps = [d["step"] for k, d in events if k == "step"]
    assert steps == list(range(1, FAST_GUIDANCE["total_steps"] + 1))
    for kind, data in events[:-1]:
        assert kind == "step"
        assert set(data) >= {"step", "t", "e_control", "e_movement", "e_total",
                             "latent_norm", "heatmaps"}
        assert set(data["heatmaps"]) == {"0"}
    previews = [d["step"] for k, d in events if k == "step" and "preview" in d]
    assert previews == [5, 10]


def test_terminal_event_matches_the_stored_result(client):
    sid = _create(client)["session_id"]
    _, events = _run(client, sid)
    done = events[-1][1]
    assert events[-1][0] == "done"
    assert set(done) >= {"dtl", "per_token", "image", "masks", "artifacts", "run"}

    stored = client.get(f"/sessions/{sid}/result")
    assert stored.status_code == 200
    summary = stored.json()
    assert summary["dtl"] == done["dtl"]
    assert "image" not in summary

    # the terminal DTL is the library's own number, bit for bit
    config = parse_run_config(_body())
    model = SandboxModel(**config.model)
    tokens = embed_tokens(config.prompt, model.d_k, model.seed)
    result = guided_sample(model, tokens, config.trajectories, config.guidance)
    assert done["dtl"] == result.dtl


def test_artifacts_are_served_after_completion(client):
    sid = _create(client)["session_id"]
    _, events = _run(client, sid)
    done = events[-1][1]
    assert f"/sessions/{sid}/artifacts/metrics.json" in done["artifacts"]
    resp = client.get(f"/sessions/{sid}/artifacts/image.png")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "image/png"
    assert client.get(f"/sessions/{sid}/artifacts/nope.txt").status_code == 404
    assert client.get(f"/sessions/{sid}/artifacts/..%2Fconfig.json").status_code == 404


def test_result_requires_a_completed_run(client):
    sid = _create(client)["session_id"]
    resp = client.get(f"/sessions/{sid}/result")
    assert resp.status_code == 409
    assert resp.json()["error"] == "not_done"


def test_run_overrides_are_applied_or_rejected(client):
    sid = _create(client)["session_id"]
    status, events = _run(client, sid, overrides={"mode": "none", "lambda": 0.0})
    assert status == 202
    assert events[-1][1]["mode"] == "none"

    resp = client.post(f"/sessions/{sid}/run", json={"bogus": 1})
    assert resp.status_code == 400
    assert resp.json()["error"] == "invalid_config"
    status, events = _run(client, sid)
    assert status == 202 and events[-1][0] == "done"


def test_divergence_is_reported_as_a_failed_event(client):
    sid = _create(client)["session_id"]
    # 1e400 overflows to infinity during parsing, which the first guided
    # update then reports as a divergence failure.
    status, events = _run(client, sid, overrides='{"eta": 1e400}')
    assert status == 202
    kind, data = events[-1]
    assert kind == "failed"
    assert data["error_class"] == "divergence"
    assert client.get(f"/sessions/{sid}/result").status_code == 409

    # an edit resets the failed session and it can run again
    assert client.put(f"/sessions/{sid}/trajectories", json=[TRAJ]).status_code == 200
    status, events = _run(client, sid)
    assert status == 202 and events[-1][0] == "done"


def test_concurrent_runs_and_edits_are_rejected(client):
    # The test client buffers streamed responses, so a genuinely
    # concurrent request needs its own thread.  The main thread polls an
    # edit until the server reports the run as in flight.
    slow = {"total_steps": 50, "guided_steps": 50, "repeats_per_step": 8}
    sid = _create(client, guidance=slow)["session_id"]
    outcome = {}
    worker = threading.Thread(
        target=lambda: outcome.update(zip(("status", "events"), _run(client, sid))))
    worker.start()
    try:
        for _ in range(500):
            edit = client.put(f"/sessions/{sid}/trajectories", json=[TRAJ])
            if edit.status_code == 409:
                break
            time.sleep(0.01)
        else:
            pytest.fail("run never entered the running state")
        second = client.post(f"/sessions/{sid}/run", json={})
        assert second.status_code == 409
        assert second.json()["error"] == "already_running"
    finally:
        worker.join()
    assert outcome["status"] == 202
    assert outcome["events"][-1][0] == "done"


def test_editing_after_completion_keeps_the_last_result(client):
    sid = _create(client)["session_id"]
    _, events = _run(client, sid)
    ran_revision = events[-1][1]["revision"]
    resp = client.put(f"/sessions/{sid}/trajectories", json=[TRAJ])
    assert resp.status_code == 200
    assert resp.json()["revision"] == ran_revision + 1
    stored = client.get(f"/sessions/{sid}/result")
    assert stored.status_code == 200
    assert stored.json()["revision"] == ran_revision


def test_session_store_evicts_the_oldest_idle_session():
    store = SessionStore(cap=2)
    config = parse_run_config(_body())
    first = store.create(config)
    second = store.create(config)
    third = store.create(config)
    assert store.get(first.id) is None
    assert store.get(second.id) is second
    assert store.get(third.id) is third


def test_session_store_never_evicts_running_sessions():
    store = SessionStore(cap=1)
    config = parse_run_config(_body())
    running = store.create(config)
    running.state = "running"
    with pytest.raises(RuntimeError, match="capacity"):
        store.create(config)


def test_ui_mount_serves_static_files_without_shadowing_the_api(tmp_path):
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<title>client</title>")
    (ui / "app.js").write_text("export {};")
    app = create_app(runs_root=tmp_path / "runs", ui_dir=ui)
    local = TestClient(app)
    assert "client" in local.get("/").text
    assert local.get("/app.js").status_code == 200
    assert local.get("/healthz").json() == {"status": "ok"}
    assert local.get("/vocab").status_code == 200
