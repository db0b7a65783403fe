"""HTTP session service: draw trajectories, run guided sampling, stream
progress over server-sent events.

Sessions are in-memory with LRU eviction; the durable record of a run is
its artifact directory. Within a session every mutation goes through one
lock, so concurrent run requests on the same session yield exactly one
202 stream and 409 for the rest. The sampling loop runs on a worker
thread and publishes events through a bounded queue; when the queue is
full the bulky preview payload is dropped, never a step or terminal
event.
"""

from __future__ import annotations

import argparse
import base64
import io
import json
import os
import queue
import tempfile
import threading
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI
from fastapi.responses import FileResponse, JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image

from .formats import ConfigError, RunConfig, parse_run_config, write_run_artifacts
from .geometry import Trajectory, rasterize_polyline
from .guidance import GuidanceDivergedError, MODES, guided_sample
from .model import VOCAB
from .runner import prepare_run

SESSION_CAP = 64
QUEUE_CAP = 64
PREVIEW_EVERY = 5

_ARTIFACT_NAMES = ("config.json", "image.png", "metrics.json", "energies.csv",
                   "manifest.json")


def _worker_slots() -> int:
    raw = os.environ.get("TRAJGUIDE_THREADS")
    try:
        return max(1, int(raw)) if raw else 4
    except ValueError:
        return 4


@dataclass
class Session:
    id: str
    config: RunConfig
    state: str = "idle"
    revision: int = 0
    runs: int = 0
    result_summary: dict | None = None
    run_dir: Path | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """LRU map of live sessions; running sessions are never evicted."""

    def __init__(self, cap: int = SESSION_CAP):
        self.cap = cap
        self._lock = threading.Lock()
        self._sessions = OrderedDict()

    def create(self, config: RunConfig) -> Session:
        session = Session(id=uuid.uuid4().hex, config=config)
        with self._lock:
            while len(self._sessions) >= self.cap:
                victim = next((sid for sid, s in self._sessions.items()
                               if s.state != "running"), None)
                if victim is None:
                    raise RuntimeError("session capacity exhausted")
                del self._sessions[victim]
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is not None:
                self._sessions.move_to_end(session_id)
            return session


def _png_b64(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _heatmap_b64(column: np.ndarray, dims: tuple[int, int]) -> str:
    grid = column.reshape(dims)
    peak = float(grid.max())
    scaled = (grid / peak * 255.0) if peak > 0 else np.zeros_like(grid)
    return _png_b64(np.clip(scaled, 0.0, 255.0).astype(np.uint8))


def _grid_of(config: RunConfig) -> tuple[int, int]:
    g = config.model.get("grid", (16, 16))
    return (int(g[0]), int(g[1]))


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"error": code, "message": message}, status_code=status)


def create_app(runs_root=None, ui_dir=None) -> FastAPI:
    app = FastAPI(title="trajectory guidance service")
    store = SessionStore()
    root = Path(runs_root or tempfile.mkdtemp(prefix="trajguide_runs_"))
    run_slots = threading.BoundedSemaphore(_worker_slots())

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/vocab")
    def vocab():
        return {"vocab": list(VOCAB), "modes": list(MODES)}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        try:
            config = parse_run_config(body)
        except ConfigError as exc:
            return _error(400, exc.code, str(exc))
        session = store.create(config)
        return {"session_id": session.id, "grid": list(_grid_of(config)),
                "render_scale": int(config.model.get("render_scale", 8)),
                "prompt": list(config.prompt), "revision": session.revision}

    @app.put("/sessions/{session_id}/trajectories")
    def set_trajectories(session_id: str, body: list = Body(...)):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown_session", "unknown session id")
        with session.lock:
            if session.state == "running":
                return _error(409, "already_running",
                              "cannot edit trajectories during a run")
            trajs = []
            for item in body:
                try:
                    traj = Trajectory.from_json(item)
                except ValueError as exc:
                    return _error(400, "malformed_trajectory", str(exc))
                if not 0 <= traj.token_index < len(session.config.prompt):
                    return _error(400, "token_index_out_of_range",
                                  f"token index out of range: {traj.token_index}")
                trajs.append(traj)
            session.config = replace(session.config, trajectories=tuple(trajs))
            session.revision += 1
            if session.state in ("done", "failed"):
                session.state = "idle"
            grid = _grid_of(session.config)
            cells = {str(t.token_index):
                     sorted(list(c) for c in rasterize_polyline(t, grid).cells)
                     for t in trajs}
            return {"revision": session.revision, "cells": cells}

    @app.post("/sessions/{session_id}/run")
    def run_session(session_id: str, body: dict | None = None):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown_session", "unknown session id")
        overrides = dict(body or {})
        with session.lock:
            if session.state == "running":
                return _error(409, "already_running", "run already in flight")
            updates = {}
            for key, attr in (("lambda", "lam"), ("lam", "lam"), ("eta", "eta"),
                              ("mode", "mode"), ("seed", "seed")):
                if key in overrides:
                    updates[attr] = overrides[key]
            unknown = set(overrides) - {"lambda", "lam", "eta", "mode", "seed"}
            if unknown:
                return _error(400, "invalid_config",
                              f"unknown override fields: {sorted(unknown)}")
            # Overrides shape this run only; the stored session config is
            # left alone so a later plain run behaves as originally set up.
            try:
                guidance = replace(session.config.guidance, **updates)
                config = replace(session.config, guidance=guidance)
            except (TypeError, ValueError) as exc:
                return _error(400, "invalid_config", str(exc))
            session.state = "running"
            session.result_summary = None
            session.runs += 1
            run_dir = root / session.id / f"run_{session.runs:03d}"
            revision = session.revision

        events = queue.Queue(maxsize=QUEUE_CAP)
        grid = _grid_of(config)
        constrained = sorted(t.token_index for t in config.trajectories)
        worker_model = None
        worker_tokens = None

        def emit(kind: str, data: dict) -> None:
            try:
                events.put_nowait((kind, data))
            except queue.Full:
                data.pop("preview", None)
                events.put((kind, data))

        def on_step(record, z) -> None:
            data = {
                "step": record.step,
                "t": record.t,
                "e_control": record.e_control,
                "e_movement": record.e_movement,
                "e_total": record.e_total,
                "latent_norm": record.latent_norm,
                "heatmaps": {str(tok): _heatmap_b64(record.attention[-1][:, tok], grid)
                             for tok in constrained},
            }
            if record.step % PREVIEW_EVERY == 0:
                scene = worker_model.render_scene(z, worker_tokens)
                img = np.clip(scene.intensity * 255.0, 0, 255).astype(np.uint8)
                data["preview"] = _png_b64(img)
            emit("step", data)

        def work() -> None:
            nonlocal worker_model, worker_tokens
            with run_slots:
                try:
                    worker_model, worker_tokens = prepare_run(config)
                    result = guided_sample(worker_model, worker_tokens,
                                           config.trajectories, config.guidance,
                                           step_hook=on_step)
                    write_run_artifacts(result, run_dir, config)
                    scene = result.scene
                    links = [f"/sessions/{session.id}/artifacts/{name}"
                             for name in _ARTIFACT_NAMES] + \
                            [f"/sessions/{session.id}/artifacts/mask_{i}.png"
                             for i in sorted(scene.masks)]
                    summary = {
                        "dtl": result.metrics["dtl"],
                        "per_token": {str(k): v for k, v in
                                      result.metrics["per_token"].items()},
                        "revision": revision,
                        "run": session.runs,
                        "mode": config.guidance.mode,
                        "seed": config.guidance.seed,
                        "steps": config.guidance.total_steps,
                        "unusable_mask_steps": list(result.unusable_mask_steps),
                        "artifacts": links,
                    }
                    terminal = dict(summary)
                    terminal["image"] = _png_b64(np.clip(
                        scene.intensity * 255.0, 0, 255).astype(np.uint8))
                    terminal["masks"] = {str(i): _png_b64(
                        scene.masks[i].astype(np.uint8) * 255)
                        for i in sorted(scene.masks)}
                    with session.lock:
                        session.state = "done"
                        session.result_summary = summary
                        session.run_dir = run_dir
                    emit("done", terminal)
                except GuidanceDivergedError as exc:
                    with session.lock:
                        session.state = "failed"
                    emit("failed", {"error_class": "divergence",
                                    "message": str(exc)})
                except Exception as exc:
                    with session.lock:
                        session.state = "failed"
                    emit("failed", {"error_class": "internal",
                                    "message": str(exc)})

        threading.Thread(target=work, daemon=True).start()

        def stream():
            while True:
                kind, data = events.get()
                yield f"event: {kind}\ndata: {json.dumps(data, sort_keys=True)}\n\n"
                if kind in ("done", "failed"):
                    return

        return StreamingResponse(stream(), status_code=202,
                                 media_type="text/event-stream")

    @app.get("/sessions/{session_id}/result")
    def get_result(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown_session", "unknown session id")
        with session.lock:
            if session.result_summary is None:
                return _error(409, "not_done", "session has no completed run")
            return dict(session.result_summary)

    @app.get("/sessions/{session_id}/artifacts/{name}")
    def get_artifact(session_id: str, name: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown_session", "unknown session id")
        with session.lock:
            run_dir = session.run_dir
        if run_dir is None:
            return _error(409, "not_done", "session has no completed run")
        target = (run_dir / name).resolve()
        if target.parent != run_dir.resolve() or not target.is_file():
            return _error(404, "unknown_artifact", f"no artifact named {name!r}")
        media = "image/png" if name.endswith(".png") else "application/json"
        if name.endswith(".csv"):
            media = "text/csv"
        return FileResponse(target, media_type=media)

    # Mounted last so every API route above wins the match first.
    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trajguide-serve", description="Serve the guidance engine over HTTP.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--runs-dir", default=None,
                        help="directory for run artifacts (default: temp dir)")
    parser.add_argument("--ui-dir", default=None,
                        help="directory with the built browser client to serve at /")
    args = parser.parse_args(argv)

    import uvicorn

    uvicorn.run(create_app(args.runs_dir, ui_dir=args.ui_dir),
                host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
