"""FastAPI app exposing flattening episodes as HTTP sessions.

All physics and perception run server-side; clients observe PNGs and metrics,
post two-point drag actions, and ask policies for suggestions.  One episode
per session, one in-flight action at a time.
"""

import hashlib
import math
import os
import threading
import uuid

from fastapi import FastAPI, HTTPException, Response

from .. import bench, gabor, imaging, policy
from ..config import EngineConfig
from .schemas import (ActionIn, ActionOut, ImageRef, SessionCreate,
                      SessionCreated, StateOut)


class _Runtime:
    """A live episode plus its per-session guard and image store."""

    def __init__(self, episode: bench.Episode, session_id: str):
        self.episode = episode
        self.session_id = session_id
        self.lock = threading.Lock()
        self.images: dict = {}
        self.state_cache: dict = {}

    def put_image(self, img) -> str:
        data = imaging.encode_png(img)
        digest = hashlib.sha256(data).hexdigest()
        self.images[digest] = data
        return digest


def _error(status_code: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status_code,
                         detail={"error": code, "message": message})


def create_app(engine: EngineConfig | None = None,
               records_dir: str = "records") -> FastAPI:
    """Build the session API around one engine configuration.

    Finished sessions flush their EpisodeRecord to records_dir; nothing else
    is persisted across restarts.
    """
    if engine is None:
        engine = EngineConfig()
    app = FastAPI(title="flatbench service")
    sessions: dict = {}
    registry_lock = threading.Lock()

    def get_runtime(session_id: str) -> _Runtime:
        with registry_lock:
            rt = sessions.get(session_id)
        if rt is None:
            raise _error(404, "UnknownSession", f"no session {session_id!r}")
        return rt

    def flush_record(rt: _Runtime) -> None:
        ep = rt.episode
        os.makedirs(records_dir, exist_ok=True)
        name = f"episode_{ep.method}_{ep.seed}_{rt.session_id}.json"
        bench.save_record(os.path.join(records_dir, name), ep.record())

    def state_payload(rt: _Runtime, session_id: str) -> dict:
        ep = rt.episode
        key = (ep.step, ep.status)
        cached = rt.state_cache.get(key)
        if cached is not None:
            return cached
        obs_hash = rt.put_image(ep.observation)
        heat_hash = rt.put_image(gabor.heatmap_image(ep.wrinkles()))
        base = f"/sessions/{session_id}/images"
        payload = StateOut(
            step=ep.step, status=ep.status,
            coverage=ep.coverage, relative_coverage=ep.relative_coverage,
            com=list(ep.com) if ep.com is not None else None,
            observation=ImageRef(hash=obs_hash, url=f"{base}/{obs_hash}"),
            heatmap=ImageRef(hash=heat_hash, url=f"{base}/{heat_hash}"),
        ).model_dump()
        rt.state_cache = {key: payload}
        return payload

    @app.post("/sessions", response_model=SessionCreated)
    def create_session(cfg: SessionCreate):
        ep = bench.Episode(engine=engine, seed=cfg.seed, method=cfg.method,
                           max_steps=cfg.max_steps,
                           stop_threshold=cfg.stop_threshold,
                           crumple_folds=cfg.crumple_folds,
                           crumple_intensity=cfg.crumple_intensity)
        ep.start()
        session_id = uuid.uuid4().hex[:12]
        rt = _Runtime(ep, session_id)
        with registry_lock:
            sessions[session_id] = rt
        if ep.status != "running":
            flush_record(rt)
        return SessionCreated(id=session_id, seed=ep.seed, method=ep.method,
                              step=ep.step, status=ep.status)

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        rt = get_runtime(session_id)
        with rt.lock:
            return state_payload(rt, session_id)

    @app.get("/sessions/{session_id}/images/{image_hash}")
    def get_image(session_id: str, image_hash: str):
        rt = get_runtime(session_id)
        data = rt.images.get(image_hash)
        if data is None:
            raise _error(404, "UnknownImage", f"no image {image_hash!r}")
        return Response(content=data, media_type="image/png")

    @app.post("/sessions/{session_id}/action", response_model=ActionOut)
    def post_action(session_id: str, body: ActionIn):
        rt = get_runtime(session_id)
        if not rt.lock.acquire(blocking=False):
            raise _error(409, "Busy", "another action is in flight")
        try:
            ep = rt.episode
            if ep.status != "running":
                raise _error(409, "SessionDone", f"session is {ep.status}")
            dx, dy = float(body.direction[0]), float(body.direction[1])
            norm = math.hypot(dx, dy)
            if norm == 0.0 or abs(norm - 1.0) > 1e-3:
                raise _error(400, "InvalidAction",
                             "direction must be unit length within 1e-3")
            u, v = float(body.op_point[0]), float(body.op_point[1])
            cam = ep.engine.camera
            if not (0 <= u < cam.image_w and 0 <= v < cam.image_h):
                raise _error(400, "InvalidAction", "op_point out of bounds")
            action = policy.PolicyAction(op_point=(u, v),
                                         direction=(dx / norm, dy / norm),
                                         method=body.method)
            entry = ep.act(action)
            if ep.status != "running":
                flush_record(rt)
            return ActionOut(step=entry["step"],
                             R_t=entry["relative_coverage"],
                             status=ep.status,
                             no_contact=entry["no_contact"])
        finally:
            rt.lock.release()

    @app.get("/sessions/{session_id}/suggest")
    def get_suggestion(session_id: str, method: str):
        rt = get_runtime(session_id)
        if method not in bench.METHODS:
            raise _error(400, "UnknownMethod",
                         f"method must be one of {', '.join(bench.METHODS)}")
        with rt.lock:
            ep = rt.episode
            if ep.status != "running":
                raise _error(409, "SessionDone", f"session is {ep.status}")
            try:
                return ep.suggest(method).to_dict()
            except policy.NoWrinkle:
                return {"flat": True, "message": "cloth appears flat"}

    @app.get("/sessions/{session_id}/record")
    def get_record(session_id: str):
        rt = get_runtime(session_id)
        with rt.lock:
            ep = rt.episode
            if ep.status == "running":
                raise _error(409, "SessionRunning",
                             "record is available once the session finishes")
            return ep.record().to_dict()

    return app
