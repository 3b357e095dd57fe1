"""HTTP API for the browser editor: upload a target, run inversion with
pollable progress, apply/undo region edits, fetch clouds.

Sessions are in-memory and isolated; the edit stack is replayed from the
inversion result on every undo, so identical session histories reproduce
identical clouds byte for byte.
"""

from __future__ import annotations

import argparse
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response

from pcinvert.bundle import InversionBundle, load_bundle
from pcinvert.core import FormatError, PointCloud, native_bytes, normalize, parse_cloud_bytes
from pcinvert.core.io import save_ply
from pcinvert.core.latent import LatentCodes
from pcinvert.editing import EditOperation, apply_edit, correspondence_colors, regenerate
from pcinvert.inversion import ABLATION_MODES, InversionConfig, InversionResult, invert

from dataclasses import asdict


@dataclass
class Session:
    id: str
    target: PointCloud
    status: str = "idle"  # idle | pending | running | done | error
    mode: str | None = None
    progress: dict = field(default_factory=lambda: {"iteration": 0, "cd": None})
    result: InversionResult | None = None
    error: str | None = None
    edit_stack: list[EditOperation] = field(default_factory=list)
    edited_codes: LatentCodes | None = None
    edited_cloud: PointCloud | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def create_app(
    bundle: InversionBundle | None = None,
    checkpoint_path: str | None = None,
    max_sessions: int = 32,
    workers: int = 1,
) -> FastAPI:
    if bundle is None:
        if checkpoint_path is None:
            raise ValueError("create_app needs a bundle or a checkpoint path")
        bundle = load_bundle(checkpoint_path)

    app = FastAPI(title="pcinvert service", version="0.1.0")
    sessions: dict[str, Session] = {}
    store_lock = threading.Lock()
    executor = ThreadPoolExecutor(max_workers=workers)
    colors = correspondence_colors(bundle.sphere)

    def get_session(session_id: str) -> Session:
        with store_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def cloud_payload(cloud: PointCloud, with_colors: bool) -> dict:
        payload = {"n": len(cloud), "points": cloud.points.tolist()}
        if with_colors:
            payload["colors"] = colors.tolist()
        if cloud.labels is not None:
            payload["labels"] = cloud.labels.tolist()
        return payload

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.body()
        try:
            cloud = parse_cloud_bytes(body, origin="payload")
        except FormatError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if len(cloud) != bundle.n_points:
            raise HTTPException(
                status_code=422,
                detail=f"expected {bundle.n_points} points, got {len(cloud)}",
            )
        normalized, _ = normalize(cloud)
        with store_lock:
            if len(sessions) >= max_sessions:
                raise HTTPException(status_code=503, detail="session limit reached")
            session = Session(id=uuid.uuid4().hex, target=normalized)
            sessions[session.id] = session
        return {"session_id": session.id}

    def run_inversion(session: Session, cfg: InversionConfig):
        try:
            session.status = "running"

            def progress(iteration, cd):
                session.progress = {"iteration": iteration, "cd": cd}

            models = bundle.models_for_mode(cfg.ablation_mode)
            result = invert(session.target, models, cfg, progress=progress)
            with session.lock:
                session.result = result
                session.edit_stack = []
                session.edited_codes = result.codes
                session.edited_cloud = result.reconstruction
                session.progress = {
                    "iteration": len(result.loss_history) - 1,
                    "cd": result.final_cd,
                }
                session.status = "done"
        except Exception as exc:  # surfaced through /status
            session.error = str(exc)
            session.status = "error"

    @app.post("/sessions/{session_id}/invert", status_code=202)
    async def start_invert(session_id: str, request: Request):
        session = get_session(session_id)
        body = {}
        raw = await request.body()
        if raw:
            import json

            try:
                body = json.loads(raw)
            except ValueError:
                raise HTTPException(status_code=400, detail="invalid JSON body")
        mode = body.get("mode", "full")
        if mode not in ABLATION_MODES:
            raise HTTPException(status_code=400, detail=f"unknown mode {mode!r}")
        try:
            models = bundle.models_for_mode(mode)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        overrides = {"ablation_mode": mode}
        for key in ("step1_iterations", "step3_iterations", "seed"):
            if key in body:
                overrides[key] = int(body[key])
        try:
            cfg = InversionConfig(**{**asdict(bundle.inversion_config), **overrides})
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        with session.lock:
            if session.status in ("pending", "running"):
                raise HTTPException(status_code=409, detail="inversion already running")
            session.status = "pending"
            session.mode = mode
            session.error = None
            session.progress = {"iteration": 0, "cd": None}
        executor.submit(run_inversion, session, cfg)
        return {"status_url": f"/sessions/{session_id}/status"}

    @app.get("/sessions/{session_id}/status")
    async def status(session_id: str):
        session = get_session(session_id)
        payload = {
            "state": session.status,
            "mode": session.mode,
            "iteration": session.progress.get("iteration"),
            "cd": session.progress.get("cd"),
        }
        if session.status == "done":
            payload["final_cd"] = session.result.final_cd
        if session.error:
            payload["error"] = session.error
        return payload

    @app.post("/sessions/{session_id}/edits")
    async def push_edit(session_id: str, request: Request):
        session = get_session(session_id)
        import json

        try:
            record = json.loads(await request.body())
        except ValueError:
            raise HTTPException(status_code=400, detail="invalid JSON body")
        with session.lock:
            if session.result is None:
                raise HTTPException(status_code=409, detail="no inversion result yet")
            if "seed" not in record:
                record["seed"] = len(session.edit_stack)
            try:
                op = EditOperation.from_record(record)
                new_codes = apply_edit(session.edited_codes, op)
            except (ValueError, KeyError, TypeError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            session.edit_stack.append(op)
            session.edited_codes = new_codes
            session.edited_cloud = regenerate(
                new_codes, session.result.style, session.result.generator
            )
            payload = cloud_payload(session.edited_cloud, with_colors=True)
            payload["stack_depth"] = len(session.edit_stack)
            return payload

    @app.delete("/sessions/{session_id}/edits/last")
    async def pop_edit(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.result is None:
                raise HTTPException(status_code=409, detail="no inversion result yet")
            if not session.edit_stack:
                raise HTTPException(status_code=400, detail="edit stack is empty")
            session.edit_stack.pop()
            codes = session.result.codes
            for op in session.edit_stack:
                codes = apply_edit(codes, op)
            session.edited_codes = codes
            session.edited_cloud = (
                regenerate(codes, session.result.style, session.result.generator)
                if session.edit_stack
                else session.result.reconstruction
            )
            payload = cloud_payload(session.edited_cloud, with_colors=True)
            payload["stack_depth"] = len(session.edit_stack)
            return payload

    @app.get("/sessions/{session_id}/cloud")
    async def get_cloud(session_id: str, which: str = "recon", format: str = "json"):
        session = get_session(session_id)
        if which not in ("target", "recon", "edited"):
            raise HTTPException(status_code=400, detail=f"unknown which {which!r}")
        if format not in ("json", "ply", "pinv"):
            raise HTTPException(status_code=400, detail=f"unknown format {format!r}")
        with session.lock:
            if which == "target":
                cloud, with_colors = session.target, False
            elif session.result is None:
                raise HTTPException(status_code=404, detail="no inversion result yet")
            elif which == "recon":
                cloud, with_colors = session.result.reconstruction, True
            else:
                cloud, with_colors = session.edited_cloud, True
        if format == "json":
            return cloud_payload(cloud, with_colors)
        if format == "pinv":
            return Response(
                content=native_bytes(cloud, meta={"which": which}),
                media_type="application/octet-stream",
            )
        import io
        import tempfile

        with tempfile.NamedTemporaryFile(suffix=".ply") as tmp:
            save_ply(cloud, tmp.name, binary=True, colors=colors if with_colors else None)
            tmp.seek(0)
            blob = tmp.read()
        return Response(content=blob, media_type="application/octet-stream")

    @app.get("/model")
    async def model_info():
        return {
            "n_points": bundle.n_points,
            "noise_dim": bundle.generator.config.noise_dim,
            "modes": list(ABLATION_MODES),
            "stacks": sorted(bundle.stacks),
        }

    return app


def main(argv=None):
    parser = argparse.ArgumentParser(description="pcinvert HTTP service")
    parser.add_argument(
        "--checkpoint",
        default=os.environ.get("PCINVERT_CHECKPOINT"),
        help="inversion bundle path (env PCINVERT_CHECKPOINT)",
    )
    parser.add_argument("--host", default=os.environ.get("PCINVERT_HOST", "127.0.0.1"))
    parser.add_argument("--port", type=int, default=int(os.environ.get("PCINVERT_PORT", "8000")))
    parser.add_argument(
        "--max-sessions", type=int, default=int(os.environ.get("PCINVERT_MAX_SESSIONS", "32"))
    )
    parser.add_argument("--workers", type=int, default=1, help="inversion worker threads")
    parser.add_argument(
        "--frontend",
        default=os.environ.get("PCINVERT_FRONTEND"),
        help="directory with the built editor UI to serve at /",
    )
    args = parser.parse_args(argv)
    if not args.checkpoint:
        parser.error("--checkpoint (or PCINVERT_CHECKPOINT) is required")

    app = create_app(
        checkpoint_path=args.checkpoint,
        max_sessions=args.max_sessions,
        workers=args.workers,
    )
    if args.frontend:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=args.frontend, html=True), name="ui")

    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
