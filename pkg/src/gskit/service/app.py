"""FastAPI front door: session CRUD over HTTP, live control and frame
streaming over one WebSocket per client.

Stream protocol: the client sends JSON text command messages {type, payload};
the server replies with JSON text acks/errors and pushes binary frame
messages (see wire.py). The first connection to a session controls it;
later connections are view-only. Frames queue per camera with drop-oldest
backpressure and a 10 Hz idle heartbeat.
"""

from __future__ import annotations

import asyncio
import json
import os
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from ..env.tasks import TASKS, get_task
from .schemas import CreateSessionRequest, DatasetList, SceneInfo, SessionInfo, TaskInfo
from .sessions import SessionError, SessionExpired, SessionManager

HEARTBEAT_PERIOD = 0.1  # 10 Hz when idle
FRAME_QUEUE_DEPTH = 8


@dataclass
class StreamConnection:
    cameras: list[str]
    control: bool
    queues: dict[str, deque] = field(default_factory=dict)
    wakeup: asyncio.Event = field(default_factory=asyncio.Event)

    def __post_init__(self):
        self.queues = {cam: deque(maxlen=FRAME_QUEUE_DEPTH) for cam in self.cameras}

    def push_frames(self, frames: dict[str, bytes]) -> None:
        for cam in self.cameras:
            if cam in frames:
                self.queues[cam].append(frames[cam])  # deque drops oldest when full
        self.wakeup.set()


def create_app(asset_root, dataset_root=None, max_sessions: int = 4,
               idle_timeout: float = 600.0) -> FastAPI:
    manager = SessionManager(
        asset_root=Path(asset_root),
        dataset_root=dataset_root,
        max_sessions=max_sessions,
        idle_timeout=idle_timeout,
    )
    app = FastAPI(title="gskit teleoperation service")
    app.state.manager = manager
    connections: dict[str, list[StreamConnection]] = {}

    def _session_or_404(session_id: str):
        try:
            return manager.get(session_id)
        except KeyError as e:
            raise HTTPException(status_code=404, detail=str(e)) from e

    @app.get("/scenes", response_model=list[SceneInfo])
    def list_scenes():
        return [SceneInfo(**info) for info in manager.list_scenes()]

    @app.get("/tasks", response_model=list[TaskInfo])
    def list_tasks():
        out = []
        for name in sorted(TASKS):
            spec = get_task(name)
            out.append(TaskInfo(name=name, max_steps=spec.max_steps, cameras=list(spec.cameras)))
        return out

    @app.post("/sessions", response_model=SessionInfo, status_code=201)
    def create_session(req: CreateSessionRequest):
        try:
            session = manager.create(req.scene, req.task, req.seed, req.cameras)
        except KeyError as e:
            raise HTTPException(status_code=404, detail=str(e)) from e
        except SessionError as e:
            raise HTTPException(status_code=409, detail=str(e)) from e
        return _session_info(session)

    @app.get("/sessions/{session_id}", response_model=SessionInfo)
    def get_session(session_id: str):
        return _session_info(_session_or_404(session_id))

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        _session_or_404(session_id)
        manager.close(session_id)
        connections.pop(session_id, None)

    @app.get("/sessions/{session_id}/datasets", response_model=DatasetList)
    def list_datasets(session_id: str):
        session = _session_or_404(session_id)
        return DatasetList(session=session_id, datasets=list(session.saved))

    def _session_info(session) -> SessionInfo:
        return SessionInfo(
            id=session.id,
            scene=session.scene_name,
            task=session.task.name,
            seed=session.seed,
            step_index=session.step_index,
            state="ready",
            cameras=list(session.cameras),
            recording=session.recording,
            mode=session.mode,
        )

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(ws: WebSocket, session_id: str):
        try:
            session = manager.get(session_id)
        except KeyError:
            await ws.close(code=4404)
            return
        await ws.accept()

        peers = connections.setdefault(session_id, [])
        conn = StreamConnection(cameras=list(session.cameras),
                                control=not any(c.control for c in peers))
        peers.append(conn)
        conn.push_frames(session.frames)  # initial frame immediately

        async def sender():
            while True:
                try:
                    await asyncio.wait_for(conn.wakeup.wait(), timeout=HEARTBEAT_PERIOD)
                    conn.wakeup.clear()
                except asyncio.TimeoutError:
                    # Idle: heartbeat the latest frame of each camera.
                    if session_id in manager.sessions:
                        conn.push_frames(session.frames)
                        conn.wakeup.clear()
                for cam in conn.cameras:
                    queue = conn.queues[cam]
                    while queue:
                        await ws.send_bytes(queue.popleft())

        send_task = asyncio.create_task(sender())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    cmd = json.loads(text)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps({"type": "error", "message": "not valid JSON"}))
                    continue
                if not conn.control:
                    await ws.send_text(json.dumps(
                        {"type": "error", "message": "view-only connection; commands ignored"}
                    ))
                    continue
                try:
                    session.touch(manager.idle_timeout)
                    ack = session.apply_command(cmd)
                except SessionExpired as e:
                    await ws.send_text(json.dumps({"type": "error", "message": str(e)}))
                    break
                except (SessionError, KeyError, ValueError) as e:
                    await ws.send_text(json.dumps({"type": "error", "message": str(e)}))
                    continue
                for peer in peers:
                    peer.push_frames(session.frames)
                await ws.send_text(json.dumps(ack))
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            if conn in peers:
                peers.remove(conn)

    return app


def main(argv=None) -> int:
    """Entry point for `gskit serve`."""
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="Run the teleoperation service")
    parser.add_argument("--asset-root", required=True, help="directory containing .gsdf scenes")
    parser.add_argument("--port", type=int, default=int(os.environ.get("GSKIT_PORT", "8800")))
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--max-sessions", type=int, default=4)
    parser.add_argument("--dataset-root", default=None)
    parser.add_argument("--idle-timeout", type=float, default=600.0)
    args = parser.parse_args(argv)

    app = create_app(
        asset_root=args.asset_root,
        dataset_root=args.dataset_root,
        max_sessions=args.max_sessions,
        idle_timeout=args.idle_timeout,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0
