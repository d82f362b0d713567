"""Interactive streaming sessions over a web socket, plus the app factory.

One session per connection; the database is shared read-only. Messages are
UTF-8 JSON, one document per message:

client -> server
    {"type": "command", "u": [ux, uy]}
    {"type": "skill", "id": "vault"}
    {"type": "reset", "seed": 0}
    {"type": "config", "key": "overlay.bodies", "value": true}

server -> client
    {"type": "frame", "time", "p": [3], "q": [4], "theta": [...], "mode",
     "terrain": [...], "bodies"?: [[3]...], "query_t"?: [[2]...]}
    {"type": "event", "event": "...", ...}
    {"type": "error", "message": "..."}

Commands are sampled, not queued: each engine tick applies the latest
command received so far (last-writer-wins), so a fast client cannot
accelerate simulation time. Ticks follow absolute deadlines, keeping
long-run drift bounded by scheduler jitter only.
"""

from __future__ import annotations

import asyncio
import json
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket

from .composer import Engine, EngineError
from .config import EngineConfig
from .features import DIM
from .matcher import MotionDatabase
from .skeleton import forward_kinematics
from .springs import predict_root_positions

OVERLAY_KEYS = ("overlay.bodies", "overlay.query")


class Session:
    """Engine plus per-connection message handling; transport-agnostic."""

    def __init__(self, db: MotionDatabase, config: EngineConfig | None = None, seed: int = 0):
        self.db = db
        self.engine = Engine(db, config, seed=seed)
        self.command = np.zeros(2)
        self.overlay_bodies = False
        self.overlay_query = False

    @property
    def dt(self) -> float:
        return self.engine.dt

    def handle_message(self, text: str) -> list[dict]:
        """Apply one client message; returns reply messages (errors/events)."""
        try:
            msg = json.loads(text)
        except json.JSONDecodeError:
            return [_error("message is not valid JSON")]
        if not isinstance(msg, dict):
            return [_error("message must be a JSON object")]
        kind = msg.get("type")
        if kind == "command":
            u = msg.get("u")
            if (
                not isinstance(u, (list, tuple))
                or len(u) != 2
                or not all(isinstance(v, (int, float)) for v in u)
                or not np.all(np.isfinite(u))
            ):
                return [_error("command needs u: [ux, uy]")]
            self.command = np.asarray(u, dtype=np.float64)
            return []
        if kind == "skill":
            try:
                self.engine.request_skill(str(msg.get("id")))
            except EngineError as e:
                return [_error(str(e))]
            return []
        if kind == "reset":
            seed = msg.get("seed", 0)
            if not isinstance(seed, int):
                return [_error("reset needs an integer seed")]
            self.engine.reset(seed)
            self.command = np.zeros(2)
            return [{"type": "event", "event": "reset", "seed": seed}]
        if kind == "config":
            key = msg.get("key")
            value = msg.get("value")
            if key == "overlay.bodies":
                self.overlay_bodies = bool(value)
                return []
            if key == "overlay.query":
                self.overlay_query = bool(value)
                return []
            try:
                self.engine.reconfigure(self.engine.config.set_key(str(key), value))
            except (KeyError, ValueError, TypeError):
                return [_error(f"unknown or invalid config key {key!r}")]
            return []
        return [_error(f"unknown message type {kind!r}")]

    def tick(self) -> list[dict]:
        """Advance one engine step; returns frame + event messages, in order."""
        frame, events = self.engine.step(self.command)
        st = self.engine.state
        out: list[dict] = [e.to_dict() | {"type": "event"} for e in events]
        msg = {
            "type": "frame",
            "time": st.time,
            "p": [float(v) for v in frame.root_pos],
            "q": [float(v) for v in frame.root_quat],
            "theta": [float(v) for v in frame.joint_angles],
            "mode": (
                f"skill:{st.active_skill}" if st.mode == "skill" else "locomotion"
            ),
            "terrain": [t.to_dict() for t in st.terrain],
        }
        if self.overlay_bodies:
            pos, _ = forward_kinematics(self.db.skeleton, frame)
            msg["bodies"] = [[float(v) for v in p] for p in pos]
        if self.overlay_query:
            msg["query_t"] = self._predicted_dots()
        out.append(msg)
        return out

    def _predicted_dots(self) -> list[list[float]]:
        st = self.engine.state
        pos = st.anchor.apply(self.db.root_pos[st.cursor, :2])
        pts = predict_root_positions(
            pos,
            st.vel_spring,
            st.accel,
            self.command,
            self.engine.config.trajectory_damping,
            self.engine.query_horizons,
        )
        return [[float(x), float(y)] for x, y in pts]


def _error(message: str) -> dict:
    return {"type": "error", "message": message}


async def run_session(session: Session, transport, realtime: bool = True, max_ticks: int | None = None) -> None:
    """Drive a session over a transport with `drain() -> list[str]` and
    `send(text)`. Simulation time advances one fixed step per tick regardless
    of message rate; `realtime=False` runs as fast as possible (tests)."""
    dt = session.dt
    next_deadline = time.perf_counter() + dt
    ticks = 0
    while max_ticks is None or ticks < max_ticks:
        for text in await transport.drain():
            for reply in session.handle_message(text):
                await transport.send(json.dumps(reply))
        for msg in session.tick():
            await transport.send(json.dumps(msg))
        ticks += 1
        if realtime:
            delay = next_deadline - time.perf_counter()
            if delay > 0:
                await asyncio.sleep(delay)
            next_deadline += dt
        else:
            await asyncio.sleep(0)


class WebSocketTransport:
    """Adapter pumping a FastAPI/Starlette WebSocket into the session loop."""

    def __init__(self, websocket):
        self.websocket = websocket
        self.queue: asyncio.Queue[str] = asyncio.Queue()
        self.closed = False

    async def reader(self):
        from starlette.websockets import WebSocketDisconnect

        try:
            while True:
                self.queue.put_nowait(await self.websocket.receive_text())
        except WebSocketDisconnect:
            self.closed = True

    async def drain(self) -> list[str]:
        if self.closed:
            raise ConnectionError("client disconnected")
        out = []
        while not self.queue.empty():
            out.append(self.queue.get_nowait())
        return out

    async def send(self, text: str) -> None:
        if self.closed:
            raise ConnectionError("client disconnected")
        await self.websocket.send_text(text)


def create_app(db: MotionDatabase, ui_dir: str | None = None) -> FastAPI:
    """FastAPI app: /ws sessions, /skeleton and /info metadata, optional UI."""
    app = FastAPI(title="motionweaver")

    @app.get("/info")
    def info():
        return {
            "fps": db.fps,
            "n_rows": db.n_rows,
            "n_joints": db.n_joints,
            "skills": db.skills,
            "clips": [c.id for c in db.clips],
            "dims": DIM,
        }

    @app.get("/skeleton")
    def skeleton():
        return {
            "joints": [
                {
                    "name": j.name,
                    "parent": j.parent,
                    "offset": [float(v) for v in j.offset],
                    "axis": [float(v) for v in j.axis],
                }
                for j in db.skeleton.joints
            ],
            "left_foot": db.skeleton.left_foot_body - 1,
            "right_foot": db.skeleton.right_foot_body - 1,
        }

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        session = Session(db)
        transport = WebSocketTransport(websocket)
        reader = asyncio.ensure_future(transport.reader())
        try:
            await run_session(session, transport)
        except (ConnectionError, RuntimeError):
            pass
        finally:
            reader.cancel()

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


def serve(db: MotionDatabase, host: str = "127.0.0.1", port: int = 8080, ui_dir: str | None = None) -> None:
    """Run the service; with port 0, binds an ephemeral port and prints it."""
    import socket

    import uvicorn

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    actual = sock.getsockname()[1]
    print(f"motionweaver serving on {host}:{actual}", flush=True)
    app = create_app(db, ui_dir)
    config = uvicorn.Config(app, log_level="warning")
    server = uvicorn.Server(config)
    server.run(sockets=[sock])
