"""Interactive session server.

Three actors, as independent as the GIL allows: the websocket receivers
(async), one deform+render worker thread that solely owns the scene state,
and per-connection senders draining single-slot frame queues (latest-wins,
so a slow client never stalls the worker).

The first connection controls the session; later ones are view-only (their
mutating messages are rejected, `request_frame` is allowed).
"""

from __future__ import annotations

import asyncio
import base64
import collections
import io
import threading
import time

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from ..camera import Camera
from ..deform import ArapSolver, SolveError, transfer
from ..render import RenderSettings, render
from ..render.imageio import to_uint8
from . import protocol
from .scene import Scene, SceneError, load_scene


def _encode_png(rgb) -> str:
    from PIL import Image

    buf = io.BytesIO()
    # low compression: encode time dominates at interactive rates
    Image.fromarray(to_uint8(rgb), mode="RGB").save(buf, format="PNG",
                                                    compress_level=1)
    return base64.b64encode(buf.getvalue()).decode("ascii")


class SessionEngine:
    """Owns the scene; consumes commands from a mailbox where drags overwrite
    each other (latest-wins) while structural commands queue in order."""

    def __init__(self, scene: Scene, settings: RenderSettings | None = None,
                 interactive_iters: int = 4, rotate_normal_offset: bool = True,
                 pick_limit: int = 400):
        self.scene = scene
        self.settings = settings or RenderSettings()
        self.interactive_iters = interactive_iters
        self.flags = {"rotate-normal-offset": rotate_normal_offset}
        self.pick_limit = pick_limit

        self.camera = scene.default_camera
        self.solver = ArapSolver(scene.mesh)
        self.handles: dict[int, np.ndarray] = {}
        self.warm: np.ndarray | None = None
        self.state = None
        self.frame_id = 0
        self.last_solve_ms = 0.0
        self.last_render_ms = 0.0
        self._fps_ema = 0.0

        self._lock = threading.Lock()
        self._commands: collections.deque = collections.deque()
        self._pending_drag = None
        self._wake = threading.Event()
        self._stop = False
        self._subscribers: dict[int, object] = {}
        self._next_sub = 0
        self._thread: threading.Thread | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self):
        self._thread = threading.Thread(target=self._worker, daemon=True)
        self._thread.start()

    def stop(self):
        self._stop = True
        self._wake.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def subscribe(self, push) -> int:
        with self._lock:
            sid = self._next_sub
            self._next_sub += 1
            self._subscribers[sid] = push
        return sid

    def unsubscribe(self, sid: int):
        with self._lock:
            self._subscribers.pop(sid, None)

    # -- mailbox -----------------------------------------------------------

    def submit(self, msg) -> None:
        """Thread-safe: queue a command; consecutive drags coalesce."""
        with self._lock:
            if isinstance(msg, protocol.Drag):
                self._pending_drag = msg
            else:
                self._commands.append(msg)
        self._wake.set()

    def drain(self, timeout: float = 5.0) -> bool:
        """Block until the mailbox is empty and the worker is idle (tests)."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                idle = not self._commands and self._pending_drag is None \
                    and not self._busy
            if idle:
                return True
            time.sleep(0.002)
        return False

    # -- worker ------------------------------------------------------------

    _busy = False

    def _worker(self):
        while not self._stop:
            self._wake.wait(timeout=0.25)
            if self._stop:
                return
            while True:
                with self._lock:
                    if self._commands:
                        cmd = self._commands.popleft()
                    elif self._pending_drag is not None:
                        cmd = self._pending_drag
                        self._pending_drag = None
                    else:
                        self._busy = False
                        self._wake.clear()
                        break
                    self._busy = True
                try:
                    self._handle(cmd)
                except SolveError as exc:
                    self._broadcast(protocol.ErrorMessage(
                        message=f"solve failed: {exc}"))
                except Exception as exc:  # keep the session alive
                    self._broadcast(protocol.ErrorMessage(
                        message=f"internal error: {exc}"))

    def _handle(self, cmd):
        t0 = time.perf_counter()
        if isinstance(cmd, protocol.RequestFrame):
            self._push_frame()
        elif isinstance(cmd, protocol.SetCamera):
            intr = cmd.intrinsics
            self.camera = Camera(
                fx=float(intr["fx"]), fy=float(intr["fy"]),
                cx=float(intr["cx"]), cy=float(intr["cy"]),
                width=int(intr["width"]), height=int(intr["height"]),
                rotation=np.asarray(cmd.pose["rotation"], dtype=np.float64),
                translation=np.asarray(cmd.pose["translation"],
                                       dtype=np.float64))
            self._push_frame()
        elif isinstance(cmd, protocol.SetHandles):
            self.handles = {int(h["vertex"]): np.asarray(h["target"])
                            for h in cmd.handles}
            self.warm = None
            if self.handles:
                self._solve()
            else:
                self.state = None
            self._push_frame()
        elif isinstance(cmd, protocol.Drag):
            if cmd.vertex not in self.handles:
                raise SolveError(f"vertex {cmd.vertex} is not a handle; "
                                 f"send set_handles first")
            self.handles[cmd.vertex] = np.asarray(cmd.target)
            self._solve(capped=True)
            self._push_frame()
        elif isinstance(cmd, protocol.Release):
            self.warm = None
        elif isinstance(cmd, protocol.SetFlag):
            if cmd.name not in self.flags:
                raise SolveError(f"unknown flag {cmd.name!r}")
            self.flags[cmd.name] = bool(cmd.value)
            self._push_frame()
        elif isinstance(cmd, protocol.LoadScene):
            self.scene = load_scene(cmd.path)
            self.camera = self.scene.default_camera
            self.solver = ArapSolver(self.scene.mesh)
            self.handles = {}
            self.warm = None
            self.state = None
            self._push_frame()
        else:
            raise SolveError(f"unsupported command {type(cmd).__name__}")
        dt = time.perf_counter() - t0
        if dt > 0:
            inst = 1.0 / dt
            self._fps_ema = inst if self._fps_ema == 0 else \
                0.8 * self._fps_ema + 0.2 * inst

    def _solve(self, capped: bool = False):
        t0 = time.perf_counter()
        iters = self.interactive_iters if capped else 20
        self.state = self.solver.solve(self.handles, max_iters=iters,
                                       warm_start=self.warm)
        self.warm = self.state.deformed_vertices.copy()
        self.last_solve_ms = 1e3 * (time.perf_counter() - t0)

    def _render(self):
        t0 = time.perf_counter()
        deformed = None
        if self.state is not None:
            deformed = transfer(self.scene.cloud, self.scene.mesh, self.state,
                                rotate_normal_offset=self.flags[
                                    "rotate-normal-offset"])
        fb = render(self.scene.cloud, self.scene.mesh, self.camera,
                    self.settings, deformed=deformed)
        self.last_render_ms = 1e3 * (time.perf_counter() - t0)
        return fb

    def _pick_points(self):
        """Downsampled projected vertices for UI picking: [index, pixel x,
        pixel y, camera depth, world x, world y, world z]."""
        verts = (self.state.deformed_vertices if self.state is not None
                 else self.scene.mesh.vertices)
        n = len(verts)
        step = max(1, n // self.pick_limit)
        idx = np.arange(0, n, step)
        cam = self.camera
        t = verts[idx] @ cam.rotation.T + cam.translation
        front = t[:, 2] > self.settings.near
        idx, t = idx[front], t[front]
        xs = cam.fx * t[:, 0] / t[:, 2] + cam.cx
        ys = cam.fy * t[:, 1] / t[:, 2] + cam.cy
        world = verts[idx]
        return [[int(i), float(x), float(y), float(z),
                 float(w[0]), float(w[1]), float(w[2])]
                for i, x, y, z, w in zip(idx, xs, ys, t[:, 2], world)]

    def _push_frame(self):
        fb = self._render()
        self.frame_id += 1
        cam = self.camera
        msg = protocol.FrameMessage(
            frame_id=self.frame_id,
            payload=_encode_png(fb.rgb),
            stats={
                "solve_ms": round(self.last_solve_ms, 3),
                "render_ms": round(self.last_render_ms, 3),
                "gaussians": len(self.scene.cloud),
                "fps": round(self._fps_ema, 2),
            },
            pick_points=self._pick_points(),
            view={
                "fx": cam.fx, "fy": cam.fy,
                "right": cam.rotation[0].tolist(),
                "down": cam.rotation[1].tolist(),
            },
        )
        self._broadcast(msg)

    def _broadcast(self, msg):
        data = protocol.serialize_message(msg)
        with self._lock:
            pushes = list(self._subscribers.values())
        for push in pushes:
            push(data)


MUTATING = (protocol.LoadScene, protocol.SetCamera, protocol.SetHandles,
            protocol.Drag, protocol.Release, protocol.SetFlag)


def create_app(engine: SessionEngine, static_dir=None):
    from fastapi.responses import HTMLResponse

    app = FastAPI(title="meshsplat session")
    controller_id: list[int | None] = [None]

    @app.websocket("/session")
    async def session(ws: WebSocket):
        await ws.accept()
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue(maxsize=1)

        def push(data: str):
            def _put():
                if queue.full():
                    try:
                        queue.get_nowait()
                    except asyncio.QueueEmpty:
                        pass
                queue.put_nowait(data)
            loop.call_soon_threadsafe(_put)

        sid = engine.subscribe(push)
        is_controller = False
        with engine._lock:
            if controller_id[0] is None:
                controller_id[0] = sid
                is_controller = True
        await ws.send_text(protocol.serialize_message(protocol.HelloMessage(
            role="controller" if is_controller else "viewer",
            scene={"gaussians": len(engine.scene.cloud),
                   "vertices": engine.scene.mesh.n_vertices,
                   "faces": engine.scene.mesh.n_faces})))

        async def sender():
            while True:
                data = await queue.get()
                await ws.send_text(data)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = protocol.parse_client_message(raw)
                except protocol.ProtocolError as exc:
                    await ws.send_text(protocol.serialize_message(
                        protocol.ErrorMessage(message=str(exc))))
                    continue
                if not is_controller and isinstance(msg, MUTATING):
                    await ws.send_text(protocol.serialize_message(
                        protocol.ErrorMessage(
                            message="view-only session: edit rejected")))
                    continue
                engine.submit(msg)
        except WebSocketDisconnect:
            pass
        except Exception:  # log, do not kill the server process
            import traceback
            traceback.print_exc()
        finally:
            send_task.cancel()
            engine.unsubscribe(sid)
            with engine._lock:
                if controller_id[0] == sid:
                    controller_id[0] = None

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")
    else:
        @app.get("/")
        async def index():
            return HTMLResponse(
                "<html><body><h3>meshsplat session server</h3>"
                "<p>No UI bundle found; connect a client to "
                "<code>/session</code>.</p></body></html>")
    return app


def serve(scene_path: str, bind: str = "127.0.0.1:8000",
          settings: RenderSettings | None = None, static_dir=None,
          interactive_iters: int = 4, rotate_normal_offset: bool = True):
    """Load the scene and run the session server (blocking)."""
    import uvicorn

    try:
        scene = load_scene(scene_path)
    except SceneError as exc:
        raise SystemExit(f"scene load failure: {exc}") from exc
    engine = SessionEngine(scene, settings=settings,
                           interactive_iters=interactive_iters,
                           rotate_normal_offset=rotate_normal_offset)
    engine.start()
    host, _, port = bind.partition(":")
    app = create_app(engine, static_dir=static_dir)
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000),
                    log_level="warning")
    finally:
        engine.stop()
