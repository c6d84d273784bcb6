// DOM wiring: canvas blitting of streamed frames, pointer handling for
// orbit / pick / drag, stats overlay. Everything with logic lives in the
// imported modules; this file stays a thin shell.

import { DragController } from "./drag.js";
import { applyOrbitDelta, OrbitParams, setCameraMessage } from "./orbit.js";
import { pickVertex } from "./picking.js";
import { SessionClient } from "./viewer.js";

const canvas = document.getElementById("frame") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("banner")!;
const statsEl = document.getElementById("stats")!;

const intrinsics = {
  fx: 280, fy: 280, cx: canvas.width / 2, cy: canvas.height / 2,
  width: canvas.width, height: canvas.height,
};
let orbit: OrbitParams = {
  azimuth: 0.5, elevation: 0.2, radius: 3.2, target: [0, 0, 0],
};

const wsUrl = `ws://${location.host}/session`;
const client = new SessionClient(
  wsUrl,
  (url) => new WebSocket(url) as unknown as import("./viewer.js").SocketLike,
  {
  onFrame: (payload, state) => {
    const img = new Image();
    img.onload = () => ctx.drawImage(img, 0, 0, canvas.width, canvas.height);
    img.src = `data:image/png;base64,${payload}`;
    if (state.stats) {
      statsEl.textContent =
        `${state.stats.fps.toFixed(1)} fps | solve ${state.stats.solve_ms.toFixed(1)} ms | ` +
        `render ${state.stats.render_ms.toFixed(1)} ms | ${state.stats.gaussians} splats`;
    }
  },
  onState: (state) => {
    banner.style.display = state.connection === "connected" ? "none" : "block";
    banner.textContent = state.connection === "connected" ? "" :
      state.connection === "connecting" ? "connecting…" : "disconnected — retrying";
  },
});
client.connect();

const drag = new DragController((msg) => client.send(msg));
let orbitDrag: { x: number; y: number } | null = null;

canvas.addEventListener("pointerdown", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const x = ((ev.clientX - rect.left) / rect.width) * canvas.width;
  const y = ((ev.clientY - rect.top) / rect.height) * canvas.height;
  if (ev.shiftKey) {
    const pick = pickVertex(x, y, client.state.pickPoints);
    if (pick && client.state.view) {
      // pin the current handle set plus the picked vertex, then drag it
      const existing = client.state.handles.map((h) => ({
        vertex: h.vertex, target: h.currentTarget,
      }));
      if (!existing.some((h) => h.vertex === pick.vertex)) {
        existing.push({ vertex: pick.vertex, target: pick.world });
        client.send({ type: "set_handles", handles: existing });
      }
      const handle = client.state.handles.find((h) => h.vertex === pick.vertex);
      if (handle) drag.begin(pick, handle.currentTarget, x, y);
      canvas.setPointerCapture(ev.pointerId);
    }
  } else {
    orbitDrag = { x: ev.clientX, y: ev.clientY };
    canvas.setPointerCapture(ev.pointerId);
  }
});

canvas.addEventListener("pointermove", (ev) => {
  if (drag.active && client.state.view) {
    const rect = canvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * canvas.width;
    const y = ((ev.clientY - rect.top) / rect.height) * canvas.height;
    drag.move(x, y, client.state.view);
  } else if (orbitDrag) {
    orbit = applyOrbitDelta(orbit,
      (ev.clientX - orbitDrag.x) * 0.01, (ev.clientY - orbitDrag.y) * 0.01);
    orbitDrag = { x: ev.clientX, y: ev.clientY };
    client.send(setCameraMessage(orbit, intrinsics));
  }
});

canvas.addEventListener("pointerup", () => {
  if (drag.active) drag.end();
  orbitDrag = null;
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  orbit = applyOrbitDelta(orbit, 0, 0, ev.deltaY > 0 ? 1.1 : 0.9);
  client.send(setCameraMessage(orbit, intrinsics));
});
