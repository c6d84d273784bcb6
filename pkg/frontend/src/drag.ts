// Handle dragging: screen deltas map to world-space moves on the
// camera-facing plane through the picked vertex, using the depth and view
// basis the server ships with every frame. Outbound drag messages are
// throttled; the trailing target always goes out so the solver converges on
// the final pose.

import type { ClientMsg, Vec3, ViewInfo } from "./protocol.js";
import type { Pick } from "./picking.js";

export const MAX_DRAG_RATE_HZ = 60;

export function screenDeltaToWorld(
  dxPx: number,
  dyPx: number,
  depth: number,
  view: ViewInfo,
): Vec3 {
  const sx = (dxPx * depth) / view.fx;
  const sy = (dyPx * depth) / view.fy;
  return [
    sx * view.right[0] + sy * view.down[0],
    sx * view.right[1] + sy * view.down[1],
    sx * view.right[2] + sy * view.down[2],
  ];
}

export interface DragState {
  vertex: number;
  startWorld: Vec3;
  startScreen: { x: number; y: number };
  depth: number;
}

export class DragController {
  private state: DragState | null = null;
  private lastSent = -Infinity;
  private pending: ClientMsg | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private send: (msg: ClientMsg) => void,
    private now: () => number = () => performance.now(),
    private schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> = setTimeout,
  ) {}

  get active(): boolean {
    return this.state !== null;
  }

  get vertex(): number | null {
    return this.state?.vertex ?? null;
  }

  begin(pick: Pick, startWorld: Vec3, screenX: number, screenY: number): void {
    this.state = {
      vertex: pick.vertex,
      startWorld,
      startScreen: { x: screenX, y: screenY },
      depth: pick.depth,
    };
  }

  move(screenX: number, screenY: number, view: ViewInfo): void {
    if (!this.state) return;
    const dx = screenX - this.state.startScreen.x;
    const dy = screenY - this.state.startScreen.y;
    if (dx === 0 && dy === 0) return;
    const delta = screenDeltaToWorld(dx, dy, this.state.depth, view);
    const target: Vec3 = [
      this.state.startWorld[0] + delta[0],
      this.state.startWorld[1] + delta[1],
      this.state.startWorld[2] + delta[2],
    ];
    this.enqueue({ type: "drag", vertex: this.state.vertex, target });
  }

  end(): void {
    if (!this.state) return;
    this.flush();
    this.state = null;
    this.send({ type: "release" });
  }

  private enqueue(msg: ClientMsg): void {
    const interval = 1000 / MAX_DRAG_RATE_HZ;
    const elapsed = this.now() - this.lastSent;
    if (elapsed >= interval) {
      this.lastSent = this.now();
      this.send(msg);
      return;
    }
    // keep only the latest; emit it when the window reopens
    this.pending = msg;
    if (this.timer === null) {
      this.timer = this.schedule(() => {
        this.timer = null;
        this.flush();
      }, interval - elapsed);
    }
  }

  private flush(): void {
    if (this.pending) {
      this.lastSent = this.now();
      this.send(this.pending);
      this.pending = null;
    }
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }
}
