// Vertex picking against the server-provided projected vertex list.
// The UI does no 3D math here: just nearest-point search in screen space.

import type { PickPoint, Vec3 } from "./protocol.js";

export const PICK_RADIUS_PX = 12;

export interface Pick {
  vertex: number;
  x: number;
  y: number;
  depth: number;
  world: Vec3;
}

export function pickVertex(
  screenX: number,
  screenY: number,
  points: PickPoint[],
  radius: number = PICK_RADIUS_PX,
): Pick | null {
  let best: Pick | null = null;
  let bestDist = radius;
  for (const [vertex, x, y, depth, wx, wy, wz] of points) {
    const dist = Math.hypot(x - screenX, y - screenY);
    if (dist <= bestDist) {
      bestDist = dist;
      best = { vertex, x, y, depth, world: [wx, wy, wz] };
    }
  }
  return best;
}
