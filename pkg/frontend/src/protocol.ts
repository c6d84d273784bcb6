// Session protocol codec. Mirrors the server's JSON messages; parsing
// validates shapes so malformed frames surface as errors instead of
// undefined fields downstream.

export type Vec3 = [number, number, number];

export interface HandleTarget {
  vertex: number;
  target: Vec3;
}

export type ClientMsg =
  | { type: "load_scene"; path: string }
  | {
      type: "set_camera";
      intrinsics: { fx: number; fy: number; cx: number; cy: number; width: number; height: number };
      pose: { rotation: number[][]; translation: Vec3 };
    }
  | { type: "set_handles"; handles: HandleTarget[] }
  | { type: "drag"; vertex: number; target: Vec3 }
  | { type: "release" }
  | { type: "set_flag"; name: string; value: boolean }
  | { type: "request_frame" };

export interface FrameStats {
  solve_ms: number;
  render_ms: number;
  gaussians: number;
  fps: number;
}

// [vertex index, pixel x, pixel y, camera depth, world x, world y, world z]
export type PickPoint = [number, number, number, number, number, number, number];

export interface ViewInfo {
  fx: number;
  fy: number;
  right: Vec3;
  down: Vec3;
}

export type ServerMsg =
  | {
      type: "frame";
      frame_id: number;
      encoding: string;
      payload: string;
      stats: FrameStats;
      pick_points: PickPoint[];
      view: ViewInfo;
    }
  | { type: "error"; message: string }
  | { type: "hello"; role: "controller" | "viewer"; scene: Record<string, number> };

export class ProtocolError extends Error {}

const isNum = (x: unknown): x is number => typeof x === "number" && Number.isFinite(x);

function checkVec3(x: unknown, name: string): Vec3 {
  if (!Array.isArray(x) || x.length !== 3 || !x.every(isNum)) {
    throw new ProtocolError(`'${name}' must be a 3-vector`);
  }
  return [x[0], x[1], x[2]];
}

export function parseServerMessage(raw: string | object): ServerMsg {
  let obj: Record<string, unknown>;
  if (typeof raw === "string") {
    try {
      obj = JSON.parse(raw);
    } catch (e) {
      throw new ProtocolError(`invalid JSON: ${e}`);
    }
  } else {
    obj = raw as Record<string, unknown>;
  }
  switch (obj.type) {
    case "frame": {
      if (!isNum(obj.frame_id)) throw new ProtocolError("frame_id missing");
      if (typeof obj.payload !== "string") throw new ProtocolError("payload missing");
      const stats = obj.stats as FrameStats;
      if (!stats || !isNum(stats.fps)) throw new ProtocolError("stats missing");
      return obj as ServerMsg;
    }
    case "error":
      if (typeof obj.message !== "string") throw new ProtocolError("message missing");
      return { type: "error", message: obj.message };
    case "hello":
      if (obj.role !== "controller" && obj.role !== "viewer") {
        throw new ProtocolError("bad hello role");
      }
      return obj as ServerMsg;
    default:
      throw new ProtocolError(`unknown server message type '${obj.type}'`);
  }
}

export function parseClientMessage(raw: string | object): ClientMsg {
  const obj = (typeof raw === "string" ? JSON.parse(raw) : raw) as Record<string, unknown>;
  switch (obj.type) {
    case "load_scene":
      if (typeof obj.path !== "string") throw new ProtocolError("path missing");
      return { type: "load_scene", path: obj.path };
    case "set_camera": {
      const intr = obj.intrinsics as Record<string, unknown>;
      for (const key of ["fx", "fy", "cx", "cy", "width", "height"]) {
        if (!isNum(intr?.[key])) throw new ProtocolError(`intrinsics.${key} missing`);
      }
      const pose = obj.pose as Record<string, unknown>;
      checkVec3(pose?.translation, "translation");
      if (!Array.isArray(pose?.rotation)) throw new ProtocolError("rotation missing");
      return obj as ClientMsg;
    }
    case "set_handles": {
      const handles = obj.handles;
      if (!Array.isArray(handles)) throw new ProtocolError("handles missing");
      for (const h of handles) {
        if (!isNum(h?.vertex)) throw new ProtocolError("handle vertex missing");
        checkVec3(h?.target, "target");
      }
      return obj as ClientMsg;
    }
    case "drag":
      if (!isNum(obj.vertex)) throw new ProtocolError("vertex missing");
      return { type: "drag", vertex: obj.vertex as number, target: checkVec3(obj.target, "target") };
    case "release":
      return { type: "release" };
    case "set_flag":
      if (typeof obj.name !== "string" || typeof obj.value !== "boolean") {
        throw new ProtocolError("bad set_flag");
      }
      return { type: "set_flag", name: obj.name, value: obj.value };
    case "request_frame":
      return { type: "request_frame" };
    default:
      throw new ProtocolError(`unknown message type '${obj.type}'`);
  }
}

export function serialize(msg: ClientMsg | ServerMsg): string {
  return JSON.stringify(msg);
}
