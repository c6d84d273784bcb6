// Orbit camera bookkeeping. The server does the rendering; the client only
// tracks orbit parameters and converts them to a world-to-camera pose for
// set_camera messages (+z forward, +y down camera frame).

import type { ClientMsg, Vec3 } from "./protocol.js";

export interface OrbitParams {
  azimuth: number;
  elevation: number;
  radius: number;
  target: Vec3;
}

export interface Intrinsics {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

const cross = (a: Vec3, b: Vec3): Vec3 => [
  a[1] * b[2] - a[2] * b[1],
  a[2] * b[0] - a[0] * b[2],
  a[0] * b[1] - a[1] * b[0],
];

const normalize = (v: Vec3): Vec3 => {
  const n = Math.hypot(v[0], v[1], v[2]) || 1;
  return [v[0] / n, v[1] / n, v[2] / n];
};

export function orbitEye(p: OrbitParams): Vec3 {
  const ce = Math.cos(p.elevation);
  return [
    p.target[0] + p.radius * ce * Math.sin(p.azimuth),
    p.target[1] + p.radius * Math.sin(p.elevation),
    p.target[2] - p.radius * ce * Math.cos(p.azimuth),
  ];
}

export function orbitPose(p: OrbitParams): { rotation: number[][]; translation: Vec3 } {
  const eye = orbitEye(p);
  const forward = normalize([
    p.target[0] - eye[0],
    p.target[1] - eye[1],
    p.target[2] - eye[2],
  ]);
  let right = cross(forward, [0, 1, 0]);
  if (Math.hypot(...right) < 1e-9) right = cross(forward, [0, 0, 1]);
  right = normalize(right);
  const down = cross(forward, right);
  const rotation = [right, down, forward].map((row) => [...row]);
  const translation: Vec3 = [
    -(rotation[0][0] * eye[0] + rotation[0][1] * eye[1] + rotation[0][2] * eye[2]),
    -(rotation[1][0] * eye[0] + rotation[1][1] * eye[1] + rotation[1][2] * eye[2]),
    -(rotation[2][0] * eye[0] + rotation[2][1] * eye[1] + rotation[2][2] * eye[2]),
  ];
  return { rotation, translation };
}

export function setCameraMessage(p: OrbitParams, intr: Intrinsics): ClientMsg {
  return { type: "set_camera", intrinsics: intr, pose: orbitPose(p) };
}

export function applyOrbitDelta(
  p: OrbitParams,
  dAzimuth: number,
  dElevation: number,
  zoomFactor = 1,
): OrbitParams {
  const lim = Math.PI / 2 - 1e-3;
  return {
    azimuth: p.azimuth + dAzimuth,
    elevation: Math.max(-lim, Math.min(lim, p.elevation + dElevation)),
    radius: Math.max(1e-3, p.radius * zoomFactor),
    target: p.target,
  };
}
