"""Session protocol: JSON messages over a WebSocket.

Client -> server messages carry a `type` discriminator; unknown types or
malformed fields raise ProtocolError.  Server -> client frames carry a
base64 PNG payload plus solve/render stats and the projected pick points
the UI needs for vertex selection.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any

CLIENT_MESSAGE_TYPES = ("load_scene", "set_camera", "set_handles", "drag",
                        "release", "set_flag", "request_frame")


class ProtocolError(ValueError):
    pass


@dataclass
class LoadScene:
    path: str
    type: str = "load_scene"


@dataclass
class SetCamera:
    intrinsics: dict          # fx, fy, cx, cy, width, height
    pose: dict                # rotation (3x3), translation (3)
    type: str = "set_camera"


@dataclass
class SetHandles:
    handles: list             # [{"vertex": int, "target": [x, y, z]}]
    type: str = "set_handles"


@dataclass
class Drag:
    vertex: int
    target: list
    type: str = "drag"


@dataclass
class Release:
    type: str = "release"


@dataclass
class SetFlag:
    name: str
    value: bool
    type: str = "set_flag"


@dataclass
class RequestFrame:
    type: str = "request_frame"


@dataclass
class FrameMessage:
    frame_id: int
    payload: str              # base64 PNG
    stats: dict               # solve_ms, render_ms, gaussians, fps
    pick_points: list = field(default_factory=list)
    view: dict = field(default_factory=dict)
    encoding: str = "png"
    type: str = "frame"


@dataclass
class ErrorMessage:
    message: str
    type: str = "error"


@dataclass
class HelloMessage:
    role: str                 # "controller" | "viewer"
    scene: dict = field(default_factory=dict)
    type: str = "hello"


_CLIENT_CLASSES = {
    "load_scene": LoadScene,
    "set_camera": SetCamera,
    "set_handles": SetHandles,
    "drag": Drag,
    "release": Release,
    "set_flag": SetFlag,
    "request_frame": RequestFrame,
}


def _require(obj: dict, key: str, kinds) -> Any:
    if key not in obj:
        raise ProtocolError(f"missing field '{key}'")
    val = obj[key]
    if not isinstance(val, kinds):
        raise ProtocolError(f"field '{key}' has wrong type")
    return val


def _check_vec3(val, name):
    if (not isinstance(val, (list, tuple)) or len(val) != 3
            or not all(isinstance(x, (int, float)) for x in val)):
        raise ProtocolError(f"'{name}' must be a 3-vector")
    return [float(x) for x in val]


def parse_client_message(raw):
    """Parse a JSON string or dict into a client message dataclass."""
    if isinstance(raw, (str, bytes)):
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid JSON: {exc}") from exc
    else:
        obj = raw
    if not isinstance(obj, dict):
        raise ProtocolError("message must be a JSON object")
    mtype = obj.get("type")
    if mtype not in _CLIENT_CLASSES:
        raise ProtocolError(f"unknown message type {mtype!r}")
    if mtype == "load_scene":
        return LoadScene(path=_require(obj, "path", str))
    if mtype == "set_camera":
        intr = _require(obj, "intrinsics", dict)
        for key in ("fx", "fy", "cx", "cy", "width", "height"):
            _require(intr, key, (int, float))
        pose = _require(obj, "pose", dict)
        _require(pose, "rotation", list)
        _check_vec3(_require(pose, "translation", list), "translation")
        return SetCamera(intrinsics=dict(intr), pose=dict(pose))
    if mtype == "set_handles":
        handles = _require(obj, "handles", list)
        parsed = []
        for h in handles:
            if not isinstance(h, dict):
                raise ProtocolError("handle entries must be objects")
            parsed.append({
                "vertex": int(_require(h, "vertex", int)),
                "target": _check_vec3(_require(h, "target", (list, tuple)),
                                      "target"),
            })
        return SetHandles(handles=parsed)
    if mtype == "drag":
        return Drag(vertex=int(_require(obj, "vertex", int)),
                    target=_check_vec3(_require(obj, "target", (list, tuple)),
                                       "target"))
    if mtype == "release":
        return Release()
    if mtype == "set_flag":
        return SetFlag(name=_require(obj, "name", str),
                       value=_require(obj, "value", bool))
    if mtype == "request_frame":
        return RequestFrame()
    raise ProtocolError(f"unhandled message type {mtype!r}")  # pragma: no cover


def serialize_message(msg) -> str:
    return json.dumps(asdict(msg), separators=(",", ":"))


def parse_server_message(raw):
    obj = json.loads(raw) if isinstance(raw, (str, bytes)) else raw
    mtype = obj.get("type")
    if mtype == "frame":
        return FrameMessage(**{k: obj[k] for k in
                               ("frame_id", "payload", "stats", "pick_points",
                                "view", "encoding", "type")})
    if mtype == "error":
        return ErrorMessage(message=obj["message"])
    if mtype == "hello":
        return HelloMessage(role=obj["role"], scene=obj.get("scene", {}))
    raise ProtocolError(f"unknown server message type {mtype!r}")
