from .protocol import (Drag, ErrorMessage, FrameMessage, HelloMessage,
                       LoadScene, ProtocolError, Release, RequestFrame,
                       SetCamera, SetFlag, SetHandles, parse_client_message,
                       parse_server_message, serialize_message)
from .scene import Scene, SceneError, load_handles, load_scene, save_scene
from .server import SessionEngine, create_app, serve

__all__ = [
    "Scene", "SceneError", "load_scene", "save_scene", "load_handles",
    "SessionEngine", "create_app", "serve", "parse_client_message",
    "parse_server_message", "serialize_message", "ProtocolError",
    "LoadScene", "SetCamera", "SetHandles", "Drag", "Release", "SetFlag",
    "RequestFrame", "FrameMessage", "ErrorMessage", "HelloMessage",
]
