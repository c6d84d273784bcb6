import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshsplat.service import protocol

finite = st.floats(allow_nan=False, allow_infinity=False,
                   min_value=-1e6, max_value=1e6)
vec3 = st.lists(finite, min_size=3, max_size=3)


def roundtrip(msg):
    return protocol.parse_client_message(protocol.serialize_message(msg))


@settings(max_examples=40, deadline=None)
@given(st.text(min_size=1, max_size=60))
def test_roundtrip_load_scene(path):
    msg = protocol.LoadScene(path=path)
    assert roundtrip(msg) == msg


@settings(max_examples=40, deadline=None)
@given(finite, finite, vec3)
def test_roundtrip_set_camera(fx, fy, translation):
    msg = protocol.SetCamera(
        intrinsics={"fx": fx, "fy": fy, "cx": 32.0, "cy": 32.0,
                    "width": 64, "height": 64},
        pose={"rotation": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
              "translation": translation})
    assert roundtrip(msg) == msg


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**6), vec3), max_size=8))
def test_roundtrip_set_handles(entries):
    msg = protocol.SetHandles(
        handles=[{"vertex": v, "target": t} for v, t in entries])
    assert roundtrip(msg) == msg


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), vec3)
def test_roundtrip_drag(vertex, target):
    msg = protocol.Drag(vertex=vertex, target=target)
    assert roundtrip(msg) == msg


def test_roundtrip_release_and_request():
    assert roundtrip(protocol.Release()) == protocol.Release()
    assert roundtrip(protocol.RequestFrame()) == protocol.RequestFrame()


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["rotate-normal-offset", "other"]), st.booleans())
def test_roundtrip_set_flag(name, value):
    msg = protocol.SetFlag(name=name, value=value)
    assert roundtrip(msg) == msg


def test_frame_message_roundtrip():
    msg = protocol.FrameMessage(
        frame_id=7, payload="aGk=",
        stats={"solve_ms": 1.5, "render_ms": 3.25, "gaussians": 10,
               "fps": 30.0},
        pick_points=[[0, 1.0, 2.0, 3.0, 0.5, -0.5, 0.25]],
        view={"fx": 100.0, "fy": 100.0, "right": [1, 0, 0],
              "down": [0, 1, 0]})
    parsed = protocol.parse_server_message(protocol.serialize_message(msg))
    assert parsed == msg


def test_unknown_type_rejected():
    with pytest.raises(protocol.ProtocolError, match="unknown message type"):
        protocol.parse_client_message('{"type": "explode"}')


def test_missing_discriminator_rejected():
    with pytest.raises(protocol.ProtocolError):
        protocol.parse_client_message('{"path": "x"}')


def test_invalid_json_rejected():
    with pytest.raises(protocol.ProtocolError, match="invalid JSON"):
        protocol.parse_client_message("{nope")


def test_malformed_fields_rejected():
    with pytest.raises(protocol.ProtocolError):
        protocol.parse_client_message('{"type": "drag", "vertex": "a", '
                                      '"target": [0, 0, 0]}')
    with pytest.raises(protocol.ProtocolError, match="3-vector"):
        protocol.parse_client_message('{"type": "drag", "vertex": 1, '
                                      '"target": [0, 0]}')
    with pytest.raises(protocol.ProtocolError):
        protocol.parse_client_message('{"type": "set_flag", "name": "x", '
                                      '"value": "yes"}')


def test_golden_fixtures_roundtrip():
    """Shared golden messages (consumed by the browser client tests too)."""
    import os

    fixture_dir = os.path.join(os.path.dirname(__file__), "..", "fixtures",
                               "protocol")
    names = sorted(os.listdir(fixture_dir))
    assert len(names) >= 8, "expected golden fixtures for every variant"
    for name in names:
        with open(os.path.join(fixture_dir, name)) as fh:
            data = json.load(fh)
        if data["type"] in protocol.CLIENT_MESSAGE_TYPES:
            msg = protocol.parse_client_message(data)
            assert json.loads(protocol.serialize_message(msg)) == data
        else:
            msg = protocol.parse_server_message(data)
            assert json.loads(protocol.serialize_message(msg)) == data
