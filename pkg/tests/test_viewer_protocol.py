import base64
import io
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from resoctree.engine import EngineConfig
from resoctree.render import RenderConfig
from resoctree.viewer_service import (ProtocolError, create_viewer_app,
                                      parse_camera, parse_channels, parse_tf)

ENGINE = EngineConfig(octree_depth=3, cache_slots=(8, 8, 8), channel_slots=2)
RENDER = RenderConfig(image_dims=(48, 48), base_step=1.0 / 64.0,
                      max_requests_per_frame=512, traversal_start_level=2)

RAMP_TF = [[40.0, [0, 0, 0, 0]], [255.0, [1, 1, 1, 1]]]
CAMERA = {"type": "set_camera", "position": [2.0, 0.85, 1.9]}
CHANNELS = {"type": "set_channels",
            "channels": [{"slot": 0, "channel": 0, "tf": RAMP_TF}]}

FRAME_KEYS = {"type", "frameId", "pngBytes"}
STATS_KEYS = {"type", "frameId", "requests", "residentBricks",
              "residentBytes", "converged", "renderMs"}


@pytest.fixture()
def ws(ds64):
    app = create_viewer_app(ds64, ENGINE, RENDER)
    client = TestClient(app)
    with client.websocket_connect("/session") as sock:
        yield sock


def drain(sock, *msgs):
    """Send messages, then read replies until a converged stats message."""
    for m in msgs:
        sock.send_text(json.dumps(m))
    out = []
    while True:
        reply = json.loads(sock.receive_text())
        out.append(reply)
        if reply["type"] == "stats" and reply["converged"]:
            return out
        if reply["type"] == "error":
            return out


# -- message parsing --------------------------------------------------------

def test_parse_tf_and_errors():
    tf = parse_tf(RAMP_TF)
    assert tf.opacity(255.0) == 1.0
    with pytest.raises(ProtocolError):
        parse_tf([["x", [0, 0, 0, 0]]])
    with pytest.raises(ProtocolError):
        parse_tf("nope")


def test_parse_camera_defaults_and_errors():
    cam = parse_camera({"position": [0, 0, 3]})
    assert cam.target == (0.5, 0.5, 0.5) and cam.fov_deg == 45.0
    with pytest.raises(ProtocolError):
        parse_camera({"position": "abc"})
    with pytest.raises(ProtocolError):
        parse_camera({})


def test_parse_channels_level_range():
    chans, mapping = parse_channels(
        [{"slot": 1, "channel": 0, "tf": RAMP_TF, "levelRange": [2, 2]}],
        ENGINE)
    assert chans[0].slot == 1 and chans[0].level_range == (2, 2)
    assert mapping == {1: 0}


# -- socket protocol --------------------------------------------------------

def test_session_streams_schema_valid_frames(ws):
    replies = drain(ws, CHANNELS, CAMERA)
    frames = [r for r in replies if r["type"] == "frame"]
    stats = [r for r in replies if r["type"] == "stats"]
    assert frames and stats
    assert not any(r["type"] == "error" for r in replies)
    for f in frames:
        assert set(f) == FRAME_KEYS
    for s in stats:
        assert set(s) == STATS_KEYS
        assert isinstance(s["converged"], bool)
        assert s["residentBytes"] == s["residentBricks"] * 16 ** 3
    # frame ids strictly increase, one stats per frame with the same id
    ids = [f["frameId"] for f in frames]
    assert ids == sorted(set(ids))
    assert [s["frameId"] for s in stats] == ids
    assert stats[-1]["converged"] and stats[-1]["requests"] == 0


def test_frames_decode_as_png(ws):
    from PIL import Image
    replies = drain(ws, CHANNELS, CAMERA)
    last = [r for r in replies if r["type"] == "frame"][-1]
    img = Image.open(io.BytesIO(base64.b64decode(last["pngBytes"])))
    assert img.size == (48, 48) and img.mode == "RGBA"
    assert np.asarray(img)[..., 3].max() > 0      # shell visible


def test_camera_only_renders_with_default_channel(ws):
    replies = drain(ws, CAMERA)
    assert any(r["type"] == "frame" for r in replies)


def test_state_change_restreams_with_higher_frame_ids(ws):
    first = drain(ws, CHANNELS, CAMERA)
    last_id = [r for r in first if r["type"] == "frame"][-1]["frameId"]
    dimmer = {"type": "set_channels",
              "channels": [{"slot": 0, "channel": 0,
                            "tf": [[40.0, [0, 0, 0, 0]],
                                   [255.0, [1, 1, 1, 0.3]]]}]}
    second = drain(ws, dimmer)
    ids = [r["frameId"] for r in second if r["type"] == "frame"]
    assert ids and min(ids) > last_id
    a = [r for r in first if r["type"] == "frame"][-1]["pngBytes"]
    b = [r for r in second if r["type"] == "frame"][-1]["pngBytes"]
    assert a != b


def test_set_config_changes_image_dims(ws):
    from PIL import Image
    drain(ws, CHANNELS, CAMERA)
    replies = drain(ws, {"type": "set_config", "imageDims": [32, 24]})
    last = [r for r in replies if r["type"] == "frame"][-1]
    img = Image.open(io.BytesIO(base64.b64decode(last["pngBytes"])))
    assert img.size == (32, 24)


def test_error_replies(ws):
    ws.send_text("this is not json")
    assert json.loads(ws.receive_text())["type"] == "error"
    ws.send_text(json.dumps({"no": "type"}))
    assert json.loads(ws.receive_text())["type"] == "error"
    ws.send_text(json.dumps({"type": "bogus"}))
    reply = json.loads(ws.receive_text())
    assert reply["type"] == "error" and "bogus" in reply["message"]
    ws.send_text(json.dumps({"type": "set_camera", "position": [0.5, 0.5, 0.5]}))
    assert json.loads(ws.receive_text())["type"] == "error"
    # session still alive after errors
    replies = drain(ws, CHANNELS, CAMERA)
    assert any(r["type"] == "frame" for r in replies)
