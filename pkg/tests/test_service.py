import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from gskit.env.dataset import read_dataset
from gskit.env.sim import Env
from gskit.env.tasks import get_task
from gskit.renderer.imageio import to_uint8
from gskit.scene import load_scene_assets
from gskit.service.app import create_app
from gskit.service.wire import decode_frame, encode_frame


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    from gskit.env.toy import write_toy_scene

    root = tmp_path_factory.mktemp("service_assets")
    write_toy_scene(root, "place_box", seed=0)
    app = create_app(asset_root=root, max_sessions=4, idle_timeout=600.0)
    with TestClient(app) as c:
        c.asset_root = root
        yield c


def make_session(client, **overrides):
    req = {"scene": "place_box", "task": "place_box", "seed": 3, "cameras": ["front"]}
    req.update(overrides)
    resp = client.post("/sessions", json=req)
    assert resp.status_code == 201, resp.text
    return resp.json()


def drain_until_ack(ws, want_type="ack"):
    """Collect frames until the next JSON text message arrives."""
    frames = []
    while True:
        msg = ws.receive()
        if "text" in msg:
            doc = json.loads(msg["text"])
            assert doc["type"] == want_type, doc
            return doc, frames
        frames.append(decode_frame(msg["bytes"]))


class TestHttp:
    def test_scene_and_task_listing(self, client):
        scenes = client.get("/scenes").json()
        assert any(s["name"] == "place_box" for s in scenes)
        tasks = client.get("/tasks").json()
        names = [t["name"] for t in tasks]
        assert "place_box" in names and "stack_cans" in names

    def test_create_and_query(self, client):
        info = make_session(client)
        assert info["state"] == "ready"
        assert info["step_index"] == 0
        got = client.get(f"/sessions/{info['id']}").json()
        assert got["id"] == info["id"]
        client.delete(f"/sessions/{info['id']}")

    def test_two_sessions_independent(self, client):
        a = make_session(client, seed=1)
        b = make_session(client, seed=2)
        assert a["id"] != b["id"]
        client.delete(f"/sessions/{a['id']}")
        client.delete(f"/sessions/{b['id']}")

    def test_bad_scene_structured_error_no_leak(self, client):
        before = len(client.app.state.manager.sessions)
        resp = client.post("/sessions", json={"scene": "nope", "task": "place_box", "seed": 0})
        assert resp.status_code == 404
        assert "nope" in resp.json()["detail"]
        assert len(client.app.state.manager.sessions) == before

    def test_session_limit(self, client):
        ids = [make_session(client, seed=i)["id"] for i in range(4)]
        resp = client.post("/sessions", json={"scene": "place_box", "task": "place_box", "seed": 9})
        assert resp.status_code == 409
        for sid in ids:
            client.delete(f"/sessions/{sid}")

    def test_delete_unknown_404(self, client):
        assert client.delete("/sessions/doesnotexist").status_code == 404


class TestStream:
    def test_initial_frame_immediately(self, client):
        info = make_session(client)
        with client.websocket_connect(f"/sessions/{info['id']}/stream") as ws:
            header, rgb = decode_frame(ws.receive_bytes())
            assert header["session"] == info["id"]
            assert header["camera"] == "front"
            assert header["step_index"] == 0
            assert rgb.shape == (64, 64, 3)
        client.delete(f"/sessions/{info['id']}")

    def test_jog_symmetry_returns_to_start(self, client):
        info = make_session(client)
        with client.websocket_connect(f"/sessions/{info['id']}/stream") as ws:
            ws.receive_bytes()
            q_start = None
            manager = client.app.state.manager
            q_start = manager.get(info["id"]).env.state.q.copy()
            ws.send_text(json.dumps(
                {"type": "jog", "payload": {"index": 0, "direction": 1}}))
            ack1, _ = drain_until_ack(ws)
            ws.send_text(json.dumps(
                {"type": "jog", "payload": {"index": 0, "direction": -1}}))
            ack2, _ = drain_until_ack(ws)
            assert ack2["step_index"] == 2
            q_end = manager.get(info["id"]).env.state.q
            assert abs(q_end[0] - q_start[0]) <= 1e-9
        client.delete(f"/sessions/{info['id']}")

    def test_five_commands_five_ordered_frames(self, client):
        info = make_session(client)
        with client.websocket_connect(f"/sessions/{info['id']}/stream") as ws:
            ws.receive_bytes()
            indices = []
            for i in range(5):
                ws.send_text(json.dumps(
                    {"type": "jog", "payload": {"index": 1, "direction": 1}}))
                ack, frames = drain_until_ack(ws)
                indices.extend(h["step_index"] for h, _ in frames)
            # one step-increment frame per command, strictly ordered
            fresh = [i for i in indices if i > 0]
            assert fresh == sorted(fresh)
            assert set(range(1, 6)) <= set(indices) | {ack["step_index"]}
        client.delete(f"/sessions/{info['id']}")

    def test_heartbeat_when_idle(self, client):
        info = make_session(client)
        with client.websocket_connect(f"/sessions/{info['id']}/stream") as ws:
            first, _ = decode_frame(ws.receive_bytes())
            # no commands: heartbeat repeats the same step_index
            again, _ = decode_frame(ws.receive_bytes())
            assert again["step_index"] == first["step_index"]
        client.delete(f"/sessions/{info['id']}")

    def test_malformed_command_error(self, client):
        info = make_session(client)
        with client.websocket_connect(f"/sessions/{info['id']}/stream") as ws:
            ws.receive_bytes()
            ws.send_text("not json")
            doc, _ = drain_until_ack(ws, want_type="error")
            ws.send_text(json.dumps({"type": "warp", "payload": {}}))
            doc, _ = drain_until_ack(ws, want_type="error")
            assert "malformed" in doc["message"]
        client.delete(f"/sessions/{info['id']}")

    def test_second_connection_view_only(self, client):
        info = make_session(client)
        with client.websocket_connect(f"/sessions/{info['id']}/stream") as ws1:
            ws1.receive_bytes()
            with client.websocket_connect(f"/sessions/{info['id']}/stream") as ws2:
                ws2.receive_bytes()
                ws2.send_text(json.dumps(
                    {"type": "jog", "payload": {"index": 0, "direction": 1}}))
                doc, _ = drain_until_ack(ws2, want_type="error")
                assert "view-only" in doc["message"]
        client.delete(f"/sessions/{info['id']}")

    def test_gripper_attach_reported(self, client):
        """Drive the gripper to the bottle via jogs; the ack reports attachment."""
        info = make_session(client, seed=3)
        manager = client.app.state.manager
        session = manager.get(info["id"])
        assets = session.assets
        from gskit.env.tasks import object_grasp_point

        grasp = object_grasp_point(session.env.state, assets, 0)
        with client.websocket_connect(f"/sessions/{info['id']}/stream") as ws:
            ws.receive_bytes()

            def jog_until(index, target, tol=0.0101):  # just over half a jog step
                for _ in range(200):
                    q = session.env.state.q
                    delta = target - q[index]
                    if abs(delta) <= tol:
                        return
                    ws.send_text(json.dumps({
                        "type": "jog",
                        "payload": {"index": index, "direction": 1 if delta > 0 else -1},
                    }))
                    drain_until_ack(ws)
                raise AssertionError("jog did not converge")

            jog_until(0, grasp[0])
            jog_until(1, grasp[1])
            from gskit.env.toy import EE_RAISED_HEIGHT

            jog_until(2, EE_RAISED_HEIGHT - grasp[2])
            ws.send_text(json.dumps({"type": "gripper", "payload": {"action": "close"}}))
            ack, _ = drain_until_ack(ws)
            assert ack["gripper"] == "closed"
            assert ack["attached"] == 0
        client.delete(f"/sessions/{info['id']}")


class TestRecording:
    def test_record_save_validates_and_replays(self, client):
        """connect, jog, record, save: the dataset validates against the
        sim-env schema and replays to the identical final EnvState."""
        info = make_session(client, seed=5)
        manager = client.app.state.manager
        session = manager.get(info["id"])
        with client.websocket_connect(f"/sessions/{info['id']}/stream") as ws:
            ws.receive_bytes()
            ws.send_text(json.dumps({"type": "record", "payload": {"action": "start"}}))
            ack, _ = drain_until_ack(ws)
            assert ack["recording"] is True

            for i in range(10):
                ws.send_text(json.dumps(
                    {"type": "jog", "payload": {"index": i % 3, "direction": 1}}))
                drain_until_ack(ws)
            ws.send_text(json.dumps({"type": "record", "payload": {"action": "save"}}))
            ack, _ = drain_until_ack(ws)
            saved = ack["saved_path"]
            assert ack["recording"] is False

        final_live = session.env.state.copy()
        datasets = client.get(f"/sessions/{info['id']}/datasets").json()["datasets"]
        assert saved in datasets

        manifest, records = read_dataset(saved)
        assert manifest["task"] == "place_box"
        record = records[0]
        assert record.length == 10
        assert record.policy_id == "teleop"

        # jog actions echo the commanded targets: replay must land on the
        # same final state
        assets = load_scene_assets(client.asset_root / "place_box.gsdf")
        env = Env(assets, get_task("place_box"))
        env.reset(5)
        for t in range(record.length):
            env.step(record.actions[t].astype(np.float64))
        assert env.state.allclose(record.final_state, tol=1e-12)
        assert env.state.allclose(final_live, tol=1e-12)
        client.delete(f"/sessions/{info['id']}")

    def test_reset_while_recording_rejected(self, client):
        info = make_session(client)
        with client.websocket_connect(f"/sessions/{info['id']}/stream") as ws:
            ws.receive_bytes()
            ws.send_text(json.dumps({"type": "record", "payload": {"action": "start"}}))
            drain_until_ack(ws)
            ws.send_text(json.dumps({"type": "reset", "payload": {"seed": 1}}))
            doc, _ = drain_until_ack(ws, want_type="error")
            assert "recording" in doc["message"]
        client.delete(f"/sessions/{info['id']}")


class TestWireFormat:
    def test_frame_round_trip(self):
        rng = np.random.default_rng(0)
        rgb = rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8)
        blob = encode_frame("abc123", 7, "front", rgb)
        header, back = decode_frame(blob)
        assert header == {
            "session": "abc123", "step_index": 7, "camera": "front",
            "width": 64, "height": 48,
        }
        np.testing.assert_array_equal(back, rgb)

    def test_frame_matches_cli_render_path(self, client, tmp_path):
        """The streamed frame equals the image the render pipeline produces
        for the identical state (cross-path equivalence)."""
        info = make_session(client, seed=8)
        manager = client.app.state.manager
        session = manager.get(info["id"])
        with client.websocket_connect(f"/sessions/{info['id']}/stream") as ws:
            header, rgb = decode_frame(ws.receive_bytes())
        expected = to_uint8(session.env.render_observation(["front"]).images["front"])
        np.testing.assert_array_equal(rgb, expected)
        client.delete(f"/sessions/{info['id']}")


class TestDifferentialIk:
    def test_ee_mode_jog_moves_along_axis(self, client):
        info = make_session(client, seed=2)
        manager = client.app.state.manager
        session = manager.get(info["id"])
        env = session.env
        with client.websocket_connect(f"/sessions/{info['id']}/stream") as ws:
            ws.receive_bytes()
            ws.send_text(json.dumps({"type": "mode", "payload": {"mode": "ee"}}))
            ack, _ = drain_until_ack(ws)
            assert ack["mode"] == "ee"
            ee_before = env._ee_pose(env.state.q).translation
            ws.send_text(json.dumps(
                {"type": "jog", "payload": {"axis": "x", "direction": 1}}))
            drain_until_ack(ws)
            ee_after = env._ee_pose(env.state.q).translation
            delta = ee_after - ee_before
            assert delta[0] > 0.005  # ~1 cm commanded
            assert abs(delta[1]) < 1e-6 and abs(delta[2]) < 1e-6
        client.delete(f"/sessions/{info['id']}")
