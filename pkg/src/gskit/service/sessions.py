"""Teleoperation sessions: one environment per session, commands applied in
arrival order, optional recording into the standard dataset format."""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..env.dataset import DatasetWriter, TrajectoryRecord
from ..env.sim import Env
from ..env.tasks import TaskSpec, get_task
from ..kinematics import jacobian
from ..renderer.imageio import to_uint8
from ..scene import SceneAssets, load_scene_assets
from .wire import encode_frame

JOINT_JOG_STEP = 0.02  # rad (or m) per jog in joint mode
EE_TRANSLATION_STEP = 0.01  # m per jog in end-effector mode
EE_ROTATION_STEP = np.deg2rad(2.0)
IK_DAMPING = 1e-2

AXES = {"x": 0, "y": 1, "z": 2, "rx": 3, "ry": 4, "rz": 5}


class SessionError(RuntimeError):
    pass


class SessionExpired(SessionError):
    pass


def differential_ik_step(tree, q, ee_link, twist, damping: float = IK_DAMPING) -> np.ndarray:
    """Damped least-squares joint delta realizing a 6-vector twist."""
    j = jacobian(tree, q, ee_link)
    jjt = j @ j.T + (damping**2) * np.eye(6)
    return j.T @ np.linalg.solve(jjt, np.asarray(twist, dtype=np.float64))


@dataclass
class RecordedStep:
    q: np.ndarray
    action: np.ndarray
    state: object
    observation: object


class TeleopSession:
    def __init__(self, session_id: str, scene_name: str, assets: SceneAssets,
                 task: TaskSpec, seed: int, cameras: list[str], dataset_root: Path,
                 static_cache=None):
        self.id = session_id
        self.scene_name = scene_name
        self.assets = assets
        self.task = task
        self.seed = seed
        self.cameras = list(cameras) if cameras else list(task.cameras)
        for name in self.cameras:
            assets.description.camera(name)  # raises KeyError for unknown names
        self.env = Env(assets, task, static_cache=static_cache)
        self.env.reset(seed)
        self.mode = "joint"
        self.recording = False
        self.buffer: list[RecordedStep] = []
        self.saved: list[str] = []
        self.dataset_root = Path(dataset_root)
        self.last_command = time.monotonic()
        self.command_count = 0
        self._frames: dict[str, bytes] = {}
        self._render_frames()

    # -- frames -------------------------------------------------------------

    def _render_frames(self) -> None:
        obs = self.env.render_observation(self.cameras)
        self._latest_obs = obs
        self._frames = {
            name: encode_frame(self.id, self.step_index, name, to_uint8(obs.images[name]))
            for name in self.cameras
        }

    @property
    def frames(self) -> dict[str, bytes]:
        return dict(self._frames)

    @property
    def step_index(self) -> int:
        return self.env.state.step_index

    # -- command handling -----------------------------------------------------

    def touch(self, idle_timeout: float) -> None:
        now = time.monotonic()
        if now - self.last_command > idle_timeout:
            raise SessionExpired(f"session idle for more than {idle_timeout:.0f} s")
        self.last_command = now

    def status(self) -> dict:
        q = self.env.state.q
        closed = self.env._gripper_closed(q)
        return {
            "step_index": self.step_index,
            "gripper": "closed" if closed else "open",
            "attached": self.env.state.gripper_attached,
            "recording": self.recording,
            "mode": self.mode,
        }

    def apply_command(self, cmd: dict) -> dict:
        ctype = cmd.get("type")
        payload = cmd.get("payload") or {}
        self.command_count += 1
        if ctype == "jog":
            return self._jog(payload)
        if ctype == "gripper":
            return self._gripper(payload)
        if ctype == "reset":
            return self._reset(payload)
        if ctype == "record":
            return self._record(payload)
        if ctype == "mode":
            mode = payload.get("mode")
            if mode not in ("joint", "ee"):
                raise SessionError(f"unknown jog mode '{mode}'")
            self.mode = mode
            return {"type": "ack", "command": "mode", **self.status()}
        raise SessionError(f"malformed command type '{ctype}'")

    def _target_from_jog(self, payload: dict) -> np.ndarray:
        direction = payload.get("direction")
        if direction not in (-1, 1):
            raise SessionError("jog direction must be -1 or +1")
        q = self.env.state.q
        if self.mode == "joint":
            index = payload.get("index")
            if not isinstance(index, int) or not 0 <= index < q.shape[0]:
                raise SessionError(f"jog joint index out of range: {index!r}")
            target = q.copy()
            target[index] += direction * JOINT_JOG_STEP
            return target
        axis = payload.get("axis")
        if axis not in AXES:
            raise SessionError(f"unknown Cartesian axis '{axis}'")
        twist = np.zeros(6)
        i = AXES[axis]
        twist[i] = direction * (EE_TRANSLATION_STEP if i < 3 else EE_ROTATION_STEP)
        dq = differential_ik_step(self.assets.tree, q, self.task.robot.ee_link, twist)
        return q + dq

    def _apply_env_step(self, target: np.ndarray, command: str) -> dict:
        state_before = self.env.state.copy()
        obs_before = self._latest_obs
        self.env.step(target)
        if self.recording:
            self.buffer.append(
                RecordedStep(
                    q=state_before.q.copy(),
                    action=np.asarray(target, dtype=np.float64),
                    state=state_before,
                    observation=obs_before,
                )
            )
        self._render_frames()
        return {"type": "ack", "command": command, **self.status()}

    def _jog(self, payload: dict) -> dict:
        return self._apply_env_step(self._target_from_jog(payload), "jog")

    def _gripper(self, payload: dict) -> dict:
        action = payload.get("action")
        if action not in ("open", "close"):
            raise SessionError("gripper action must be 'open' or 'close'")
        q = self.env.state.q
        grip_index = self.env._grip_index
        target = q.copy()
        target[grip_index] = (
            self.task.robot.gripper_open_value if action == "open" else 0.0
        )
        return self._apply_env_step(target, "gripper")

    def _reset(self, payload: dict) -> dict:
        if self.recording:
            raise SessionError("stop recording before resetting the environment")
        seed = payload.get("seed", self.seed)
        self.seed = int(seed)
        self.env.reset(self.seed)
        self.buffer.clear()
        self._render_frames()
        return {"type": "ack", "command": "reset", **self.status()}

    def _record(self, payload: dict) -> dict:
        action = payload.get("action")
        if action == "start":
            self.recording = True
            self.buffer.clear()
            return {"type": "ack", "command": "record", **self.status()}
        if action == "stop":
            self.recording = False
            return {"type": "ack", "command": "record", **self.status()}
        if action == "save":
            path = self._save_buffer()
            self.recording = False
            ack = {"type": "ack", "command": "record", **self.status()}
            ack["saved_path"] = str(path)
            return ack
        raise SessionError("record action must be start, stop, or save")

    def _save_buffer(self) -> Path:
        if not self.buffer:
            raise SessionError("recording buffer is empty; nothing to save")
        final_state = self.env.state.copy()
        success = bool(self.task.success(final_state, self.assets))
        partial = bool(self.task.partial_credit(final_state, self.assets))
        outcome = "success" if success else ("partial" if partial else "failure")

        record = TrajectoryRecord(
            q=np.asarray([s.q for s in self.buffer], dtype=np.float32),
            actions=np.asarray([s.action for s in self.buffer], dtype=np.float32),
            states=[s.state for s in self.buffer],
            final_state=final_state,
            outcome=outcome,
            seed=self.seed,
            policy_id="teleop",
        )
        root = self.dataset_root / self.id / f"recording_{len(self.saved):03d}"
        writer = DatasetWriter(
            root,
            task=self.task.name,
            scene_hash=self.assets.gsdf_hash or "",
            cameras=[
                {"name": c.name, "width": c.width, "height": c.height}
                for c in self.assets.description.cameras
                if c.name in self.cameras
            ],
        )
        writer.add(record, [s.observation for s in self.buffer], self.cameras)
        self.buffer.clear()
        self.saved.append(str(root))
        return root


class SessionManager:
    def __init__(self, asset_root: Path, dataset_root: Path | None = None,
                 max_sessions: int = 4, idle_timeout: float = 600.0):
        self.asset_root = Path(asset_root)
        self.dataset_root = Path(dataset_root) if dataset_root else self.asset_root / "teleop_datasets"
        self.max_sessions = max_sessions
        self.idle_timeout = idle_timeout
        self.sessions: dict[str, TeleopSession] = {}
        self._scene_cache: dict[str, tuple[SceneAssets, object]] = {}

    def list_scenes(self) -> list[dict]:
        out = []
        for path in sorted(self.asset_root.glob("**/*.gsdf")):
            try:
                assets, _ = self._load_scene(path.stem)
            except Exception:
                continue
            out.append(
                {
                    "name": path.stem,
                    "path": str(path),
                    "cameras": [c.name for c in assets.description.cameras],
                    "objects": [o.entry.name for o in assets.objects],
                    "robots": [r.entry.name for r in assets.robots],
                }
            )
        return out

    def scene_path(self, name: str) -> Path:
        matches = sorted(self.asset_root.glob(f"**/{name}.gsdf"))
        if not matches:
            raise KeyError(f"unknown scene '{name}'")
        return matches[0]

    def _load_scene(self, name: str):
        if name not in self._scene_cache:
            assets = load_scene_assets(self.scene_path(name))
            self._scene_cache[name] = (assets, assets.build_static_cache())
        return self._scene_cache[name]

    def create(self, scene: str, task: str, seed: int, cameras: list[str]) -> TeleopSession:
        if len(self.sessions) >= self.max_sessions:
            raise SessionError(f"session limit reached ({self.max_sessions})")
        assets, cache = self._load_scene(scene)  # KeyError for unknown scene
        spec = get_task(task)  # KeyError for unknown task
        session = TeleopSession(
            session_id=uuid.uuid4().hex,
            scene_name=scene,
            assets=assets,
            task=spec,
            seed=seed,
            cameras=cameras,
            dataset_root=self.dataset_root,
            static_cache=cache,
        )
        self.sessions[session.id] = session
        return session

    def get(self, session_id: str) -> TeleopSession:
        if session_id not in self.sessions:
            raise KeyError(f"unknown session '{session_id}'")
        return self.sessions[session_id]

    def close(self, session_id: str) -> None:
        self.sessions.pop(session_id, None)
