"""On-disk trajectory datasets.

Layout:
    <root>/manifest.json                     task, scene hash, camera specs, counts
    <root>/traj_00000/meta.json              outcome, seed, policy id, iteration, links
    <root>/traj_00000/steps.npz              q (T, m) float32, actions (T, m) float32
    <root>/traj_00000/states.json            EnvState sequence + final state
    <root>/traj_00000/frames/<cam>/00000.png observation frames (by reference)

Frames are stored once and referenced; aggregated datasets never copy them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..renderer.imageio import load_png, save_png
from ..scene import EnvState

MANIFEST_FORMAT = "gskit-dataset-v1"
OUTCOMES = ("success", "partial", "failure")


@dataclass
class TrajectoryRecord:
    """One rollout: per-step (q, observation reference, action, state)."""

    q: np.ndarray  # (T, m) float32
    actions: np.ndarray  # (T, m) float32
    states: list[EnvState]  # state before each action, length T
    final_state: EnvState
    outcome: str
    seed: int
    policy_id: str
    iteration: int = 0
    corrective_of: dict | None = None  # {"trajectory": name, "step_index": int}
    frame_dir: Path | None = None
    excluded_from_training: bool = False

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"outcome must be one of {OUTCOMES}")
        if len(self.states) != self.q.shape[0]:
            raise ValueError("states length must match step count")

    @property
    def length(self) -> int:
        return self.q.shape[0]

    def frame_path(self, camera: str, step: int) -> Path | None:
        if self.frame_dir is None:
            return None
        return self.frame_dir / camera / f"{step:05d}.png"


def write_trajectory(root: Path, index: int, record: TrajectoryRecord,
                     observations=None, cameras=()) -> Path:
    """Persist one trajectory; observations is an optional list of
    Observation objects (one per step) whose frames get written as PNG."""
    tdir = Path(root) / f"traj_{index:05d}"
    tdir.mkdir(parents=True, exist_ok=True)

    np.savez(
        tdir / "steps.npz",
        q=record.q.astype(np.float32),
        actions=record.actions.astype(np.float32),
    )
    states_doc = {
        "steps": [s.as_dict() for s in record.states],
        "final": record.final_state.as_dict(),
    }
    (tdir / "states.json").write_text(json.dumps(states_doc), encoding="utf-8")

    if observations is not None:
        for cam in cameras:
            (tdir / "frames" / cam).mkdir(parents=True, exist_ok=True)
        for t, obs in enumerate(observations):
            for cam in cameras:
                save_png(tdir / "frames" / cam / f"{t:05d}.png", obs.images[cam])
        record.frame_dir = tdir / "frames"

    meta = {
        "outcome": record.outcome,
        "seed": record.seed,
        "policy_id": record.policy_id,
        "iteration": record.iteration,
        "length": record.length,
        "corrective_of": record.corrective_of,
        "excluded_from_training": record.excluded_from_training,
    }
    (tdir / "meta.json").write_text(json.dumps(meta, indent=1), encoding="utf-8")
    return tdir


def read_trajectory(tdir: Path) -> TrajectoryRecord:
    tdir = Path(tdir)
    meta = json.loads((tdir / "meta.json").read_text(encoding="utf-8"))
    steps = np.load(tdir / "steps.npz")
    states_doc = json.loads((tdir / "states.json").read_text(encoding="utf-8"))
    frame_dir = tdir / "frames"
    return TrajectoryRecord(
        q=steps["q"],
        actions=steps["actions"],
        states=[EnvState.from_dict(d) for d in states_doc["steps"]],
        final_state=EnvState.from_dict(states_doc["final"]),
        outcome=meta["outcome"],
        seed=int(meta["seed"]),
        policy_id=meta["policy_id"],
        iteration=int(meta.get("iteration", 0)),
        corrective_of=meta.get("corrective_of"),
        frame_dir=frame_dir if frame_dir.exists() else None,
        excluded_from_training=bool(meta.get("excluded_from_training", False)),
    )


def load_frame(record: TrajectoryRecord, camera: str, step: int) -> np.ndarray:
    path = record.frame_path(camera, step)
    if path is None or not path.exists():
        raise FileNotFoundError(f"no stored frame for camera {camera} step {step}")
    return load_png(path)


@dataclass
class DatasetWriter:
    root: Path
    task: str
    scene_hash: str
    cameras: list[dict] = field(default_factory=list)
    provenance: str = "sim"
    count: int = 0

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_manifest()

    def add(self, record: TrajectoryRecord, observations=None, camera_names=()) -> Path:
        tdir = write_trajectory(self.root, self.count, record, observations, camera_names)
        self.count += 1
        self._write_manifest()
        return tdir

    def _write_manifest(self) -> None:
        manifest = {
            "format": MANIFEST_FORMAT,
            "task": self.task,
            "scene_hash": self.scene_hash,
            "cameras": self.cameras,
            "trajectory_count": self.count,
            "provenance": self.provenance,
        }
        (self.root / "manifest.json").write_text(json.dumps(manifest, indent=1), encoding="utf-8")


def read_manifest(root: Path) -> dict:
    manifest = json.loads((Path(root) / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"not a {MANIFEST_FORMAT} dataset: {root}")
    return manifest


def read_dataset(root: Path) -> tuple[dict, list[TrajectoryRecord]]:
    root = Path(root)
    manifest = read_manifest(root)
    records = [read_trajectory(p) for p in sorted(root.glob("traj_*"))]
    if len(records) != manifest["trajectory_count"]:
        raise ValueError(
            f"manifest declares {manifest['trajectory_count']} trajectories, found {len(records)}"
        )
    return manifest, records
