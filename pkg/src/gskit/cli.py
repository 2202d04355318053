"""Command-line interface.

Subcommands: serve (teleop service), align scale|robot|segment (real2sim
pipeline; each writes an updated GSDF plus a JSON report), rollout, dagger,
render, make-scene, validate. The batch subcommands are thin wrappers over
the library; `serve` hosts the long-running HTTP/WebSocket surface.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .align.icp import IcpParams
from .align.marker import estimate_scale, load_marker_file
from .align.robot import align_robot, robot_surface_cloud, splat_alignment_cloud
from .align.segment import segment_links_knn
from .assets.gaussians import GaussianSet
from .assets.gsdf import (
    Plane,
    RobotEntry,
    SceneDescription,
    load_gsdf,
    save_gsdf,
    validate_scene,
)
from .assets.ply import load_splat_file, save_splat_file
from .assets.urdf import load_kinematic_tree
from .dagger.harness import dagger_iterate, rollout
from .dagger.policies import NearestNeighborMimic, PerturbedExpertPolicy, RandomPolicy, ReplayPolicy
from .env.dataset import DatasetWriter, read_trajectory
from .env.sim import Env
from .env.tasks import get_task
from .env.toy import write_toy_scene
from .geometry import RigidTransform
from .kinematics import forward_kinematics, transform_gaussians
from .renderer.imageio import save_float_image, save_png
from .scene import EnvState, load_scene_assets


def _parse_q(text: str) -> np.ndarray:
    path = Path(text)
    if path.exists():
        text = path.read_text(encoding="utf-8").strip()
    return np.array([float(v) for v in text.replace(",", " ").split()], dtype=np.float64)


def _parse_pose(text: str | None) -> RigidTransform | None:
    if text is None:
        return None
    path = Path(text)
    doc = json.loads(path.read_text(encoding="utf-8") if path.exists() else text)
    return RigidTransform.from_dict(doc)


def _write_report(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")
    print(f"report written to {path}")


# -- align ------------------------------------------------------------------


def cmd_align_scale(args) -> int:
    cloud_path = Path(args.cloud)
    gset = load_splat_file(cloud_path)
    marker = load_marker_file(args.marker)
    result = estimate_scale(marker, scene_centroid=gset.centroids.mean(axis=0))

    scaled = GaussianSet(
        centroids=gset.centroids * result.scale,
        rotations=gset.rotations,
        scales_log=gset.scales_log + np.log(result.scale),
        opacities_logit=gset.opacities_logit,
        sh_coeffs=gset.sh_coeffs,
    )
    scaled_path = cloud_path.with_name(cloud_path.stem + "_metric.ply")
    save_splat_file(scaled_path, scaled)

    if args.scene:
        scene = load_gsdf(args.scene)
        scene.metric_scale = result.scale
        scene.support_plane = result.support_plane
        scene.gravity_dir = result.gravity_dir
        scene.background = str(scaled_path.relative_to(Path(args.scene).parent)
                               if scaled_path.is_relative_to(Path(args.scene).parent)
                               else scaled_path)
        out = Path(args.out or args.scene)
    else:
        scene = SceneDescription(
            metric_scale=result.scale,
            background=scaled_path.name,
            support_plane=result.support_plane,
            gravity_dir=result.gravity_dir,
        )
        out = Path(args.out or cloud_path.with_suffix(".gsdf"))
    save_gsdf(out, scene)
    print(f"scale {result.scale:.6g}; metric cloud {scaled_path}; scene {out}")

    _write_report(args.report or out.with_suffix(".scale_report.json"), {
        "scale": result.scale,
        "support_plane": {
            "point": [float(v) for v in result.support_plane.point],
            "normal": [float(v) for v in result.support_plane.normal],
        },
        "gravity_dir": [float(v) for v in result.gravity_dir],
        "metric_cloud": str(scaled_path),
    })
    return 0


def _urdf_mesh_loader(urdf_path: Path):
    from .assets.mesh import load_mesh

    base = Path(urdf_path).parent

    def loader(ref: str):
        p = Path(ref)
        return load_mesh(p if p.is_absolute() else base / p)

    return loader


def cmd_align_robot(args) -> int:
    scene_path = Path(args.scene)
    scene = load_gsdf(scene_path)
    tree = load_kinematic_tree(args.urdf)
    q_captured = _parse_q(args.q)

    existing = next((r for r in scene.robots if r.name == args.robot_name), None)
    splat_ref = existing.splats if existing is not None else scene.background
    cloud = load_splat_file(scene.resolve(splat_ref))

    result = align_robot(
        cloud,
        tree,
        q_captured,
        init=_parse_pose(args.init),
        mesh_loader=_urdf_mesh_loader(args.urdf),
        total_points=args.surface_points,
    )

    urdf_path = Path(args.urdf).resolve()
    try:
        tree_ref = str(urdf_path.relative_to(scene_path.parent.resolve()))
    except ValueError:
        tree_ref = str(urdf_path)
    entry = RobotEntry(
        name=args.robot_name,
        tree=tree_ref,
        splats=splat_ref,
        base_transform=result.transform,
        link_labels=existing.link_labels if existing is not None else None,
        captured_q=q_captured,
    )
    if existing is not None:
        scene.robots[scene.robots.index(existing)] = entry
    else:
        scene.robots.append(entry)

    out = Path(args.out or args.scene)
    save_gsdf(out, scene)
    print(
        f"aligned robot '{args.robot_name}': rms {result.rms_residual:.6g} m, "
        f"inliers {result.inlier_fraction:.1%}, {result.iterations_used} iterations"
    )
    _write_report(args.report or out.with_suffix(".robot_report.json"), {
        "rms_residual": result.rms_residual,
        "inlier_fraction": result.inlier_fraction,
        "iterations_used": result.iterations_used,
        "transform": result.transform.as_dict(),
    })
    return 0


def cmd_align_segment(args) -> int:
    from .align.robot import link_surface_clouds

    scene_path = Path(args.scene)
    scene = load_gsdf(scene_path)
    if not scene.robots:
        raise SystemExit("scene has no robot entries; run `align robot` first")

    background_path = scene.resolve(scene.background).resolve()
    report: dict = {"robots": {}}

    for entry in scene.robots:
        splat_path = scene.resolve(entry.splats).resolve()
        gset = load_splat_file(splat_path)
        tree = load_kinematic_tree(scene.resolve(entry.tree))
        if entry.captured_q is None:
            raise SystemExit(f"robot '{entry.name}' has no captured_q; run `align robot`")

        mesh_loader = _urdf_mesh_loader(scene.resolve(entry.tree))
        clouds = link_surface_clouds(
            tree, entry.captured_q, mesh_loader, total_points=args.surface_points,
            base=entry.base_transform,
        )
        labels = segment_links_knn(gset, clouds, k=args.k, cutoff=args.cutoff)

        # Re-express labeled splats in their link's local frame.
        poses = forward_kinematics(tree, entry.captured_q)
        baked = GaussianSet(
            centroids=gset.centroids.copy(),
            rotations=gset.rotations.copy(),
            scales_log=gset.scales_log.copy(),
            opacities_logit=gset.opacities_logit.copy(),
            sh_coeffs=gset.sh_coeffs.copy(),
        )
        for index, link in enumerate(tree.links):
            sel = labels == index
            if not sel.any():
                continue
            to_local = (entry.base_transform @ poses[link.name]).inverse()
            moved = transform_gaussians(gset.select(sel), to_local)
            baked.centroids[sel] = moved.centroids
            baked.rotations[sel] = moved.rotations

        def scene_ref(path: Path) -> str:
            try:
                return str(path.resolve().relative_to(scene_path.parent.resolve()))
            except ValueError:
                return str(path)

        if splat_path == background_path:
            # The robot entry still points at the raw scan: split it.
            robot_part = baked.select(labels >= 0)
            residue = gset.select(labels == -1)
            robot_file = splat_path.with_name(f"robot_{entry.name}_segmented.ply")
            bg_file = splat_path.with_name(splat_path.stem + "_residue.ply")
            save_splat_file(robot_file, robot_part)
            save_splat_file(bg_file, residue)
            entry.splats = scene_ref(robot_file)
            entry.link_labels = labels[labels >= 0]
            scene.background = scene_ref(bg_file)
        else:
            seg_file = splat_path.with_name(splat_path.stem + "_segmented.ply")
            save_splat_file(seg_file, baked)
            entry.splats = scene_ref(seg_file)
            entry.link_labels = labels

        hist = {int(k): int(v) for k, v in zip(*np.unique(labels, return_counts=True))}
        report["robots"][entry.name] = {"label_histogram": hist}
        print(f"segmented robot '{entry.name}': {hist}")

    out = Path(args.out or args.scene)
    save_gsdf(out, scene)
    _write_report(args.report or out.with_suffix(".segment_report.json"), report)
    return 0


# -- rollout / dagger / render -----------------------------------------------


def _build_policy(spec: str, env: Env, expert):
    if spec == "scripted":
        return expert
    if spec == "random":
        return RandomPolicy(env.assets.tree.joint_limits())
    if spec == "perturbed":
        return PerturbedExpertPolicy(expert)
    if spec == "mimic":
        return NearestNeighborMimic()
    if spec.startswith("replay:"):
        record = read_trajectory(Path(spec.split(":", 1)[1]))
        return ReplayPolicy(record.actions.astype(np.float64))
    raise SystemExit(f"unknown policy spec '{spec}'")


def cmd_rollout(args) -> int:
    assets = load_scene_assets(args.scene)
    task = get_task(args.task)
    env = Env(assets, task)
    expert = task.expert_factory(assets)
    policy = _build_policy(args.policy, env, expert)

    writer = DatasetWriter(
        Path(args.out),
        task=task.name,
        scene_hash=assets.gsdf_hash or "",
        cameras=[
            {"name": c.name, "width": c.width, "height": c.height}
            for c in assets.description.cameras
            if c.name in task.cameras
        ],
    )
    outcomes = []
    for episode in range(args.episodes):
        record = rollout(env, policy, seed=args.seed + episode, writer=writer)
        outcomes.append(record.outcome)
        print(f"episode {episode}: {record.outcome} ({record.length} steps)")
    counts = {o: outcomes.count(o) for o in sorted(set(outcomes))}
    print(f"outcomes: {counts}")
    _write_report(Path(args.out) / "rollout_report.json",
                  {"episodes": args.episodes, "outcomes": counts})
    return 0


def cmd_dagger(args) -> int:
    assets = load_scene_assets(args.scene)
    task = get_task(args.task)
    env = Env(assets, task)
    if args.expert != "scripted":
        raise SystemExit("only the scripted expert is shipped")
    expert = task.expert_factory(assets)
    policy = _build_policy(args.policy, env, expert)

    dataset = dagger_iterate(
        env, policy, expert,
        per_iter=args.per_iter,
        iterations=args.iters,
        seed=args.seed,
        out_dir=args.out,
    )
    print(f"collected {dataset.total} trajectories; per-iteration {dataset.counts}")
    for entry in dataset.summary:
        print(f"  {entry}")
    return 0


def cmd_render(args) -> int:
    assets = load_scene_assets(args.scene)
    if args.state:
        doc = json.loads(Path(args.state).read_text(encoding="utf-8"))
        state = EnvState.from_dict(doc)
    else:
        state = assets.canonical_state()
        if args.q is not None:
            state = EnvState(q=_parse_q(args.q), object_poses=state.object_poses)

    from .kinematics import pose_scene
    from .renderer.rasterize import rasterize

    camera = assets.description.camera(args.camera)
    if camera.mount_link is not None:
        robot = assets.robots[0]
        poses = forward_kinematics(robot.tree, assets.split_q(state.q)[0])
        offset = camera.mount_offset or RigidTransform.identity()
        camera = camera.with_pose(
            (robot.entry.base_transform @ poses[camera.mount_link] @ offset).inverse()
        )
    posed = pose_scene(assets, state, None)
    out = rasterize(posed.sets(), camera, np.zeros(3))
    save_png(args.out, out.color)
    print(f"color written to {args.out}")
    if args.depth:
        save_float_image(args.depth, out.depth)
    if args.alpha:
        save_float_image(args.alpha, out.alpha)
    return 0


def cmd_make_scene(args) -> int:
    path = write_toy_scene(args.out, args.task, seed=args.seed)
    print(f"scene written to {path}")
    return 0


def cmd_validate(args) -> int:
    scene = load_gsdf(args.scene)
    report = validate_scene(scene)
    if report.ok:
        print("scene is valid")
        return 0
    for problem in report.problems:
        print(f"problem: {problem}")
    return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gskit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the teleoperation service")
    p.set_defaults(func=None)  # handled by service.app.main (own arg parsing)

    align = sub.add_parser("align", help="real2sim alignment pipeline")
    align_sub = align.add_subparsers(dest="align_command", required=True)

    p = align_sub.add_parser("scale", help="marker-based metric scale recovery")
    p.add_argument("--cloud", required=True)
    p.add_argument("--marker", required=True)
    p.add_argument("--scene", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_align_scale)

    p = align_sub.add_parser("robot", help="ICP-align a URDF to the scene splats")
    p.add_argument("--scene", required=True)
    p.add_argument("--urdf", required=True)
    p.add_argument("--q", required=True, help="captured joint pose (csv or file)")
    p.add_argument("--init", default=None, help="initial pose guess (JSON)")
    p.add_argument("--robot-name", default="robot")
    p.add_argument("--surface-points", type=int, default=20000)
    p.add_argument("--out", default=None)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_align_robot)

    p = align_sub.add_parser("segment", help="K-NN link segmentation + link-local bake")
    p.add_argument("--scene", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--cutoff", type=float, default=0.02)
    p.add_argument("--surface-points", type=int, default=20000)
    p.add_argument("--out", default=None)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_align_segment)

    p = sub.add_parser("rollout", help="roll a policy out and write a dataset")
    p.add_argument("--scene", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--policy", default="scripted",
                   help="scripted | random | perturbed | mimic | replay:<traj dir>")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("dagger", help="closed-loop corrective data collection")
    p.add_argument("--scene", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--expert", default="scripted")
    p.add_argument("--policy", default="perturbed")
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--per-iter", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dagger)

    p = sub.add_parser("render", help="render one camera of a scene state")
    p.add_argument("--scene", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--q", default=None)
    p.add_argument("--state", default=None, help="EnvState JSON file")
    p.add_argument("--out", required=True)
    p.add_argument("--depth", default=None)
    p.add_argument("--alpha", default=None)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("make-scene", help="generate a toy scene for a shipped task")
    p.add_argument("--task", default="place_box")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_scene)

    p = sub.add_parser("validate", help="validate a GSDF scene")
    p.add_argument("--scene", required=True)
    p.set_defaults(func=cmd_validate)

    if argv is None:
        argv = sys.argv[1:]
    if argv and argv[0] == "serve":
        from .service.app import main as serve_main

        return serve_main(argv[1:])

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
