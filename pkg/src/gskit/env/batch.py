"""Parallel environments sharing one immutable static-splat cache."""

from __future__ import annotations

import numpy as np

from ..scene import SceneAssets, load_scene_assets
from .sim import Env
from .tasks import TaskSpec, get_task


class EnvBatch:
    """N independent environments over one scene and one shared cache."""

    def __init__(self, assets: SceneAssets, task: TaskSpec, n: int, **env_kwargs):
        if n < 1:
            raise ValueError("batch size must be >= 1")
        self.assets = assets
        self.task = task
        cache = assets.build_static_cache()
        self.envs = [Env(assets, task, static_cache=cache, **env_kwargs) for _ in range(n)]

    def __len__(self) -> int:
        return len(self.envs)

    def reset(self, seeds) -> list:
        seeds = list(seeds)
        if len(seeds) != len(self.envs):
            raise ValueError("one seed per environment required")
        return [env.reset(seed) for env, seed in zip(self.envs, seeds)]

    def step(self, actions) -> list:
        actions = list(actions)
        if len(actions) != len(self.envs):
            raise ValueError("one action per environment required")
        return [env.step(a) for env, a in zip(self.envs, actions)]

    def static_bytes(self) -> int:
        """Unique bytes held by static splat arrays across the whole batch.

        Arrays are deduplicated by identity, so sharing the cache makes this
        independent of the batch size.
        """
        seen: dict[int, int] = {}
        for env in self.envs:
            splats = env.cache.splats if env.cache is not None else env.assets.background
            for arr in (
                splats.centroids,
                splats.rotations,
                splats.scales_log,
                splats.opacities_logit,
                splats.sh_coeffs,
            ):
                base = arr.base if arr.base is not None else arr
                seen[id(base)] = base.nbytes
        return sum(seen.values())


def make_parallel(scene, task, n: int, seeds=None, **env_kwargs) -> EnvBatch:
    """Build an environment batch; scene is a GSDF path or loaded SceneAssets."""
    assets = scene if isinstance(scene, SceneAssets) else load_scene_assets(scene)
    spec = task if isinstance(task, TaskSpec) else get_task(task)
    batch = EnvBatch(assets, spec, n, **env_kwargs)
    if seeds is not None:
        batch.reset(seeds)
    return batch
