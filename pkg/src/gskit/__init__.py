"""gskit: photorealistic robot-manipulation simulation on Gaussian-splat scenes.

Subpackages:
    assets    splat files (PLY), URDF subset, meshes, GSDF scene documents
    renderer  SH color, perspective projection, tiled + oracle rasterizers
    align     marker scale, ICP robot alignment, K-NN link segmentation
    env       steppable environments, toy tasks, parallel batches, datasets
    dagger    failure-replay corrective data collection
    service   FastAPI teleoperation front door
"""

from .geometry import RigidTransform
from .scene import CachedStatics, EnvState, SceneAssets, load_scene_assets

__version__ = "0.1.0"

__all__ = [
    "CachedStatics",
    "EnvState",
    "RigidTransform",
    "SceneAssets",
    "load_scene_assets",
    "__version__",
]
