import numpy as np
import pytest

from gskit.assets.gaussians import GaussianSet
from gskit.assets.gsdf import Camera
from gskit.env.tasks import get_task
from gskit.env.toy import write_toy_scene
from gskit.geometry import RigidTransform
from gskit.scene import load_scene_assets


def random_unit_quats(rng, n):
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def random_gaussian_set(rng, n, sh_degree=0, feature_dim=None, center=(0, 0, 0), spread=0.5):
    k = (sh_degree + 1) ** 2
    sh = np.zeros((n, 3, k))
    sh[:, :, 0] = rng.uniform(-1.0, 1.0, size=(n, 3))
    if k > 1:
        sh[:, :, 1:] = rng.uniform(-0.3, 0.3, size=(n, 3, k - 1))
    feats = None if feature_dim is None else rng.uniform(0, 1, size=(n, feature_dim))
    return GaussianSet(
        centroids=np.asarray(center) + rng.uniform(-spread, spread, size=(n, 3)),
        rotations=random_unit_quats(rng, n),
        scales_log=rng.uniform(np.log(0.005), np.log(0.12), size=(n, 3)),
        opacities_logit=rng.uniform(-3.0, 5.0, size=n),
        sh_coeffs=sh,
        features=feats,
    )


def simple_camera(width=64, height=64, fx=70.0, fy=70.0, eye=(0, 0, -2.0)) -> Camera:
    """Camera at `eye` looking along +z toward the origin."""
    w2c = RigidTransform(translation=-np.asarray(eye, dtype=np.float64))
    return Camera(
        name="test",
        width=width,
        height=height,
        fx=fx,
        fy=fy,
        cx=(width - 1) / 2,
        cy=(height - 1) / 2,
        world_to_camera=w2c,
        near=0.05,
        far=50.0,
    )


def random_scene_and_camera(seed: int, max_splats=500):
    """Seeded random rasterizer scene: splats around the origin, camera on a
    random orbit looking at them, random degree/features/background."""
    rng = np.random.default_rng((seed, 0x5CE11E))
    n = int(rng.integers(1, max_splats + 1))
    degree = int(rng.integers(0, 4))
    feature_dim = int(rng.integers(0, 3)) or None
    gset = random_gaussian_set(rng, n, sh_degree=degree, feature_dim=feature_dim, spread=0.6)

    # Orbit camera at radius 1.5..3 looking at the cloud center.
    theta = rng.uniform(0, 2 * np.pi)
    phi = rng.uniform(-0.9, 0.9)
    radius = rng.uniform(1.5, 3.0)
    eye = radius * np.array([np.cos(phi) * np.cos(theta), np.cos(phi) * np.sin(theta), np.sin(phi)])
    target = gset.centroids.mean(axis=0)

    from gskit.env.toy import _lookat_w2c

    cam = Camera(
        name="rand",
        width=64,
        height=64,
        fx=float(rng.uniform(50, 90)),
        fy=float(rng.uniform(50, 90)),
        cx=31.5,
        cy=31.5,
        world_to_camera=_lookat_w2c(eye, target),
        near=0.05,
        far=float(rng.uniform(5.0, 60.0)),
    )
    background = rng.uniform(0, 1, size=3)
    return gset, cam, background


@pytest.fixture(scope="session")
def toy_scene_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("toy_scene")
    write_toy_scene(d, "place_box", seed=0)
    return d


@pytest.fixture(scope="session")
def toy_assets(toy_scene_dir):
    return load_scene_assets(toy_scene_dir / "place_box.gsdf")


@pytest.fixture(scope="session")
def place_box_task():
    return get_task("place_box")


@pytest.fixture(scope="session")
def stack_scene_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("stack_scene")
    write_toy_scene(d, "stack_cans", seed=1)
    return d
