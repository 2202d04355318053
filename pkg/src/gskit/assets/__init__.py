"""Asset parsing, validation, and serialization: splats, URDF trees, GSDF scenes."""

from .gaussians import GaussianSet, concatenate_sets
from .gsdf import (
    Camera,
    GsdfError,
    ObjectEntry,
    Plane,
    RobotEntry,
    SceneDescription,
    ValidationReport,
    load_gsdf,
    parse_gsdf,
    save_gsdf,
    scene_hash,
    validate_scene,
    write_gsdf,
)
from .mesh import TriangleMesh, box_mesh, cylinder_mesh, load_mesh, parse_obj, save_mesh, write_obj
from .ply import SplatFileError, load_splat_file, parse_splat_file, save_splat_file, write_splat_file
from .urdf import Joint, KinematicTree, Link, UrdfError, load_kinematic_tree, parse_kinematic_tree

__all__ = [
    "Camera",
    "GaussianSet",
    "GsdfError",
    "Joint",
    "KinematicTree",
    "Link",
    "ObjectEntry",
    "Plane",
    "RobotEntry",
    "SceneDescription",
    "SplatFileError",
    "TriangleMesh",
    "UrdfError",
    "ValidationReport",
    "box_mesh",
    "concatenate_sets",
    "cylinder_mesh",
    "load_gsdf",
    "load_kinematic_tree",
    "load_mesh",
    "load_splat_file",
    "parse_gsdf",
    "parse_kinematic_tree",
    "parse_obj",
    "parse_splat_file",
    "save_gsdf",
    "save_mesh",
    "save_splat_file",
    "scene_hash",
    "validate_scene",
    "write_gsdf",
    "write_obj",
    "write_splat_file",
]
