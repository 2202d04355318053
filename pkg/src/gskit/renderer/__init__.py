"""Forward splat rendering: projection, SH color, tiled and oracle rasterizers."""

from .imageio import (
    decode_float_image,
    encode_float_image,
    load_float_image,
    load_png,
    save_float_image,
    save_png,
    to_uint8,
)
from .projection import COV2D_DILATION, ProjectedSplats, Splat2D, project_gaussian, project_sets
from .rasterize import (
    ALPHA_CLAMP,
    ALPHA_SKIP,
    TILE,
    TRANSMITTANCE_STOP,
    RenderOutput,
    rasterize,
    reference_rasterize,
)
from .sh import evaluate_sh, sh_basis

__all__ = [
    "ALPHA_CLAMP",
    "ALPHA_SKIP",
    "COV2D_DILATION",
    "ProjectedSplats",
    "RenderOutput",
    "Splat2D",
    "TILE",
    "TRANSMITTANCE_STOP",
    "decode_float_image",
    "encode_float_image",
    "evaluate_sh",
    "load_float_image",
    "load_png",
    "project_gaussian",
    "project_sets",
    "rasterize",
    "reference_rasterize",
    "save_float_image",
    "save_png",
    "sh_basis",
    "to_uint8",
]
