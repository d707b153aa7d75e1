"""Differentiable spherical-harmonics texture shading and inverse fitting.

The package shades intrinsic UV-space texture maps (diffuse, specular
intensity, ambient occlusion, translucency, normals) under spherical-
harmonics environment light, provides hand-derived analytic gradients
for every map and for the light coefficients, and recovers maps from
shaded observations by Adam on an L1 reconstruction loss.
"""

from .envlight import (
    EnvironmentMap,
    SHLight,
    monochrome_residual,
    project_envmap,
    render_envmap,
)
from .errors import ContractError, FitDivergedError, FormatError, UVShadeError
from .fitter import FitConfig, FitResult, Observation, fit, init_maps, shading_loss
from .gradients import FdReport, TexelGradient, fd_check, grad_texel, grad_texture
from .shader import (
    ShadedTexture,
    ShadingConfig,
    TextureMapSet,
    ViewModel,
    fresnel_schlick,
    reflect,
    shade_texel,
    shade_texture,
)
from .shcore import (
    L_MAX,
    N_COEFFS,
    flat_index,
    lambert_coeffs,
    roughness_coeffs,
    sh_eval,
    sh_eval_all,
    sss_coeffs,
)

__version__ = "0.1.0"

__all__ = [
    "ContractError",
    "EnvironmentMap",
    "FdReport",
    "FitConfig",
    "FitDivergedError",
    "FitResult",
    "FormatError",
    "L_MAX",
    "N_COEFFS",
    "Observation",
    "SHLight",
    "ShadedTexture",
    "ShadingConfig",
    "TexelGradient",
    "TextureMapSet",
    "UVShadeError",
    "ViewModel",
    "fd_check",
    "fit",
    "flat_index",
    "fresnel_schlick",
    "grad_texel",
    "grad_texture",
    "init_maps",
    "lambert_coeffs",
    "monochrome_residual",
    "project_envmap",
    "reflect",
    "render_envmap",
    "roughness_coeffs",
    "sh_eval",
    "sh_eval_all",
    "shade_texel",
    "shade_texture",
    "shading_loss",
    "sss_coeffs",
]
