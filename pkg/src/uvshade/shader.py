"""Per-texel forward shading of intrinsic texture maps under SH light.

The shaded radiance of a texel is the sum of three terms:

* diffuse:    d * a * sum_{l<=2} A_l * gamma_{l,m} * Y_l^m(n)
* subsurface: d * sum_{1<=l<=2} S_l(t) * gamma_{l,m} * Y_l^m(n)
* specular:   f * sum_{l<=8} R_l * gamma_{l,m} * Y_l^m(r)

with n the texel normal, r the view vector reflected about n, and
f = s + (1-s)*(1-cos_theta)^5 the Schlick Fresnel weight evaluated at
cos_theta = clamp(n . v, 0, 1). Everything is per color channel; color
channels never mix.
"""

from dataclasses import dataclass

import numpy as np

from . import shcore
from ._parallel import map_rows
from .envlight import SHLight
from .errors import ContractError


@dataclass(frozen=True)
class ShadingConfig:
    """Numeric knobs of the shading model."""

    sigma: float = 0.25  # specular roughness of the R_l falloff
    diffuse_order: int = 2
    sss_order: int = 2
    specular_order: int = 8

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        for name in ("diffuse_order", "sss_order", "specular_order"):
            v = getattr(self, name)
            if not 0 <= v <= shcore.L_MAX:
                raise ValueError(f"{name}={v} outside [0, {shcore.L_MAX}]")


DEFAULT_CONFIG = ShadingConfig()


@dataclass
class TextureMapSet:
    """Co-registered intrinsic maps in UV space.

    diffuse (H, W, 3) in [0, 1]; specular, ambient_occlusion and
    translucency (H, W) in [0, 1]; normal (H, W, 3) unit vectors; mask
    (H, W) bool, False = texel carries no data.
    """

    diffuse: np.ndarray
    specular: np.ndarray
    ambient_occlusion: np.ndarray
    translucency: np.ndarray
    normal: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        self.diffuse = np.asarray(self.diffuse, dtype=np.float64)
        self.specular = np.asarray(self.specular, dtype=np.float64)
        self.ambient_occlusion = np.asarray(self.ambient_occlusion, dtype=np.float64)
        self.translucency = np.asarray(self.translucency, dtype=np.float64)
        self.normal = np.asarray(self.normal, dtype=np.float64)
        if self.mask is None:
            self.mask = np.ones(self.diffuse.shape[:2], dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)

    @property
    def height(self) -> int:
        return self.diffuse.shape[0]

    @property
    def width(self) -> int:
        return self.diffuse.shape[1]

    def validate(self):
        """Raise ContractError on any invariant violation."""
        hw = self.diffuse.shape[:2]
        if self.diffuse.ndim != 3 or self.diffuse.shape[2] != 3:
            raise ContractError(f"diffuse must be (H, W, 3), got {self.diffuse.shape}")
        if self.normal.shape != hw + (3,):
            raise ContractError(f"normal shape {self.normal.shape} != {hw + (3,)}")
        for name in ("specular", "ambient_occlusion", "translucency"):
            arr = getattr(self, name)
            if arr.shape != hw:
                raise ContractError(f"{name} shape {arr.shape} != {hw}")
        if self.mask.shape != hw:
            raise ContractError(f"mask shape {self.mask.shape} != {hw}")
        if not self.mask.any():
            return
        m = self.mask
        for name in ("specular", "ambient_occlusion", "translucency"):
            vals = getattr(self, name)[m]
            if vals.min() < 0 or vals.max() > 1 or not np.all(np.isfinite(vals)):
                raise ContractError(f"{name} outside [0, 1] on valid texels")
        dv = self.diffuse[m]
        if dv.min() < 0 or dv.max() > 1 or not np.all(np.isfinite(dv)):
            raise ContractError("diffuse outside [0, 1] on valid texels")
        norms = np.linalg.norm(self.normal[m], axis=-1)
        if np.max(np.abs(norms - 1.0)) > 1e-4:
            raise ContractError("normals deviate from unit length by more than 1e-4")


@dataclass
class ViewModel:
    """Either a constant view direction or a camera plus position map."""

    direction: np.ndarray = None
    camera_position: np.ndarray = None
    position_map: np.ndarray = None

    @classmethod
    def constant(cls, direction=(0.0, 0.0, 1.0)) -> "ViewModel":
        direction = np.asarray(direction, dtype=np.float64)
        if abs(np.linalg.norm(direction) - 1.0) > 1e-6:
            raise ContractError(f"constant view direction must be unit length, got {direction}")
        return cls(direction=direction)

    @classmethod
    def camera(cls, position, position_map) -> "ViewModel":
        position = np.asarray(position, dtype=np.float64)
        position_map = np.asarray(position_map, dtype=np.float64)
        if position.shape != (3,):
            raise ContractError(f"camera position must be a 3-vector, got {position.shape}")
        if position_map.ndim != 3 or position_map.shape[2] != 3:
            raise ContractError(f"position map must be (H, W, 3), got {position_map.shape}")
        return cls(camera_position=position, position_map=position_map)

    @property
    def is_camera(self) -> bool:
        return self.direction is None

    def view_directions(self, height: int, width: int, mask: np.ndarray) -> np.ndarray:
        """Per-texel unit view vectors for a height x width texture."""
        if not self.is_camera:
            return np.broadcast_to(self.direction, (height, width, 3))
        if self.position_map is None or self.camera_position is None:
            raise ContractError("camera view mode requires a position map")
        if self.position_map.shape[:2] != (height, width):
            raise ContractError(
                f"position map is {self.position_map.shape[:2]}, texture is {(height, width)}"
            )
        if not np.all(np.isfinite(self.position_map[mask])):
            raise ContractError("position map has non-finite entries on valid texels")
        to_cam = self.camera_position - self.position_map
        dist = np.linalg.norm(to_cam, axis=-1, keepdims=True)
        if np.any(dist[mask] == 0):
            raise ContractError("position map coincides with the camera position")
        return to_cam / np.where(dist > 0, dist, 1.0)


@dataclass
class ShadedTexture:
    """Linear HDR radiance per texel plus the validity mask."""

    rgb: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise ContractError(f"shaded texture must be (H, W, 3), got {self.rgb.shape}")
        if self.mask.shape != self.rgb.shape[:2]:
            raise ContractError(f"mask shape {self.mask.shape} != {self.rgb.shape[:2]}")


def reflect(v, n):
    """Mirror direction v about normal n: r = 2(n.v)n - v. Broadcasts."""
    v = np.asarray(v, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    ndv = np.sum(n * v, axis=-1, keepdims=True)
    return 2.0 * ndv * n - v


def fresnel_schlick(s, cos_theta):
    """Schlick Fresnel weight f = s + (1-s)(1-cos_theta)^5. Broadcasts."""
    s = np.asarray(s, dtype=np.float64)
    cos_theta = np.asarray(cos_theta, dtype=np.float64)
    return s + (1.0 - s) * (1.0 - cos_theta) ** 5


class _Kernels:
    """Flat-index kernel vectors for one config, cached per config."""

    _cache: dict = {}

    def __new__(cls, config: ShadingConfig):
        cached = cls._cache.get(config)
        if cached is not None:
            return cached
        self = super().__new__(cls)
        self.n_diffuse = (config.diffuse_order + 1) ** 2
        self.n_sss = (config.sss_order + 1) ** 2
        self.n_spec = (config.specular_order + 1) ** 2
        self.diffuse = shcore.band_expand(shcore.lambert_coeffs(config.diffuse_order))
        self.specular = shcore.band_expand(
            shcore.roughness_coeffs(config.sigma, config.specular_order)
        )
        cls._cache[config] = self
        return self


def _check_unit(vec, what, tol):
    err = abs(float(np.linalg.norm(vec)) - 1.0)
    if err > tol:
        raise ContractError(f"{what} must be unit length (off by {err:.2e})")


def shade_texel(d, s, a, t, n, v, light: SHLight, config: ShadingConfig = DEFAULT_CONFIG):
    """Shade one texel; scalar reference path for the batched pipeline.

    d is an RGB triple; s, a, t scalars in [0, 1]; n and v unit vectors.
    Returns the (3,) radiance.
    """
    n = np.asarray(n, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_unit(n, "normal", 1e-4)
    _check_unit(v, "view direction", 1e-6)
    return _shade_texel_unchecked(d, s, a, t, n, v, light, config)


def _shade_texel_unchecked(d, s, a, t, n, v, light, config, basis=None):
    # basis, when given, is the (basis_n, basis_r) pair for this (n, v);
    # callers may precompute it when only non-geometric inputs vary
    ker = _Kernels(config)
    d = np.asarray(d, dtype=np.float64)
    if basis is None:
        basis_n = shcore.sh_eval_all(n, max(config.diffuse_order, config.sss_order))
        basis_r = shcore.sh_eval_all(reflect(v, n), config.specular_order)
    else:
        basis_n, basis_r = basis

    diffuse_sum = light.coeffs[:, : ker.n_diffuse] @ (ker.diffuse * basis_n[: ker.n_diffuse])
    s_l = shcore.sss_coeffs(float(t), config.sss_order)
    sss_weights = shcore.band_expand(s_l)
    sss_weights[0] = 0.0  # subsurface bands start at l = 1
    sss_sum = light.coeffs[:, : ker.n_sss] @ (sss_weights * basis_n[: ker.n_sss])
    spec_sum = light.coeffs[:, : ker.n_spec] @ (ker.specular * basis_r)

    cos_theta = min(max(float(np.dot(n, v)), 0.0), 1.0)
    f = fresnel_schlick(float(s), cos_theta)
    return d * float(a) * diffuse_sum + d * sss_sum + float(f) * spec_sum


def _band_slices(order):
    """Flat-index slices of the individual degrees 1..order."""
    return [slice(l * l, (l + 1) * (l + 1)) for l in range(1, order + 1)]


def _shade_rows(maps, views, light, config, row_slice):
    """Vectorized shading of a block of rows; bit-identical per row
    regardless of how rows are grouped into blocks."""
    ker = _Kernels(config)
    n = maps.normal[row_slice]
    v = views[row_slice]
    d = maps.diffuse[row_slice]
    s = maps.specular[row_slice]
    a = maps.ambient_occlusion[row_slice]
    t = maps.translucency[row_slice]

    basis_n = shcore.sh_eval_all(n, max(config.diffuse_order, config.sss_order))
    basis_r = shcore.sh_eval_all(reflect(v, n), config.specular_order)

    diffuse_sum = np.einsum(
        "hwk,ck->hwc", basis_n[..., : ker.n_diffuse] * ker.diffuse, light.coeffs[:, : ker.n_diffuse]
    )
    s_l = shcore.sss_coeffs(t, config.sss_order)  # (h, w, order+1)
    sss_sum = np.zeros_like(d)
    for l, sl in enumerate(_band_slices(config.sss_order), start=1):
        band = np.einsum("hwk,ck->hwc", basis_n[..., sl], light.coeffs[:, sl])
        sss_sum += s_l[..., l : l + 1] * band
    spec_sum = np.einsum("hwk,ck->hwc", basis_r * ker.specular, light.coeffs[:, : ker.n_spec])

    cos_theta = np.clip(np.sum(n * v, axis=-1), 0.0, 1.0)
    f = fresnel_schlick(s, cos_theta)
    out = d * a[..., None] * diffuse_sum + d * sss_sum + f[..., None] * spec_sum
    out[~maps.mask[row_slice]] = 0.0
    return out


def shade_texture(
    maps: TextureMapSet,
    view: ViewModel,
    light: SHLight,
    config: ShadingConfig = DEFAULT_CONFIG,
    threads: int = 1,
) -> ShadedTexture:
    """Shade every valid texel of a map set; invalid texels come back 0.

    Texels are independent; rows may be processed by any number of
    workers without changing a single output bit.
    """
    maps.validate()
    h, w = maps.height, maps.width
    views = view.view_directions(h, w, maps.mask)

    if threads is None or threads <= 1:
        rgb = _shade_rows(maps, views, light, config, slice(0, h))
    else:
        out_rows = map_rows(
            lambda r: _shade_rows(maps, views, light, config, slice(r, r + 1)), h, threads
        )
        rgb = np.concatenate(out_rows, axis=0)
    return ShadedTexture(rgb=rgb, mask=maps.mask.copy())
