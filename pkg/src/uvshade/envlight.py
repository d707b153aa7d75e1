"""Equirectangular environment maps and their SH light coefficients.

Pixel-center direction convention (frozen): a pixel at (row, col) of a
width x height map looks along theta = pi*(row+0.5)/height,
phi = 2*pi*(col+0.5)/width, with z = cos(theta) up and phi measured from
+x toward +y. Row 0 is the +z pole.

Solid-angle weights use the exact per-row integral
(2*pi/width) * (cos(pi*row/height) - cos(pi*(row+1)/height)), which is
the midpoint sin(theta) weight scaled so the weights sum to exactly
4*pi at every resolution.
"""

from dataclasses import dataclass

import numpy as np

from . import shcore
from ._parallel import map_rows, tree_sum
from .errors import FormatError

N_CHANNELS = 3


@dataclass
class EnvironmentMap:
    """HDR radiance image in equirectangular layout (width = 2 * height).

    Radiance values must be finite. Band-limited reconstructions from
    render_envmap may legitimately carry negative values; they are kept
    as-is and documented rather than clamped.
    """

    radiance: np.ndarray

    def __post_init__(self):
        self.radiance = np.asarray(self.radiance, dtype=np.float64)
        if self.radiance.ndim != 3 or self.radiance.shape[2] != N_CHANNELS:
            raise FormatError(
                f"environment map must be (height, width, 3), got {self.radiance.shape}"
            )
        h, w = self.radiance.shape[:2]
        if w != 2 * h:
            raise FormatError(f"equirectangular map needs width = 2*height, got {w}x{h}")
        if not np.all(np.isfinite(self.radiance)):
            raise FormatError("environment map contains non-finite radiance")

    @property
    def height(self) -> int:
        return self.radiance.shape[0]

    @property
    def width(self) -> int:
        return self.radiance.shape[1]


@dataclass
class SHLight:
    """Per-channel SH light coefficients, flat-indexed, always 81 long."""

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != (N_CHANNELS, shcore.N_COEFFS):
            raise FormatError(
                f"light coefficients must be ({N_CHANNELS}, {shcore.N_COEFFS}), "
                f"got {self.coeffs.shape}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise FormatError("light coefficients contain non-finite values")

    @classmethod
    def zeros(cls) -> "SHLight":
        return cls(np.zeros((N_CHANNELS, shcore.N_COEFFS)))

    @classmethod
    def dc(cls, rgb) -> "SHLight":
        """Light with only the constant band set."""
        coeffs = np.zeros((N_CHANNELS, shcore.N_COEFFS))
        coeffs[:, 0] = np.asarray(rgb, dtype=np.float64)
        return cls(coeffs)


def row_directions(width: int, height: int, row: int) -> np.ndarray:
    """Unit directions of the pixel centers of one row, shape (width, 3)."""
    theta = np.pi * (row + 0.5) / height
    phi = 2.0 * np.pi * (np.arange(width) + 0.5) / width
    sin_t = np.sin(theta)
    return np.stack(
        [sin_t * np.cos(phi), sin_t * np.sin(phi), np.full(width, np.cos(theta))], axis=-1
    )


def grid_directions(width: int, height: int) -> np.ndarray:
    """Pixel-center directions of the whole grid, shape (height, width, 3)."""
    return np.stack([row_directions(width, height, r) for r in range(height)], axis=0)


def solid_angles(width: int, height: int) -> np.ndarray:
    """Per-row pixel solid angle, shape (height,); width * sum == 4*pi exactly."""
    rows = np.arange(height + 1)
    cos_edges = np.cos(np.pi * rows / height)
    return (2.0 * np.pi / width) * (cos_edges[:-1] - cos_edges[1:])


def project_envmap(env: EnvironmentMap, l_max: int = shcore.L_MAX, threads: int = 1) -> SHLight:
    """Project a radiance map onto SH light coefficients.

    gamma_{l,m,c} = sum_p radiance_c(p) * Y_l^m(dir(p)) * dOmega(p).
    Coefficients beyond (l_max+1)^2 are zero. Deterministic for fixed
    input: per-row partial sums are combined in a fixed pairwise tree.
    """
    w, h = env.width, env.height
    weights = solid_angles(w, h)
    n = (l_max + 1) ** 2

    def row_partial(r):
        basis = shcore.sh_eval_all(row_directions(w, h, r), l_max)
        return weights[r] * np.einsum("wc,wk->ck", env.radiance[r], basis)

    partial = tree_sum(map_rows(row_partial, h, threads))
    coeffs = np.zeros((N_CHANNELS, shcore.N_COEFFS))
    coeffs[:, :n] = partial
    return SHLight(coeffs)


def render_envmap(light: SHLight, width: int, threads: int = 1) -> EnvironmentMap:
    """Synthesize the band-limited radiance map of an SH light.

    Inverse of project_envmap up to band limiting; reconstructed values
    may go negative and are not clamped.
    """
    if width % 2 != 0 or width <= 0:
        raise ValueError(f"width must be positive and even, got {width}")
    height = width // 2

    def row_radiance(r):
        basis = shcore.sh_eval_all(row_directions(width, height, r), shcore.L_MAX)
        return np.einsum("wk,ck->wc", basis, light.coeffs)

    rows = map_rows(row_radiance, height, threads)
    return EnvironmentMap(np.stack(rows, axis=0))


def monochrome_residual(light: SHLight) -> float:
    """Squared deviation of the channels from their per-band mean.

    Zero exactly when all three channels carry identical coefficients;
    used as the regularizer that pushes fitted light toward gray.
    Computed in the equivalent pairwise form
    sum_k (1/3) * sum_{c<c'} (gamma_kc - gamma_kc')^2 so identical
    channels give an exact 0 (no mean-rounding residue).
    """
    c = light.coeffs
    pair = (c[0] - c[1]) ** 2 + (c[1] - c[2]) ** 2 + (c[0] - c[2]) ** 2
    return float(pair.sum() / 3.0)


def monochrome_residual_grad(light: SHLight) -> np.ndarray:
    """Gradient of monochrome_residual with respect to the coefficients."""
    return 2.0 * (light.coeffs - light.coeffs.mean(axis=0, keepdims=True))
