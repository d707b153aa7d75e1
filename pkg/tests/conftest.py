from pathlib import Path

import numpy as np
import pytest

from uvshade import envlight, shader

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def random_unit(rng, shape=()):
    vec = rng.normal(size=shape + (3,))
    return vec / np.linalg.norm(vec, axis=-1, keepdims=True)


def random_maps(rng, height, width, flat_normals=False) -> shader.TextureMapSet:
    if flat_normals:
        normal = np.zeros((height, width, 3))
        normal[..., 2] = 1.0
    else:
        normal = random_unit(rng, (height, width))
    return shader.TextureMapSet(
        diffuse=rng.uniform(0.0, 1.0, (height, width, 3)),
        specular=rng.uniform(0.0, 1.0, (height, width)),
        ambient_occlusion=rng.uniform(0.0, 1.0, (height, width)),
        translucency=rng.uniform(0.0, 1.0, (height, width)),
        normal=normal,
    )


def random_light(rng, dc_range=(1.5, 2.5), band12_std=0.7, high_std=0.12) -> envlight.SHLight:
    coeffs = np.zeros((3, 81))
    coeffs[:, 0] = rng.uniform(*dc_range, 3)
    coeffs[:, 1:9] = rng.normal(0.0, band12_std, (3, 8))
    coeffs[:, 9:] = rng.normal(0.0, high_std, (3, 72))
    return envlight.SHLight(coeffs)
