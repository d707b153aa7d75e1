#!/usr/bin/env python3
"""Regenerate the fixture files shipped under fixtures/.

The fixtures are committed; this script only exists so they can be
rebuilt deterministically if the formats ever change.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from uvshade import envlight, shader, texio  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent / "fixtures"


def one_texel():
    out = ROOT / "one_texel"
    out.mkdir(parents=True, exist_ok=True)
    texio.write_pfm(out / "diffuse.pfm", np.ones((1, 1, 3), dtype=np.float32))
    texio.write_pfm(out / "specular.pfm", np.zeros((1, 1), dtype=np.float32))
    texio.write_pfm(out / "ao.pfm", np.ones((1, 1), dtype=np.float32))
    texio.write_pfm(out / "transl.pfm", np.zeros((1, 1), dtype=np.float32))
    flat = np.zeros((1, 1, 3))
    flat[..., 2] = 1.0
    texio.write_pfm(out / "normal.pfm", texio.encode_normals(flat).astype(np.float32))


def lights():
    texio.write_coeffs(envlight.SHLight.dc((1.0, 1.0, 1.0)), ROOT / "dc_light.csv")
    texio.write_coeffs(envlight.SHLight.zeros(), ROOT / "zero_light.csv")


def roundtrip():
    """16x16 synthetic maps plus their shaded target under the DC light."""
    out = ROOT / "roundtrip"
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(2024)
    h = w = 16
    maps = shader.TextureMapSet(
        diffuse=rng.uniform(0.2, 0.9, (h, w, 3)),
        specular=np.zeros((h, w)),
        ambient_occlusion=rng.uniform(0.6, 1.0, (h, w)),
        translucency=np.zeros((h, w)),
        normal=np.dstack([np.zeros((h, w)), np.zeros((h, w)), np.ones((h, w))]),
    )
    light = envlight.SHLight.dc((1.0, 1.0, 1.0))
    target = shader.shade_texture(maps, shader.ViewModel.constant(), light)
    texio.write_pfm(out / "diffuse.pfm", maps.diffuse)
    texio.write_pfm(out / "specular.pfm", maps.specular)
    texio.write_pfm(out / "ao.pfm", maps.ambient_occlusion)
    texio.write_pfm(out / "transl.pfm", maps.translucency)
    texio.write_pfm(out / "normal.pfm", texio.encode_normals(maps.normal))
    texio.write_pfm(out / "target.pfm", target.rgb)


def constant_env():
    env = np.ones((32, 64, 3), dtype=np.float32)
    texio.write_pfm(ROOT / "constant_env.pfm", env)
    texio.write_pfm(ROOT / "black_env.pfm", np.zeros((32, 64, 3), dtype=np.float32))


def main():
    ROOT.mkdir(parents=True, exist_ok=True)
    one_texel()
    lights()
    roundtrip()
    constant_env()
    print(f"fixtures written to {ROOT}")


if __name__ == "__main__":
    main()
