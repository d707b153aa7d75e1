"""Forward-shading tests: closed forms, brute-force oracles, invariants."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from uvshade import envlight, shader, shcore
from uvshade.errors import ContractError
from tests.conftest import random_light, random_maps, random_unit

VIEW_Z = shader.ViewModel.constant((0.0, 0.0, 1.0))
HALF_SQRT_PI = math.sqrt(math.pi) / 2


def test_reflect_axis_cases():
    np.testing.assert_allclose(shader.reflect((0, 0, 1), (0, 0, 1)), [0, 0, 1])
    np.testing.assert_allclose(shader.reflect((1, 0, 0), (0, 0, 1)), [-1, 0, 0])


def test_reflect_law_of_reflection():
    rng = np.random.default_rng(14)
    for _ in range(50):
        v, n = random_unit(rng), random_unit(rng)
        r = shader.reflect(v, n)
        assert abs(np.linalg.norm(r) - 1.0) < 1e-6
        assert abs(np.dot(r, n) - np.dot(v, n)) < 1e-6, "incidence angle must be preserved"


def test_fresnel_values():
    assert shader.fresnel_schlick(0.5, 1.0) == 0.5
    assert shader.fresnel_schlick(0.5, 0.0) == 1.0
    assert shader.fresnel_schlick(0.04, 0.5) == pytest.approx(0.07, rel=1e-12)


def test_fresnel_range():
    rng = np.random.default_rng(15)
    s = rng.uniform(0, 1, 100)
    mu = rng.uniform(0, 1, 100)
    f = shader.fresnel_schlick(s, mu)
    assert np.all(f >= np.minimum(s, 1.0) - 1e-15)
    assert np.all(f <= 1.0 + 1e-15)


def irradiance_quadrature(normal_z_aligned_radiance):
    """Independent oracle: irradiance of a constant environment through
    the clamped-cosine, integral L * max(cos, 0) over the sphere."""
    val, _ = quad(
        lambda theta: normal_z_aligned_radiance
        * max(math.cos(theta), 0.0)
        * math.sin(theta)
        * 2
        * math.pi,
        0,
        math.pi,
    )
    return val


def test_shade_texel_dc_closed_form():
    light = envlight.SHLight.dc((1.0, 1.0, 1.0))
    out = shader.shade_texel((1, 1, 1), 0.0, 1.0, 0.0, (0, 0, 1), (0, 0, 1), light)
    np.testing.assert_allclose(out, HALF_SQRT_PI, atol=1e-12)
    # cross-check against quadrature of the irradiance integral: the
    # constant radiance carried by gamma_00 = 1 is Y_00 = 1/(2 sqrt(pi))
    oracle = irradiance_quadrature(0.28209479177387814)
    np.testing.assert_allclose(out, oracle, atol=1e-9)


def test_shade_texel_zero_light():
    out = shader.shade_texel((0.8, 0.5, 0.2), 0.3, 0.7, 0.4, (0, 0, 1), (0, 0, 1), envlight.SHLight.zeros())
    np.testing.assert_allclose(out, 0.0)


def brute_force_specular(s, n, v, light, sigma=0.25):
    """Independent scalar-loop oracle for the specular term."""
    r = 2 * (n @ v) * n - v
    cos_theta = min(max(float(n @ v), 0.0), 1.0)
    f = s + (1 - s) * (1 - cos_theta) ** 5
    out = np.zeros(3)
    for c in range(3):
        acc = 0.0
        for l in range(9):
            rl = math.exp(-((sigma * l) ** 2))
            for m in range(-l, l + 1):
                acc += rl * light.coeffs[c, shcore.flat_index(l, m)] * shcore.sh_eval(l, m, r)
        out[c] = f * acc
    return out


def test_specular_only_matches_brute_force():
    rng = np.random.default_rng(16)
    light = envlight.SHLight(rng.normal(size=(3, 81)))
    n, v = random_unit(rng), random_unit(rng)
    out = shader.shade_texel((0, 0, 0), 1.0, 0.5, 0.3, n, v, light)
    np.testing.assert_allclose(out, brute_force_specular(1.0, n, v, light), atol=1e-12)


def test_shade_texture_single_texel_dc():
    maps = shader.TextureMapSet(
        diffuse=np.ones((1, 1, 3)),
        specular=np.zeros((1, 1)),
        ambient_occlusion=np.ones((1, 1)),
        translucency=np.zeros((1, 1)),
        normal=np.array([[[0.0, 0.0, 1.0]]]),
    )
    out = shader.shade_texture(maps, VIEW_Z, envlight.SHLight.dc((1, 1, 1)))
    np.testing.assert_allclose(out.rgb[0, 0], HALF_SQRT_PI, atol=1e-12)


def test_all_invalid_mask_yields_zeros():
    rng = np.random.default_rng(17)
    maps = random_maps(rng, 4, 4)
    maps.mask[:] = False
    out = shader.shade_texture(maps, VIEW_Z, random_light(rng))
    assert np.all(out.rgb == 0.0)
    assert not out.mask.any()


def test_batched_matches_scalar_path():
    rng = np.random.default_rng(18)
    maps = random_maps(rng, 64, 64)
    light = random_light(rng)
    out = shader.shade_texture(maps, VIEW_Z, light)
    idx = rng.integers(0, 64, size=(40, 2))
    for i, j in idx:
        ref = shader.shade_texel(
            maps.diffuse[i, j],
            maps.specular[i, j],
            maps.ambient_occlusion[i, j],
            maps.translucency[i, j],
            maps.normal[i, j],
            (0, 0, 1),
            light,
        )
        np.testing.assert_allclose(out.rgb[i, j], ref, atol=1e-12)


def test_light_homogeneity():
    rng = np.random.default_rng(19)
    maps = random_maps(rng, 16, 16)
    light = random_light(rng)
    base = shader.shade_texture(maps, VIEW_Z, light).rgb
    for k in (0.0, 0.5, 3.0):
        scaled = shader.shade_texture(maps, VIEW_Z, envlight.SHLight(k * light.coeffs)).rgb
        np.testing.assert_allclose(scaled, k * base, atol=1e-10)


def test_light_additivity():
    rng = np.random.default_rng(20)
    maps = random_maps(rng, 16, 16)
    l1, l2 = random_light(rng), random_light(rng)
    combo = envlight.SHLight(l1.coeffs + l2.coeffs)
    lhs = shader.shade_texture(maps, VIEW_Z, combo).rgb
    rhs = shader.shade_texture(maps, VIEW_Z, l1).rgb + shader.shade_texture(maps, VIEW_Z, l2).rgb
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_dc_only_kills_subsurface_and_normal_dependence():
    # Under DC-only light the diffuse term is normal-independent and the
    # subsurface bands vanish. The Schlick weight (1-cos)^5 still varies
    # with n even at s = 0, so the full outputs only agree when the two
    # normal maps share their view angle; azimuth flips provide that.
    rng = np.random.default_rng(21)
    h = w = 8
    dc = envlight.SHLight.dc((1.3, 0.9, 1.1))
    common = dict(
        diffuse=rng.uniform(0.2, 0.9, (h, w, 3)),
        specular=np.zeros((h, w)),
        ambient_occlusion=rng.uniform(0.3, 1.0, (h, w)),
    )
    normals_a = random_unit(rng, (h, w))
    normals_b = normals_a * np.array([-1.0, -1.0, 1.0])  # same n.v, different normals
    for t in (np.zeros((h, w)), rng.uniform(0, 1, (h, w))):
        out_a = shader.shade_texture(
            shader.TextureMapSet(translucency=t, normal=normals_a, **common), VIEW_Z, dc
        ).rgb
        out_b = shader.shade_texture(
            shader.TextureMapSet(translucency=t, normal=normals_b, **common), VIEW_Z, dc
        ).rgb
        np.testing.assert_allclose(out_a, out_b, atol=1e-12)

    # with the constant specular base subtracted, any two normal fields
    # give identical diffuse + subsurface under DC light
    normals_c = random_unit(rng, (h, w))
    spec_base = 0.28209479177387814 * dc.coeffs[:, 0]
    for normals in (normals_a, normals_c):
        t = rng.uniform(0, 1, (h, w))
        maps = shader.TextureMapSet(translucency=t, normal=normals, **common)
        out = shader.shade_texture(maps, VIEW_Z, dc).rgb
        mu = np.clip(normals[..., 2], 0.0, 1.0)
        f = (1.0 - mu) ** 5
        diffuse_part = out - f[..., None] * spec_base
        expected = (
            common["diffuse"]
            * common["ambient_occlusion"][..., None]
            * (math.pi * 0.28209479177387814)
            * dc.coeffs[:, 0]
        )
        np.testing.assert_allclose(diffuse_part, expected, atol=1e-12)


def test_dc_only_sss_term_exact_zero():
    light = envlight.SHLight.dc((1.0, 1.0, 1.0))
    n = np.array([0.0, 0.6, 0.8])
    with_t = shader.shade_texel((1, 1, 1), 0.0, 1.0, 0.9, n, (0, 0, 1), light)
    without_t = shader.shade_texel((1, 1, 1), 0.0, 1.0, 0.0, n, (0, 0, 1), light)
    np.testing.assert_allclose(with_t, without_t, atol=0)


def test_diffuse_ao_confound():
    rng = np.random.default_rng(22)
    h = w = 8
    light = random_light(rng)
    d = rng.uniform(0.1, 0.5, (h, w, 3))
    a = rng.uniform(0.4, 0.5, (h, w))
    n = random_unit(rng, (h, w))
    zeros = np.zeros((h, w))

    def run(dd, aa):
        maps = shader.TextureMapSet(
            diffuse=dd, specular=zeros, ambient_occlusion=aa, translucency=zeros, normal=n
        )
        return shader.shade_texture(maps, VIEW_Z, light).rgb

    base = run(d, a)
    for c in (0.5, 2.0):
        np.testing.assert_allclose(run(d * c, a / c), base, atol=1e-12)


def test_sss_monotone_in_t_for_positive_band_sums():
    # light with positive l=1,2 content along +z; normals near +z keep
    # both band sums positive, where monotonicity is guaranteed
    coeffs = np.zeros((3, 81))
    coeffs[:, shcore.flat_index(1, 0)] = 1.0
    coeffs[:, shcore.flat_index(2, 0)] = 0.5
    light = envlight.SHLight(coeffs)
    n = np.array([0.05, 0.05, math.sqrt(1 - 2 * 0.05**2)])
    prev = None
    for t in np.linspace(0.0, 1.0, 11):
        out = shader.shade_texel((1, 1, 1), 0.0, 0.0, t, n, (0, 0, 1), light)
        sss = out  # a = 0 kills diffuse; s = 0, f*(spec) shared -> subtract t=0 value
        if prev is not None:
            assert np.all(sss >= prev - 1e-15)
        prev = sss


def test_non_unit_normal_rejected():
    light = envlight.SHLight.dc((1, 1, 1))
    with pytest.raises(ContractError):
        shader.shade_texel((1, 1, 1), 0.0, 1.0, 0.0, (0, 0, 1.01), (0, 0, 1), light)
    with pytest.raises(ContractError):
        shader.shade_texel((1, 1, 1), 0.0, 1.0, 0.0, (0, 0, 1), (0, 0, 1.1), light)


def test_texture_map_set_validation():
    good = shader.TextureMapSet(
        diffuse=np.ones((2, 2, 3)),
        specular=np.zeros((2, 2)),
        ambient_occlusion=np.ones((2, 2)),
        translucency=np.zeros((2, 2)),
        normal=np.broadcast_to([0.0, 0.0, 1.0], (2, 2, 3)).copy(),
    )
    good.validate()
    bad = shader.TextureMapSet(
        diffuse=np.ones((2, 2, 3)) * 1.5,
        specular=np.zeros((2, 2)),
        ambient_occlusion=np.ones((2, 2)),
        translucency=np.zeros((2, 2)),
        normal=np.broadcast_to([0.0, 0.0, 1.0], (2, 2, 3)).copy(),
    )
    with pytest.raises(ContractError):
        bad.validate()


def test_camera_mode_requires_position_map():
    rng = np.random.default_rng(23)
    maps = random_maps(rng, 4, 4)
    view = shader.ViewModel(camera_position=np.array([0.0, 0.0, 5.0]))
    with pytest.raises(ContractError):
        shader.shade_texture(maps, view, random_light(rng))


def test_camera_mode_matches_per_texel_constant_views():
    rng = np.random.default_rng(24)
    h = w = 6
    maps = random_maps(rng, h, w)
    positions = rng.uniform(-1, 1, (h, w, 3))
    camera = np.array([0.3, -0.2, 6.0])
    view = shader.ViewModel.camera(camera, positions)
    light = random_light(rng)
    out = shader.shade_texture(maps, view, light)
    for i in (0, 3, 5):
        for j in (1, 4):
            v = camera - positions[i, j]
            v = v / np.linalg.norm(v)
            ref = shader.shade_texel(
                maps.diffuse[i, j],
                maps.specular[i, j],
                maps.ambient_occlusion[i, j],
                maps.translucency[i, j],
                maps.normal[i, j],
                v,
                light,
            )
            np.testing.assert_allclose(out.rgb[i, j], ref, atol=1e-12)


def test_thread_count_bitwise_invariance():
    rng = np.random.default_rng(25)
    maps = random_maps(rng, 32, 24)
    light = random_light(rng)
    base = shader.shade_texture(maps, VIEW_Z, light, threads=1)
    for threads in (2, 4, 8):
        out = shader.shade_texture(maps, VIEW_Z, light, threads=threads)
        assert np.array_equal(base.rgb, out.rgb), f"threads={threads}"
