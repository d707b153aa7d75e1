"""File-format round trips and strict rejection paths."""

import numpy as np
import pytest

from uvshade import envlight, texio
from uvshade.errors import FormatError
from tests.conftest import random_unit


def test_pfm_color_round_trip_is_byte_exact(tmp_path):
    img = np.array(
        [
            [[0.5, -1.25, 3e8], [1e-20, 0.0, -0.0]],
            [[np.float32(1 / 3), 65504.0, -2.5e-12], [7.0, 8.0, 9.0]],
        ],
        dtype=np.float32,
    )
    path = tmp_path / "a.pfm"
    texio.write_pfm(path, img)
    back = texio.read_pfm(path)
    assert back.dtype == np.float32
    assert np.array_equal(back.view(np.uint32), img.view(np.uint32)), "bit patterns differ"
    texio.write_pfm(tmp_path / "b.pfm", back)
    assert (tmp_path / "a.pfm").read_bytes() == (tmp_path / "b.pfm").read_bytes()


def test_pfm_grayscale_round_trip(tmp_path):
    img = np.arange(12, dtype=np.float32).reshape(3, 4) / 7
    path = tmp_path / "g.pfm"
    texio.write_pfm(path, img)
    back = texio.read_pfm(path)
    assert back.shape == (3, 4)
    assert np.array_equal(back, img)


def test_pfm_big_endian_and_scale(tmp_path):
    img = np.array([[1.5, -2.25]], dtype=np.float32)
    path = tmp_path / "be.pfm"
    payload = img[::-1].astype(">f4").tobytes()
    path.write_bytes(b"Pf\n2 1\n2.0\n" + payload)
    back = texio.read_pfm(path)
    np.testing.assert_allclose(back, 2.0 * img)


def test_pfm_rejections(tmp_path):
    good = b"PF\n2 2\n-1.0\n" + b"\x00" * 48
    cases = {
        "magic": b"PX\n2 2\n-1.0\n" + b"\x00" * 48,
        "scale0": b"PF\n2 2\n0.0\n" + b"\x00" * 48,
        "dims": b"PF\n2\n-1.0\n" + b"\x00" * 48,
        "dims_int": b"PF\na b\n-1.0\n" + b"\x00" * 48,
        "short": good[:-4],
        "long": good + b"\x00\x00\x00\x00",
        "neg_dim": b"PF\n-2 2\n-1.0\n" + b"\x00" * 48,
    }
    path = tmp_path / "bad.pfm"
    path.write_bytes(good)
    assert texio.read_pfm(path).shape == (2, 2, 3)
    for name, data in cases.items():
        path.write_bytes(data)
        with pytest.raises(FormatError):
            texio.read_pfm(path)


def test_pfm_refuses_non_finite(tmp_path):
    img = np.ones((2, 2, 3), dtype=np.float32)
    img[0, 0, 0] = np.nan
    with pytest.raises(FormatError):
        texio.write_pfm(tmp_path / "nan.pfm", img)
    img[0, 0, 0] = np.inf
    with pytest.raises(FormatError):
        texio.write_pfm(tmp_path / "inf.pfm", img)


def test_png_8bit_quantization_identity(tmp_path):
    path = tmp_path / "q.png"
    texio.write_png(path, np.full((2, 2), 128 / 255), bit_depth=8)
    back, depth = texio.read_png(path)
    assert depth == 8
    np.testing.assert_allclose(back, 128 / 255)
    # memory value ~0.50196 survives the write-read cycle exactly
    texio.write_png(path, back, bit_depth=8)
    again, _ = texio.read_png(path)
    assert np.array_equal(back, again)


def test_png_16bit_round_trip_within_one_lsb(tmp_path):
    rng = np.random.default_rng(10)
    img = rng.uniform(0, 1, (8, 8, 3))
    path = tmp_path / "c.png"
    texio.write_png(path, img, bit_depth=16)
    back, depth = texio.read_png(path)
    assert depth == 16
    assert np.max(np.abs(back - img)) <= 1.0 / 65535


def test_image_dispatch_and_unknown_extension(tmp_path):
    img = np.ones((2, 4, 3), dtype=np.float32)
    texio.write_image(img, tmp_path / "x.pfm")
    data, meta = texio.read_image(tmp_path / "x.pfm")
    assert meta.format == "pfm" and meta.bit_depth == 32 and meta.channels == 3
    with pytest.raises(FormatError):
        texio.write_image(img, tmp_path / "x.bmp")
    with pytest.raises(FormatError):
        texio.read_image(tmp_path / "x.bmp")


def test_decode_normals_axis_cases():
    img = np.array([[[0.5, 0.5, 1.0], [1.0, 0.5, 0.5]]])
    normals, valid = texio.decode_normals(img)
    assert valid.all()
    np.testing.assert_allclose(normals[0, 0], [0, 0, 1], atol=1e-12)
    np.testing.assert_allclose(normals[0, 1], [1, 0, 0], atol=1e-12)


def test_decode_normals_zero_vector_invalid():
    img = np.full((1, 2, 3), 0.5)
    normals, valid = texio.decode_normals(img)
    assert not valid[0, 0] and not valid[0, 1]
    np.testing.assert_allclose(normals[0, 0], [0, 0, 1])


def test_encode_decode_normals_16bit_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    field = random_unit(rng, (16, 16))
    path = tmp_path / "n.png"
    texio.write_png(path, texio.encode_normals(field), bit_depth=16)
    img, _ = texio.read_png(path)
    back, valid = texio.decode_normals(img)
    assert valid.all()
    assert np.max(np.linalg.norm(back - field, axis=-1)) < 1e-3


def test_encode_normals_flat_value():
    flat = np.zeros((1, 1, 3))
    flat[..., 2] = 1.0
    np.testing.assert_allclose(texio.encode_normals(flat), [[[0.5, 0.5, 1.0]]], atol=1e-15)


def test_coeffs_dc_only(tmp_path):
    path = tmp_path / "dc.csv"
    texio.write_coeffs(envlight.SHLight.dc((1.0, 2.0, 3.0)), path)
    light = texio.read_coeffs(path)
    assert light.coeffs[0, 0] == 1.0 and light.coeffs[2, 0] == 3.0
    assert np.count_nonzero(light.coeffs) == 3


def test_coeffs_round_trip_from_projection(tmp_path):
    env = envlight.EnvironmentMap(np.random.default_rng(12).uniform(0, 2, (32, 64, 3)))
    light = envlight.project_envmap(env)
    path = tmp_path / "c.csv"
    texio.write_coeffs(light, path)
    back = texio.read_coeffs(path)
    assert np.max(np.abs(back.coeffs - light.coeffs)) < 1e-9


def test_coeffs_shuffled_rows_rejected_with_row_number(tmp_path):
    path = tmp_path / "s.csv"
    texio.write_coeffs(envlight.SHLight.zeros(), path)
    lines = path.read_text().splitlines()
    lines[1], lines[2] = lines[2], lines[1]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError, match="row 1"):
        texio.read_coeffs(path)


def test_coeffs_structural_rejections(tmp_path):
    path = tmp_path / "t.csv"
    texio.write_coeffs(envlight.SHLight.zeros(), path)
    lines = path.read_text().splitlines()

    path.write_text("\n".join(lines[:-1]) + "\n")  # 80 rows
    with pytest.raises(FormatError, match="80"):
        texio.read_coeffs(path)

    bad = list(lines)
    bad[5] = "1,1,0,nan,0"
    path.write_text("\n".join(bad) + "\n")
    with pytest.raises(FormatError, match="row 5"):
        texio.read_coeffs(path)

    path.write_text("not,a,header\n" + "\n".join(lines[1:]) + "\n")
    with pytest.raises(FormatError, match="header"):
        texio.read_coeffs(path)


def test_mask_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    mask = rng.uniform(size=(9, 7)) > 0.4
    path = tmp_path / "m.png"
    texio.write_mask(mask, path)
    assert np.array_equal(texio.read_mask(path), mask)
