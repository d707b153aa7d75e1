"""File I/O for every on-disk format the tools speak.

Formats (bit-exact contracts):

* PFM (portable float map): header ``PF``/``Pf`` newline, ``width height``
  newline, scale newline; negative scale means little-endian samples.
  Rows are stored bottom-to-top on disk and flipped to top-to-bottom in
  memory. Samples are 32-bit floats; write/read round-trips are
  byte-exact. A zero scale or a payload whose size disagrees with the
  header is rejected with the offending byte offset.
* PNG: 8- or 16-bit, 1 or 3 channels, treated as linear values in [0, 1]
  (value / (2^depth - 1)).
* Coefficient files: text table with header ``l,m,R,G,B`` and exactly 81
  data rows ordered by the flat index k = l(l+1)+m, floats written with
  17 significant digits.
* Normal maps are stored encoded: n in [-1, 1] maps to rgb in [0, 1] via
  rgb = (n + 1) / 2, so the flat normal (0, 0, 1) is (0.5, 0.5, 1.0).
* Masks: 1-channel PNG, 0 = invalid texel, anything else valid.
"""

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from . import shcore
from .envlight import SHLight
from .errors import FormatError

PFM_LITTLE_ENDIAN_SCALE = -1.0


@dataclass
class ImageMeta:
    format: str  # "pfm" or "png"
    channels: int
    bit_depth: int  # 32 for pfm, 8 or 16 for png


def _read_header_line(data: bytes, offset: int) -> tuple[str, int]:
    end = data.find(b"\n", offset)
    if end < 0:
        raise FormatError(f"truncated header: no newline after byte {offset}")
    return data[offset:end].decode("ascii", errors="replace"), end + 1


def read_pfm(path) -> np.ndarray:
    """Read a PFM file into (H, W) or (H, W, 3) float32, top-to-bottom."""
    data = Path(path).read_bytes()
    magic, offset = _read_header_line(data, 0)
    magic = magic.strip()
    if magic == "PF":
        channels = 3
    elif magic == "Pf":
        channels = 1
    else:
        raise FormatError(f"{path}: bad PFM magic {magic!r} at byte 0")
    dims_line, offset = _read_header_line(data, offset)
    dims_offset = offset
    parts = dims_line.split()
    if len(parts) != 2:
        raise FormatError(f"{path}: bad PFM dimensions line {dims_line!r} at byte {offset}")
    try:
        width, height = int(parts[0]), int(parts[1])
    except ValueError:
        raise FormatError(f"{path}: non-integer PFM dimensions {dims_line!r}") from None
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: non-positive PFM dimensions {width}x{height}")
    scale_line, offset = _read_header_line(data, offset)
    try:
        scale = float(scale_line.strip())
    except ValueError:
        raise FormatError(f"{path}: bad PFM scale line {scale_line!r}") from None
    if scale == 0.0:
        raise FormatError(f"{path}: PFM scale must be nonzero (byte {dims_offset})")

    expected = width * height * channels * 4
    payload = data[offset:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: PFM payload is {len(payload)} bytes at offset {offset}, "
            f"expected exactly {expected} for {width}x{height}x{channels}"
        )
    endian = "<" if scale < 0 else ">"
    flat = np.frombuffer(payload, dtype=np.dtype(endian + "f4"))
    img = flat.reshape(height, width, channels).astype(np.float32, copy=True)
    img = img[::-1].copy()  # file rows run bottom-to-top
    if abs(scale) != 1.0:
        img *= np.float32(abs(scale))
    return img[..., 0] if channels == 1 else img


def write_pfm(path, image: np.ndarray) -> None:
    """Write float data as little-endian PFM (scale -1.0)."""
    image = np.asarray(image)
    if image.ndim == 2:
        channels = 1
        image = image[..., None]
    elif image.ndim == 3 and image.shape[2] in (1, 3):
        channels = image.shape[2]
    else:
        raise FormatError(f"PFM images must be (H, W) or (H, W, 1|3), got {image.shape}")
    if not np.all(np.isfinite(image)):
        raise FormatError("refusing to write non-finite values to PFM")
    magic = b"PF" if channels == 3 else b"Pf"
    height, width = image.shape[:2]
    header = magic + b"\n" + f"{width} {height}\n".encode() + b"-1.0\n"
    payload = image[::-1].astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_png(path) -> tuple[np.ndarray, int]:
    """Read an 8/16-bit PNG as linear floats in [0, 1]; returns (image, bit_depth)."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FormatError(f"{path}: not a readable image")
    if raw.dtype == np.uint8:
        depth = 8
    elif raw.dtype == np.uint16:
        depth = 16
    else:
        raise FormatError(f"{path}: unsupported PNG sample type {raw.dtype}")
    if raw.ndim == 3:
        if raw.shape[2] == 3:
            raw = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
        else:
            raise FormatError(f"{path}: expected 1 or 3 channels, got {raw.shape[2]}")
    img = raw.astype(np.float64) / float(2**depth - 1)
    return img, depth


def write_png(path, image: np.ndarray, bit_depth: int = 16) -> None:
    """Quantize linear [0, 1] floats to an 8/16-bit PNG."""
    if bit_depth not in (8, 16):
        raise FormatError(f"PNG bit depth must be 8 or 16, got {bit_depth}")
    image = np.asarray(image, dtype=np.float64)
    if image.ndim not in (2, 3) or (image.ndim == 3 and image.shape[2] != 3):
        raise FormatError(f"PNG images must be (H, W) or (H, W, 3), got {image.shape}")
    if not np.all(np.isfinite(image)):
        raise FormatError("refusing to write non-finite values to PNG")
    maxval = 2**bit_depth - 1
    quant = np.rint(np.clip(image, 0.0, 1.0) * maxval)
    quant = quant.astype(np.uint8 if bit_depth == 8 else np.uint16)
    if quant.ndim == 3:
        quant = cv2.cvtColor(quant, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), quant):
        raise FormatError(f"{path}: PNG write failed")


def read_image(path) -> tuple[np.ndarray, ImageMeta]:
    """Read a PFM or PNG by extension; values come back as linear floats."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        img = read_pfm(path)
        channels = 1 if img.ndim == 2 else img.shape[2]
        return np.asarray(img, dtype=np.float64), ImageMeta("pfm", channels, 32)
    if suffix == ".png":
        img, depth = read_png(path)
        channels = 1 if img.ndim == 2 else img.shape[2]
        return img, ImageMeta("png", channels, depth)
    raise FormatError(f"{path}: unknown image extension {suffix!r} (use .pfm or .png)")


def write_image(image: np.ndarray, path, format: str | None = None, bit_depth: int = 16) -> None:
    """Write an image, picking the format from the extension unless given."""
    fmt = format or Path(path).suffix.lower().lstrip(".")
    if fmt == "pfm":
        write_pfm(path, image)
    elif fmt == "png":
        write_png(path, image, bit_depth=bit_depth)
    else:
        raise FormatError(f"unknown image format {fmt!r}")


def decode_normals(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decode an encoded normal image into unit vectors plus validity mask.

    n = normalize(2*rgb - 1); texels that decode to a zero-length vector
    are marked invalid and get the flat normal as a placeholder.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise FormatError(f"normal maps need 3 channels, got shape {image.shape}")
    vec = 2.0 * image - 1.0
    norm = np.linalg.norm(vec, axis=-1)
    valid = norm > 1e-8
    safe = np.where(valid, norm, 1.0)[..., None]
    normals = vec / safe
    normals[~valid] = (0.0, 0.0, 1.0)
    return normals, valid


def encode_normals(normals: np.ndarray) -> np.ndarray:
    """Inverse of decode_normals; renormalizes before encoding."""
    normals = np.asarray(normals, dtype=np.float64)
    if normals.ndim != 3 or normals.shape[2] != 3:
        raise FormatError(f"normal fields need 3 components, got shape {normals.shape}")
    norm = np.linalg.norm(normals, axis=-1, keepdims=True)
    if np.any(norm <= 1e-8):
        raise FormatError("cannot encode zero-length normals")
    return (normals / norm + 1.0) / 2.0


COEFF_HEADER = "l,m,R,G,B"


def write_coeffs(light: SHLight, path) -> None:
    """Write light coefficients as the 81-row text table."""
    lines = [COEFF_HEADER]
    for k in range(shcore.N_COEFFS):
        l, m = shcore.band_of(k)
        r, g, b = (light.coeffs[c, k] for c in range(3))
        lines.append(f"{l},{m},{r:.17g},{g:.17g},{b:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_coeffs(path) -> SHLight:
    """Read a coefficient table, validating count, order, and finiteness."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != COEFF_HEADER:
        got = lines[0].strip() if lines else "<empty file>"
        raise FormatError(f"{path}: expected header {COEFF_HEADER!r}, got {got!r} (row 0)")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != shcore.N_COEFFS:
        raise FormatError(f"{path}: expected {shcore.N_COEFFS} data rows, got {len(body)}")
    coeffs = np.zeros((3, shcore.N_COEFFS))
    for k, line in enumerate(body):
        row = k + 1
        parts = line.split(",")
        if len(parts) != 5:
            raise FormatError(f"{path}: row {row}: expected 5 fields, got {len(parts)}")
        try:
            l, m = int(parts[0]), int(parts[1])
            rgb = [float(p) for p in parts[2:]]
        except ValueError:
            raise FormatError(f"{path}: row {row}: unparseable values {line!r}") from None
        expect_l, expect_m = shcore.band_of(k)
        if (l, m) != (expect_l, expect_m):
            raise FormatError(
                f"{path}: row {row}: band ({l},{m}) out of order, expected ({expect_l},{expect_m})"
            )
        if not all(np.isfinite(rgb)):
            raise FormatError(f"{path}: row {row}: non-finite coefficient")
        coeffs[:, k] = rgb
    return SHLight(coeffs)


def read_mask(path) -> np.ndarray:
    """Read a validity mask (1-channel PNG, 0 = invalid)."""
    img, meta = read_image(path)
    if meta.channels != 1:
        raise FormatError(f"{path}: masks must be 1-channel, got {meta.channels}")
    return img > 0


def write_mask(mask: np.ndarray, path) -> None:
    write_png(path, np.where(np.asarray(mask, bool), 1.0, 0.0), bit_depth=8)
