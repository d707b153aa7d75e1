"""Real spherical-harmonics basis and the per-band shading kernels.

Convention (frozen public contract, shared by every file format in this
package):

* real orthonormal basis on the unit sphere, z-up polar axis, so that
  cos(theta) = z and phi = atan2(y, x);
* the Condon-Shortley phase stays inside the associated Legendre
  functions; bands with m > 0 use sqrt(2)*cos(m*phi), bands with m < 0
  use sqrt(2)*sin(|m|*phi);
* coefficient vectors are flat-indexed by k = l*(l+1) + m, so a basis up
  to degree l_max has (l_max+1)**2 entries (81 for the full l_max = 8).

Kernels: lambert_coeffs gives the clamped-cosine convolution weights
with the sqrt(4*pi/(2l+1)) convolution factor already absorbed, so band
sums in the shading equations are plain dot products. sss_coeffs is the
translucency falloff exp(-l^2/t^4), roughness_coeffs the specular lobe
falloff exp(-(sigma*l)^2).
"""

import math

import numpy as np

L_MAX = 8
N_COEFFS = (L_MAX + 1) ** 2


def flat_index(l: int, m: int) -> int:
    """Map a band (l, m) to its flat coefficient index k = l(l+1)+m."""
    _check_band(l, m)
    return l * (l + 1) + m


def band_of(k: int) -> tuple[int, int]:
    """Inverse of flat_index."""
    if not 0 <= k < N_COEFFS:
        raise ValueError(f"flat index {k} outside [0, {N_COEFFS - 1}]")
    l = int(math.isqrt(k))
    return l, k - l * (l + 1)


def band_expand(per_l: np.ndarray) -> np.ndarray:
    """Repeat per-degree values across orders: (l_max+1,) -> ((l_max+1)^2,)."""
    per_l = np.asarray(per_l, dtype=np.float64)
    return np.repeat(per_l, 2 * np.arange(per_l.shape[-1]) + 1, axis=-1)


def _check_band(l, m):
    if not isinstance(l, (int, np.integer)) or not isinstance(m, (int, np.integer)):
        raise ValueError(f"band indices must be integers, got l={l!r} m={m!r}")
    if not 0 <= l <= L_MAX:
        raise ValueError(f"degree l={l} outside [0, {L_MAX}]")
    if abs(m) > l:
        raise ValueError(f"order m={m} outside [-{l}, {l}]")


def _check_l_max(l_max):
    if not isinstance(l_max, (int, np.integer)) or not 0 <= l_max <= L_MAX:
        raise ValueError(f"l_max={l_max} outside [0, {L_MAX}]")


# sqrt(2)-folded normalization constants, N[k] such that
# Y_k = N[k] * Ptilde_l^|m|(z) * (cos|sin)(m*phi)*sin(theta)^|m|.
def _norm_table() -> list[float]:
    out = []
    for l in range(L_MAX + 1):
        for m in range(-l, l + 1):
            am = abs(m)
            k_lm = math.sqrt(
                (2 * l + 1) / (4 * math.pi) * math.factorial(l - am) / math.factorial(l + am)
            )
            out.append(k_lm if m == 0 else math.sqrt(2.0) * k_lm)
    return out


_NORM = _norm_table()


def sh_eval(l: int, m: int, direction) -> float:
    """Evaluate one real SH basis function at a unit direction.

    Scalar reference path: computes only the order-|m| Legendre column.
    """
    _check_band(l, m)
    x, y, z = (float(v) for v in direction)
    am = abs(m)
    # c = cos(m*phi)*sin^m, s = sin(m*phi)*sin^m, accumulated from (x, y)
    c, s = 1.0, 0.0
    for _ in range(am):
        c, s = x * c - y * s, x * s + y * c
    # Ptilde_am^am with Condon-Shortley phase, then raise degree to l
    p = 1.0
    for j in range(1, am + 1):
        p *= -(2 * j - 1)
    if l > am:
        p_prev, p = p, z * (2 * am + 1) * p
        for ll in range(am + 2, l + 1):
            p_prev, p = p, ((2 * ll - 1) * z * p - (ll + am - 1) * p_prev) / (ll - am)
    azim = c if m >= 0 else s
    return _NORM[l * (l + 1) + m] * p * azim


def sh_eval_all(direction, l_max: int = L_MAX) -> np.ndarray:
    """Evaluate all bands up to l_max at once.

    Accepts a single direction (3,) or an array (..., 3); returns
    (..., (l_max+1)^2) with entry k = l(l+1)+m equal to sh_eval(l, m, .).
    Uses the standard stable recurrences; the azimuthal factors are
    accumulated from (x, y) with no per-element trig calls.
    """
    _check_l_max(l_max)
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape[-1] != 3:
        raise ValueError(f"direction must have a trailing axis of 3, got {direction.shape}")
    if direction.ndim == 1:
        # scalar fast path: plain-float recurrences, same algorithm
        return np.array(_eval_all_scalar(*direction.tolist(), l_max))
    x, y, z = direction[..., 0], direction[..., 1], direction[..., 2]

    n = (l_max + 1) ** 2
    out = np.empty(direction.shape[:-1] + (n,), dtype=np.float64)

    c, s = np.ones_like(x), np.zeros_like(x)  # azimuth order m = 0
    for m in range(l_max + 1):
        if m > 0:
            c, s = x * c - y * s, x * s + y * c
        # Ptilde along degrees l = m..l_max at fixed order m
        p_mm = 1.0
        for j in range(1, m + 1):
            p_mm *= -(2 * j - 1)
        p_prev = np.full_like(x, p_mm)
        _store_band(out, m, m, p_prev, c, s)
        if m < l_max:
            p_cur = z * (2 * m + 1) * p_prev
            _store_band(out, m + 1, m, p_cur, c, s)
            for l in range(m + 2, l_max + 1):
                p_prev, p_cur = p_cur, ((2 * l - 1) * z * p_cur - (l + m - 1) * p_prev) / (l - m)
                _store_band(out, l, m, p_cur, c, s)
    return out


def _store_band(out, l, m, p, c, s):
    base = l * (l + 1)
    out[..., base + m] = _NORM[base + m] * p * c
    if m > 0:
        out[..., base - m] = _NORM[base - m] * p * s


def _eval_all_scalar(x: float, y: float, z: float, l_max: int) -> list[float]:
    out = [0.0] * (l_max + 1) ** 2
    c, s = 1.0, 0.0
    for m in range(l_max + 1):
        if m > 0:
            c, s = x * c - y * s, x * s + y * c
        p_prev = 1.0
        for j in range(1, m + 1):
            p_prev *= -(2 * j - 1)
        base = m * (m + 1)
        out[base + m] = _NORM[base + m] * p_prev * c
        if m > 0:
            out[base - m] = _NORM[base - m] * p_prev * s
        if m < l_max:
            p_cur = z * (2 * m + 1) * p_prev
            base = (m + 1) * (m + 2)
            out[base + m] = _NORM[base + m] * p_cur * c
            if m > 0:
                out[base - m] = _NORM[base - m] * p_cur * s
            for l in range(m + 2, l_max + 1):
                p_prev, p_cur = p_cur, ((2 * l - 1) * z * p_cur - (l + m - 1) * p_prev) / (l - m)
                base = l * (l + 1)
                out[base + m] = _NORM[base + m] * p_cur * c
                if m > 0:
                    out[base - m] = _NORM[base - m] * p_cur * s
    return out


def lambert_coeffs(l_max: int = L_MAX) -> np.ndarray:
    """Clamped-cosine convolution weights A_l, one per degree.

    A_l = 2*pi * integral_0^1 u * P_l(u) du; the sqrt(4*pi/(2l+1))
    convolution factor is absorbed so that the diffuse band sum is a
    plain dot product with the light coefficients.
    """
    _check_l_max(l_max)
    out = np.zeros(l_max + 1, dtype=np.float64)
    out[0] = math.pi
    if l_max >= 1:
        out[1] = 2.0 * math.pi / 3.0
    for l in range(2, l_max + 1, 2):
        half = l // 2
        out[l] = (
            2.0
            * math.pi
            * (-1.0) ** (half + 1)
            / ((l + 2) * (l - 1))
            * math.factorial(l)
            / (2**l * math.factorial(half) ** 2)
        )
    return out


def sss_coeffs(t, l_max: int = L_MAX) -> np.ndarray:
    """Translucency falloff S_l(t) = exp(-l^2 / t^4).

    t may be a scalar or an array; the result has shape t.shape + (l_max+1,).
    S_l(0) = 0 for l >= 1 by continuous extension; S_0 = 1 (never used by
    the shading equations, which sum subsurface bands from l = 1).
    """
    _check_l_max(l_max)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("translucency t must be >= 0")
    out = np.empty(t.shape + (l_max + 1,), dtype=np.float64)
    out[..., 0] = 1.0
    with np.errstate(over="ignore"):
        inv_t4 = np.where(t > 0, t, 1.0) ** -4
        inv_t4 = np.where(t > 0, inv_t4, np.inf)  # exp(-inf) -> exact 0
    for l in range(1, l_max + 1):
        out[..., l] = np.exp(-(l * l) * inv_t4)
    return out


def sss_coeffs_grad(t, l_max: int = L_MAX) -> np.ndarray:
    """dS_l/dt = (4 l^2 / t^5) * exp(-l^2 / t^4); 0 at t = 0 by extension."""
    _check_l_max(l_max)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("translucency t must be >= 0")
    s = sss_coeffs(t, l_max)
    out = np.zeros_like(s)
    out[..., 0] = 0.0
    # where S_l underflowed to 0 the derivative is 0 too; this also covers t = 0
    safe_t = np.where(t > 0, t, 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        for l in range(1, l_max + 1):
            grad = 4.0 * l * l * safe_t**-5 * s[..., l]
            out[..., l] = np.where(s[..., l] > 0, grad, 0.0)
    return out


def roughness_coeffs(sigma: float, l_max: int = L_MAX) -> np.ndarray:
    """Specular lobe falloff R_l = exp(-(sigma*l)^2), R_0 = 1."""
    _check_l_max(l_max)
    if not sigma > 0:
        raise ValueError(f"roughness sigma must be > 0, got {sigma}")
    l = np.arange(l_max + 1, dtype=np.float64)
    return np.exp(-((sigma * l) ** 2))
