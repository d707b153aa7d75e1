"""Inverse rendering: recover intrinsic maps (and optionally light) from
shaded observations by minimizing the L1 shading loss with Adam.

All scalar maps are optimized through a logistic reparameterization, so
every intermediate map stays strictly inside (0, 1). Normals are held
fixed at their initialization. Multiple observations are averaged with
equal weight. With fit_light enabled, each observation's light
coefficients become optimizable too and the monochrome regularizer is
added to the objective.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import shcore
from .envlight import SHLight, monochrome_residual, monochrome_residual_grad
from .errors import ContractError, FitDivergedError
from .shader import (
    DEFAULT_CONFIG,
    ShadedTexture,
    ShadingConfig,
    TextureMapSet,
    ViewModel,
    _band_slices,
    _Kernels,
    reflect,
)

_LOGIT_MARGIN = 1e-6  # map values are clipped this far inside [0, 1] before logit

INIT_MODES = ("gray", "from-target-heuristic", "random")

GRAY_DIFFUSE = 0.5
GRAY_AMBIENT = 1.0
GRAY_SPECULAR = 0.04
GRAY_TRANSLUCENCY = 0.3


@dataclass
class FitConfig:
    """Optimizer and objective settings.

    Defaults: Adam with learning rate 1e-4, beta1 0.9, beta2 0.999,
    epsilon 1e-8, and a shading-loss weight of 0.5. lambda_light only
    participates when fit_light is set (otherwise the regularizer is a
    constant).
    """

    iterations: int = 1000
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    lambda_shading: float = 0.5
    lambda_light: float = 0.0
    fit_light: bool = False
    seed: int = 0
    init_mode: str = "gray"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")


@dataclass
class Observation:
    """One shaded view of the texture: target image, its light, its view."""

    target: ShadedTexture
    light: SHLight
    view: ViewModel


@dataclass
class FitState:
    """Optimizable logits plus Adam moment buffers and the loss trace."""

    logits: dict
    lights: list
    moment1: dict
    moment2: dict
    iteration: int = 0
    loss_history: list = field(default_factory=list)


@dataclass
class FitResult:
    maps: TextureMapSet
    lights: list
    loss_history: np.ndarray
    state: FitState


def shading_loss(pred: ShadedTexture, target: ShadedTexture) -> float:
    """Mean absolute difference over valid texels and channels."""
    if pred.rgb.shape != target.rgb.shape:
        raise ContractError(
            f"prediction is {pred.rgb.shape[:2]}, target is {target.rgb.shape[:2]}"
        )
    if not np.array_equal(pred.mask, target.mask):
        raise ContractError("prediction and target masks differ")
    if not pred.mask.any():
        return 0.0
    diff = pred.rgb[pred.mask] - target.rgb[target.mask]
    return float(np.mean(np.abs(diff)))


def init_maps(
    mode: str,
    width: int,
    height: int,
    seed: int = 0,
    observation: Observation | None = None,
) -> TextureMapSet:
    """Build a starting map set.

    gray: neutral constants (d 0.5, a 1, s 0.04, t 0.3, flat normals).
    from-target-heuristic: diffuse inverted from the first observation's
    constant light band (d = 2*target / (sqrt(pi) * gamma_00), clamped
    to [0.01, 0.99]). The inversion assumes the specular term is absent,
    so specular starts at 0 to keep the warm start self-consistent;
    otherwise the constant-light degeneracy between specular and the
    diffuse*AO product parks part of the brightness in the wrong map.
    a and t as gray, flat normals.
    random: uniform in the valid ranges, reproducible from the seed.
    """
    if mode not in INIT_MODES:
        raise ValueError(f"init mode must be one of {INIT_MODES}, got {mode!r}")
    shape = (height, width)
    flat = np.zeros(shape + (3,))
    flat[..., 2] = 1.0
    if mode == "random":
        rng = np.random.default_rng(seed)
        normal = rng.normal(size=shape + (3,))
        normal /= np.linalg.norm(normal, axis=-1, keepdims=True)
        return TextureMapSet(
            diffuse=rng.uniform(0.0, 1.0, size=shape + (3,)),
            specular=rng.uniform(0.0, 1.0, size=shape),
            ambient_occlusion=rng.uniform(0.0, 1.0, size=shape),
            translucency=rng.uniform(0.0, 1.0, size=shape),
            normal=normal,
        )
    diffuse = np.full(shape + (3,), GRAY_DIFFUSE)
    specular = np.full(shape, GRAY_SPECULAR)
    mask = None
    if mode == "from-target-heuristic":
        if observation is None:
            raise ValueError("from-target-heuristic initialization needs an observation")
        if observation.target.rgb.shape[:2] != shape:
            raise ContractError(
                f"observation is {observation.target.rgb.shape[:2]}, expected {shape}"
            )
        dc = observation.light.coeffs[:, 0]  # per-channel constant band
        denom = (np.sqrt(np.pi) / 2.0) * dc
        for c in range(3):
            if abs(denom[c]) > 1e-9:
                diffuse[..., c] = np.clip(observation.target.rgb[..., c] / denom[c], 0.01, 0.99)
        diffuse[~observation.target.mask] = GRAY_DIFFUSE
        specular[:] = 0.0
        mask = observation.target.mask.copy()
    return TextureMapSet(
        diffuse=diffuse,
        specular=specular,
        ambient_occlusion=np.full(shape, GRAY_AMBIENT),
        translucency=np.full(shape, GRAY_TRANSLUCENCY),
        normal=flat,
        mask=mask,
    )


def _logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, _LOGIT_MARGIN, 1.0 - _LOGIT_MARGIN)
    return np.log(p / (1.0 - p))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class _ObsPrecomp:
    """Geometry-dependent tensors of one observation, fixed during the fit."""

    def __init__(self, obs: Observation, maps: TextureMapSet, config: ShadingConfig):
        ker = _Kernels(config)
        h, w = maps.height, maps.width
        views = obs.view.view_directions(h, w, maps.mask)
        n = maps.normal
        basis_n = shcore.sh_eval_all(n, max(config.diffuse_order, config.sss_order))
        basis_r = shcore.sh_eval_all(reflect(views, n), config.specular_order)
        self.diffuse_basis = basis_n[..., : ker.n_diffuse] * ker.diffuse  # (H, W, kd)
        self.band_basis = [basis_n[..., sl] for sl in _band_slices(config.sss_order)]
        self.band_slices = _band_slices(config.sss_order)
        self.spec_basis = basis_r * ker.specular  # (H, W, ks)
        cos_theta = np.clip(np.sum(n * views, axis=-1), 0.0, 1.0)
        self.grazing = (1.0 - cos_theta) ** 5  # (H, W)
        self.n_spec = ker.n_spec
        self.n_diffuse = ker.n_diffuse
        self.refresh(obs.light.coeffs)

    def refresh(self, gamma: np.ndarray):
        """Recompute the light-dependent sums (cheap; called when light moves)."""
        self.gamma = gamma
        self.diffuse_sum = np.einsum(
            "hwk,ck->hwc", self.diffuse_basis, gamma[:, : self.n_diffuse]
        )
        self.band_sums = [
            np.einsum("hwk,ck->hwc", b, gamma[:, sl])
            for b, sl in zip(self.band_basis, self.band_slices)
        ]
        self.spec_sum = np.einsum("hwk,ck->hwc", self.spec_basis, gamma[:, : self.n_spec])


def _forward(pre: _ObsPrecomp, d, s, a, t, sss_order):
    s_l = shcore.sss_coeffs(t, sss_order)
    sss_sum = np.zeros_like(d)
    for l, band in enumerate(pre.band_sums, start=1):
        sss_sum += s_l[..., l : l + 1] * band
    f = s + (1.0 - s) * pre.grazing
    pred = d * a[..., None] * pre.diffuse_sum + d * sss_sum + f[..., None] * pre.spec_sum
    return pred, s_l, f, sss_sum


def _objective_and_grads(params, precomps, observations, config, shading, mask):
    """Total objective, per-logit gradients, and per-light gradients.

    params holds logits for the four maps plus, when fitting light, one
    raw coefficient array per observation. Gradients flow through the
    logistic reparameterization via sigma' = m (1 - m).
    """
    n_obs = len(observations)
    d = _sigmoid(params["diffuse"])
    s = _sigmoid(params["specular"])
    a = _sigmoid(params["ambient_occlusion"])
    t = _sigmoid(params["translucency"])
    ds_l = shcore.sss_coeffs_grad(t, shading.sss_order)

    n_valid = int(mask.sum())
    weight = config.lambda_shading / (max(n_valid, 1) * 3 * n_obs)

    total = 0.0
    grads = {key: np.zeros_like(val) for key, val in params.items()}
    for i, (pre, obs) in enumerate(zip(precomps, observations)):
        if config.fit_light:
            pre.refresh(params[f"light_{i}"])
        pred, s_l, f, sss_sum = _forward(pre, d, s, a, t, shading.sss_order)
        diff = pred - obs.target.rgb
        diff[~mask] = 0.0
        total += config.lambda_shading * float(np.abs(diff[mask]).mean()) / n_obs

        up = np.sign(diff) * weight  # subgradient with sign(0) = 0
        sss_sum_dt = np.zeros_like(pred)
        for l, band in enumerate(pre.band_sums, start=1):
            sss_sum_dt += ds_l[..., l : l + 1] * band

        grads["diffuse"] += up * (a[..., None] * pre.diffuse_sum + sss_sum)
        grads["ambient_occlusion"] += np.sum(up * d * pre.diffuse_sum, axis=-1)
        grads["specular"] += np.sum(up * (1.0 - pre.grazing)[..., None] * pre.spec_sum, axis=-1)
        grads["translucency"] += np.sum(up * d * sss_sum_dt, axis=-1)

        if config.fit_light:
            gl = np.zeros((3, shcore.N_COEFFS))
            da = up * d * a[..., None]
            gl[:, : pre.n_diffuse] += np.einsum("hwc,hwk->ck", da, pre.diffuse_basis)
            ud = up * d
            for l, (b, sl) in enumerate(zip(pre.band_basis, pre.band_slices), start=1):
                gl[:, sl] += np.einsum("hwc,hwk->ck", ud * s_l[..., l : l + 1], b)
            gl[:, : pre.n_spec] += np.einsum("hwc,hwk->ck", up * f[..., None], pre.spec_basis)
            light = SHLight(params[f"light_{i}"])
            total += config.lambda_light * monochrome_residual(light) / n_obs
            gl += (config.lambda_light / n_obs) * monochrome_residual_grad(light)
            grads[f"light_{i}"] += gl

    # chain through the logistic map
    for key, mapped in (("diffuse", d), ("specular", s), ("ambient_occlusion", a), ("translucency", t)):
        grads[key] *= mapped * (1.0 - mapped)
    return total, grads


def _maps_from_params(params, template: TextureMapSet) -> TextureMapSet:
    return TextureMapSet(
        diffuse=_sigmoid(params["diffuse"]),
        specular=_sigmoid(params["specular"]),
        ambient_occlusion=_sigmoid(params["ambient_occlusion"]),
        translucency=_sigmoid(params["translucency"]),
        normal=template.normal.copy(),
        mask=template.mask.copy(),
    )


def fit(
    observations: list,
    config: FitConfig,
    init: TextureMapSet | None = None,
    shading: ShadingConfig = DEFAULT_CONFIG,
    callback=None,
) -> FitResult:
    """Run Adam on the map logits (and lights, if enabled).

    Deterministic for fixed config, seed, and inputs. Raises
    FitDivergedError with the current state attached if the loss goes
    non-finite. Emits a warning when the final loss exceeds the initial
    one. callback, when given, is called as callback(iteration, maps)
    after every update.
    """
    if not observations:
        raise ContractError("fit needs at least one observation")
    shape0 = observations[0].target.rgb.shape[:2]
    mask0 = observations[0].target.mask
    for i, obs in enumerate(observations):
        if obs.target.rgb.shape[:2] != shape0:
            raise ContractError(
                f"observation {i} is {obs.target.rgb.shape[:2]}, expected {shape0}"
            )
        if not np.array_equal(obs.target.mask, mask0):
            raise ContractError(f"observation {i} mask differs from observation 0")

    if init is None:
        init = init_maps(
            config.init_mode,
            width=shape0[1],
            height=shape0[0],
            seed=config.seed,
            observation=observations[0],
        )
    init.validate()
    if init.diffuse.shape[:2] != shape0:
        raise ContractError(f"init maps are {init.diffuse.shape[:2]}, targets are {shape0}")
    if not np.array_equal(init.mask, mask0):
        raise ContractError("init map mask differs from the observation masks")

    params = {
        "diffuse": _logit(init.diffuse),
        "specular": _logit(init.specular),
        "ambient_occlusion": _logit(init.ambient_occlusion),
        "translucency": _logit(init.translucency),
    }
    if config.fit_light:
        for i, obs in enumerate(observations):
            params[f"light_{i}"] = obs.light.coeffs.copy()

    precomps = [_ObsPrecomp(obs, init, shading) for obs in observations]

    state = FitState(
        logits=params,
        lights=[params[f"light_{i}"] for i in range(len(observations))]
        if config.fit_light
        else None,
        moment1={k: np.zeros_like(v) for k, v in params.items()},
        moment2={k: np.zeros_like(v) for k, v in params.items()},
    )

    loss, grads = _objective_and_grads(params, precomps, observations, config, shading, mask0)
    _check_finite(loss, state)
    state.loss_history.append(loss)

    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.epsilon
    for it in range(1, config.iterations + 1):
        state.iteration = it
        for key in params:
            g = grads[key]
            state.moment1[key] = b1 * state.moment1[key] + (1 - b1) * g
            state.moment2[key] = b2 * state.moment2[key] + (1 - b2) * g * g
            m_hat = state.moment1[key] / (1 - b1**it)
            v_hat = state.moment2[key] / (1 - b2**it)
            params[key] -= lr * m_hat / (np.sqrt(v_hat) + eps)
        loss, grads = _objective_and_grads(params, precomps, observations, config, shading, mask0)
        _check_finite(loss, state)
        state.loss_history.append(loss)
        if callback is not None:
            callback(it, _maps_from_params(params, init))

    if state.loss_history[-1] > state.loss_history[0]:
        warnings.warn(
            f"fit ended above its starting loss "
            f"({state.loss_history[-1]:.6g} > {state.loss_history[0]:.6g})",
            stacklevel=2,
        )

    maps = _maps_from_params(params, init)
    lights = (
        [SHLight(params[f"light_{i}"].copy()) for i in range(len(observations))]
        if config.fit_light
        else None
    )
    return FitResult(
        maps=maps,
        lights=lights,
        loss_history=np.asarray(state.loss_history),
        state=state,
    )


def _check_finite(loss, state):
    if not np.isfinite(loss):
        raise FitDivergedError(
            f"loss became non-finite at iteration {state.iteration}", state=state
        )
