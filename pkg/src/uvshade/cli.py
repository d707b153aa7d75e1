"""Command-line front end.

Exit codes (frozen for scripting): 0 success, 1 usage error, 2 data or
format error, 3 numeric failure (failed gradient check, diverged fit).
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import envlight, fitter, gradients, shcore, texio
from .errors import ContractError, FitDivergedError, FormatError
from .shader import ShadingConfig, ShadedTexture, TextureMapSet, ViewModel, shade_texture

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_vec3(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise _UsageError(f"expected 'x,y,z', got {text!r}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise _UsageError(f"non-numeric vector component in {text!r}") from None


def _parse_view(text: str) -> ViewModel:
    vec = _parse_vec3(text)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise _UsageError("view direction must be nonzero")
    return ViewModel.constant(vec / norm)


def build_parser() -> _Parser:
    parser = _Parser(prog="uvshade", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="global random seed")
    parser.add_argument("--threads", type=int, default=1, help="worker pool size")
    parser.add_argument("--verbose", action="store_true", help="chatty progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis", help="evaluate one SH basis function")
    p.add_argument("--l", type=int, required=True, help="degree, 0..8")
    p.add_argument("--m", type=int, required=True, help="order, -l..l")
    p.add_argument("--dir", required=True, help="direction x,y,z (normalized if needed)")

    p = sub.add_parser("project", help="project an environment map onto SH coefficients")
    p.add_argument("--env", required=True, help="equirectangular HDR image (.pfm/.png)")
    p.add_argument("--order", type=int, default=shcore.L_MAX, help="highest degree, <= 8")
    p.add_argument("--out", required=True, help="output coefficient file")

    p = sub.add_parser("render-env", help="render SH coefficients back to a map")
    p.add_argument("--coeffs", required=True, help="coefficient file")
    p.add_argument("--width", type=int, required=True, help="output width (even)")
    p.add_argument("--out", required=True, help="output image (.pfm)")

    p = sub.add_parser("shade", help="shade intrinsic maps under an SH light")
    p.add_argument("--diffuse", required=True)
    p.add_argument("--specular", required=True)
    p.add_argument("--ao", required=True)
    p.add_argument("--transl", required=True)
    p.add_argument("--normal", required=True, help="encoded normal map")
    p.add_argument("--light", required=True, help="coefficient file")
    p.add_argument("--view", default="0,0,1", help="constant view direction x,y,z")
    p.add_argument("--mask", default=None, help="optional validity mask (png)")
    p.add_argument("--sigma", type=float, default=0.25, help="specular roughness")
    p.add_argument("--out", required=True, help="output shaded texture (.pfm)")

    p = sub.add_parser("gradcheck", help="verify analytic gradients by finite differences")
    p.add_argument("--seed", dest="sample_seed", type=int, default=None,
                   help="sample seed (default: the global --seed)")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--h", type=float, default=1e-4, help="central-difference step")
    p.add_argument("--tol", type=float, default=1e-5, help="relative tolerance")
    p.add_argument("--with-normal", action="store_true", help="also check normal partials")

    p = sub.add_parser("fit", help="recover intrinsic maps from shaded observations")
    p.add_argument("--target", action="append", required=True, help="shaded texture (repeatable)")
    p.add_argument("--light", action="append", required=True, help="light per target (repeatable)")
    p.add_argument("--view", default="0,0,1", help="constant view direction x,y,z")
    p.add_argument("--normal", default=None, help="fixed normal map (default: flat)")
    p.add_argument("--mask", default=None, help="optional validity mask (png)")
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--init", default="from-target-heuristic", choices=fitter.INIT_MODES)
    p.add_argument("--fit-light", action="store_true")
    p.add_argument("--lambda-light", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.25, help="specular roughness")
    p.add_argument("--out-dir", required=True)
    return parser


def _load_scalar_map(path, name, reference_shape=None, reference_name=None):
    img, _ = texio.read_image(path)
    if img.ndim != 2:
        raise FormatError(f"{name} map {path} must be 1-channel, got shape {img.shape}")
    _check_res(img.shape, name, reference_shape, reference_name)
    return img


def _check_res(shape, name, reference_shape, reference_name):
    if reference_shape is not None and shape[:2] != reference_shape[:2]:
        raise ContractError(
            f"resolution mismatch: {reference_name} is "
            f"{reference_shape[1]}x{reference_shape[0]}, {name} is {shape[1]}x{shape[0]}"
        )


def _load_maps(args) -> TextureMapSet:
    diffuse, _ = texio.read_image(args.diffuse)
    if diffuse.ndim != 3:
        raise FormatError(f"diffuse map {args.diffuse} must be 3-channel")
    ref, ref_name = diffuse.shape, "diffuse"
    specular = _load_scalar_map(args.specular, "specular", ref, ref_name)
    ao = _load_scalar_map(args.ao, "ao", ref, ref_name)
    transl = _load_scalar_map(args.transl, "transl", ref, ref_name)
    normal_img, _ = texio.read_image(args.normal)
    _check_res(normal_img.shape, "normal", ref, ref_name)
    normals, normal_valid = texio.decode_normals(normal_img)
    mask = normal_valid
    if args.mask is not None:
        file_mask = texio.read_mask(args.mask)
        _check_res(file_mask.shape, "mask", ref, ref_name)
        mask = mask & file_mask
    return TextureMapSet(
        diffuse=np.clip(diffuse, 0.0, 1.0),
        specular=np.clip(specular, 0.0, 1.0),
        ambient_occlusion=np.clip(ao, 0.0, 1.0),
        translucency=np.clip(transl, 0.0, 1.0),
        normal=normals,
        mask=mask,
    )


def cmd_basis(args) -> int:
    if not 0 <= args.l <= shcore.L_MAX:
        raise _UsageError(f"--l must be in [0, {shcore.L_MAX}]")
    if abs(args.m) > args.l:
        raise _UsageError(f"--m must be in [-{args.l}, {args.l}]")
    vec = _parse_vec3(args.dir)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise _UsageError("--dir must be nonzero")
    value = shcore.sh_eval(args.l, args.m, vec / norm)
    print(f"{value:.6f}")
    return EXIT_OK


def cmd_project(args) -> int:
    if not 0 <= args.order <= shcore.L_MAX:
        raise _UsageError(f"--order must be in [0, {shcore.L_MAX}]")
    img, _ = texio.read_image(args.env)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=-1)
    env = envlight.EnvironmentMap(img)
    light = envlight.project_envmap(env, l_max=args.order, threads=args.threads)
    texio.write_coeffs(light, args.out)
    for l in range(args.order + 1):
        sl = slice(l * l, (l + 1) * (l + 1))
        energy = float(np.sum(light.coeffs[:, sl] ** 2))
        print(f"band l={l}: energy {energy:.6g}")
    return EXIT_OK


def cmd_render_env(args) -> int:
    if args.width <= 0 or args.width % 2:
        raise _UsageError("--width must be positive and even")
    light = texio.read_coeffs(args.coeffs)
    env = envlight.render_envmap(light, args.width, threads=args.threads)
    texio.write_image(env.radiance, args.out, format="pfm")
    if args.verbose:
        print(f"wrote {args.out} ({args.width}x{args.width // 2})")
    return EXIT_OK


def cmd_shade(args) -> int:
    maps = _load_maps(args)
    light = texio.read_coeffs(args.light)
    view = _parse_view(args.view)
    config = ShadingConfig(sigma=args.sigma)
    shaded = shade_texture(maps, view, light, config=config, threads=args.threads)
    texio.write_image(shaded.rgb, args.out, format="pfm")
    valid = shaded.mask
    mean = float(shaded.rgb[valid].mean()) if valid.any() else 0.0
    print(f"mean radiance {mean:.6f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = args.sample_seed if args.sample_seed is not None else args.seed
    report = gradients.fd_check(
        seed=seed,
        samples=args.samples,
        h=args.h,
        tolerance=args.tol,
        include_normal=args.with_normal,
    )
    print(report.format())
    return EXIT_OK if report.passed else EXIT_NUMERIC


def cmd_fit(args) -> int:
    if len(args.target) != len(args.light):
        raise _UsageError(
            f"--target and --light must pair up, got {len(args.target)} vs {len(args.light)}"
        )
    view = _parse_view(args.view)
    targets = []
    ref = None
    for path in args.target:
        img, _ = texio.read_image(path)
        if img.ndim != 3:
            raise FormatError(f"target {path} must be 3-channel")
        if ref is None:
            ref = img.shape
        else:
            _check_res(img.shape, path, ref, args.target[0])
        targets.append(img)
    lights = [texio.read_coeffs(p) for p in args.light]

    h, w = ref[:2]
    mask = np.ones((h, w), dtype=bool)
    if args.mask is not None:
        file_mask = texio.read_mask(args.mask)
        _check_res(file_mask.shape, "mask", ref, args.target[0])
        mask &= file_mask
    if args.normal is not None:
        normal_img, _ = texio.read_image(args.normal)
        _check_res(normal_img.shape, "normal", ref, args.target[0])
        normals, normal_valid = texio.decode_normals(normal_img)
        mask &= normal_valid
    else:
        normals = np.zeros((h, w, 3))
        normals[..., 2] = 1.0

    observations = [
        fitter.Observation(target=ShadedTexture(rgb=img, mask=mask), light=light, view=view)
        for img, light in zip(targets, lights)
    ]
    config = fitter.FitConfig(
        iterations=args.iters,
        learning_rate=args.lr,
        lambda_light=args.lambda_light,
        fit_light=args.fit_light,
        seed=args.seed,
        init_mode=args.init,
    )
    init = fitter.init_maps(
        args.init, width=w, height=h, seed=args.seed, observation=observations[0]
    )
    init = TextureMapSet(
        diffuse=init.diffuse,
        specular=init.specular,
        ambient_occlusion=init.ambient_occlusion,
        translucency=init.translucency,
        normal=normals,
        mask=mask,
    )
    result = fitter.fit(
        observations, config, init=init, shading=ShadingConfig(sigma=args.sigma)
    )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    maps = result.maps
    texio.write_image(maps.diffuse, out_dir / "diffuse.pfm")
    texio.write_image(maps.specular, out_dir / "specular.pfm")
    texio.write_image(maps.ambient_occlusion, out_dir / "ambient_occlusion.pfm")
    texio.write_image(maps.translucency, out_dir / "translucency.pfm")
    texio.write_image(texio.encode_normals(maps.normal), out_dir / "normal.pfm")
    texio.write_mask(maps.mask, out_dir / "mask.png")
    if result.lights is not None:
        for i, light in enumerate(result.lights):
            texio.write_coeffs(light, out_dir / f"light_{i}.csv")
    lines = ["iteration,loss"]
    lines += [f"{i},{loss:.17g}" for i, loss in enumerate(result.loss_history)]
    (out_dir / "loss_history.csv").write_text("\n".join(lines) + "\n")
    if args.verbose:
        print(f"wrote fitted maps to {out_dir}")
    print(f"final loss {result.loss_history[-1]:.6f}")
    return EXIT_OK


_COMMANDS = {
    "basis": cmd_basis,
    "project": cmd_project,
    "render-env": cmd_render_env,
    "shade": cmd_shade,
    "gradcheck": cmd_gradcheck,
    "fit": cmd_fit,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ContractError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FitDivergedError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        if exc.state is not None:
            print(
                f"  aborted at iteration {exc.state.iteration}; "
                f"last losses: {exc.state.loss_history[-5:]}",
                file=sys.stderr,
            )
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
