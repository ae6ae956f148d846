"""Command-line interface.

Subcommands: ``deblur`` (blind end to end), ``estimate-kernel`` (blind
kernel only), ``deconv`` (non-blind with a supplied kernel), ``structure``
(salient-structure maps), ``synth`` (synthetic blur generator) and ``eval``
(batch scoring of a dataset directory).

Exit codes: 0 success, 1 processing failure (textureless input, numerical
breakdown), 2 usage or I/O problems.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fileio, metrics, synth
from .core import poisson_reconstruct
from .deconv import adaptive_deconv, tv_deconv
from .errors import DeblurError, InvalidInputError
from .kernel_est import project_kernel
from .pipeline import DeblurConfig, deblur_blind, estimate_blur_kernel, load_config, structure_pass
from .structure import salient_mask

_CONFIG_FLAGS = {
    "theta0": float, "lambda_c": float, "lambda_final": float, "gamma": float,
    "alpha": float, "itr": int, "inner_iters": int, "decay": float, "window": int,
    "mu": float, "threshold": float, "shock_dt": float, "shock_steps": int,
    "tv_iters": int, "tv_tol": float, "irls_iters": int, "cg_iters_kernel": int,
    "cg_iters_interim": int, "cg_iters_final": int, "weight_floor": float,
}

_DEFAULT_KERNEL_SIZE = 15


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="config file of 'key = value' lines")
    parser.add_argument("--kernel-size", type=int, metavar="N",
                        help="blur kernel side length (odd)")
    parser.add_argument("--mask-rule", choices=("magnitude", "conjunction"),
                        help="salient-edge mask rule (default magnitude)")
    group = parser.add_argument_group("parameter overrides")
    for name, typ in _CONFIG_FLAGS.items():
        group.add_argument("--" + name.replace("_", "-"), type=typ, dest=name,
                           help="override config key %r" % name)


def _build_config(args, kernel_size_required: bool = True) -> DeblurConfig:
    kernel_size = getattr(args, "kernel_size", None)
    if args.config:
        cfg = load_config(args.config, kernel_size=kernel_size)
    else:
        if kernel_size is None:
            if kernel_size_required:
                raise InvalidInputError("config: --kernel-size is required without a config file")
            kernel_size = _DEFAULT_KERNEL_SIZE
        cfg = DeblurConfig(kernel_size=kernel_size)
    overrides = {}
    for name in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "mask_rule", None):
        overrides["mask_rule"] = args.mask_rule
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validate()


def _parse_crop(spec: str | None):
    if spec is None:
        return None
    try:
        x, y, w, h = (int(tok) for tok in spec.split(","))
    except ValueError as exc:
        raise InvalidInputError("crop: expected 'x,y,w,h', got %r" % spec) from exc
    return (x, y, w, h)


def _kernel_out_paths(args) -> tuple:
    if args.kernel_out:
        txt = Path(args.kernel_out)
    else:
        out = Path(args.output)
        txt = out.with_name(out.stem + "_kernel.txt")
    return txt, txt.with_suffix(".png")


def _progress_printer(enabled: bool):
    if not enabled:
        return None

    def hook(level, iteration, kernel, threshold):
        print("level %d iter %d: kernel %dx%d, threshold %.5f"
              % (level, iteration, kernel.shape[0], kernel.shape[1], threshold), file=sys.stderr)

    return hook


def _cmd_deblur(args) -> int:
    cfg = _build_config(args)
    image = fileio.read_image(args.input)
    kernel, restored, _ = deblur_blind(image, cfg, crop=_parse_crop(args.crop),
                                       progress=_progress_printer(args.verbose))
    fileio.write_image(args.output, restored, bit_depth=args.bit_depth)
    txt, png = _kernel_out_paths(args)
    fileio.write_kernel(txt, kernel)
    fileio.write_kernel_image(png, kernel)
    print("deblur: wrote %s, %s, %s" % (args.output, txt, png))
    return 0


def _cmd_estimate_kernel(args) -> int:
    cfg = _build_config(args)
    image = fileio.read_image(args.input)
    crop = _parse_crop(args.crop)
    if crop is not None:
        x, y, w, h = crop
        if y + h > image.shape[0] or x + w > image.shape[1] or x < 0 or y < 0:
            raise InvalidInputError("crop: rectangle %s outside image %s" % (crop, image.shape[:2]))
        image = image[y : y + h, x : x + w]
    result = estimate_blur_kernel(image, cfg, progress=_progress_printer(args.verbose))
    txt = Path(args.output)
    fileio.write_kernel(txt, result.kernel)
    fileio.write_kernel_image(txt.with_suffix(".png"), result.kernel)
    print("estimate-kernel: wrote %s and %s" % (txt, txt.with_suffix(".png")))
    return 0


def _cmd_deconv(args) -> int:
    kernel = fileio.read_kernel(args.kernel)
    kernel, _ = project_kernel(kernel)
    if getattr(args, "kernel_size", None) is None:
        args.kernel_size = max(kernel.shape)
    cfg = _build_config(args)
    image = fileio.read_image(args.input)
    if args.method == "tv":
        if image.ndim == 2:
            restored = tv_deconv(image, kernel, cfg.lambda_c, cfg.deconv_params())
        else:
            restored = np.dstack([
                tv_deconv(image[:, :, c], kernel, cfg.lambda_c, cfg.deconv_params())
                for c in range(image.shape[2])
            ])
    else:
        _, _, _, grad_s = structure_pass(image, cfg)
        restored = adaptive_deconv(image, kernel, grad_s, cfg.lambda_final, cfg.deconv_params())
    fileio.write_image(args.output, np.clip(restored, 0.0, 1.0), bit_depth=args.bit_depth)
    print("deconv: wrote %s" % args.output)
    return 0


def _cmd_structure(args) -> int:
    cfg = _build_config(args, kernel_size_required=False)
    image = fileio.read_image(args.input)
    structure, enhanced, t, grad_s = structure_pass(image, cfg)
    prefix = Path(args.output)
    structure_path = prefix.with_name(prefix.name + "_structure.png")
    mask_path = prefix.with_name(prefix.name + "_mask.png")
    edges_path = prefix.with_name(prefix.name + "_edges.png")
    fileio.write_image(structure_path, np.clip(structure, 0.0, 1.0))
    fileio.write_image(mask_path, salient_mask(enhanced, t, cfg.mask_rule).astype(float))
    fileio.write_image(edges_path, np.clip(poisson_reconstruct(grad_s), 0.0, 1.0))
    print("structure: wrote %s, %s, %s (threshold %.5f)"
          % (structure_path, mask_path, edges_path, t))
    return 0


def _cmd_synth(args) -> int:
    if args.input:
        sharp = fileio.read_image(args.input)
    elif args.chart:
        sharp = synth.test_chart(args.chart)
    else:
        raise InvalidInputError("synth: provide --input or --chart")
    if args.kernel:
        kernel = fileio.read_kernel(args.kernel)
        total = kernel.sum()
        if total <= 0:
            raise InvalidInputError("synth: kernel file has no positive mass")
        kernel = kernel / total
    else:
        size = args.kernel_size or _DEFAULT_KERNEL_SIZE
        kernel = synth.kernel_preset(args.preset, size)
    blurred = synth.synthesize(sharp, kernel, noise_sigma=args.noise_sigma, seed=args.seed)
    fileio.write_image(args.output, blurred, bit_depth=args.bit_depth)
    written = [str(args.output)]
    if args.kernel_out:
        fileio.write_kernel(args.kernel_out, kernel)
        written.append(str(args.kernel_out))
    if args.sharp_out:
        fileio.write_image(args.sharp_out, sharp, bit_depth=args.bit_depth)
        written.append(str(args.sharp_out))
    print("synth: wrote %s" % ", ".join(written))
    return 0


def _cmd_eval(args) -> int:
    cfg = None
    if args.config or getattr(args, "kernel_size", None) is not None:
        cfg = _build_config(args)
    results, table = metrics.evaluate_directory(args.input, csv_path=args.output, config=cfg)
    for name, rep in results:
        print("%s: ssde=%.6g psnr=%.2f error_ratio=%.4g shift=%s"
              % (name, rep.ssde, rep.psnr_db, rep.error_ratio, rep.alignment_shift))
    print("cumulative error-ratio table:")
    for threshold, fraction in table:
        print("  <= %-4g : %5.1f%%" % (threshold, 100.0 * fraction))
    if args.output:
        print("eval: wrote %s" % args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salientdeblur",
        description="Blind motion deblurring from salient structure, plus "
                    "synthesis and evaluation utilities.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("deblur", help="estimate the kernel and restore the image")
    p.add_argument("--input", required=True, help="blurred image (PNG/PNM)")
    p.add_argument("--output", required=True, help="restored image path")
    p.add_argument("--kernel-out", help="kernel text output (default: <output>_kernel.txt)")
    p.add_argument("--crop", metavar="X,Y,W,H", help="estimate the kernel on this region only")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)
    p.add_argument("--verbose", action="store_true", help="log per-iteration progress")
    _add_config_flags(p)
    p.set_defaults(handler=_cmd_deblur)

    p = sub.add_parser("estimate-kernel", help="blind kernel estimation only")
    p.add_argument("--input", required=True, help="blurred image")
    p.add_argument("--output", required=True, help="kernel text output path")
    p.add_argument("--crop", metavar="X,Y,W,H", help="estimate on this region only")
    p.add_argument("--verbose", action="store_true")
    _add_config_flags(p)
    p.set_defaults(handler=_cmd_estimate_kernel)

    p = sub.add_parser("deconv", help="non-blind deconvolution with a given kernel")
    p.add_argument("--input", required=True, help="blurred image")
    p.add_argument("--kernel", required=True, help="kernel text file")
    p.add_argument("--output", required=True, help="restored image path")
    p.add_argument("--method", choices=("tv", "adaptive"), default="tv")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)
    _add_config_flags(p)
    p.set_defaults(handler=_cmd_deconv)

    p = sub.add_parser("structure", help="write structure, mask and edge maps")
    p.add_argument("--input", required=True, help="input image")
    p.add_argument("--output", required=True, help="output path prefix")
    _add_config_flags(p)
    p.set_defaults(handler=_cmd_structure)

    p = sub.add_parser("synth", help="blur a sharp image and add seeded noise")
    p.add_argument("--input", help="sharp source image")
    p.add_argument("--chart", type=int, metavar="SIZE", help="use the built-in test chart")
    p.add_argument("--kernel", help="kernel text file to blur with")
    p.add_argument("--preset", choices=synth.KERNEL_PRESETS, default="line-d",
                   help="kernel preset when no --kernel file is given")
    p.add_argument("--kernel-size", type=int, help="preset kernel size (odd)")
    p.add_argument("--noise-sigma", type=float, default=0.0, help="Gaussian noise level")
    p.add_argument("--seed", type=int, default=0, help="noise seed (reproducible)")
    p.add_argument("--output", required=True, help="blurred image path")
    p.add_argument("--kernel-out", help="also write the kernel used")
    p.add_argument("--sharp-out", help="also write the sharp source image")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=16)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("eval", help="score a dataset directory of cases")
    p.add_argument("--input", required=True, help="dataset root directory")
    p.add_argument("--output", help="CSV report path")
    _add_config_flags(p)
    p.set_defaults(handler=_cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except InvalidInputError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print("error: i/o failure: %s" % exc, file=sys.stderr)
        return 2
    except DeblurError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
