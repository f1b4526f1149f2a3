"""Command-line driver: preprocess, compose, demo-sample, ssim, golden.

Every command is deterministic given its config (seeds included), never
mutates its inputs, computes all outputs before writing any of them, and
writes each artifact atomically.  Each run emits a manifest that echoes every
parameter actually used and can itself be passed back via --config to
reproduce the run.
"""

from __future__ import annotations

import argparse
import io
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from tryonkit import __version__
from tryonkit.attention import AttentionLayerState, FeatureMap, adjust_attention
from tryonkit.compose import compose_input, make_agnostic, resize_mask
from tryonkit.config import RunConfig, load_config, write_manifest
from tryonkit.diffusion import gaussian_unit_denoiser, make_linear_schedule, plms_sample, sdedit_init
from tryonkit.metrics import SsimParams, ssim
from tryonkit.preprocess import preprocess_warped_garment
from tryonkit.raster import (
    BinaryMask,
    RasterImage,
    atomic_write_bytes,
    load_image,
    load_mask,
    load_segmentation,
    save_image,
    save_mask,
)

# Documented tolerances for the demo sampler against its analytic target.
DEMO_MEAN_TOLERANCE = 0.05
DEMO_VARIANCE_TOLERANCE = 0.05


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    updates: dict = {}
    if getattr(args, "mode", None):
        updates["preprocess"] = replace(cfg.preprocess, mode=args.mode)
    if getattr(args, "steps", None) is not None:
        updates["steps"] = args.steps
    if getattr(args, "strength", None) is not None:
        updates["strength"] = args.strength
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "out", None):
        paths = dict(cfg.paths)
        paths["out_dir"] = str(Path(args.out).resolve())
        updates["paths"] = paths
    return replace(cfg, **updates) if updates else cfg


def _preprocess_entries(cfg: RunConfig, inputs: dict[str, Path], out_dir: Path) -> dict:
    pre = cfg.preprocess
    entries = {
        "preprocess.mode": pre.mode,
        "preprocess.erosion_kernel": pre.erosion_kernel,
        "preprocess.bilateral_kernel": pre.bilateral_kernel,
        "preprocess.sigma_d": pre.sigma_d,
        "preprocess.sigma_r_train": pre.sigma_r_train,
        "preprocess.sigma_r_infer": pre.sigma_r_infer,
        "preprocess.torso_labels": pre.torso_labels,
        "used.sigma_r": pre.sigma_r,
        "paths.out_dir": str(out_dir),
    }
    for name, path in inputs.items():
        entries[f"paths.{name}"] = str(path)
    return entries


def run_preprocess(cfg: RunConfig) -> dict[str, Path]:
    """Preprocess a warped garment; returns the written artifact paths."""
    inputs = {
        "garment": cfg.path("garment"),
        "garment_mask": cfg.path("garment_mask"),
        "segmentation": cfg.path("segmentation"),
    }
    out_dir = Path(cfg.paths.get("out_dir", "out")).resolve()

    garment = load_image(inputs["garment"])
    mask = load_mask(inputs["garment_mask"])
    seg = load_segmentation(inputs["segmentation"])
    cleaned, cleaned_mask = preprocess_warped_garment(garment, mask, seg, cfg.preprocess)

    artifacts = {
        "warped_garment": out_dir / "warped_garment.png",
        "warped_mask": out_dir / "warped_mask.png",
        "manifest": out_dir / "preprocess_manifest.txt",
    }
    save_image(cleaned, artifacts["warped_garment"])
    save_mask(cleaned_mask, artifacts["warped_mask"])
    write_manifest(_preprocess_entries(cfg, inputs, out_dir), artifacts["manifest"])
    return artifacts


def run_compose(cfg: RunConfig) -> dict[str, Path]:
    """Compose the hybrid input; returns the written artifact paths."""
    inputs = {
        "agnostic": cfg.path("agnostic"),
        "keep_mask": cfg.path("keep_mask"),
        "warped": cfg.path("warped"),
        "warped_mask": cfg.path("warped_mask"),
    }
    out_dir = Path(cfg.paths.get("out_dir", "out")).resolve()

    # Gray-filled agnostic images are converted by zeroing outside the keep
    # mask; the warped garment is validated strictly instead.
    agnostic = make_agnostic(load_image(inputs["agnostic"]), load_mask(inputs["keep_mask"]))
    warped = load_image(inputs["warped"])
    warped_mask = load_mask(inputs["warped_mask"])
    composed = compose_input(agnostic, warped, warped_mask)

    factor = cfg.encode_factor
    h, w = composed.image.height, composed.image.width
    if h % factor or w % factor:
        raise ValueError(f"encode factor {factor} must divide image dimensions ({h}, {w})")
    lat_h, lat_w = h // factor, w // factor
    mask_resized = resize_mask(composed.mask, lat_h, lat_w, cfg.resize_threshold)
    warped_resized = resize_mask(composed.warped_mask, lat_h, lat_w, cfg.resize_threshold)

    entries = {
        "compose.encode_factor": factor,
        "compose.resize_threshold": cfg.resize_threshold,
        "paths.out_dir": str(out_dir),
    }
    for name, path in inputs.items():
        entries[f"paths.{name}"] = str(path)

    artifacts = {
        "composed_input": out_dir / "composed_input.png",
        "input_mask": out_dir / "input_mask.png",
        "input_mask_resized": out_dir / "input_mask_resized.png",
        "warped_mask_resized": out_dir / "warped_mask_resized.png",
        "manifest": out_dir / "compose_manifest.txt",
    }
    save_image(composed.image, artifacts["composed_input"])
    save_mask(composed.mask, artifacts["input_mask"])
    save_mask(mask_resized, artifacts["input_mask_resized"])
    save_mask(warped_resized, artifacts["warped_mask_resized"])
    write_manifest(entries, artifacts["manifest"])
    return artifacts


def render_latent(latent: np.ndarray) -> RasterImage:
    """Map a (C, h, w) latent to a small RGB raster with a fixed affine map.

    The map is pixel-local (0.5 + 0.25 * value, clipped), so differences
    between two latents stay confined to the pixels where they differ.
    """
    c = latent.shape[0]
    planes = [latent[min(i, c - 1)] for i in range(3)]
    rgb = np.stack(planes, axis=-1)
    return RasterImage(np.clip(0.5 + 0.25 * rgb, 0.0, 1.0))


def _demo_mask(cfg: RunConfig, lat_h: int, lat_w: int) -> BinaryMask:
    if cfg.has_path("demo_mask"):
        return resize_mask(load_mask(cfg.path("demo_mask")), lat_h, lat_w, cfg.resize_threshold)
    half = np.zeros((lat_h, lat_w), dtype=np.uint8)
    half[:, : lat_w // 2] = 1
    return BinaryMask(half)


def _save_npy(arr: np.ndarray, path: Path) -> None:
    buf = io.BytesIO()
    np.save(buf, arr)
    atomic_write_bytes(buf.getvalue(), path)


def run_demo_sample(cfg: RunConfig) -> dict[str, Path]:
    """Sample unit-normal latents with the analytic denoiser and PLMS.

    Trajectories start from partially noised draws of the unit-normal data
    prior, so the final latents must match N(0, I); the run fails if the
    sample statistics leave the documented tolerances.
    """
    out_dir = Path(cfg.paths.get("out_dir", "out")).resolve()
    if cfg.trajectories < 1:
        raise ValueError(f"diffusion.trajectories must be >= 1, got {cfg.trajectories}")
    if min(cfg.latent_channels, cfg.latent_height, cfg.latent_width) < 1:
        raise ValueError("latent dimensions must be positive")
    sched = make_linear_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end)
    shape = (cfg.trajectories, cfg.latent_channels, cfg.latent_height, cfg.latent_width)

    rng = np.random.default_rng(cfg.seed)
    clean = rng.standard_normal(shape)
    z_start, t_start = sdedit_init(clean, cfg.strength, sched, seed=cfg.seed + 1)
    final = plms_sample(gaussian_unit_denoiser(sched), z_start, t_start, sched, cfg.steps)

    mean = final.mean(axis=0)
    variance = final.var(axis=0)
    max_abs_mean = float(np.abs(mean).max())
    var_low = float(variance.min())
    var_high = float(variance.max())
    mean_ok = max_abs_mean <= DEMO_MEAN_TOLERANCE
    var_ok = (
        abs(var_low - 1.0) <= DEMO_VARIANCE_TOLERANCE
        and abs(var_high - 1.0) <= DEMO_VARIANCE_TOLERANCE
    )

    mask = _demo_mask(cfg, cfg.latent_height, cfg.latent_width)
    state = AttentionLayerState(
        alpha=cfg.alpha_init,
        channels=cfg.latent_channels,
        height=cfg.latent_height,
        width=cfg.latent_width,
        mode=cfg.attention_mode,
    )
    adjusted = adjust_attention(FeatureMap(final[0]), mask, state)
    rendered = render_latent(adjusted.data)

    entries = {
        "diffusion.timesteps": cfg.timesteps,
        "diffusion.beta_start": cfg.beta_start,
        "diffusion.beta_end": cfg.beta_end,
        "diffusion.steps": cfg.steps,
        "diffusion.strength": cfg.strength,
        "diffusion.seed": cfg.seed,
        "diffusion.latent_channels": cfg.latent_channels,
        "diffusion.latent_height": cfg.latent_height,
        "diffusion.latent_width": cfg.latent_width,
        "diffusion.trajectories": cfg.trajectories,
        "attention.mode": cfg.attention_mode,
        "attention.alpha_init": cfg.alpha_init,
        "paths.out_dir": str(out_dir),
        "used.start_timestep": t_start,
    }
    stats = {
        "used.max_abs_mean": max_abs_mean,
        "used.variance_min": var_low,
        "used.variance_max": var_high,
        "used.mean_within_tolerance": mean_ok,
        "used.variance_within_tolerance": var_ok,
    }

    artifacts = {
        "manifest": out_dir / "demo_manifest.txt",
        "stats": out_dir / "stats.txt",
        "latent_mean": out_dir / "latent_mean.npy",
        "latent_variance": out_dir / "latent_variance.npy",
        "sample": out_dir / "sample.png",
    }
    write_manifest(entries, artifacts["manifest"])
    write_manifest(stats, artifacts["stats"])
    _save_npy(mean, artifacts["latent_mean"])
    _save_npy(variance, artifacts["latent_variance"])
    save_image(rendered, artifacts["sample"])

    if not (mean_ok and var_ok):
        raise RuntimeError(
            f"sampled statistics violate tolerances: max |mean| {max_abs_mean:.4f} "
            f"(limit {DEMO_MEAN_TOLERANCE}), variance range [{var_low:.4f}, {var_high:.4f}] "
            f"(limit 1 +/- {DEMO_VARIANCE_TOLERANCE})"
        )
    return artifacts


GOLDEN_ARTIFACTS = (
    ("train", "warped_garment.png"),
    ("train", "warped_mask.png"),
    ("infer", "warped_garment.png"),
    ("infer", "warped_mask.png"),
    ("compose", "composed_input.png"),
    ("compose", "input_mask.png"),
    ("compose", "input_mask_resized.png"),
    ("compose", "warped_mask_resized.png"),
)


def run_golden(cfg: RunConfig, scratch: Path) -> list[str]:
    """Re-run preprocess (both modes) + compose and byte-compare to goldens.

    Returns the list of mismatching artifact names (empty means pass).
    """
    golden_dir = Path(cfg.path("golden_dir"))
    if not golden_dir.is_dir():
        raise FileNotFoundError(f"golden directory does not exist: {golden_dir}")

    for mode in ("train", "infer"):
        mode_cfg = replace(
            cfg,
            preprocess=replace(cfg.preprocess, mode=mode),
            paths={**cfg.paths, "out_dir": str(scratch / mode)},
        )
        run_preprocess(mode_cfg)

    compose_cfg = replace(
        cfg,
        paths={
            **cfg.paths,
            "warped": str(scratch / "infer" / "warped_garment.png"),
            "warped_mask": str(scratch / "infer" / "warped_mask.png"),
            "out_dir": str(scratch / "compose"),
        },
    )
    run_compose(compose_cfg)

    mismatches = []
    for subdir, name in GOLDEN_ARTIFACTS:
        produced = scratch / subdir / name
        expected = golden_dir / subdir / name
        if not expected.is_file():
            mismatches.append(f"{subdir}/{name} (golden file missing)")
        elif produced.read_bytes() != expected.read_bytes():
            mismatches.append(f"{subdir}/{name}")
    return mismatches


def _cmd_preprocess(args: argparse.Namespace) -> int:
    artifacts = run_preprocess(_load_run_config(args))
    for name, path in artifacts.items():
        print(f"{name}: {path}")
    return 0


def _cmd_compose(args: argparse.Namespace) -> int:
    artifacts = run_compose(_load_run_config(args))
    for name, path in artifacts.items():
        print(f"{name}: {path}")
    return 0


def _cmd_demo_sample(args: argparse.Namespace) -> int:
    artifacts = run_demo_sample(_load_run_config(args))
    for name, path in artifacts.items():
        print(f"{name}: {path}")
    return 0


def _cmd_ssim(args: argparse.Namespace) -> int:
    score = ssim(load_image(args.image_a), load_image(args.image_b), SsimParams())
    print(f"{score:.10f}")
    return 0


def _cmd_golden(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    if cfg.has_path("out_dir"):
        mismatches = run_golden(cfg, Path(cfg.paths["out_dir"]).resolve())
    else:
        with tempfile.TemporaryDirectory(prefix="tryonkit-golden-") as tmp:
            mismatches = run_golden(cfg, Path(tmp))
    if mismatches:
        print(f"golden mismatch: {mismatches[0]}", file=sys.stderr)
        return 1
    print(f"golden: all {len(GOLDEN_ARTIFACTS)} artifacts match")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tryonkit",
        description="Warped-garment preprocessing, hybrid composition, and sampling demos.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="plain-text key = value config file")
        p.add_argument("--out", help="output directory (overrides paths.out_dir)")

    p = sub.add_parser("preprocess", help="run the warped-garment preprocessing chain")
    common(p)
    p.add_argument("--mode", choices=("train", "infer"), help="range-sigma selection")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("compose", help="compose the hybrid inpainting input")
    common(p)
    p.set_defaults(func=_cmd_compose)

    p = sub.add_parser("demo-sample", help="sample with the analytic denoiser and PLMS")
    common(p)
    p.add_argument("--steps", type=int, help="number of sampling steps")
    p.add_argument("--strength", type=float, help="partial-noising strength in [0, 1]")
    p.add_argument("--seed", type=int, help="base seed for all noise draws")
    p.set_defaults(func=_cmd_demo_sample)

    p = sub.add_parser("ssim", help="print the SSIM score of two images")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.set_defaults(func=_cmd_ssim)

    p = sub.add_parser("golden", help="compare pipeline outputs to stored goldens")
    common(p)
    p.set_defaults(func=_cmd_golden)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        raise
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
