"""Batch command-line interface.

One binary, subcommand style. Human-readable tables go to stdout; the
``--json`` flag switches to line-oriented machine output. Options can come
from a JSON config file (``--config``) overridden by repeated
``--set key=value`` flags; every run that writes files also drops an
``effective_config`` provenance file so it can be reproduced exactly.

Exit codes: 0 success, 1 I/O or runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (DatasetManifest, load_image, save_image, save_pfm,
                      scan_bracket_groups, write_triplet)
from .image import Image, OpticalCenter, encoded, raster_center
from .optics import (SYMMETRIC_GHOST_PATH, GhostPath, LensPrescription,
                     RayState, ghost_ratio, make_symmetric_prescription,
                     trace_direct, trace_ghost)
from .prior import PRIOR_GAMMA, compute_prior
from .quality import masked_psnr, psnr, ssim
from .removal import SearchConfig, hdr_merge, remove_flare
from .scenes import write_demo_tree
from .synthesis import SynthesisConfig, generate
from .prior import build_sample  # noqa: F401  (re-exported for scripting)


class UsageError(Exception):
    """Bad flags or config: exits with code 2."""


def _parse_center(text: str | None, img: Image) -> OpticalCenter:
    if text is None:
        return raster_center(img)
    try:
        cx, cy = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--center expects 'cx,cy', got {text!r}") from exc
    center = OpticalCenter(cx, cy)
    center.validate_for(img)
    return center


def _coerce(value: str):
    """Best-effort typed parse of a --set value: JSON, then comma tuple,
    then bare string."""
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        pass
    if "," in value:
        try:
            return tuple(float(v) for v in value.split(","))
        except ValueError:
            pass
    return value


def _merge_config(config_path, sets, from_dict, what: str) -> dict:
    merged: dict = {}
    if config_path:
        try:
            merged.update(json.loads(Path(config_path).read_text()))
        except FileNotFoundError as exc:
            raise UsageError(f"config file not found: {config_path}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
    for item in sets or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        merged[key.strip()] = _coerce(value.strip())
    try:
        from_dict(merged)  # validate early so errors are usage errors
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad {what} config: {exc}") from exc
    return merged


def _write_provenance(target, payload: dict) -> None:
    """Drop the effective configuration next to what a command produced."""
    target = Path(target)
    if target.suffix:  # file output: sidecar named after it
        path = target.parent / f"{target.stem}.effective_config.json"
    else:
        target.mkdir(parents=True, exist_ok=True)
        path = target / "effective_config.json"
    payload = {"tool": f"reflare {__version__}", **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _emit(args, record: dict, human: str) -> None:
    print(json.dumps(record, sort_keys=True) if args.json else human)


# subcommands ----------------------------------------------------------------

def cmd_scan(args) -> int:
    pairs, warnings = scan_bracket_groups(args.root, group_size=args.group_size)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    for p in pairs:
        _emit(args, {"group": p.group_id, "width": p.normal.width,
                     "height": p.normal.height, "ev_step": p.ev_step},
              f"{p.group_id}: {p.normal.width}x{p.normal.height} "
              f"(ev step {p.ev_step:g})")
    _emit(args, {"groups": len(pairs), "skipped": len(warnings)},
          f"{len(pairs)} group(s), {len(warnings)} skipped")
    if args.out:
        report = {"root": str(args.root), "group_size": args.group_size,
                  "groups": [p.group_id for p in pairs], "warnings": warnings}
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ingest_report.json").write_text(json.dumps(report, indent=2))
        _write_provenance(out, {"command": "scan", "root": str(args.root),
                                "group_size": args.group_size})
    return 0


def cmd_synth(args) -> int:
    cfg_dict = _merge_config(args.config, args.set,
                             SynthesisConfig.from_dict, "synthesis")
    cfg = SynthesisConfig.from_dict(cfg_dict)
    pairs, warnings = scan_bracket_groups(args.in_dir)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not pairs:
        raise FileNotFoundError(f"no bracket groups under {args.in_dir}")
    count = args.count if args.count is not None else len(pairs)
    triplets = generate(pairs, cfg, args.seed, count, threads=args.threads)

    out = Path(args.out)
    manifest = DatasetManifest()
    for i, t in enumerate(triplets):
        pair_id = f"{args.seed:08d}_{i:05d}"
        prior = compute_prior(t.corrupted, raster_center(t.corrupted)) \
            if args.with_prior else None
        write_triplet(out, t, manifest, pair_id, prior=prior)
        _emit(args, {"pair_id": pair_id, "gamma": t.params.gamma,
                     "opacity": t.params.opacity},
              f"{pair_id}: gamma={t.params.gamma:.3f} "
              f"opacity={t.params.opacity:.3f}")
    manifest.save(out / "manifest.jsonl")
    _write_provenance(out, {"command": "synth", "in": str(args.in_dir),
                            "seed": args.seed, "count": count,
                            "threads": args.threads, "with_prior":
                            bool(args.with_prior), "config": cfg.to_dict()})
    _emit(args, {"written": count, "out": str(out)},
          f"wrote {count} triplet(s) to {out}")
    return 0


def cmd_prior(args) -> int:
    img = load_image(args.in_path)
    center = _parse_center(args.center, img)
    out = compute_prior(img, center, gamma_p=args.gamma_p)
    save_image(args.out, out)
    _write_provenance(Path(args.out), {
        "command": "prior", "in": str(args.in_path), "gamma_p": args.gamma_p,
        "center": [center.cx, center.cy]})
    _emit(args, {"out": str(args.out)}, f"wrote {args.out}")
    return 0


def _panel(*images: Image, gap: int = 8) -> Image:
    """Side-by-side comparison strip with white separators."""
    h = images[0].height
    sep = np.ones((h, gap, 3))
    cols: list[np.ndarray] = []
    for i, img in enumerate(images):
        if i:
            cols.append(sep)
        cols.append(np.clip(img.data, 0.0, 1.0))
    return Image(np.concatenate(cols, axis=1), images[0].domain)


def cmd_remove(args) -> int:
    cfg_dict = _merge_config(args.config, args.set,
                             lambda d: SearchConfig(**d), "search")
    cfg = SearchConfig(**cfg_dict)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for in_path in args.in_paths:
        img = load_image(in_path, encoded(cfg.gamma))
        center = _parse_center(args.center, img)
        result = remove_flare(img, center, cfg, passes=args.passes)
        stem = Path(in_path).stem
        save_image(out_dir / f"{stem}.clean.png", result.flare_free_est)
        save_image(out_dir / f"{stem}.flare.png", result.flare_est)
        save_image(out_dir / f"{stem}.panel.png",
                   _panel(img, result.flare_free_est, result.flare_est),
                   bit_depth=8)
        p = result.params
        _emit(args, {"in": str(in_path), "improved": p.improved,
                     "gains": list(p.gains), "blur_sigma": p.blur_sigma,
                     "offset": list(p.offset), "objective": p.objective},
              f"{in_path}: improved={p.improved} gains="
              f"({p.gains[0]:.4f},{p.gains[1]:.4f},{p.gains[2]:.4f}) "
              f"sigma={p.blur_sigma:.3f} offset=({p.offset[0]:+.3f},"
              f"{p.offset[1]:+.3f})")
    _write_provenance(out_dir, {
        "command": "remove", "in": [str(p) for p in args.in_paths],
        "center": args.center, "passes": args.passes,
        "config": cfg.__dict__})
    return 0


def cmd_hdr(args) -> int:
    img = load_image(args.in_path, encoded(args.gamma))
    flare = load_image(args.flare, encoded(args.gamma))
    center = _parse_center(args.center, img)
    merged = hdr_merge(img, flare, center, ev_step=args.ev)
    save_pfm(args.out, merged)
    _write_provenance(Path(args.out), {
        "command": "hdr", "in": str(args.in_path), "flare": str(args.flare),
        "ev": args.ev, "gamma": args.gamma, "center": [center.cx, center.cy]})
    _emit(args, {"out": str(args.out), "peak": float(merged.data.max())},
          f"wrote {args.out} (peak radiance {merged.data.max():.3f})")
    return 0


def cmd_simulate(args) -> int:
    if args.prescription:
        lens = LensPrescription.from_file(args.prescription)
    else:
        lens = make_symmetric_prescription()
    if args.path:
        try:
            first, second = (int(v) for v in args.path.split(","))
        except ValueError as exc:
            raise UsageError(f"--path expects 'first,second', got {args.path!r}"
                             ) from exc
        path = GhostPath(first, second)
    else:
        path = SYMMETRIC_GHOST_PATH

    if args.save_prescription:
        lens.to_file(args.save_prescription)

    ratio = ghost_ratio(lens, path)
    heights = np.linspace(0.1, 1.0, args.sweep)
    thetas = (-0.02, 0.0, 0.02)
    if not args.json:
        print(f"{'h':>8} {'theta':>8} {'h0':>12} {'h1':>12} {'k':>12}")
    for h in heights:
        for theta in thetas:
            ray = RayState(float(h), float(theta))
            h0 = trace_direct(lens, ray).h
            h1 = trace_ghost(lens, ray, path).h
            k = h1 / h0 if h0 != 0 else float("nan")
            _emit(args, {"h": float(h), "theta": theta, "h0": h0, "h1": h1,
                         "k": k},
                  f"{h:8.3f} {theta:8.3f} {h0:12.6f} {h1:12.6f} {k:12.6f}")
    _emit(args, {"k": ratio.k, "residual": ratio.residual},
          f"fitted k = {ratio.k:.9f}  (rms residual {ratio.residual:.3e})")
    return 0


def cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    mask_dir = Path(args.mask) if args.mask else None
    names = sorted(p.name for p in pred_dir.glob("*.png"))
    if not names:
        raise FileNotFoundError(f"no .png predictions under {pred_dir}")
    rows = []
    for name in names:
        pred = load_image(pred_dir / name)
        gt = load_image(gt_dir / name)
        row = {"name": name, "psnr": psnr(pred, gt), "ssim": ssim(pred, gt)}
        if mask_dir is not None:
            mask = load_image(mask_dir / name).data[:, :, 0] > 0.5
            row["masked_psnr"] = masked_psnr(pred, gt, mask)
        rows.append(row)
        _emit(args, row,
              f"{name}: psnr={row['psnr']:.2f} ssim={row['ssim']:.4f}"
              + (f" masked_psnr={row['masked_psnr']:.2f}"
                 if "masked_psnr" in row else ""))
    summary = {"count": len(rows)}
    for key in ("psnr", "ssim", "masked_psnr"):
        vals = [r[key] for r in rows if key in r]
        if vals:
            summary[f"mean_{key}"] = float(np.mean(vals))
    _emit(args, summary,
          "mean: " + "  ".join(f"{k[5:]}={v:.4f}" for k, v in summary.items()
                               if k.startswith("mean_")))
    return 0


def cmd_make_demo(args) -> int:
    ids = write_demo_tree(args.out, count=args.count, seed=args.seed,
                          size=args.size)
    _write_provenance(Path(args.out), {
        "command": "make-demo", "count": args.count, "seed": args.seed,
        "size": args.size})
    _emit(args, {"groups": ids, "out": str(args.out)},
          f"wrote {len(ids)} demo group(s) to {args.out}")
    return 0


# parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reflare",
        description="Reflective-flare simulation, synthesis, and removal.")
    parser.add_argument("--version", action="version",
                        version=f"reflare {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master RNG seed")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for batch commands")
    common.add_argument("--json", action="store_true",
                        help="line-oriented JSON output instead of tables")
    common.add_argument("--verbose", "-v", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", parents=[common],
                       help="ingest a bracketed-exposure tree")
    p.add_argument("root")
    p.add_argument("--group-size", type=int, default=5)
    p.add_argument("--out", help="optional report directory")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("synth", parents=[common],
                       help="generate semi-synthetic flare triplets")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file mirroring SynthesisConfig")
    p.add_argument("--set", action="append",
                   help="override one config key, e.g. --set crop=256")
    p.add_argument("--count", type=int, help="triplets to emit "
                   "(default: one per bracket group)")
    p.add_argument("--with-prior", action="store_true",
                   help="also store the prior image per triplet")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prior", parents=[common],
                       help="compute the center-symmetry prior image")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--center", help="optical center 'cx,cy' "
                   "(default: raster center)")
    p.add_argument("--gamma-p", type=float, default=PRIOR_GAMMA)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prior)

    p = sub.add_parser("remove", parents=[common],
                       help="optimization-based flare removal")
    p.add_argument("--in", dest="in_paths", nargs="+", required=True)
    p.add_argument("--center")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help="JSON file mirroring SearchConfig")
    p.add_argument("--set", action="append",
                   help="override one search key, e.g. --set dilation=40")
    p.add_argument("--passes", type=int, default=1)
    p.set_defaults(func=cmd_remove)

    p = sub.add_parser("hdr", parents=[common],
                       help="reconstruct saturated sources from the flare")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--flare", required=True)
    p.add_argument("--center")
    p.add_argument("--ev", type=float, default=12.0)
    p.add_argument("--gamma", type=float, default=2.2)
    p.add_argument("--out", required=True, help="output .pfm path")
    p.set_defaults(func=cmd_hdr)

    p = sub.add_parser("simulate", parents=[common],
                       help="paraxial ghost simulation and k report")
    p.add_argument("--prescription", help="lens prescription file "
                   "(default: bundled symmetric design)")
    p.add_argument("--path", help="ghost reflectors 'first,second'")
    p.add_argument("--sweep", type=int, default=10,
                   help="number of field heights in the table")
    p.add_argument("--save-prescription", help="write the prescription used")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", parents=[common],
                       help="PSNR/SSIM tables for prediction directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask", help="optional mask directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("make-demo", parents=[common],
                       help="write a procedural demo bracket tree")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=3)
    p.add_argument("--size", type=int, default=512)
    p.set_defaults(func=cmd_make_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        if getattr(args, "verbose", False):
            raise
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
