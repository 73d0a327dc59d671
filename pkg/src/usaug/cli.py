"""``usaug`` command line.

Exit codes: 0 success, 1 configuration error, 2 dataset integrity error,
3 processing error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .io import Pair, discover, load_sample, report_dict, validate_dataset, write_image_png, write_mask_png
from .pipeline import (
    OPS,
    RangeConfig,
    augment_item,
    compose,
    derive_stream,
    quantize_image,
    sample_params,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATASET, EXIT_PROCESSING = 0, 1, 2, 3

MANIFEST_NAME = "manifest.jsonl"
GUTTER = 4
CONTOUR_RGB = (255, 220, 0)
GUTTER_VALUE = 32


def _err(msg: str):
    print(f"usaug: {msg}", file=sys.stderr)


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "replicas", None) is not None:
        changes["replicas"] = args.replicas
    return dataclasses.replace(cfg, **changes)


def _checked_pairs(root) -> list[Pair] | None:
    pairs, findings = validate_dataset(root)
    errors = [f for f in findings if f.severity == "error"]
    for f in errors:
        _err(str(f))
    return None if errors else pairs


def _augment_job(job):
    pair, ranges, seed, item, replica, out_dir = job
    try:
        sample = load_sample(pair)
        out, record = augment_item(sample, ranges, seed, item, replica)
        image_rel = f"images/{record.output_id}.png"
        mask_rel = f"masks/{record.output_id}.png"
        write_image_png(out_dir / image_rel, quantize_image(out.image))
        write_mask_png(out_dir / mask_rel, out.mask)
    except Exception as exc:  # reported with the failing item
        return None, f"{pair.stem} (item {item}, replica {replica}): {type(exc).__name__}: {exc}"
    line = record.to_dict()
    line.update(image_file=image_rel, mask_file=mask_rel, bit_depth=16)
    return json.dumps(line, sort_keys=True, separators=(",", ":")), None


def cmd_augment(args) -> int:
    try:
        cfg = _config(args)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    if not (args.output or cfg.output):
        _err("config error: no output directory (use -o or the 'output' key)")
        return EXIT_CONFIG
    out_dir = Path(args.output or cfg.output)

    pairs = _checked_pairs(args.input)
    if pairs is None:
        return EXIT_DATASET

    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    jobs = [
        (pair, cfg.ranges, cfg.seed, item, replica, out_dir)
        for item, pair in enumerate(pairs)
        for replica in range(cfg.replicas)
    ]
    if args.threads > 1:
        pool_cls = ProcessPoolExecutor if args.processes else ThreadPoolExecutor
        with pool_cls(max_workers=args.threads) as pool:
            results = list(pool.map(_augment_job, jobs))
    else:
        results = [_augment_job(job) for job in jobs]

    lines = []
    for line, failure in results:
        if failure is not None:
            _err(f"processing error: {failure}")
            return EXIT_PROCESSING
        lines.append(line)
    (out_dir / MANIFEST_NAME).write_text("".join(line + "\n" for line in lines))
    print(f"wrote {len(lines)} outputs for {len(pairs)} inputs to {out_dir}")
    return EXIT_OK


def _to_rgb(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    gray = quantize_image(image) >> 8
    rgb = np.repeat(gray.astype(np.uint8)[:, :, None], 3, axis=2)
    m = mask != 0
    contour = m & ~ndimage.binary_erosion(m, border_value=0)
    rgb[contour] = CONTOUR_RGB
    return rgb


def montage(rows: list[list[np.ndarray]], gutter: int = GUTTER) -> np.ndarray:
    """Tile equally sized RGB tiles into a grid separated by ``gutter`` px."""
    h, w = rows[0][0].shape[:2]
    n_rows, n_cols = len(rows), len(rows[0])
    canvas = np.full(
        (n_rows * h + (n_rows - 1) * gutter, n_cols * w + (n_cols - 1) * gutter, 3),
        GUTTER_VALUE,
        dtype=np.uint8,
    )
    for r, row in enumerate(rows):
        for c, tile in enumerate(row):
            y, x = r * (h + gutter), c * (w + gutter)
            canvas[y : y + h, x : x + w] = tile
    return canvas


PREVIEW_COLUMNS = ("original", "deform", "reverb", "snr", "composed")


def preview_rows(samples, cfg: RunConfig) -> list[list[np.ndarray]]:
    """One row per sample: original, each physics op alone, and the full chain."""
    r = cfg.ranges
    singles = dataclasses.replace(
        r,
        mode="all",
        deform=dataclasses.replace(r.deform, enabled=True),
        reverb=dataclasses.replace(r.reverb, enabled=True),
        snr=dataclasses.replace(r.snr, enabled=True),
    )
    rows = []
    for item, sample in enumerate(samples):
        params = sample_params(derive_stream(cfg.seed, item, 0), singles)
        tiles = [sample]
        for op in ("deform", "reverb", "snr"):
            tiles.append(compose(sample, {op: params[op]}, OPS)[0])
        tiles.append(augment_item(sample, r, cfg.seed, item, 0)[0])
        rows.append([_to_rgb(t.image, t.mask) for t in tiles])
    return rows


def cmd_preview(args) -> int:
    if args.n < 1:
        _err("config error: -n must be >= 1")
        return EXIT_CONFIG
    try:
        cfg = _config(args)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    pairs = _checked_pairs(args.input)
    if pairs is None:
        return EXIT_DATASET
    samples = [load_sample(p) for p in pairs[: args.n]]
    shapes = {s.shape for s in samples}
    if len(shapes) > 1:
        _err(f"dataset error: preview needs equally sized frames, got {sorted(shapes)}")
        return EXIT_DATASET
    try:
        grid = montage(preview_rows(samples, cfg))
    except Exception as exc:
        _err(f"processing error: {type(exc).__name__}: {exc}")
        return EXIT_PROCESSING
    Image.fromarray(grid).save(args.output, format="PNG")
    print(f"wrote {len(samples)}x{len(PREVIEW_COLUMNS)} preview ({' | '.join(PREVIEW_COLUMNS)}) to {args.output}")
    return EXIT_OK


def cmd_validate(args) -> int:
    pairs, findings = validate_dataset(args.dataset)
    report = report_dict(args.dataset, pairs, findings)
    for f in findings:
        print(f)
    errors = sum(f.severity == "error" for f in findings)
    print(f"{len(pairs)} pairs checked, {errors} errors, {len(findings) - errors} notes")
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK if report["ok"] else EXIT_DATASET


def _param_bounds(ranges: RangeConfig) -> dict:
    c = ranges.classical
    return {
        ("deform", "d_probe"): ranges.deform.d_probe,
        ("reverb", "r_i"): ranges.reverb.r_i,
        ("snr", "i_b"): ranges.snr.i_b,
        ("snr", "i_bg"): ranges.snr.i_bg,
        ("classical", "rotation"): c.rotation,
        ("classical", "translation_x"): (-c.translation[0], c.translation[0]),
        ("classical", "translation_y"): (-c.translation[1], c.translation[1]),
        ("classical", "scale_x"): c.scale_x,
        ("classical", "scale_y"): c.scale_y,
        ("classical", "shear_x"): c.shear_x,
        ("classical", "shear_y"): c.shear_y,
        ("classical", "brightness_delta"): (-c.brightness, c.brightness),
    }


def _flatten(op: str, params: dict):
    for key, value in params.items():
        if isinstance(value, bool) or isinstance(value, str):
            continue
        if isinstance(value, list):
            names = {"translation_frac": "translation", "scale": "scale", "shear": "shear"}[key]
            yield (op, f"{names}_x"), value[0]
            yield (op, f"{names}_y"), value[1]
        elif isinstance(value, (int, float)):
            yield (op, key), value


def _text_histogram(values: np.ndarray, bins: int, width: int = 40) -> list[str]:
    counts, edges = np.histogram(values, bins=bins)
    peak = counts.max() if counts.size else 1
    return [
        f"    [{lo:10.4g}, {hi:10.4g}) {n:7d} {'#' * int(round(width * n / peak))}"
        for lo, hi, n in zip(edges[:-1], edges[1:], counts)
    ]


def cmd_stats(args) -> int:
    try:
        ranges = load_config(args.config).ranges if args.config else RangeConfig()
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    try:
        records = [json.loads(line) for line in Path(args.manifest).read_text().splitlines() if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        _err(f"cannot read manifest {args.manifest}: {exc}")
        return EXIT_CONFIG

    values: dict = {}
    for rec in records:
        for entry in rec["ops"]:
            for key, v in _flatten(entry["op"], entry["params"]):
                values.setdefault(key, []).append(v)

    bounds = _param_bounds(ranges)
    report = {"records": len(records), "parameters": {}}
    violations = 0
    print(f"{len(records)} records")
    for key in sorted(values):
        arr = np.asarray(values[key], dtype=np.float64)
        lo, hi = bounds[key] if key in bounds else (None, None)
        outside = int(np.sum((arr < lo) | (arr > hi))) if lo is not None else 0
        violations += outside
        name = ".".join(key)
        report["parameters"][name] = {
            "count": int(arr.size),
            "min": float(arr.min()),
            "max": float(arr.max()),
            "mean": float(arr.mean()),
            "range": None if lo is None else [lo, hi],
            "outside": outside,
        }
        if lo is None:
            print(f"  {name}: n={arr.size} min={arr.min():.6g} max={arr.max():.6g}")
            continue
        status = "ok" if outside == 0 else f"{outside} OUT OF RANGE"
        print(
            f"  {name}: n={arr.size} min={arr.min():.6g} max={arr.max():.6g} "
            f"mean={arr.mean():.6g} range=[{lo:g}, {hi:g}] {status}"
        )
        if arr.max() > arr.min():
            print("\n".join(_text_histogram(arr, args.bins)))
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK if violations == 0 else EXIT_DATASET


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems are configuration errors, not dataset errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="usaug", description="Physics-inspired augmentation of B-mode ultrasound datasets."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="augment a dataset and write a manifest")
    p.add_argument("-c", "--config", help="run configuration (JSON)")
    p.add_argument("-i", "--input", required=True, help="dataset root with images/ and masks/")
    p.add_argument("-o", "--output", help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="worker count (default 1)")
    p.add_argument("--processes", action="store_true", help="use worker processes instead of threads")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--replicas", type=int, help="outputs per input (overrides the config)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("preview", help="render a montage of the augmentations")
    p.add_argument("-c", "--config", help="run configuration (JSON)")
    p.add_argument("-i", "--input", required=True, help="dataset root")
    p.add_argument("-o", "--output", required=True, help="montage PNG path")
    p.add_argument("-n", type=int, default=4, help="number of samples (rows)")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("validate", help="check a dataset's layout and files")
    p.add_argument("dataset", help="dataset root")
    p.add_argument("--json", help="also write the report as JSON to this path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="parameter histograms and range compliance of a manifest")
    p.add_argument("manifest", help="manifest.jsonl written by 'augment'")
    p.add_argument("-c", "--config", help="config whose ranges to check against (default ranges otherwise)")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--json", help="also write the report as JSON to this path")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
