"""PNG reading/writing and dataset layout checks.

A dataset root holds ``images/`` and ``masks/`` with one grayscale PNG per
frame and matching file stems. Images may be 8- or 16-bit and are scaled to
[0, 1] on load. Masks must hold two levels only: 0 and either 1 or the
format's maximum value.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import Sample, validate_pair

_MAX_VALUE = {8: 255, 16: 65535}


class DatasetError(Exception):
    """The dataset layout or one of its files is unusable."""


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" or "info"
    code: str
    stem: str
    message: str

    def __str__(self):
        where = f"{self.stem}: " if self.stem else ""
        return f"{self.severity.upper():5s} [{self.code}] {where}{self.message}"


@dataclass(frozen=True)
class Pair:
    stem: str
    image_path: Path
    mask_path: Path


def read_png(path) -> tuple[np.ndarray, int]:
    """Decode a grayscale PNG into its raw integer array and bit depth."""
    with Image.open(path) as im:
        mode = im.mode
        if mode == "1":
            return np.array(im, dtype=np.uint8), 8
        if mode == "L":
            return np.array(im), 8
        if mode.startswith("I;16"):
            return np.array(im).astype(np.uint16), 16
        if mode == "I":
            arr = np.array(im)
            if arr.min() < 0 or arr.max() > 65535:
                raise DatasetError(f"{path}: 32-bit integer PNG is not supported")
            return arr.astype(np.uint16), 16
    raise DatasetError(f"{path}: expected a grayscale PNG, got mode {mode!r}")


def raw_to_image(raw: np.ndarray, bit_depth: int) -> np.ndarray:
    return raw.astype(np.float64) / _MAX_VALUE[bit_depth]


def raw_to_mask(raw: np.ndarray, bit_depth: int) -> np.ndarray:
    """Binary uint8 mask from raw PNG values, or DatasetError if not two-level."""
    values = np.unique(raw)
    top = _MAX_VALUE[bit_depth]
    if not (set(values.tolist()) <= {0, 1} or set(values.tolist()) <= {0, top}):
        shown = ", ".join(str(v) for v in values[:6])
        raise DatasetError(f"non-binary mask (values {shown}{', ...' if values.size > 6 else ''})")
    return (raw != 0).astype(np.uint8)


def write_image_png(path, pixels: np.ndarray):
    """Write quantized 16-bit image pixels."""
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint16)).save(path, format="PNG")


def write_mask_png(path, mask: np.ndarray):
    """Write a binary mask as 8-bit 0/255."""
    Image.fromarray((np.asarray(mask) != 0).astype(np.uint8) * 255).save(path, format="PNG")


def discover(root) -> tuple[list[Pair], list[Finding]]:
    """Pair image and mask files by stem. Layout problems become findings."""
    root = Path(root)
    findings = []
    image_dir, mask_dir = root / "images", root / "masks"
    for d in (image_dir, mask_dir):
        if not d.is_dir():
            findings.append(Finding("error", "missing-directory", "", f"{d} does not exist"))
    if findings:
        return [], findings

    def by_stem(d: Path):
        stems = {}
        for p in sorted(d.iterdir()):
            if p.is_file() and p.suffix.lower() == ".png":
                if p.stem in stems:
                    findings.append(Finding("error", "duplicate-stem", p.stem, f"{p} clashes with {stems[p.stem]}"))
                stems[p.stem] = p
        return stems

    images, masks = by_stem(image_dir), by_stem(mask_dir)
    for stem in sorted(set(images) - set(masks)):
        findings.append(Finding("error", "missing-mask", stem, "image has no matching mask"))
    for stem in sorted(set(masks) - set(images)):
        findings.append(Finding("error", "missing-image", stem, "mask has no matching image"))
    pairs = [Pair(s, images[s], masks[s]) for s in sorted(set(images) & set(masks))]
    if not pairs and not findings:
        findings.append(Finding("error", "empty-dataset", "", f"no image/mask pairs under {root}"))
    return pairs, findings


def check_pair(pair: Pair) -> list[Finding]:
    out = []
    try:
        img_raw, img_depth = read_png(pair.image_path)
        msk_raw, msk_depth = read_png(pair.mask_path)
    except DatasetError as exc:
        return [Finding("error", "unsupported-format", pair.stem, str(exc))]
    except OSError as exc:
        return [Finding("error", "unreadable", pair.stem, str(exc))]
    if img_raw.shape != msk_raw.shape:
        out.append(
            Finding("error", "dimension-mismatch", pair.stem, f"image {img_raw.shape} vs mask {msk_raw.shape}")
        )
    try:
        raw_to_mask(msk_raw, msk_depth)
    except DatasetError as exc:
        out.append(Finding("error", "non-binary-mask", pair.stem, str(exc)))
    if img_depth != msk_depth:
        out.append(
            Finding(
                "info",
                "mixed-bit-depth",
                pair.stem,
                f"image is {img_depth}-bit, mask is {msk_depth}-bit; both are normalized",
            )
        )
    return out


def validate_dataset(root) -> tuple[list[Pair], list[Finding]]:
    pairs, findings = discover(root)
    for pair in pairs:
        findings.extend(check_pair(pair))
    return pairs, findings


def report_dict(root, pairs: list[Pair], findings: list[Finding]) -> dict:
    return {
        "root": str(root),
        "pairs": len(pairs),
        "ok": not any(f.severity == "error" for f in findings),
        "findings": [asdict(f) for f in findings],
    }


def load_sample(pair: Pair) -> Sample:
    img_raw, img_depth = read_png(pair.image_path)
    msk_raw, msk_depth = read_png(pair.mask_path)
    mask = raw_to_mask(msk_raw, msk_depth)
    return validate_pair(raw_to_image(img_raw, img_depth), mask, pair.stem)
