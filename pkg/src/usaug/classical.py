"""Camera-style baseline augmentations applied jointly to image and mask.

Geometry is a single affine map about the image centre; images are resampled
bilinearly, masks by nearest neighbour. Horizontal flip (a 180 degree turn
of the linear probe) is applied before the affine map. Vertical flip is
available but off in the default sampling ranges because it puts the
acoustic shadow between the bone and the transducer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import Sample


@dataclass(frozen=True)
class AffineParams:
    """Concrete classical transform.

    ``rotation`` is in degrees, positive turns the content counter-clockwise
    as displayed. ``translation_frac`` is (lateral, axial) as fractions of
    (width, height). ``shear`` holds (x, y) shear coefficients, 0 meaning
    none. ``brightness_delta`` is added to the image before clipping.
    """

    rotation: float = 0.0
    translation_frac: tuple[float, float] = (0.0, 0.0)
    scale: tuple[float, float] = (1.0, 1.0)
    shear: tuple[float, float] = (0.0, 0.0)
    flip_horizontal: bool = False
    flip_vertical: bool = False
    brightness_delta: float = 0.0
    fill: float = 0.0

    def __post_init__(self):
        if self.scale[0] <= 0 or self.scale[1] <= 0:
            raise ValueError(f"scale factors must be positive, got {self.scale}")
        if not 0.0 <= self.fill <= 1.0:
            raise ValueError(f"fill must lie in [0, 1], got {self.fill}")

    def matrix(self) -> np.ndarray:
        """2x2 forward map in (x, y) = (col, row) coordinates."""
        theta = math.radians(self.rotation)
        c, s = math.cos(theta), math.sin(theta)
        # y points down, so a counter-clockwise turn on screen uses -theta
        rot = np.array([[c, s], [-s, c]])
        shear = np.array([[1.0, self.shear[0]], [self.shear[1], 1.0]])
        scale = np.diag(self.scale)
        return rot @ shear @ scale

    def is_geometric_identity(self) -> bool:
        return (
            self.rotation == 0.0
            and tuple(self.translation_frac) == (0.0, 0.0)
            and tuple(self.scale) == (1.0, 1.0)
            and tuple(self.shear) == (0.0, 0.0)
        )


def _affine_warp(arr: np.ndarray, p: AffineParams, order: int, cval: float) -> np.ndarray:
    height, width = arr.shape
    centre = np.array([(width - 1) / 2.0, (height - 1) / 2.0])
    shift = np.array([p.translation_frac[0] * width, p.translation_frac[1] * height])
    inv = np.linalg.inv(p.matrix())
    # output (x, y) -> input (x, y): centre + inv @ (out - centre - shift)
    offset_xy = centre - inv @ (centre + shift)
    # scipy works in (row, col) order
    swap = np.array([[0, 1], [1, 0]])
    matrix_rc = swap @ inv @ swap
    offset_rc = offset_xy[::-1]
    return ndimage.affine_transform(
        arr, matrix_rc, offset=offset_rc, order=order, mode="constant", cval=cval
    )


def affine_augment(sample: Sample, p: AffineParams) -> Sample:
    image, mask = sample.image, sample.mask
    if p.flip_horizontal:
        image, mask = image[:, ::-1], mask[:, ::-1]
    if p.flip_vertical:
        image, mask = image[::-1, :], mask[::-1, :]
    if not p.is_geometric_identity():
        image = _affine_warp(np.ascontiguousarray(image, dtype=np.float64), p, 1, p.fill)
        mask = _affine_warp(np.ascontiguousarray(mask, dtype=np.uint8), p, 0, 0)
    if p.brightness_delta != 0.0:
        image = image + p.brightness_delta
    image = np.clip(image, 0.0, 1.0)
    if image is sample.image and mask is sample.mask:
        return sample
    return sample.replace(
        image=np.ascontiguousarray(image), mask=np.ascontiguousarray(mask, dtype=np.uint8)
    )


@dataclass(frozen=True)
class ClassicalRanges:
    """Sampling ranges for the classical baseline.

    Translation and brightness are symmetric bounds: each translation
    fraction is drawn from [-t, t] and the brightness offset from [-b, b].
    Scale and shear default to identity.
    """

    rotation: tuple[float, float] = (-10.0, 10.0)
    translation: tuple[float, float] = (0.2, 0.2)
    scale_x: tuple[float, float] = (1.0, 1.0)
    scale_y: tuple[float, float] = (1.0, 1.0)
    shear_x: tuple[float, float] = (0.0, 0.0)
    shear_y: tuple[float, float] = (0.0, 0.0)
    brightness: float = 0.2
    flip_probability: float = 0.5
    vertical_flip_probability: float = 0.0
    fill: float = 0.0

    def __post_init__(self):
        for name in ("rotation", "scale_x", "scale_y", "shear_x", "shear_y"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is inverted: {lo} > {hi}")
        if min(self.translation) < 0 or self.brightness < 0:
            raise ValueError("translation and brightness bounds must be >= 0")
        for name in ("flip_probability", "vertical_flip_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def sample_classical(rng: np.random.Generator, ranges: ClassicalRanges = ClassicalRanges()) -> AffineParams:
    """Draw one :class:`AffineParams`.

    Draw order: horizontal flip, vertical flip, rotation, translation x,
    translation y, scale x, scale y, shear x, shear y, brightness. One
    uniform draw each, whatever the range.
    """
    flip_h = bool(rng.random() < ranges.flip_probability)
    flip_v = bool(rng.random() < ranges.vertical_flip_probability)
    rotation = float(rng.uniform(*ranges.rotation))
    tx = float(rng.uniform(-ranges.translation[0], ranges.translation[0]))
    ty = float(rng.uniform(-ranges.translation[1], ranges.translation[1]))
    sx = float(rng.uniform(*ranges.scale_x))
    sy = float(rng.uniform(*ranges.scale_y))
    shx = float(rng.uniform(*ranges.shear_x))
    shy = float(rng.uniform(*ranges.shear_y))
    delta = float(rng.uniform(-ranges.brightness, ranges.brightness))
    return AffineParams(
        rotation=rotation,
        translation_frac=(tx, ty),
        scale=(sx, sy),
        shear=(shx, shy),
        flip_horizontal=flip_h,
        flip_vertical=flip_v,
        brightness_delta=delta,
        fill=ranges.fill,
    )
