"""Probe-pressure deformation.

The transducer is pushed ``d_probe`` pixels into the tissue. Bone is rigid,
so in the transducer frame the bone and everything beneath it moves up by
``d_probe`` while the soft tissue between skin and bone is compressed
linearly. Columns without bone are left alone. The field is smoothed
laterally so neighbouring columns do not tear apart at bone edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    NO_BONE,
    DimensionMismatch,
    Sample,
    blur_axis,
    column_tops,
    gaussian_kernel1d,
    kernel_size_for,
)

INTERPOLATIONS = ("bilinear", "nearest")


@dataclass(frozen=True)
class DeformParams:
    """Deformation settings.

    Attributes
    ----------
    d_probe : float
        Axial transducer displacement in pixels (>= 0).
    sigma_lateral : float
        Width in pixels of the lateral Gaussian smoothing; 0 disables it.
        The kernel is truncated at +-3 sigma.
    interpolation : str
        Image resampling, ``"bilinear"`` or ``"nearest"``. Masks always
        use nearest.
    fill : float
        Intensity for rows pulled in from below the acquired depth.
    """

    d_probe: float
    sigma_lateral: float = 15.0
    interpolation: str = "bilinear"
    fill: float = 0.0

    def __post_init__(self):
        if not self.d_probe >= 0:
            raise ValueError(f"d_probe must be >= 0, got {self.d_probe}")
        if not self.sigma_lateral >= 0:
            raise ValueError(f"sigma_lateral must be >= 0, got {self.sigma_lateral}")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")
        if not 0.0 <= self.fill <= 1.0:
            raise ValueError(f"fill must lie in [0, 1], got {self.fill}")


def compute_displacement_field(mask, params: DeformParams) -> np.ndarray:
    """Axial displacement of every tissue pixel, in the transducer frame.

    Per column with bone surface at row ``top``: rows above the surface move
    by ``-d_probe * row / top``, the surface and everything below it by
    ``-d_probe``. Columns without bone do not move. A bone touching the
    transducer (``top == 0``) moves its whole column by ``-d_probe``.

    Returns a float64 array shaped like ``mask``; negative values point
    toward the transducer.
    """
    m = np.asarray(mask)
    height, width = m.shape
    d = float(params.d_probe)
    field = np.zeros((height, width), dtype=np.float64)
    if d == 0.0:
        return field

    tops = column_tops(m)
    bone_cols = np.flatnonzero(tops != NO_BONE)
    if bone_cols.size == 0:
        return field

    rows = np.arange(height, dtype=np.float64)[:, None]
    t = tops[bone_cols].astype(np.float64)[None, :]
    safe_t = np.where(t > 0, t, 1.0)
    ramp = -d * rows / safe_t
    field[:, bone_cols] = np.where(rows >= t, -d, ramp)

    if params.sigma_lateral > 0:
        size = kernel_size_for(params.sigma_lateral)
        kernel = gaussian_kernel1d(size, params.sigma_lateral)
        # columns further than the kernel radius from any bone column stay 0
        c0 = max(bone_cols[0] - size // 2, 0)
        c1 = min(bone_cols[-1] + size // 2 + 1, width)
        # from the deepest bone top down every bone column holds -d, so the
        # smoothed rows there are one lateral profile
        deep = int(tops[bone_cols].max())
        if deep > 0:
            field[:deep, c0:c1] = blur_axis(field[:deep, c0:c1], kernel, axis=1)
        profile = blur_axis(field[deep:deep + 1, c0:c1], kernel, axis=1)
        field[deep:, c0:c1] = profile
        # convex combination of values in [-d, 0]; clip away rounding excursions
        np.clip(field, -d, 0.0, out=field)
    return field


def _source_rows(field: np.ndarray):
    """Backward source rows for the columns a forward field moves.

    Returns ``(c0, c1, src)`` where ``src[y, c - c0]`` is the fractional
    source row of output pixel ``(y, c)`` for ``c0 <= c < c1``; columns
    outside that block do not move. Output rows no tissue lands on get
    ``height`` (past the last row).
    """
    height, width = field.shape
    active = np.flatnonzero(field.any(axis=0))
    if active.size == 0:
        return 0, 0, np.empty((height, 0))
    c0, c1 = int(active[0]), int(active[-1]) + 1
    block = field[:, c0:c1]
    n = c1 - c0
    rows = np.arange(height, dtype=np.float64)
    landing = np.maximum.accumulate(rows[:, None] + block, axis=0).T
    # one interpolation over all columns: each column gets its own disjoint
    # key interval (landing values lie within [-max|f|, height])
    stride = float(np.ceil(2.0 * (height + np.abs(block).max()) + 4.0))
    offsets = stride * np.arange(n, dtype=np.float64)[:, None]
    keys = (landing + offsets).ravel()
    queries = (rows[None, :] + offsets).ravel()
    src = np.interp(queries, keys, np.tile(rows, n)).reshape(n, height)
    src[rows[None, :] > landing[:, -1:]] = float(height)
    return c0, c1, np.ascontiguousarray(src.T)


def invert_axial_field(field) -> np.ndarray:
    """Convert a forward (tissue-following) field into a backward sampling field.

    Tissue at row ``x`` of the source lands at ``x + field[x]``. The returned
    field ``b`` satisfies ``source_row(y) = y - b[y]`` for every output row
    ``y``, which is the form :func:`warp_axial` consumes. Output rows that no
    tissue maps onto (revealed at the bottom) get a source row past the last
    row so the warp fills them.

    Where compression would fold tissue over itself (``d_probe`` larger than
    the bone depth) the landing positions are made non-decreasing, so the
    folded tissue collapses onto the transducer row.
    """
    f = np.asarray(field, dtype=np.float64)
    back = np.zeros_like(f)
    c0, c1, src = _source_rows(f)
    back[:, c0:c1] = np.arange(f.shape[0], dtype=np.float64)[:, None] - src
    return back


def _sample_rows(img: np.ndarray, src: np.ndarray, c0: int, interpolation: str, fill: float) -> np.ndarray:
    """Sample ``img[:, c0:c0 + src.shape[1]]`` at fractional rows ``src``."""
    height, width = src.shape
    sub = np.ascontiguousarray(img[:, c0 : c0 + width]).ravel()
    col_idx = np.arange(width)[None, :]
    if interpolation == "nearest":
        idx = np.floor(src + 0.5)
        valid = (idx >= 0) & (idx <= height - 1)
        idx = np.clip(idx, 0, height - 1).astype(np.intp)
        out = sub[idx * width + col_idx]
    else:
        valid = (src >= 0) & (src <= height - 1)
        s = np.clip(src, 0, height - 1)
        r0 = np.floor(s).astype(np.intp)
        r1 = np.minimum(r0 + 1, height - 1)
        frac = s - r0
        out = sub[r0 * width + col_idx] * (1.0 - frac) + sub[r1 * width + col_idx] * frac
    return np.clip(np.where(valid, out, fill), 0.0, 1.0)


def _nearest_mask_rows(mask: np.ndarray, src: np.ndarray, c0: int) -> np.ndarray:
    """Nearest-row sampling of a binary mask; rows outside the grid give 0."""
    height, width = src.shape
    sub = np.ascontiguousarray(mask[:, c0 : c0 + width]).ravel()
    idx = np.floor(src + 0.5)
    valid = (idx >= 0) & (idx <= height - 1)
    flat = np.clip(idx, 0, height - 1).astype(np.intp) * width + np.arange(width)[None, :]
    return np.where(valid, sub[flat], 0).astype(np.uint8)


def _check_field(image: np.ndarray, field: np.ndarray):
    if image.shape != field.shape:
        raise DimensionMismatch(f"image shape {image.shape} != field shape {field.shape}")


def warp_axial(image, field, interpolation: str = "bilinear", fill: float = 0.0) -> np.ndarray:
    """Backward-warp along the axial axis: ``out[y, x] = in[y - field[y, x], x]``.

    Source rows outside ``[0, height - 1]`` take ``fill``. The result is
    clipped to [0, 1]. A zero field returns an exact copy.
    """
    img = np.asarray(image, dtype=np.float64)
    f = np.asarray(field, dtype=np.float64)
    _check_field(img, f)
    if interpolation not in INTERPOLATIONS:
        raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")
    out = np.clip(img, 0.0, 1.0)
    active = np.flatnonzero(f.any(axis=0))
    if active.size == 0:
        return out
    # columns with a zero field map onto themselves
    c0, c1 = int(active[0]), int(active[-1]) + 1
    src = np.arange(img.shape[0], dtype=np.float64)[:, None] - f[:, c0:c1]
    out[:, c0:c1] = _sample_rows(img, src, c0, interpolation, fill)
    return out


def warp_mask(mask, field) -> np.ndarray:
    """Nearest-neighbour backward warp of a binary mask (fill 0)."""
    m = np.asarray(mask, dtype=np.uint8)
    f = np.asarray(field, dtype=np.float64)
    _check_field(m, f)
    out = m.copy()
    active = np.flatnonzero(f.any(axis=0))
    if active.size:
        c0, c1 = int(active[0]), int(active[-1]) + 1
        src = np.arange(m.shape[0], dtype=np.float64)[:, None] - f[:, c0:c1]
        out[:, c0:c1] = _nearest_mask_rows(m, src, c0)
    return out


def deform_augment(sample: Sample, params: DeformParams) -> Sample:
    """Apply the probe-pressure deformation to image and mask together.

    The displacement field says where each tissue pixel moves; it is
    inverted per column so both arrays can be resampled backward.
    """
    field = compute_displacement_field(sample.mask, params)
    c0, c1, src = _source_rows(field)
    if c1 == c0:
        return sample
    image = sample.image.copy()
    image[:, c0:c1] = _sample_rows(sample.image, src, c0, params.interpolation, params.fill)
    mask = sample.mask.copy()
    mask[:, c0:c1] = _nearest_mask_rows(sample.mask, src, c0)
    return sample.replace(image=image, mask=mask)
