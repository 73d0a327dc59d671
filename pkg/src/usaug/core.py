"""Image/mask domain types and the geometric helpers every transform shares.

Conventions
-----------
Images are 2-D ``float64`` arrays with intensities in [0, 1]. Axis 0 is the
axial (depth) direction with row 0 at the transducer surface; axis 1 is
lateral. Masks are ``uint8`` arrays of the same shape holding exactly 0 or 1,
where 1 marks bone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

#: Sentinel returned by :func:`column_tops` for a column without bone.
NO_BONE = -1


class ValidationError(ValueError):
    """Base class for malformed image/mask inputs."""


class DimensionMismatch(ValidationError):
    pass


class NonBinaryMask(ValidationError):
    pass


class NonFiniteIntensity(ValidationError):
    pass


class IntensityOutOfRange(ValidationError):
    pass


class EmptyMask(ValueError):
    pass


class InvalidKernel(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Sample:
    """A B-mode image, its bone mask and an opaque identifier.

    Construct through :func:`validate_pair` unless the arrays are already
    known to be valid (the transforms do this for their outputs).
    """

    image: np.ndarray
    mask: np.ndarray
    id: str = ""

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape

    def replace(self, image=None, mask=None, id=None) -> "Sample":
        return Sample(
            self.image if image is None else image,
            self.mask if mask is None else mask,
            self.id if id is None else id,
        )


def as_image(image) -> np.ndarray:
    """Check a B-mode image and return it as a float64 array."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"expected a non-empty 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteIntensity("image contains NaN or infinite intensities")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise IntensityOutOfRange(
            f"intensities must lie in [0, 1], got [{arr.min():g}, {arr.max():g}]"
        )
    return arr


def as_mask(mask) -> np.ndarray:
    """Check a bone mask and return it as a uint8 array of zeros and ones."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D mask, got shape {arr.shape}")
    if arr.dtype == np.bool_:
        return arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise NonBinaryMask("mask values must be exactly 0 or 1")
    return arr.astype(np.uint8)


def validate_pair(image, mask, id: str = "") -> Sample:
    """Validate an image/mask pair and bundle it as a :class:`Sample`.

    Raises
    ------
    DimensionMismatch
        If the arrays are not 2-D or their shapes differ.
    NonBinaryMask
        If the mask holds anything other than 0 and 1.
    NonFiniteIntensity, IntensityOutOfRange
        If the image has NaN/inf values or values outside [0, 1].
    """
    img = as_image(image)
    msk = as_mask(mask)
    if img.shape != msk.shape:
        raise DimensionMismatch(f"image shape {img.shape} != mask shape {msk.shape}")
    return Sample(img, msk, str(id))


def bone_centroid(mask) -> tuple[float, float]:
    """Mean (row, col) of the foreground pixels."""
    rows, cols = np.nonzero(np.asarray(mask))
    if rows.size == 0:
        raise EmptyMask("mask has no foreground pixels")
    return float(rows.mean()), float(cols.mean())


def column_tops(mask) -> np.ndarray:
    """Row index of the first bone pixel in each column.

    Columns without bone hold :data:`NO_BONE`.
    """
    m = np.asarray(mask) != 0
    has_bone = m.any(axis=0)
    tops = np.argmax(m, axis=0)
    return np.where(has_bone, tops, NO_BONE).astype(np.intp)


def gaussian_kernel1d(kernel_size: int, sigma: float) -> np.ndarray:
    """Sampled Gaussian of odd length ``kernel_size``, normalised to sum 1."""
    if (
        not isinstance(kernel_size, (int, np.integer))
        or kernel_size < 1
        or kernel_size % 2 == 0
    ):
        raise InvalidKernel(f"kernel_size must be an odd integer >= 1, got {kernel_size!r}")
    if not sigma > 0 or not math.isfinite(sigma):
        raise InvalidKernel(f"sigma must be positive and finite, got {sigma!r}")
    radius = kernel_size // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def kernel_size_for(sigma: float, truncate: float = 3.0) -> int:
    """Odd kernel length covering +-``truncate`` sigma."""
    return 2 * int(math.ceil(truncate * sigma)) + 1


def _support_window(arr: np.ndarray, margins: tuple[int, int]):
    """Bounding slices of the non-zero region grown by ``margins``, or None."""
    nz_rows = np.flatnonzero(arr.any(axis=1))
    if nz_rows.size == 0:
        return None
    nz_cols = np.flatnonzero(arr.any(axis=0))
    r0 = max(nz_rows[0] - margins[0], 0)
    r1 = min(nz_rows[-1] + margins[0] + 1, arr.shape[0])
    c0 = max(nz_cols[0] - margins[1], 0)
    c1 = min(nz_cols[-1] + margins[1] + 1, arr.shape[1])
    return slice(r0, r1), slice(c0, c1)


def blur_axis(grid, kernel: np.ndarray, axis: int) -> np.ndarray:
    """Correlate ``grid`` with a 1-D kernel along one axis, replicating edges."""
    return ndimage.correlate1d(
        np.asarray(grid, dtype=np.float64), kernel, axis=axis, mode="nearest"
    )


def gaussian_blur(grid, kernel_size: int, sigma: float) -> np.ndarray:
    """Separable 2-D Gaussian blur with edge replication at the borders.

    Inputs that are zero outside a small region (shifted masks, weight maps)
    are blurred on a window around their support only; the result is the
    same as blurring the full grid because every pixel further than the
    kernel radius from the support receives exactly zero.
    """
    kernel = gaussian_kernel1d(kernel_size, sigma)
    arr = np.asarray(grid, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D grid, got shape {arr.shape}")
    radius = kernel_size // 2
    window = _support_window(arr, (radius, radius))
    if window is None:
        return np.zeros_like(arr)
    out = np.zeros_like(arr)
    sub = blur_axis(blur_axis(arr[window], kernel, axis=0), kernel, axis=1)
    out[window] = sub
    return out


_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def connected_components(mask) -> tuple[np.ndarray, int]:
    """Label 8-connected foreground components as 1..k (background stays 0)."""
    labels, count = ndimage.label(np.asarray(mask) != 0, structure=_EIGHT_CONNECTED)
    return labels.astype(np.int32), int(count)
