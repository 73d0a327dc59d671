"""Reverberation artifacts.

A strong reflector at depth y_c echoes back and forth between itself and
the transducer, so ghost copies appear at 2*y_c, 3*y_c, ... The bone patch
is copied down by k*y_c rows for echo order k and blended in through a
Gaussian-feathered copy of the shifted label.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import Sample, bone_centroid, connected_components, gaussian_blur

#: Feathering kernel applied to the shifted label.
WEIGHT_KERNEL_SIZE = 45
WEIGHT_SIGMA = 20.0


class EmptyMaskWarning(UserWarning):
    """A mask-driven transform was skipped because the mask was empty."""


@dataclass(frozen=True)
class ReverbParams:
    """Reverberation settings.

    ``r_i`` scales the artifact weight map; echo order ``k`` uses ``r_i**k``.
    ``per_component`` shifts each connected bone by its own centroid depth
    instead of the global mask centroid.
    """

    r_i: float
    orders: int = 1
    per_component: bool = False

    def __post_init__(self):
        if not 0.0 <= self.r_i <= 1.0:
            raise ValueError(f"r_i must lie in [0, 1], got {self.r_i}")
        if int(self.orders) != self.orders or self.orders < 1:
            raise ValueError(f"orders must be an integer >= 1, got {self.orders}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def shift_patch(image, mask, shift_rows: int) -> tuple[np.ndarray, np.ndarray]:
    """Move the masked image content and the mask down by ``shift_rows``.

    Content pushed past the last row is dropped; everything outside the
    shifted mask is zero.
    """
    if shift_rows < 0:
        raise ValueError(f"shift_rows must be >= 0, got {shift_rows}")
    img = np.asarray(image, dtype=np.float64)
    m = np.asarray(mask) != 0
    height = img.shape[0]
    patch = np.zeros_like(img)
    shifted = np.zeros(img.shape, dtype=np.float64)
    if shift_rows >= height:
        return patch, shifted
    keep = height - shift_rows
    shifted[shift_rows:] = m[:keep]
    patch[shift_rows:] = np.where(m[:keep], img[:keep], 0.0)
    return patch, shifted


def reverb_weights(shifted_mask, r_i: float) -> np.ndarray:
    """Blend weights for the artifact: the feathered shifted label times ``r_i``."""
    if not 0.0 <= r_i <= 1.0:
        raise ValueError(f"r_i must lie in [0, 1], got {r_i}")
    blurred = gaussian_blur(shifted_mask, WEIGHT_KERNEL_SIZE, WEIGHT_SIGMA)
    return np.clip(blurred * r_i, 0.0, r_i)


def blend(original, patch, weights) -> np.ndarray:
    """``(1 - w) * original + w * patch``, clipped to [0, 1]."""
    out = (1.0 - weights) * original + weights * patch
    return np.clip(out, 0.0, 1.0)


def _reflectors(mask: np.ndarray, per_component: bool):
    """Yield (component mask, centroid row) pairs."""
    if not per_component:
        yield mask, bone_centroid(mask)[0]
        return
    labels, count = connected_components(mask)
    for label in range(1, count + 1):
        component = (labels == label).astype(np.uint8)
        yield component, bone_centroid(component)[0]


def reverb_augment(sample: Sample, params: ReverbParams, warn: bool = True) -> Sample:
    """Add reverberation ghosts of the bone below it. The mask is not changed.

    An empty mask leaves the sample untouched and, if ``warn`` is set,
    emits :class:`EmptyMaskWarning`.
    """
    if not sample.mask.any():
        if warn:
            warnings.warn(
                f"reverberation skipped for {sample.id!r}: empty mask",
                EmptyMaskWarning,
                stacklevel=2,
            )
        return sample
    if params.r_i == 0.0:
        return sample

    out = sample.image
    for component, y_c in _reflectors(sample.mask, params.per_component):
        for k in range(1, params.orders + 1):
            # echo k sits at (k + 1) * y_c, so shift the patch by k * y_c
            shift = _round_half_up(k * y_c)
            if shift >= out.shape[0]:
                break
            patch, shifted = shift_patch(sample.image, component, shift)
            weights = reverb_weights(shifted, params.r_i**k)
            out = blend(out, patch, weights)
    return sample.replace(image=out)
