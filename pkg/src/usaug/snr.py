"""Signal-to-noise tuning through the monogenic local energy.

The image is band-passed with a radial log-Gabor filter (even part) and the
band-passed image is Riesz transformed (two odd parts). Their pointwise sum
of squares is the local energy, which is high on coherent structures such
as bone surfaces and low in speckle. The image is divided by its local
energy and multiplied back by a retuned energy map in which bone and
background are scaled by separate factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft

from .core import Sample, gaussian_blur, kernel_size_for


class DegenerateImage(ValueError):
    pass


@dataclass(frozen=True)
class MonogenicSignal:
    even: np.ndarray
    odd1: np.ndarray
    odd2: np.ndarray


@dataclass(frozen=True)
class SnrParams:
    """SNR tuning settings.

    Attributes
    ----------
    i_b, i_bg : float
        Energy scaling for bone and background pixels. ``i_b > i_bg``
        makes bone stand out, ``i_b < i_bg`` buries it.
    wavelength : float
        Centre wavelength of the log-Gabor filter in pixels.
    sigma_onf : float
        Ratio of the log-Gabor bandwidth to its centre frequency, in (0, 1).
    epsilon : float
        Normalisation floor relative to the image's peak local energy.
    mask_sigma : float
        Optional Gaussian softening of the mask before scaling; 0 keeps the
        hard mask.
    """

    i_b: float
    i_bg: float
    wavelength: float = 20.0
    sigma_onf: float = 0.55
    epsilon: float = 1e-3
    mask_sigma: float = 0.0

    def __post_init__(self):
        if not (self.i_b > 0 and self.i_bg > 0):
            raise ValueError("i_b and i_bg must be positive")
        if not self.wavelength >= 2:
            raise ValueError(f"wavelength must be >= 2 px, got {self.wavelength}")
        if not 0 < self.sigma_onf < 1:
            raise ValueError(f"sigma_onf must lie in (0, 1), got {self.sigma_onf}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.mask_sigma >= 0:
            raise ValueError(f"mask_sigma must be >= 0, got {self.mask_sigma}")


def _frequency_grid(shape: tuple[int, int]):
    """Half-plane (rfft layout) frequencies in cycles/pixel: rows v, cols u."""
    height, width = shape
    v = fft.fftfreq(height)[:, None]
    u = fft.rfftfreq(width)[None, :]
    return u, v


def log_gabor(shape: tuple[int, int], wavelength: float, sigma_onf: float) -> np.ndarray:
    """Radial log-Gabor transfer function on the rfft half-plane.

    Zero at DC. Nyquist bins of even-sized axes are zeroed as well: the odd
    Riesz multipliers cannot be represented there by a real signal, and
    keeping them only in the even part would break the even/odd energy
    balance.
    """
    height, width = shape
    u, v = _frequency_grid(shape)
    radius = np.hypot(u, v)
    f0 = 1.0 / wavelength
    with np.errstate(divide="ignore"):
        log_ratio = np.log(radius / f0)
    gain = np.exp(-(log_ratio**2) / (2.0 * np.log(sigma_onf) ** 2))
    gain[0, 0] = 0.0
    if height % 2 == 0:
        gain[height // 2, :] = 0.0
    if width % 2 == 0:
        gain[:, width // 2] = 0.0
    return gain


def riesz_multipliers(shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Riesz transfer functions (lateral, axial) on the rfft half-plane.

    Signed so that a cosine along an axis maps to the matching sine.
    """
    u, v = _frequency_grid(shape)
    radius = np.hypot(u, v)
    radius[0, 0] = 1.0
    h1 = -1j * u / radius
    h2 = -1j * v / radius
    h1[0, 0] = 0.0
    h2[0, 0] = 0.0
    return h1, h2


@lru_cache(maxsize=16)
def _filter_bank(shape: tuple[int, int], wavelength: float, sigma_onf: float):
    gain = log_gabor(shape, wavelength, sigma_onf)
    h1, h2 = riesz_multipliers(shape)
    bank = (gain, gain * h1, gain * h2)
    for arr in bank:
        arr.flags.writeable = False
    return bank


def monogenic(image, wavelength: float = 20.0, sigma_onf: float = 0.55) -> MonogenicSignal:
    """Band-passed even component plus the two odd Riesz components."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < 4:
        raise DegenerateImage(f"image must be 2-D and at least 4x4, got shape {img.shape}")
    if wavelength < 2:
        raise ValueError(f"wavelength must be >= 2 px, got {wavelength}")
    if not 0 < sigma_onf < 1:
        raise ValueError(f"sigma_onf must lie in (0, 1), got {sigma_onf}")
    gain, odd1_tf, odd2_tf = _filter_bank(img.shape, float(wavelength), float(sigma_onf))
    spectrum = fft.rfft2(img)
    even = fft.irfft2(spectrum * gain, s=img.shape)
    odd1 = fft.irfft2(spectrum * odd1_tf, s=img.shape)
    odd2 = fft.irfft2(spectrum * odd2_tf, s=img.shape)
    return MonogenicSignal(even, odd1, odd2)


def local_energy(m: MonogenicSignal) -> np.ndarray:
    return m.even**2 + m.odd1**2 + m.odd2**2


def energy_floor(energy: np.ndarray, epsilon: float) -> float:
    """Absolute normalisation floor for a local-energy map."""
    peak = float(energy.max())
    return epsilon * peak if peak > 0 else np.finfo(np.float64).tiny


def snr_augment(sample: Sample, params: SnrParams) -> Sample:
    """Rescale bone vs background signal energy. The mask is not changed."""
    energy = local_energy(monogenic(sample.image, params.wavelength, params.sigma_onf))
    eps = energy_floor(energy, params.epsilon)
    weight = sample.mask.astype(np.float64)
    if params.mask_sigma > 0:
        weight = gaussian_blur(weight, kernel_size_for(params.mask_sigma), params.mask_sigma)
    scale = params.i_b * weight + params.i_bg * (1.0 - weight)
    tuned = energy * scale
    out = sample.image * tuned / (energy + eps)
    return sample.replace(image=np.clip(out, 0.0, 1.0))
