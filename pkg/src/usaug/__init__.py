"""Physics-inspired augmentation of B-mode ultrasound images with bone masks."""

from .classical import AffineParams, ClassicalRanges, affine_augment, sample_classical
from .core import (
    DimensionMismatch,
    EmptyMask,
    InvalidKernel,
    NonBinaryMask,
    NonFiniteIntensity,
    Sample,
    bone_centroid,
    column_tops,
    connected_components,
    gaussian_blur,
    validate_pair,
)
from .deform import DeformParams, compute_displacement_field, deform_augment, warp_axial
from .pipeline import (
    AugmentationRecord,
    RangeConfig,
    augment_item,
    compose,
    derive_stream,
    iter_batch,
    replay,
    run_batch,
    sample_params,
)
from .reverb import ReverbParams, reverb_augment
from .snr import SnrParams, local_energy, monogenic, snr_augment

__version__ = "0.1.0"
