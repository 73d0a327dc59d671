"""Parameter sampling, transform chaining and provenance records.

Every (item, replica) pair draws from its own counter-based random stream
derived from the master seed, so outputs do not depend on processing order
or worker count. Each output comes with an :class:`AugmentationRecord` that
holds the concrete parameters of every applied op; replaying the record on
the same input reproduces the output bit for bit.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from collections import deque
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .classical import AffineParams, ClassicalRanges, affine_augment, sample_classical
from .core import Sample
from .deform import DeformParams, deform_augment
from .reverb import ReverbParams, reverb_augment
from .snr import SnrParams, snr_augment

SCHEMA_VERSION = 1
OPS = ("deform", "reverb", "snr", "classical")
DEFAULT_ORDER = OPS
MODES = ("all", "subset")

_APPLY = {
    "deform": deform_augment,
    "reverb": reverb_augment,
    "snr": snr_augment,
    "classical": affine_augment,
}
_PARAM_TYPES = {
    "deform": DeformParams,
    "reverb": ReverbParams,
    "snr": SnrParams,
    "classical": AffineParams,
}


def _check_range(name: str, bounds: tuple[float, float]):
    lo, hi = bounds
    if lo > hi:
        raise ValueError(f"{name} range is inverted: {lo} > {hi}")


@dataclass(frozen=True)
class DeformConfig:
    enabled: bool = True
    d_probe: tuple[float, float] = (30.0, 100.0)
    sigma_lateral: float = 15.0
    interpolation: str = "bilinear"
    fill: float = 0.0

    def __post_init__(self):
        _check_range("d_probe", self.d_probe)
        if self.d_probe[0] < 0:
            raise ValueError("d_probe range must be non-negative")


@dataclass(frozen=True)
class ReverbConfig:
    enabled: bool = True
    r_i: tuple[float, float] = (0.50, 0.9)
    orders: int = 1
    per_component: bool = False

    def __post_init__(self):
        _check_range("r_i", self.r_i)
        if self.r_i[0] < 0 or self.r_i[1] > 1:
            raise ValueError("r_i range must lie in [0, 1]")


@dataclass(frozen=True)
class SnrConfig:
    enabled: bool = True
    i_b: tuple[float, float] = (0.70, 1.40)
    i_bg: tuple[float, float] = (0.70, 1.40)
    wavelength: float = 20.0
    sigma_onf: float = 0.55
    epsilon: float = 1e-3
    mask_sigma: float = 0.0

    def __post_init__(self):
        _check_range("i_b", self.i_b)
        _check_range("i_bg", self.i_bg)
        if self.i_b[0] <= 0 or self.i_bg[0] <= 0:
            raise ValueError("i_b and i_bg ranges must be positive")


@dataclass(frozen=True)
class ClassicalConfig(ClassicalRanges):
    enabled: bool = False


@dataclass(frozen=True)
class RangeConfig:
    """Which transforms run, in which order, and where their parameters come from.

    Default ranges: ``d_probe`` in [30, 100] px,
    ``r_i`` in [0.5, 0.9], ``i_b`` and ``i_bg`` in [0.7, 1.4]. The three
    physics-inspired transforms are enabled, the classical baseline is not.

    ``mode="all"`` applies every enabled transform to each output;
    ``mode="subset"`` keeps each one independently with
    ``subset_probability``.
    """

    deform: DeformConfig = field(default_factory=DeformConfig)
    reverb: ReverbConfig = field(default_factory=ReverbConfig)
    snr: SnrConfig = field(default_factory=SnrConfig)
    classical: ClassicalConfig = field(default_factory=ClassicalConfig)
    order: tuple[str, ...] = DEFAULT_ORDER
    mode: str = "all"
    subset_probability: float = 0.5

    def __post_init__(self):
        if sorted(self.order) != sorted(set(self.order)) or not set(self.order) <= set(OPS):
            raise ValueError(f"order must list distinct ops from {OPS}, got {self.order}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.subset_probability <= 1.0:
            raise ValueError("subset_probability must lie in [0, 1]")

    def enabled_ops(self) -> list[str]:
        return [op for op in self.order if getattr(self, op).enabled]


def derive_stream(master_seed: int, item_index: int, replica_index: int = 0) -> np.random.Generator:
    """Independent random stream for one (item, replica) pair.

    The pair is folded into a :class:`numpy.random.SeedSequence` spawn key
    and drives a Philox counter-based generator.
    """
    seq = np.random.SeedSequence(
        int(master_seed) & 0xFFFF_FFFF_FFFF_FFFF,
        spawn_key=(int(item_index), int(replica_index)),
    )
    return np.random.Generator(np.random.Philox(seq))


def sample_params(rng: np.random.Generator, config: RangeConfig = RangeConfig()) -> dict:
    """Draw concrete parameters for the transforms selected by ``config``.

    Draw order: in subset mode one selection draw per enabled op (config
    order), then per selected op in config order: ``deform`` one draw
    (``d_probe``), ``reverb`` one (``r_i``), ``snr`` two (``i_b`` then
    ``i_bg``), ``classical`` ten (see :func:`sample_classical`). Disabled
    ops consume nothing.
    """
    ops = config.enabled_ops()
    if config.mode == "subset":
        ops = [op for op in ops if rng.random() < config.subset_probability]

    params = {}
    for op in ops:
        if op == "deform":
            c = config.deform
            params[op] = DeformParams(
                d_probe=float(rng.uniform(*c.d_probe)),
                sigma_lateral=c.sigma_lateral,
                interpolation=c.interpolation,
                fill=c.fill,
            )
        elif op == "reverb":
            c = config.reverb
            params[op] = ReverbParams(
                r_i=float(rng.uniform(*c.r_i)), orders=c.orders, per_component=c.per_component
            )
        elif op == "snr":
            c = config.snr
            i_b = float(rng.uniform(*c.i_b))
            i_bg = float(rng.uniform(*c.i_bg))
            params[op] = SnrParams(
                i_b=i_b,
                i_bg=i_bg,
                wavelength=c.wavelength,
                sigma_onf=c.sigma_onf,
                epsilon=c.epsilon,
                mask_sigma=c.mask_sigma,
            )
        else:
            params[op] = sample_classical(rng, config.classical)
    return params


def quantize_image(image: np.ndarray) -> np.ndarray:
    """Map [0, 1] intensities to the 16-bit values written to disk."""
    return np.rint(np.clip(image, 0.0, 1.0) * 65535.0).astype(np.uint16)


def pixel_checksum(pixels: np.ndarray) -> str:
    """64-bit BLAKE2b digest (hex) of a pixel buffer, its dtype and shape."""
    arr = np.ascontiguousarray(pixels)
    h = hashlib.blake2b(digest_size=8)
    h.update(f"{arr.dtype.str}{arr.shape}".encode())
    h.update(arr.tobytes())
    return h.hexdigest()


def sample_checksums(sample: Sample) -> tuple[str, str]:
    return (
        pixel_checksum(quantize_image(sample.image)),
        pixel_checksum(sample.mask.astype(np.uint8)),
    )


def params_to_dict(params) -> dict:
    out = {}
    for f in dataclasses.fields(params):
        value = getattr(params, f.name)
        out[f.name] = list(value) if isinstance(value, tuple) else value
    return out


def params_from_dict(op: str, data: dict):
    cls = _PARAM_TYPES[op]
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return cls(**kwargs)


@dataclass
class AugmentationRecord:
    """Everything needed to reproduce one output from its input."""

    input_id: str
    ops: list[dict]
    output_id: str
    image_checksum: str
    mask_checksum: str
    seed: int | None = None
    item_index: int | None = None
    replica_index: int | None = None
    warnings: list[str] = field(default_factory=list)
    schema: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "AugmentationRecord":
        """Build a record from its dict form; extra keys (such as the file
        paths of a manifest line) are ignored."""
        if data.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported record schema {data.get('schema')!r}")
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    def params(self) -> tuple[dict, list[str]]:
        """Rebuild the concrete parameter objects and the op order."""
        order = [entry["op"] for entry in self.ops]
        return {e["op"]: params_from_dict(e["op"], e["params"]) for e in self.ops}, order


def compose(sample: Sample, params: dict, order: Sequence[str] | None = None, output_id: str | None = None):
    """Apply the ops in ``params`` following ``order``.

    Ops without an entry in ``params`` are skipped. Only deformation and
    the classical transforms touch the mask. Returns the augmented sample
    and its record (seed fields unset; see :func:`augment_item`).
    """
    order = DEFAULT_ORDER if order is None else tuple(order)
    unknown = set(params) - set(order)
    if unknown:
        raise ValueError(f"params for ops not in order: {sorted(unknown)}")
    out = sample
    applied = []
    notes = []
    for op in order:
        if op not in params:
            continue
        p = params[op]
        if op == "reverb":
            if not out.mask.any():
                notes.append("reverb: skipped, empty mask")
            out = reverb_augment(out, p, warn=False)
        else:
            out = _APPLY[op](out, p)
        applied.append({"op": op, "params": params_to_dict(p)})
    out_id = output_id if output_id is not None else sample.id
    out = out.replace(id=out_id)
    image_sum, mask_sum = sample_checksums(out)
    record = AugmentationRecord(
        input_id=sample.id,
        ops=applied,
        output_id=out_id,
        image_checksum=image_sum,
        mask_checksum=mask_sum,
        warnings=notes,
    )
    return out, record


def output_name(input_id: str, replica_index: int) -> str:
    return f"{input_id}_r{replica_index:03d}"


def augment_item(sample: Sample, config: RangeConfig, seed: int, item_index: int, replica_index: int = 0):
    """Sample parameters for one (item, replica) pair and apply them."""
    rng = derive_stream(seed, item_index, replica_index)
    params = sample_params(rng, config)
    out, record = compose(sample, params, config.order, output_name(sample.id, replica_index))
    record.seed = int(seed)
    record.item_index = int(item_index)
    record.replica_index = int(replica_index)
    return out, record


class ReplayMismatch(RuntimeError):
    pass


def replay(sample: Sample, record: AugmentationRecord, verify: bool = True) -> Sample:
    """Re-run a record on its input; optionally check both checksums."""
    params, order = record.params()
    out, fresh = compose(sample, params, order, record.output_id)
    if verify and (fresh.image_checksum, fresh.mask_checksum) != (
        record.image_checksum,
        record.mask_checksum,
    ):
        raise ReplayMismatch(f"replay of {record.output_id!r} does not match its record")
    return out


def _job(args):
    sample, config, seed, item, replica = args
    return augment_item(sample, config, seed, item, replica)


def iter_batch(
    samples: Iterable[Sample],
    config: RangeConfig,
    seed: int,
    replicas: int = 1,
    workers: int = 1,
    executor: str = "thread",
) -> Iterator[tuple]:
    """Yield ``(item_index, replica_index, sample, record)`` in item/replica order.

    At most ``4 * workers`` jobs are in flight, so memory stays bounded for
    large batches. ``executor`` picks a thread or process pool when
    ``workers > 1``.
    """
    jobs = ((s, config, seed, i, r) for i, s in enumerate(samples) for r in range(replicas))
    if workers <= 1:
        for job in jobs:
            yield (job[3], job[4], *_job(job))
        return
    pool_cls = {"thread": ThreadPoolExecutor, "process": ProcessPoolExecutor}[executor]
    window = 4 * workers
    with pool_cls(max_workers=workers) as pool:
        pending = deque()
        for job in jobs:
            pending.append((job[3], job[4], pool.submit(_job, job)))
            if len(pending) >= window:
                item, replica, fut = pending.popleft()
                yield (item, replica, *fut.result())
        while pending:
            item, replica, fut = pending.popleft()
            yield (item, replica, *fut.result())


def run_batch(
    samples: Iterable[Sample],
    config: RangeConfig,
    seed: int,
    replicas: int = 1,
    workers: int = 1,
    executor: str = "thread",
) -> list:
    """Augment every sample ``replicas`` times and collect the results.

    Same ordering and arguments as :func:`iter_batch`; results do not
    depend on ``workers``.
    """
    return list(iter_batch(samples, config, seed, replicas, workers, executor))
