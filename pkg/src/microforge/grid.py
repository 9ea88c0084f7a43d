"""Voxel/pixel containers and gray-value models shared by all generators.

Conventions, fixed package-wide:

* ``VoxelVolume.data`` and ``LabelMask.data`` are indexed ``[x, y, z]``.
* Flat (file) order is x-fastest: flat index ``i = x + nx*(y + ny*z)``.
* Gray values are float32 in [0, 1] internally; 16-bit quantization happens
  only at export, so blending never double-quantizes.
* Containers are immutable after construction (arrays are write-protected).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_SUPPORTED_DTYPES = {"u16": np.uint16, "f32": np.float32}


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class VoxelVolume:
    """3D scalar grid with physical voxel spacing in micrometers.

    ``data`` is either float32 (gray values or measures, nominally [0, 1])
    or uint16 (raw CT counts); the dtype is declared per volume.
    """

    data: np.ndarray
    spacing_um: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ConfigError(f"volume data must be 3D, got shape {self.data.shape}")
        if self.data.dtype not in (np.float32, np.uint16):
            raise ConfigError(f"unsupported volume dtype {self.data.dtype} (use float32 or uint16)")
        sp = tuple(float(s) for s in self.spacing_um)
        if len(sp) != 3 or any(s <= 0 for s in sp):
            raise ConfigError(f"spacing_um must be 3 positive values, got {self.spacing_um}")
        object.__setattr__(self, "spacing_um", sp)
        _freeze(self.data)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def dtype_name(self) -> str:
        return "u16" if self.data.dtype == np.uint16 else "f32"

    def as_float01(self) -> np.ndarray:
        """Gray values as float32 in [0, 1] (uint16 scaled by 1/65535)."""
        if self.data.dtype == np.float32:
            return self.data
        return (self.data.astype(np.float32) / 65535.0).astype(np.float32)

    def quantized_u16(self) -> "VoxelVolume":
        """Quantize a float volume to uint16 (values clipped to [0, 1])."""
        if self.data.dtype == np.uint16:
            return self
        q = np.clip(self.data, 0.0, 1.0)
        return VoxelVolume((q * 65535.0 + 0.5).astype(np.uint16), self.spacing_um)


@dataclass(frozen=True)
class LabelMask:
    """Binary ground-truth/segmentation mask aligned to a VoxelVolume."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ConfigError(f"mask data must be 3D, got shape {self.data.shape}")
        if self.data.dtype != np.bool_:
            object.__setattr__(self, "data", self.data.astype(bool))
        _freeze(self.data)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def count(self) -> int:
        return int(self.data.sum())

    def union(self, other: "LabelMask") -> "LabelMask":
        """Voxelwise OR, e.g. to combine several cracks into one label field."""
        if self.dims != other.dims:
            raise ConfigError(f"mask dims differ: {self.dims} vs {other.dims}")
        return LabelMask(self.data | other.data)


@dataclass(frozen=True)
class GrayModel:
    """Distribution of gray values (float [0, 1] units) for crack interiors.

    Either a gaussian (mean, stddev) or an empirical histogram with explicit
    bin edges; empirical models also carry the fitted gaussian moments.
    """

    kind: str  # "gaussian" | "empirical"
    mean: float
    stddev: float
    bin_edges: np.ndarray | None = None
    counts: np.ndarray | None = None
    _cdf: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "empirical"):
            raise ConfigError(f"unknown gray model kind {self.kind!r}")
        if self.stddev < 0:
            raise ConfigError("gaussian stddev must be >= 0")
        if self.kind == "empirical":
            if self.bin_edges is None or self.counts is None:
                raise ConfigError("empirical gray model needs bin_edges and counts")
            c = np.asarray(self.counts, dtype=np.float64)
            if c.min() < 0 or c.sum() <= 0:
                raise ConfigError("histogram counts must be non-negative with positive sum")
            cdf = np.concatenate([[0.0], np.cumsum(c)])
            object.__setattr__(self, "_cdf", cdf / cdf[-1])

    @classmethod
    def gaussian(cls, mean: float, stddev: float) -> "GrayModel":
        return cls("gaussian", float(mean), float(stddev))

    @classmethod
    def from_samples(cls, values: np.ndarray, bins: int = 64) -> "GrayModel":
        """Empirical model from observed gray values (also fits moments)."""
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size == 0:
            raise ConfigError("cannot build a gray model from zero samples")
        counts, edges = np.histogram(values, bins=bins)
        return cls("empirical", float(values.mean()), float(values.std()),
                   bin_edges=edges, counts=counts)

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """Draw n gray values; callers clip to the volume's valid range."""
        if self.kind == "gaussian":
            return gen.normal(self.mean, self.stddev, size=n)
        # Inverse-CDF on the histogram, uniform within each bin.
        u = gen.random(n)
        idx = np.searchsorted(self._cdf, u, side="right") - 1
        idx = np.clip(idx, 0, len(self.counts) - 1)
        lo = self.bin_edges[idx]
        hi = self.bin_edges[idx + 1]
        span = self._cdf[idx + 1] - self._cdf[idx]
        frac = np.where(span > 0, (u - self._cdf[idx]) / np.maximum(span, 1e-300), 0.5)
        return lo + frac * (hi - lo)
