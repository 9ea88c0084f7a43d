"""Segmentation scores and geometric statistics of voxel masks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .grid import LabelMask

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class SegScores:
    tp: int
    fp: int
    fn: int
    tn: int
    dice: float
    precision: float
    recall: float

    @property
    def iou(self) -> float:
        denom = self.tp + self.fp + self.fn
        return self.tp / denom if denom else 1.0


def dice(pred: LabelMask, truth: LabelMask) -> SegScores:
    """Voxel-overlap scores; two empty masks count as perfect agreement.

    Precision with an empty prediction is 1 (no false alarms), recall with
    empty truth is 1; dice of empty vs non-empty is 0.
    """
    a, b = pred.data, truth.data
    if a.shape != b.shape:
        raise ConfigError(f"shape mismatch {a.shape} vs {b.shape}")
    tp = int(np.count_nonzero(a & b))
    fp = int(np.count_nonzero(a & ~b))
    fn = int(np.count_nonzero(~a & b))
    tn = a.size - tp - fp - fn
    d = 2 * tp / (2 * tp + fp + fn) if (tp + fp + fn) else 1.0
    prec = tp / (tp + fp) if (tp + fp) else 1.0
    rec = tp / (tp + fn) if (tp + fn) else 1.0
    return SegScores(tp, fp, fn, tn, d, prec, rec)


@dataclass(frozen=True)
class ThicknessStats:
    """Local thickness sampled on medial voxels (distance-ridge estimator).

    Thickness at a medial voxel with Euclidean distance transform value e is
    2e - 1: a one-voxel plane has e = 1 on the plane, thickness 1; a slab of
    w voxels has e = (w+1)/2 at its mid-plane, thickness w.
    """

    values: np.ndarray
    mean: float
    median: float
    min: float
    max: float

    def histogram(self, bin_width: float = 1.0):
        hi = math.ceil(self.max / bin_width) * bin_width
        edges = np.arange(0.0, hi + bin_width, bin_width)
        counts, edges = np.histogram(self.values, bins=edges)
        return counts, edges

    def modes(self, k: int = 2, iters: int = 200) -> np.ndarray:
        """Centers of a k-cluster 1D Lloyd split of the thickness values,
        sorted ascending; deterministic (quantile initialization)."""
        vals = np.sort(self.values)
        if k < 1 or k > vals.size:
            raise ConfigError(f"cannot find {k} modes among {vals.size} values")
        centers = np.quantile(vals, (np.arange(k) + 0.5) / k)
        for _ in range(iters):
            split = (centers[:-1] + centers[1:]) / 2.0
            labels = np.searchsorted(split, vals)
            new = np.array([vals[labels == i].mean() if np.any(labels == i)
                            else centers[i] for i in range(k)])
            if np.allclose(new, centers):
                break
            centers = new
        return np.sort(centers)


def thickness_stats(mask: LabelMask) -> ThicknessStats:
    """Local thickness of a mask via its Euclidean distance ridge."""
    m = mask.data
    if not m.any():
        raise ConfigError("thickness of an empty mask is undefined")
    edt = ndimage.distance_transform_edt(m)
    ridge = m & (edt >= ndimage.maximum_filter(edt, size=3))
    vals = 2.0 * edt[ridge] - 1.0
    vals.flags.writeable = False
    return ThicknessStats(vals, float(vals.mean()), float(np.median(vals)),
                          float(vals.min()), float(vals.max()))


@dataclass(frozen=True)
class SeparationResult:
    separated: bool
    axis: str
    n_background_components: int
    bridging_component: int | None  # a background label touching both faces

    def __bool__(self) -> bool:
        return self.separated


def separation_check(mask: LabelMask, axis: str) -> SeparationResult:
    """True iff no 6-connected background path joins the two opposite
    window faces along ``axis``."""
    if axis not in _AXES:
        raise ConfigError(f"axis must be x, y or z, got {axis!r}")
    ax = _AXES[axis]
    bg = ~mask.data
    struct = ndimage.generate_binary_structure(3, 1)
    labels, n = ndimage.label(bg, structure=struct)
    lo = np.moveaxis(labels, ax, 0)[0]
    hi = np.moveaxis(labels, ax, 0)[-1]
    lo_set = set(np.unique(lo[lo > 0]).tolist())
    hi_set = set(np.unique(hi[hi > 0]).tolist())
    bridging = sorted(lo_set & hi_set)
    return SeparationResult(not bridging, axis, int(n),
                            bridging[0] if bridging else None)
