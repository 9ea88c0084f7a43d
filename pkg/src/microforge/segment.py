"""Crack segmentation baselines: Hessian/Riesz plate measures + percolation.

A crack is a thin dark plate in a brighter matrix, so the largest eigenvalue
of the (scale-normalized) Gaussian Hessian is positive across it and
dominates the others.  The crackness measure is a Frangi-style product of a
planarity term and a structure term, gated to positive lambda_1; hysteresis
region growing with a size filter turns it into a mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .grid import LabelMask, VoxelVolume
from .riesz import riesz2

_CHUNK = 1 << 20


@dataclass(frozen=True)
class PercolationParams:
    smoothing_sigma_vox: float = 1.5
    planarity_threshold: float = 0.5
    grow_threshold: float = 0.2
    min_component_vox: int = 27

    def __post_init__(self):
        if self.smoothing_sigma_vox <= 0:
            raise ConfigError("smoothing_sigma_vox must be > 0")
        for name in ("planarity_threshold", "grow_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.grow_threshold > self.planarity_threshold:
            raise ConfigError("grow_threshold must not exceed planarity_threshold")
        if self.min_component_vox < 0:
            raise ConfigError("min_component_vox must be >= 0")


def _as_array(volume) -> np.ndarray:
    if isinstance(volume, VoxelVolume):
        return volume.as_float01().astype(np.float64)
    return np.asarray(volume, dtype=np.float64)


def _plate_measure(hxx, hyy, hzz, hxy, hxz, hyz, alpha, beta, noise):
    """Frangi-style dark-plate score from Hessian component fields."""
    shape = hxx.shape
    flat = [h.ravel() for h in (hxx, hyy, hzz, hxy, hxz, hyz)]
    n = flat[0].size
    lam1 = np.empty(n)
    lam_abs_sum = np.empty(n)
    mat = np.empty((_CHUNK, 3, 3))
    for start in range(0, n, _CHUNK):
        end = min(start + _CHUNK, n)
        m = end - start
        b = mat[:m]
        b[:, 0, 0] = flat[0][start:end]
        b[:, 1, 1] = flat[1][start:end]
        b[:, 2, 2] = flat[2][start:end]
        b[:, 0, 1] = b[:, 1, 0] = flat[3][start:end]
        b[:, 0, 2] = b[:, 2, 0] = flat[4][start:end]
        b[:, 1, 2] = b[:, 2, 1] = flat[5][start:end]
        ev = np.linalg.eigvalsh(b)
        lam1[start:end] = ev[:, 2]
        lam_abs_sum[start:end] = np.abs(ev).sum(axis=1)
    if noise is None:
        pos = lam1[lam1 > 0]
        noise = float(np.percentile(pos, 99)) * 0.25 if pos.size else 1.0
        noise = max(noise, 1e-12)
    ratio = np.divide(lam1, lam_abs_sum, out=np.zeros_like(lam1),
                      where=lam_abs_sum > 0)
    planarity = 1.0 - np.exp(-(ratio * ratio) / alpha)
    structure = 1.0 - np.exp(-(lam1 * lam1) / (beta * noise * noise))
    score = np.where(lam1 > 0, planarity * structure, 0.0)
    return np.clip(score, 0.0, 1.0).reshape(shape).astype(np.float32)


def hessian_crackness(volume, sigma: float, *, alpha: float = 0.5,
                      beta: float = 1.0, noise: float | None = None) -> np.ndarray:
    """Dark-plate measure in [0, 1] from the Gaussian Hessian at scale sigma.

    The Hessian is scale-normalized (multiplied by sigma^2) so responses are
    comparable across scales; ``noise`` defaults to a quantile of the
    positive lambda_1 response, which adapts the structure term to the
    input's contrast.
    """
    if sigma < 0.5:
        raise ConfigError("sigma below half a voxel cannot be sampled")
    arr = _as_array(volume)
    if arr.ndim != 3:
        raise ConfigError("crackness needs a 3D volume")
    s2 = sigma * sigma
    orders = [(2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1)]
    comps = [s2 * ndimage.gaussian_filter(arr, sigma, order=o) for o in orders]
    return _plate_measure(*comps, alpha=alpha, beta=beta, noise=noise)


def riesz_crackness(volume, sigma: float = 1.5, *, alpha: float = 0.5,
                    beta: float = 1.0, noise: float | None = None,
                    pad: int = 8) -> np.ndarray:
    """Plate measure built from second-order Riesz components.

    The Riesz matrix (R_jk f) plays the role of the Hessian but its
    multiplier is 0-homogeneous, so the response is inherently scale
    invariant; a light Gaussian pre-smoothing suppresses voxel noise.
    """
    arr = _as_array(volume)
    if arr.ndim != 3:
        raise ConfigError("crackness needs a 3D volume")
    if sigma > 0:
        arr = ndimage.gaussian_filter(arr, sigma)
    pairs = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]
    # trace of (R_jk f) is -(f - mean f): a dark dip gives positive trace,
    # matching the Hessian's sign convention for dark plates
    comps = [riesz2(arr, p, pad=pad) for p in pairs]
    return _plate_measure(*comps, alpha=alpha, beta=beta, noise=noise)


def percolation_segment(crackness, params: PercolationParams) -> LabelMask:
    """Hysteresis growth: strong seeds percolate through weak 26-neighbors."""
    c = np.asarray(crackness, dtype=np.float32)
    strong = c >= params.planarity_threshold
    weak = c >= params.grow_threshold
    if not strong.any():
        return LabelMask(np.zeros(c.shape, dtype=bool))
    struct = np.ones((3, 3, 3), dtype=bool)
    labels, n = ndimage.label(weak, structure=struct)
    seeded = np.unique(labels[strong])
    seeded = seeded[seeded > 0]
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    keep = seeded[counts[seeded] >= params.min_component_vox]
    return LabelMask(np.isin(labels, keep))


def hessian_percolation(volume, params: PercolationParams,
                        n_scales: int = 1) -> LabelMask:
    """The full baseline: multiscale Hessian crackness, then percolation."""
    def op(arr):
        return hessian_crackness(arr, params.smoothing_sigma_vox)

    score = multiscale_apply(_as_array(volume), op, n_scales)
    return percolation_segment(score, params)


def block_mean(arr: np.ndarray, factor: int) -> np.ndarray:
    """Downscale by integer block averaging (trailing remainder cropped)."""
    if factor < 1:
        raise ConfigError("factor must be >= 1")
    if factor == 1:
        return arr
    shape = [(n // factor) * factor for n in arr.shape]
    if any(s == 0 for s in shape):
        raise ConfigError(f"array {arr.shape} too small for factor {factor}")
    view = arr[tuple(slice(0, s) for s in shape)]
    for ax in range(arr.ndim):
        n = view.shape[ax] // factor
        view = view.reshape(view.shape[:ax] + (n, factor) + view.shape[ax + 1:])
        view = view.mean(axis=ax + 1)
    return view


def multiscale_apply(volume, op, n_scales: int) -> np.ndarray:
    """Apply ``op`` at dyadic downscalings and combine by pointwise max.

    Scale 0 is the untouched input, so n_scales=1 reduces to ``op`` exactly;
    coarser responses are upscaled trilinearly before the max.
    """
    if n_scales < 1:
        raise ConfigError("n_scales must be >= 1")
    arr = _as_array(volume)
    base = np.asarray(op(arr))
    if n_scales == 1:
        return base
    out = base.astype(np.float32).copy()
    cur = arr
    for _ in range(1, n_scales):
        cur = block_mean(cur, 2)
        if min(cur.shape) < 4:
            raise ConfigError("volume too small for the requested scale count")
        resp = np.asarray(op(cur), dtype=np.float32)
        factors = [t / s for t, s in zip(out.shape, resp.shape)]
        up = ndimage.zoom(resp, factors, order=1, mode="nearest",
                          grid_mode=True)
        for ax, t in enumerate(out.shape):
            if up.shape[ax] > t:
                up = up[tuple(slice(0, t if a == ax else None)
                              for a in range(up.ndim))]
            elif up.shape[ax] < t:
                padw = [(0, t - up.shape[a]) if a == ax else (0, 0)
                        for a in range(up.ndim)]
                up = np.pad(up, padw, mode="edge")
        out = np.maximum(out, up)
    return out
