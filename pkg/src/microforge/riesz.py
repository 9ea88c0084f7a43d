"""First- and second-order Riesz transforms on 2D/3D fields.

Frequency multipliers -i xi_j/|xi| and -xi_j xi_k/|xi|^2 on the discrete FFT
grid, DC bin zeroed.  With ``pad=0`` the transforms act on the periodic
extension and satisfy the energy and trace identities to rounding; mirror
padding (``pad>0``) trades those exact identities for less wrap-around
ringing near boundaries.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .grid import VoxelVolume


def _as_field(field) -> np.ndarray:
    if isinstance(field, VoxelVolume):
        arr = field.as_float01().astype(np.float64)
    else:
        arr = np.asarray(field, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ConfigError(f"need a 2D or 3D field, got ndim={arr.ndim}")
    if any(n < 4 for n in arr.shape):
        raise ConfigError(f"every axis needs >= 4 samples, got {arr.shape}")
    return arr


def _freqs(shape):
    grids = []
    for ax, n in enumerate(shape):
        s = [1] * len(shape)
        s[ax] = n
        grids.append(np.fft.fftfreq(n).reshape(s))
    return grids


def _apply_multiplier(arr: np.ndarray, mult: np.ndarray, pad: int) -> np.ndarray:
    spec = np.fft.fftn(arr)
    out = np.fft.ifftn(spec * mult).real
    if pad:
        out = out[tuple(slice(pad, n - pad) for n in out.shape)]
    return out


def _padded(field, pad: int) -> np.ndarray:
    arr = _as_field(field)
    if pad < 0:
        raise ConfigError("pad must be >= 0")
    if pad:
        arr = np.pad(arr, pad, mode="reflect")
    return arr


def riesz1(field, axis: int, pad: int = 0) -> np.ndarray:
    """First-order Riesz transform along ``axis`` (multiplier -i xi_j/|xi|)."""
    arr = _padded(field, pad)
    if not 0 <= axis < arr.ndim:
        raise ConfigError(f"axis {axis} out of range for ndim={arr.ndim}")
    freqs = _freqs(arr.shape)
    norm2 = sum(f * f for f in freqs)
    norm2flat = norm2.copy()
    norm2flat[(0,) * arr.ndim] = 1.0   # DC bin: multiplier defined as 0
    mult = -1j * freqs[axis] / np.sqrt(norm2flat)
    mult[(0,) * arr.ndim] = 0.0
    mult = np.broadcast_to(mult, arr.shape).copy()
    return _apply_multiplier(arr, mult, pad)


def riesz1_all(field, pad: int = 0):
    """All first-order components, one per axis."""
    arr = _as_field(field)
    return tuple(riesz1(arr, ax, pad=pad) for ax in range(arr.ndim))


def riesz2(field, axes, pad: int = 0) -> np.ndarray:
    """Second-order Riesz transform (multiplier -xi_j xi_k/|xi|^2)."""
    arr = _padded(field, pad)
    j, k = axes
    for ax in (j, k):
        if not 0 <= ax < arr.ndim:
            raise ConfigError(f"axis {ax} out of range for ndim={arr.ndim}")
    freqs = _freqs(arr.shape)
    norm2 = sum(f * f for f in freqs)
    norm2[(0,) * arr.ndim] = 1.0
    mult = -(freqs[j] * freqs[k]) / norm2
    mult = np.broadcast_to(mult, arr.shape).copy()
    mult[(0,) * arr.ndim] = 0.0
    return _apply_multiplier(arr, mult, pad)
