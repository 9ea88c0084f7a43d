"""FIB-SEM slice-stack simulation with shine-through artifacts.

The imaged plane shows solid material at its nominal intensity, while pores
glow with light leaking from the first solid voxel below the plane: the
deeper that solid lies, the dimmer the glow (exponential attenuation).  This
parametric proxy reproduces the artifact that makes pore segmentation hard;
it does not claim to model detector physics, and says so in its provenance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .grid import LabelMask
from .rng import RandomStream

MODEL_NOTE = ("shine-through simulated as exponential depth attenuation; "
              "not an electron-interaction model")


@dataclass(frozen=True)
class SemConfig:
    slice_thickness_vox: int = 1
    attenuation_depth_vox: float = 10.0
    solid_intensity: float = 0.8
    background_intensity: float = 0.2
    noise_sigma: float = 0.03
    poisson_scaling: bool = False   # scale noise stddev by sqrt(signal)
    edge_gain: float = 0.2
    edge_sigma_vox: float = 1.0

    def __post_init__(self):
        if self.slice_thickness_vox < 1:
            raise ConfigError("slice_thickness_vox must be >= 1")
        if self.attenuation_depth_vox <= 0:
            raise ConfigError("attenuation_depth_vox must be > 0")
        for name in ("solid_intensity", "background_intensity"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.solid_intensity <= self.background_intensity:
            raise ConfigError("solid_intensity must exceed background_intensity")
        if self.noise_sigma < 0 or self.edge_gain < 0:
            raise ConfigError("noise_sigma and edge_gain must be >= 0")


@dataclass(frozen=True)
class SemStack:
    images: np.ndarray   # (n_slices, nx, ny) float32 in [0, 1]
    truths: np.ndarray   # (n_slices, nx, ny) bool, solid at the slice plane
    planes: tuple        # z index of each slice

    def __post_init__(self):
        self.images.flags.writeable = False
        self.truths.flags.writeable = False


def simulate_sem_stack(solid: LabelMask, cfg: SemConfig,
                       rng: RandomStream) -> SemStack:
    """Render one image per slice plane, stepping by the slice thickness.

    Pixel (x, y) of the plane at z0 shows ``solid_intensity`` (plus an edge
    term proportional to the local surface inclination) when the plane voxel
    is solid, else ``background + (solid - background) * exp(-d / delta)``
    with d the depth to the first solid voxel strictly below z0 along -z.
    Per-slice noise streams are keyed by slice index, so rendering order and
    thread count cannot change the output.
    """
    vol = solid.data
    nx, ny, nz = vol.shape
    if nz < cfg.slice_thickness_vox:
        raise ConfigError("volume thinner than one slice")
    planes = tuple(range(0, nz, cfg.slice_thickness_vox))
    edge = None
    if cfg.edge_gain > 0:
        edge = ndimage.gaussian_gradient_magnitude(
            vol.astype(np.float32), sigma=cfg.edge_sigma_vox)
    images = np.empty((len(planes), nx, ny), dtype=np.float32)
    truths = np.empty((len(planes), nx, ny), dtype=bool)
    span = cfg.solid_intensity - cfg.background_intensity
    last_solid = np.full((nx, ny), -np.inf)
    k = 0
    for z in range(nz):
        if k < len(planes) and planes[k] == z:
            plane = vol[:, :, z]
            with np.errstate(over="ignore"):
                d = z - last_solid
                glow = cfg.background_intensity + span * np.exp(
                    -d / cfg.attenuation_depth_vox)
            img = np.where(plane, cfg.solid_intensity, glow)
            if edge is not None:
                img = img + cfg.edge_gain * edge[:, :, z] * plane
            if cfg.noise_sigma > 0:
                gen = rng.child("slice", k).generator()
                noise = gen.normal(0.0, cfg.noise_sigma, size=img.shape)
                if cfg.poisson_scaling:
                    noise = noise * np.sqrt(np.clip(img, 0.0, None))
                img = img + noise
            images[k] = np.clip(img, 0.0, 1.0)
            truths[k] = plane
            k += 1
        zslice = vol[:, :, z]
        last_solid[zslice] = z
    return SemStack(images, truths, planes)


def match_histogram(image: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Quantile-map ``image`` onto the gray histogram of ``reference``.

    Both are treated as flat samples; the output preserves the rank order of
    the input pixels exactly.
    """
    ref = np.asarray(reference, dtype=np.float64).ravel()
    if ref.size == 0:
        raise ConfigError("reference histogram is empty")
    img = np.asarray(image, dtype=np.float64)
    src = img.ravel()
    order = np.argsort(src, kind="stable")
    ranks = np.empty(src.size, dtype=np.int64)
    ranks[order] = np.arange(src.size)
    q = (ranks + 0.5) / src.size
    matched = np.quantile(ref, q)
    return matched.reshape(img.shape).astype(np.float32)
