"""Procedural face-milled surface textures as signed height maps.

A face mill leaves ring-shaped scratches: each revolution the blades sweep a
circle of the head diameter, the feed moves the center by feed/speed, and
the lateral cutting depth spaces the path rows.  Rings are imprinted as
circular-arc grooves with pointwise-min combination (removed material stays
removed), so the result is independent of imprint order; per-ring jitter is
keyed by ring index for the same reason.

Geometry parameters are in mm, heights and grid spacing in micrometers.
Default parameter values are plausible for a small face mill but are not
calibrated against measured surfaces; provenance marks them as such.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, FormatError
from .rng import RandomStream

MODEL_NOTE = ("ring-groove parameter defaults are visually plausible, "
              "not calibrated against measured milled surfaces")


@dataclass(frozen=True)
class MillingConfig:
    head_diameter_mm: float = 20.0
    tilt_deg: float = 0.15          # head tilt about the feed direction
    blade_width_um: float = 600.0
    feed_rate_mm_per_min: float = 300.0
    spindle_speed_rpm: float = 6000.0
    lateral_cutting_depth_mm: float = 2.0   # a_e, row spacing
    path: str = "parallel"
    surface_size_mm: tuple = (30.72, 30.72)
    grid_resolution_um: float = 30.0
    depth_scale_um: float = 4.0
    depth_jitter_sigma: float = 0.25   # lognormal sigma of per-ring depth
    radius_jitter_um: float = 15.0     # gaussian sigma of per-ring radius
    max_cut_depth_um: float = 50.0

    def __post_init__(self):
        positive = ("head_diameter_mm", "blade_width_um", "feed_rate_mm_per_min",
                    "spindle_speed_rpm", "lateral_cutting_depth_mm",
                    "grid_resolution_um", "depth_scale_um", "max_cut_depth_um")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.tilt_deg < 0 or self.depth_jitter_sigma < 0 or self.radius_jitter_um < 0:
            raise ConfigError("tilt and jitter parameters must be >= 0")
        if self.path not in ("parallel", "spiral"):
            raise ConfigError(f"path must be parallel or spiral, got {self.path!r}")
        w, h = self.surface_size_mm
        if w <= 0 or h <= 0:
            raise ConfigError("surface_size_mm must be positive")
        if self.grid_resolution_um > self.blade_width_um / 2.0:
            raise ConfigError("grid resolution coarser than half the blade width "
                              "cannot resolve ring cross-sections")

    @property
    def feed_per_rev_mm(self) -> float:
        return self.feed_rate_mm_per_min / self.spindle_speed_rpm

    @property
    def grid_dims(self) -> tuple:
        w, h = self.surface_size_mm
        res_mm = self.grid_resolution_um / 1000.0
        return (int(round(w / res_mm)), int(round(h / res_mm)))


@dataclass(frozen=True)
class ToolPath:
    kind: str
    positions_mm: np.ndarray   # (n, 2) ring centers
    feed_angles: np.ndarray    # (n,) local feed direction, radians

    def __post_init__(self):
        for name in ("positions_mm", "feed_angles"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.positions_mm.shape[0]


@dataclass(frozen=True)
class HeightMap:
    heights: np.ndarray   # (nx, ny) float32, micrometers, 0 = uncut plane
    spacing_um: float

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=np.float32)
        if h.ndim != 2:
            raise ConfigError("height map must be 2D")
        if not np.isfinite(h).all():
            raise ConfigError("heights must be finite")
        if float(h.max(initial=0.0)) > 0.0:
            raise ConfigError("heights above the uncut plane are invalid")
        if self.spacing_um <= 0:
            raise ConfigError("spacing_um must be > 0")
        h.flags.writeable = False
        object.__setattr__(self, "heights", h)

    @property
    def dims(self) -> tuple:
        return self.heights.shape


def generate_tool_path(cfg: MillingConfig) -> ToolPath:
    """Ring-drop centers along the milling path.

    Consecutive drops are spaced by the feed per revolution
    (feed_rate / spindle_speed); parallel paths are boustrophedon rows a_e
    apart, spiral paths wind inward with radial pitch a_e.
    """
    if cfg.lateral_cutting_depth_mm > cfg.head_diameter_mm:
        warnings.warn("row spacing a_e exceeds the head diameter; "
                      "stripes of the surface stay uncut", stacklevel=2)
    step = cfg.feed_per_rev_mm
    w, h = cfg.surface_size_mm
    reach = cfg.head_diameter_mm / 2.0
    pos = []
    ang = []
    if cfg.path == "parallel":
        n_rows = math.ceil(h / cfg.lateral_cutting_depth_mm)
        x_lo, x_hi = -reach, w + reach
        n_steps = int(math.floor((x_hi - x_lo) / step))
        for k in range(n_rows):
            y = (k + 0.5) * cfg.lateral_cutting_depth_mm
            xs = x_lo + step * np.arange(n_steps + 1)
            if k % 2:
                xs = xs[::-1]
            for x in xs:
                pos.append((x, y))
                ang.append(0.0 if k % 2 == 0 else math.pi)
    else:
        cx, cy = w / 2.0, h / 2.0
        r = math.hypot(w, h) / 2.0 + reach
        pitch = cfg.lateral_cutting_depth_mm
        theta = 0.0
        while r > step:
            pos.append((cx + r * math.cos(theta), cy + r * math.sin(theta)))
            ang.append(theta + math.pi / 2.0)
            dtheta = step / r
            theta += dtheta
            r -= pitch * dtheta / (2.0 * math.pi)
    if not pos:
        raise ConfigError("empty tool path; check feed and surface size")
    return ToolPath(cfg.path, np.asarray(pos), np.asarray(ang))


@njit(cache=True)
def _imprint_ring(heights, spacing, cx, cy, ring_r, half_w, depth,
                  tilt_coef, feed_angle, max_cut):
    """Min-combine one ring groove into heights (all lengths in um)."""
    nx, ny = heights.shape
    r_out = ring_r + half_w
    r_in = ring_r - half_w
    r_in2 = r_in * r_in if r_in > 0.0 else -1.0
    iy0 = int(math.floor((cy - r_out) / spacing - 0.5))
    iy1 = int(math.ceil((cy + r_out) / spacing - 0.5))
    if iy0 < 0:
        iy0 = 0
    if iy1 > ny - 1:
        iy1 = ny - 1
    for iy in range(iy0, iy1 + 1):
        y = (iy + 0.5) * spacing - cy
        dy2 = y * y
        if dy2 > r_out * r_out:
            continue
        x_out = math.sqrt(r_out * r_out - dy2)
        if r_in2 > dy2:
            x_in = math.sqrt(r_in2 - dy2)
        else:
            x_in = -1.0
        # one or two x spans: [-x_out, -x_in] and [x_in, x_out]
        for side in range(2):
            if x_in > 0.0:
                lo = -x_out if side == 0 else x_in
                hi = -x_in if side == 0 else x_out
            else:
                if side == 1:
                    break
                lo, hi = -x_out, x_out
            ix0 = int(math.floor((cx + lo) / spacing - 0.5))
            ix1 = int(math.ceil((cx + hi) / spacing - 0.5))
            if ix0 < 0:
                ix0 = 0
            if ix1 > nx - 1:
                ix1 = nx - 1
            for ix in range(ix0, ix1 + 1):
                x = (ix + 0.5) * spacing - cx
                r = math.sqrt(x * x + dy2)
                u = r - ring_r
                if u < -half_w or u > half_w:
                    continue
                theta = math.atan2(y, x)
                mod = 1.0 + tilt_coef * math.cos(theta - feed_angle)
                if mod <= 0.0:
                    continue
                d = depth * mod
                arc_r = (half_w * half_w + d * d) / (2.0 * d)
                cut = math.sqrt(arc_r * arc_r - u * u) - (arc_r - d)
                if cut <= 0.0:
                    continue
                val = -cut
                if val < -max_cut:
                    val = -max_cut
                if val < heights[ix, iy]:
                    heights[ix, iy] = val


def imprint_rings(path: ToolPath, cfg: MillingConfig,
                  rng: RandomStream) -> HeightMap:
    """Imprint one jittered ring per path position into a fresh height map.

    Per-ring depth is lognormal with median depth_scale_um, per-ring radius
    gaussian around head_diameter/2; both streams are keyed by ring index,
    and min-combination makes the result order independent.
    """
    nx, ny = cfg.grid_dims
    heights = np.zeros((nx, ny), dtype=np.float32)
    spacing = cfg.grid_resolution_um
    half_w = cfg.blade_width_um / 2.0
    head_r_um = cfg.head_diameter_mm * 1000.0 / 2.0
    tilt_coef = math.tan(math.radians(cfg.tilt_deg)) * head_r_um / cfg.depth_scale_um
    for i in range(len(path)):
        gen = rng.child("ring", i).generator()
        depth = cfg.depth_scale_um * math.exp(
            cfg.depth_jitter_sigma * gen.standard_normal())
        ring_r = head_r_um + cfg.radius_jitter_um * gen.standard_normal()
        if ring_r <= half_w:
            continue
        cx, cy = path.positions_mm[i] * 1000.0
        _imprint_ring(heights, spacing, cx, cy, ring_r, half_w, depth,
                      tilt_coef, float(path.feed_angles[i]),
                      cfg.max_cut_depth_um)
    return HeightMap(heights, spacing)


def shade_preview(hm: HeightMap, light_direction, *, ambient: float = 0.0,
                  gain: float = 1.0, gamma: float = 1.0) -> np.ndarray:
    """Lambertian rendering of the height field, brightness in [0, 1].

    With neutral defaults a plane of analytic normal n lights to exactly
    max(0, n . l); ambient/gain/gamma are the reproducible stand-in for the
    manual exposure adjustment of real texture photographs.
    """
    light = np.asarray(light_direction, dtype=np.float64)
    norm = float(np.linalg.norm(light))
    if abs(norm - 1.0) > 1e-6:
        raise ConfigError("light_direction must be a unit vector")
    if gamma <= 0:
        raise ConfigError("gamma must be > 0")
    h = hm.heights.astype(np.float64)
    dzdx, dzdy = np.gradient(h, hm.spacing_um)
    inv = 1.0 / np.sqrt(dzdx * dzdx + dzdy * dzdy + 1.0)
    ndotl = inv * (-dzdx * light[0] - dzdy * light[1] + light[2])
    bright = ambient + (1.0 - ambient) * np.maximum(ndotl, 0.0)
    out = np.clip(gain * bright, 0.0, 1.0) ** (1.0 / gamma)
    return out.astype(np.float32)


def autocorrelation_eccentricity(hm: HeightMap, max_lag: int = 24) -> float:
    """Axis-dominance score of the texture autocorrelation.

    The positive part of the circular autocorrelation within |lag| <=
    max_lag is treated as a mass distribution; the score is the square root
    of its second-moment eigenvalue ratio.  Values near 1 mean isotropy
    (spiral paths); clearly > 1 means one dominant direction (parallel
    paths).
    """
    h = hm.heights.astype(np.float64)
    nx, ny = h.shape
    if max_lag < 1 or 2 * max_lag + 1 > min(nx, ny):
        raise ConfigError("max_lag out of range for this map")
    h0 = h - h.mean()
    spec = np.fft.fft2(h0)
    acf = np.fft.ifft2(spec * np.conj(spec)).real
    acf = np.fft.fftshift(acf)
    cx, cy = nx // 2, ny // 2
    win = acf[cx - max_lag:cx + max_lag + 1, cy - max_lag:cy + max_lag + 1]
    w = np.clip(win, 0.0, None)
    total = w.sum()
    if total <= 0:
        raise ConfigError("flat height map has no autocorrelation structure")
    lag = np.arange(-max_lag, max_lag + 1, dtype=np.float64)
    dx, dy = np.meshgrid(lag, lag, indexing="ij")
    ixx = float((w * dx * dx).sum() / total)
    iyy = float((w * dy * dy).sum() / total)
    ixy = float((w * dx * dy).sum() / total)
    mom = np.array([[ixx, ixy], [ixy, iyy]])
    ev = np.linalg.eigvalsh(mom)
    if ev[0] <= 0:
        return float("inf")
    return float(math.sqrt(ev[1] / ev[0]))


_CMAP_ANCHORS = np.array([
    [0.09, 0.11, 0.42],   # deepest cut: dark blue
    [0.10, 0.55, 0.60],   # mid: teal
    [0.85, 0.88, 0.30],   # near uncut: yellow
    [0.98, 0.98, 0.92],   # uncut plane: off-white
])


def height_map_rgb(hm: HeightMap, v_lo: float | None = None) -> np.ndarray:
    """Color-code heights with the package's fixed 4-anchor colormap.

    ``v_lo`` (default: the map minimum) maps to the first anchor, 0 um to
    the last; the mapping is piecewise linear and documented here so color
    images are comparable across runs.
    """
    h = hm.heights.astype(np.float64)
    lo = float(h.min()) if v_lo is None else float(v_lo)
    if lo >= 0.0:
        lo = -1.0
    t = np.clip((h - lo) / (0.0 - lo), 0.0, 1.0)
    n_seg = len(_CMAP_ANCHORS) - 1
    x = t * n_seg
    idx = np.minimum(x.astype(int), n_seg - 1)
    frac = x - idx
    rgb = (_CMAP_ANCHORS[idx] * (1.0 - frac[..., None])
           + _CMAP_ANCHORS[idx + 1] * frac[..., None])
    return (np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_height_map(hm: HeightMap, path: str) -> None:
    """Raw little-endian f32 + JSON sidecar, row-major x-fastest."""
    hm.heights.astype("<f4").ravel(order="F").tofile(path)
    meta = {
        "kind": "heightmap",
        "dims": list(hm.dims),
        "dtype": "f32",
        "spacing_um": hm.spacing_um,
        "endianness": "LE",
    }
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_height_map(path: str) -> HeightMap:
    with open(str(path) + ".json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("kind") != "heightmap" or meta.get("dtype") != "f32":
        raise FormatError(f"{path}.json does not describe a heightmap")
    if meta.get("endianness") != "LE":
        raise FormatError("only little-endian height maps are supported")
    dims = tuple(int(d) for d in meta["dims"])
    if len(dims) != 2:
        raise FormatError(f"heightmap dims must be 2D, got {dims}")
    flat = np.fromfile(path, dtype="<f4")
    if flat.size != dims[0] * dims[1]:
        raise FormatError(f"{path}: expected {dims[0] * dims[1]} samples, "
                          f"found {flat.size}")
    heights = flat.astype(np.float32).reshape(dims, order="F")
    return HeightMap(heights, float(meta["spacing_um"]))
