"""Synthetic crack surfaces: minimal tessellation cuts and fractal sheets.

A crack is modelled as a window-spanning surface of tessellation facets with
minimal total area (an s-t min cut on the facet graph), or alternatively as a
fractional Brownian height field.  Either surface carries a per-facet width
in voxel units and is rasterized by adaptive dilation: a voxel belongs to the
crack iff its center lies within half the local width of the surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, GenerationError
from .grid import GrayModel, LabelMask, VoxelVolume
from .maxflow import Dinic
from .rng import RandomStream
from .tessellation import Tessellation, facet_graph

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class CrackSurface:
    """A window-spanning facet set separating the two window faces of ``axis``."""

    axis: str
    facet_ids: tuple
    weight: float            # total facet area, exactly rounded (fsum)
    source_side: frozenset   # cell indices on the low-face side of the cut


def min_cut_crack(tess: Tessellation, axis: str) -> CrackSurface:
    """Minimum-area facet surface separating the low/high window faces.

    Facet areas are the edge weights; cells touching the terminal window
    faces are tied to the terminals with infinite capacity, so the cut never
    runs along the window boundary.
    """
    graph = facet_graph(tess, axis)
    spanning = set(graph.source_cells) & set(graph.sink_cells)
    if spanning:
        raise GenerationError(
            f"cell {min(spanning)} touches both window faces along {axis}; "
            "no finite cut exists (too few germs)")
    net = Dinic(graph.n_cells + 2)
    for a, b, _fid, w in graph.edges:
        net.add_edge(a, b, w, w)
    for c in graph.source_cells:
        net.add_edge(graph.source, c, math.inf)
    for c in graph.sink_cells:
        net.add_edge(c, graph.sink, math.inf)
    net.max_flow(graph.source, graph.sink)
    side = net.min_cut_side(graph.source)
    ids = sorted(fid for a, b, fid, _w in graph.edges
                 if (a in side) != (b in side))
    if not ids:
        raise GenerationError("empty min cut; tessellation is inconsistent")
    weight = math.fsum(tess.facets[fid].area for fid in ids)
    cells_on_source = frozenset(c for c in side if c < graph.n_cells)
    return CrackSurface(axis, tuple(ids), weight, cells_on_source)


def walk_widths(adjacency: dict, root: int, rng: RandomStream, *,
                start_width: int = 3, change_prob: float = 0.01,
                w_min: int = 1, w_max: int | None = None) -> dict:
    """Integer widths over a graph by a Bernoulli random walk along a BFS tree.

    Each traversed edge keeps the parent width except with probability
    ``change_prob`` for a +1 step and independently the same for -1, clamped
    to [w_min, w_max].  Traversal order is deterministic: BFS from ``root``
    with neighbor lists taken in sorted order.
    """
    if not 0.0 <= change_prob < 0.5:
        raise ConfigError("change_prob must lie in [0, 0.5)")
    if w_min < 1:
        raise ConfigError("w_min must be at least 1")
    hi = w_max if w_max is not None else np.iinfo(np.int64).max
    if not w_min <= start_width <= hi:
        raise ConfigError("start_width outside [w_min, w_max]")
    gen = rng.generator()
    widths = {root: int(np.clip(start_width, w_min, hi))}
    queue = [root]
    for u in queue:
        for v in sorted(adjacency[u]):
            if v in widths:
                continue
            w = widths[u]
            u01 = gen.random()
            if u01 < change_prob:
                w += 1
            elif u01 < 2.0 * change_prob:
                w -= 1
            widths[v] = int(np.clip(w, w_min, hi))
            queue.append(v)
    return widths


def _walk_root(tess: Tessellation, facet_ids) -> int:
    center = tess.window.center
    best, best_d = None, np.inf
    for fid in sorted(facet_ids):
        d = float(np.linalg.norm(tess.facets[fid].centroid - center))
        if d < best_d - 1e-12:
            best, best_d = fid, d
    return best


def assign_widths_random_walk(tess: Tessellation, facet_ids, rng: RandomStream, *,
                              start_width: int = 3, change_prob: float = 0.01,
                              w_min: int = 1, w_max: int | None = None) -> dict:
    """Spatially correlated integer widths for a facet surface.

    The walk starts at the facet closest to the window center and spreads
    over the facet edge-adjacency; see ``walk_widths`` for the step rule.
    """
    ids = sorted(facet_ids)
    if not ids:
        raise ConfigError("no facets to assign widths to")
    adjacency = tess.facet_adjacency(ids)
    root = _walk_root(tess, ids)
    widths = walk_widths(adjacency, root, rng, start_width=start_width,
                         change_prob=change_prob, w_min=w_min, w_max=w_max)
    # isolated facets (no shared edge with the walk tree) keep the start width
    for fid in ids:
        widths.setdefault(fid, widths[root])
    return widths


def assign_widths_multiscale(tess: Tessellation, facet_ids, scales,
                             rng: RandomStream) -> dict:
    """Partition the surface into len(scales) regions, one width per region.

    Region seeds are farthest-point samples on facet centroids (first seed at
    the window center); regions grow by multi-source BFS over facet
    adjacency, and the scale-to-region assignment is a random permutation.
    """
    ids = sorted(facet_ids)
    scales = [int(s) for s in scales]
    if any(s < 1 for s in scales):
        raise ConfigError("scales must be positive integers")
    if not scales:
        raise ConfigError("need at least one scale")
    if len(scales) > len(ids):
        raise ConfigError(f"{len(scales)} scales but only {len(ids)} facets")
    cents = {fid: tess.facets[fid].centroid for fid in ids}
    seeds = [_walk_root(tess, ids)]
    while len(seeds) < len(scales):
        best, best_d = None, -1.0
        for fid in ids:
            if fid in seeds:
                continue
            d = min(float(np.linalg.norm(cents[fid] - cents[s])) for s in seeds)
            if d > best_d + 1e-12:
                best, best_d = fid, d
        seeds.append(best)
    adjacency = tess.facet_adjacency(ids)
    region = {s: k for k, s in enumerate(seeds)}
    queue = list(seeds)
    for u in queue:
        for v in sorted(adjacency[u]):
            if v not in region:
                region[v] = region[u]
                queue.append(v)
    # facets unreachable from every seed join the region of the nearest seed
    for fid in ids:
        if fid not in region:
            dists = [(float(np.linalg.norm(cents[fid] - cents[s])), k)
                     for k, s in enumerate(seeds)]
            region[fid] = min(dists)[1]
    perm = rng.generator().permutation(len(scales))
    return {fid: scales[int(perm[region[fid]])] for fid in ids}


def voxelize_crack(tess: Tessellation, facet_ids, widths: dict,
                   dims) -> LabelMask:
    """Rasterize a facet surface with per-facet widths into a voxel mask.

    A voxel center c is marked for facet F with width w iff
    dist(c, F) <= w/2 + 1e-6 (exact point-to-polygon distance, slack makes
    the comparison inclusive under roundoff).  With w >= 1 this guarantees
    the mask separates the two window faces the surface spans.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ConfigError(f"bad dims {dims}")
    lo = np.asarray(tess.window.lo)
    ext = np.asarray(tess.window.extent)
    scale = np.asarray(dims, dtype=np.float64) / ext
    mask = np.zeros(dims, dtype=bool)
    half_span = min(dims) / 2.0
    for fid in sorted(facet_ids):
        facet = tess.facets[fid]
        w = float(widths[fid])
        if w < 1:
            raise ConfigError(f"facet {fid} width {w} below one voxel")
        if w > half_span:
            raise ConfigError(f"facet {fid} width {w} exceeds half the window")
        verts = (facet.vertices - lo) * scale   # grid units, voxel = unit cube
        _mark_polygon(mask, verts, w / 2.0 + 1e-6)
    return LabelMask(mask)


def _mark_polygon(mask: np.ndarray, verts: np.ndarray, radius: float) -> None:
    dims = mask.shape
    lo = np.maximum(np.floor(verts.min(axis=0) - radius - 0.5).astype(int), 0)
    hi = np.minimum(np.ceil(verts.max(axis=0) + radius - 0.5).astype(int),
                    np.asarray(dims) - 1)
    if np.any(lo > hi):
        return
    n = np.cross(verts[1] - verts[0], verts[2] - verts[0])
    nn = np.linalg.norm(n)
    if nn == 0:
        return
    n = n / nn
    xs = np.arange(lo[0], hi[0] + 1) + 0.5
    ys = np.arange(lo[1], hi[1] + 1) + 0.5
    zs = np.arange(lo[2], hi[2] + 1) + 0.5
    cx, cy, cz = np.meshgrid(xs, ys, zs, indexing="ij")
    pts = np.stack([cx.ravel(), cy.ravel(), cz.ravel()], axis=1)
    t = (pts - verts[0]) @ n
    near = np.abs(t) <= radius
    if not near.any():
        return
    pts = pts[near]
    t = t[near]
    proj = pts - t[:, None] * n
    inside = np.ones(len(pts), dtype=bool)
    edge_d2 = np.full(len(pts), np.inf)
    m = len(verts)
    for i in range(m):
        a, b = verts[i], verts[(i + 1) % m]
        e = b - a
        rel = proj - a
        inside &= (np.cross(np.broadcast_to(e, rel.shape), rel) @ n) >= -1e-9
        ee = float(e @ e)
        if ee > 0:
            s = np.clip(rel @ e / ee, 0.0, 1.0)
        else:
            s = np.zeros(len(pts))
        closest = a + s[:, None] * e
        d2 = np.einsum("ij,ij->i", proj - closest, proj - closest)
        edge_d2 = np.minimum(edge_d2, d2)
    dist2 = np.where(inside, 0.0, edge_d2) + t * t
    hit = dist2 <= radius * radius
    if not hit.any():
        return
    sel = pts[hit] - 0.5
    idx = np.round(sel).astype(int)
    mask[idx[:, 0], idx[:, 1], idx[:, 2]] = True


def brownian_field(shape, hurst: float, rng: RandomStream) -> np.ndarray:
    """2D fractional Brownian height field by spectral synthesis.

    Amplitudes follow |xi|^-(hurst+1) (power spectrum |xi|^(-2H-2)); the
    field is synthesized on a doubled grid and cropped so the crop is not
    artificially periodic.  Returned field has zero mean and unit standard
    deviation.
    """
    if not 0.0 < hurst < 1.0:
        raise ConfigError(f"hurst must be in (0, 1), got {hurst}")
    nx, ny = int(shape[0]), int(shape[1])
    if nx < 4 or ny < 4:
        raise ConfigError("field too small")
    mx, my = 2 * nx, 2 * ny
    gen = rng.generator()
    noise = gen.normal(size=(mx, my)) + 1j * gen.normal(size=(mx, my))
    fx = np.fft.fftfreq(mx)[:, None]
    fy = np.fft.fftfreq(my)[None, :]
    radius = np.sqrt(fx * fx + fy * fy)
    amp = np.zeros_like(radius)
    nonzero = radius > 0
    amp[nonzero] = radius[nonzero] ** (-(hurst + 1.0))
    field = np.fft.ifft2(noise * amp).real[:nx, :ny]
    field -= field.mean()
    std = field.std()
    if std > 0:
        field /= std
    return field


def brownian_crack(dims, rng: RandomStream, *, hurst: float = 0.8,
                   amplitude: float = 8.0, width: int = 1,
                   axis: str = "z") -> LabelMask:
    """Voxel mask of a rough crack sheet normal to ``axis``.

    The sheet is a fractional Brownian graph over the two remaining axes,
    centered in the window, with RMS roughness ``amplitude`` voxels.  Columns
    are filled between the floor heights of each cell and its 4-neighbors
    (staircase fill), which keeps the sheet 6-connected even across steep
    steps, then thickened to ``width`` voxels along the axis.
    """
    if axis not in _AXES:
        raise ConfigError(f"axis must be x, y or z, got {axis!r}")
    if width < 1:
        raise ConfigError("width must be at least one voxel")
    dims = tuple(int(d) for d in dims)
    ax = _AXES[axis]
    uv = [a for a in range(3) if a != ax]
    field = brownian_field((dims[uv[0]], dims[uv[1]]), hurst, rng)
    height = dims[ax] / 2.0 + amplitude * field
    level = np.floor(height).astype(np.int64)
    lo = level.copy()
    hi = level.copy()
    padded = np.pad(level, 1, mode="edge")
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        shifted = padded[1 + dx: 1 + dx + level.shape[0],
                         1 + dy: 1 + dy + level.shape[1]]
        lo = np.minimum(lo, shifted)
        hi = np.maximum(hi, shifted)
    pad_lo = (width - 1) // 2
    pad_hi = width // 2
    lo = np.clip(lo - pad_lo, 0, dims[ax] - 1)
    hi = np.clip(hi + pad_hi, 0, dims[ax] - 1)
    mask = np.zeros(dims, dtype=bool)
    span = np.arange(dims[ax])
    cover = (span[None, None, :] >= lo[:, :, None]) & (span[None, None, :] <= hi[:, :, None])
    if ax == 2:
        mask[:, :, :] = cover
    elif ax == 1:
        mask[:, :, :] = np.moveaxis(cover, 2, 1)
    else:
        mask[:, :, :] = np.moveaxis(cover, 2, 0)
    return LabelMask(mask)


def dilate_mask(mask: LabelMask, iterations: int = 1) -> LabelMask:
    """Face-connected (6-neighborhood) binary dilation."""
    if iterations < 0:
        raise ConfigError("iterations must be nonnegative")
    if iterations == 0:
        return mask
    struct = ndimage.generate_binary_structure(3, 1)
    out = ndimage.binary_dilation(mask.data, structure=struct,
                                  iterations=iterations)
    return LabelMask(out)


def estimate_air_gray_model(volume: VoxelVolume, *, air_threshold: float = 0.2,
                            bins: int = 64, min_samples: int = 1000) -> GrayModel:
    """Empirical gray model of the air phase (voxels darker than threshold)."""
    values = volume.as_float01()
    air = values[values < air_threshold]
    if air.size < min_samples:
        raise ConfigError(
            f"only {air.size} voxels below {air_threshold}; cannot estimate an "
            "air gray model, pass one explicitly")
    return GrayModel.from_samples(air, bins=bins)


def blend_into_volume(volume: VoxelVolume, mask: LabelMask,
                      gray_model: GrayModel, rng: RandomStream, *,
                      smooth_sigma: float = 0.7):
    """Darken the masked voxels with air-like gray values and soften the rim.

    Masked voxels take min(background, sampled air gray), so cracks never
    brighten material.  A Gaussian blur (sigma in voxels) is then applied
    only within the one-voxel boundary band of the mask; the returned ground
    truth is the geometric mask before smoothing.
    """
    out = volume.as_float01().copy()
    m = mask.data
    if m.shape != out.shape:
        raise ConfigError(f"mask shape {m.shape} != volume shape {out.shape}")
    n_in = int(m.sum())
    if n_in:
        gen = rng.generator()
        samples = np.clip(gray_model.sample(gen, n_in), 0.0, 1.0)
        out[m] = np.minimum(out[m], samples.astype(np.float32))
    if smooth_sigma > 0 and n_in:
        struct = ndimage.generate_binary_structure(3, 1)
        grown = ndimage.binary_dilation(m, structure=struct)
        shrunk = ndimage.binary_erosion(m, structure=struct, border_value=0)
        band = grown & ~shrunk
        if band.any():
            blurred = ndimage.gaussian_filter(out, sigma=smooth_sigma)
            out[band] = blurred[band]
    np.clip(out, 0.0, 1.0, out=out)
    return VoxelVolume(out.astype(np.float32), volume.spacing_um), mask
