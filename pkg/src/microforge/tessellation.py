"""Bounded 3D Voronoi tessellations and their facet-weighted adjacency graph.

Each cell is cut from the window box by half-space clipping against the
bisector planes of nearby germs; a security-radius bound (a germ farther than
twice the current circumradius cannot cut) keeps the construction near-linear
in practice.  Predicates are plain double precision with tolerance welding of
near-duplicate vertices; the tolerances are documented on ``build_voronoi``
and covered by tests rather than hidden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, GenerationError
from .points import Box, PointPattern

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class CellFace:
    normal: np.ndarray       # outward unit normal
    offset: float            # plane is normal . x = offset, cell side <=
    vertices: np.ndarray     # (k, 3) convex polygon
    kind: tuple              # ("w", window_face 0..5) or ("n", neighbor germ)

    @property
    def area(self) -> float:
        return _polygon_area(self.vertices)


@dataclass(frozen=True)
class Cell:
    index: int
    germ: np.ndarray
    faces: tuple
    volume: float
    window_faces: frozenset   # indices 0..5 of the window faces this cell touches


@dataclass(frozen=True)
class Facet:
    index: int
    cell_a: int
    cell_b: int
    vertices: np.ndarray
    area: float
    centroid: np.ndarray


@dataclass(frozen=True)
class Tessellation:
    window: Box
    germs: np.ndarray
    cells: tuple
    facets: tuple

    @property
    def total_cell_volume(self) -> float:
        return math.fsum(c.volume for c in self.cells)

    def facet_adjacency(self, facet_ids) -> dict:
        """Edge adjacency among the given facets.

        Two facets are adjacent when their polygons share at least two welded
        vertices (a common tessellation edge).  Neighbor lists are sorted so
        traversals are deterministic.
        """
        ids = list(facet_ids)
        scale = float(np.max(self.window.extent))
        weld = 1e-6 * scale
        all_pts = []
        owner = []
        for fid in ids:
            for v in self.facets[fid].vertices:
                all_pts.append(v)
                owner.append(fid)
        if not all_pts:
            return {fid: [] for fid in ids}
        pts = np.asarray(all_pts)
        tree = cKDTree(pts)
        pairs = tree.query_pairs(r=weld, output_type="ndarray")
        # union-find to weld coincident vertices across facets
        parent = np.arange(len(pts))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for a, b in pairs:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        shared: dict = {}
        for idx in range(len(pts)):
            shared.setdefault(find(idx), set()).add(owner[idx])
        pair_count: dict = {}
        for members in shared.values():
            ms = sorted(members)
            for i in range(len(ms)):
                for j in range(i + 1, len(ms)):
                    key = (ms[i], ms[j])
                    pair_count[key] = pair_count.get(key, 0) + 1
        adj = {fid: [] for fid in ids}
        for (a, b), cnt in pair_count.items():
            if cnt >= 2:  # a shared edge, not just a corner
                adj[a].append(b)
                adj[b].append(a)
        for fid in ids:
            adj[fid].sort()
        return adj


@dataclass(frozen=True)
class FacetGraph:
    """Min-cut substrate: cells plus two virtual terminals.

    Node ids are 0..n_cells-1 for cells, ``source`` and ``sink`` for the
    terminals attached to the low/high window faces of the chosen axis.
    """

    n_cells: int
    edges: tuple          # (cell_a, cell_b, facet_index, weight=facet area)
    source_cells: tuple
    sink_cells: tuple
    axis: str

    @property
    def source(self) -> int:
        return self.n_cells

    @property
    def sink(self) -> int:
        return self.n_cells + 1


def _polygon_area(verts: np.ndarray) -> float:
    if len(verts) < 3:
        return 0.0
    c = verts.mean(axis=0)
    total = 0.0
    for i in range(len(verts)):
        a = verts[i] - c
        b = verts[(i + 1) % len(verts)] - c
        total += 0.5 * float(np.linalg.norm(np.cross(a, b)))
    return total


def _polygon_centroid(verts: np.ndarray) -> np.ndarray:
    c = verts.mean(axis=0)
    acc = np.zeros(3)
    total = 0.0
    for i in range(len(verts)):
        a, b = verts[i], verts[(i + 1) % len(verts)]
        tri_area = 0.5 * float(np.linalg.norm(np.cross(a - c, b - c)))
        acc += tri_area * (a + b + c) / 3.0
        total += tri_area
    return acc / total if total > 0 else c


def _box_faces(window: Box):
    lo, hi = np.asarray(window.lo), np.asarray(window.hi)
    corners = {}
    for ix in (0, 1):
        for iy in (0, 1):
            for iz in (0, 1):
                corners[(ix, iy, iz)] = np.array([
                    hi[0] if ix else lo[0],
                    hi[1] if iy else lo[1],
                    hi[2] if iz else lo[2],
                ])
    quads = [
        (0, [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)]),   # x low
        (1, [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)]),   # x high
        (2, [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)]),   # y low
        (3, [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)]),   # y high
        (4, [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)]),   # z low
        (5, [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]),   # z high
    ]
    faces = []
    for face_idx, keys in quads:
        axis, high = divmod(face_idx, 2)[0], face_idx % 2
        normal = np.zeros(3)
        normal[axis] = 1.0 if high else -1.0
        offset = hi[axis] if high else -lo[axis]
        verts = np.array([corners[k] for k in keys])
        faces.append([normal, float(offset), verts, ("w", face_idx)])
    return faces


def _clip_cell(faces, n: np.ndarray, d: float, kind, eps: float):
    """Clip a convex face list by the half-space n.x <= d; returns (faces, cut?)."""
    global_max = -np.inf
    dists = []
    for f in faces:
        dv = f[2] @ n - d
        dists.append(dv)
        m = dv.max()
        if m > global_max:
            global_max = m
    if global_max <= eps:
        return faces, False
    new_faces = []
    cap_points = []
    for f, dv in zip(faces, dists):
        verts = f[2]
        if dv.min() >= -eps:
            # entirely outside (or degenerate on-plane sliver): drop
            for v, dd in zip(verts, dv):
                if abs(dd) <= eps:
                    cap_points.append(v)
            continue
        if dv.max() <= eps:
            new_faces.append(f)
            for v, dd in zip(verts, dv):
                if abs(dd) <= eps:
                    cap_points.append(v)
            continue
        kept = []
        m = len(verts)
        for i in range(m):
            a, da = verts[i], dv[i]
            b, db = verts[(i + 1) % m], dv[(i + 1) % m]
            if da <= eps:
                kept.append(a)
                if abs(da) <= eps:
                    cap_points.append(a)
            if (da <= eps) != (db <= eps) and abs(da) > eps and abs(db) > eps:
                t = da / (da - db)
                p = a + t * (b - a)
                kept.append(p)
                cap_points.append(p)
        kept = _dedupe_ring(kept, eps)
        if len(kept) >= 3:
            new_faces.append([f[0], f[1], np.asarray(kept), f[3]])
    cap = _weld_points(cap_points, eps)
    if len(cap) >= 3:
        ring = _order_convex_ring(np.asarray(cap), n)
        new_faces.append([n, d, ring, kind])
    return new_faces, True


def _dedupe_ring(points, eps):
    if not points:
        return points
    out = [points[0]]
    for p in points[1:]:
        if np.linalg.norm(p - out[-1]) > eps:
            out.append(p)
    if len(out) > 1 and np.linalg.norm(out[0] - out[-1]) <= eps:
        out.pop()
    return out


def _weld_points(points, eps):
    out = []
    for p in points:
        if all(np.linalg.norm(p - q) > eps for q in out):
            out.append(p)
    return out


def _order_convex_ring(points: np.ndarray, normal: np.ndarray) -> np.ndarray:
    c = points.mean(axis=0)
    # in-plane orthonormal basis
    a = np.array([1.0, 0.0, 0.0])
    if abs(normal[0]) > 0.9:
        a = np.array([0.0, 1.0, 0.0])
    u = np.cross(normal, a)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    rel = points - c
    ang = np.arctan2(rel @ v, rel @ u)
    return points[np.argsort(ang, kind="stable")]


def build_voronoi(pattern: PointPattern, window: Box | None = None) -> Tessellation:
    """Voronoi diagram of the germs, clipped to the window box.

    Tolerances: vertices welded at 1e-9 of the window extent; facets thinner
    than 1e-12 * extent^2 in area are discarded; germs closer than the weld
    tolerance are rejected as duplicates.
    """
    window = window or pattern.window
    germs = np.asarray(pattern.points, dtype=np.float64)
    n = len(germs)
    if n < 1:
        raise ConfigError("tessellation needs at least one germ")
    scale = float(np.max(window.extent))
    eps = 1e-9 * scale
    eps_area = 1e-12 * scale * scale
    if n > 1:
        tree = cKDTree(germs)
        dup = tree.query_pairs(r=max(1e-9, eps))
        if dup:
            i, j = sorted(dup)[0]
            raise ConfigError(f"duplicate germs {i} and {j} (closer than weld tolerance)")

    cell_faces = []
    for i in range(n):
        g = germs[i]
        faces = _box_faces(window)
        if n > 1:
            d2 = np.einsum("ij,ij->i", germs - g, germs - g)
            d2[i] = np.inf
            order = np.argsort(d2, kind="stable")
            r2max = max(float(np.max(np.einsum("ij,ij->i", f[2] - g, f[2] - g)))
                        for f in faces)
            for j in order:
                dj2 = d2[j]
                if not np.isfinite(dj2):
                    break
                if dj2 > 4.0 * r2max:
                    break  # security radius: no remaining germ can cut this cell
                gj = germs[j]
                dj = math.sqrt(dj2)
                normal = (gj - g) / dj
                offset = float(normal @ (g + gj)) / 2.0
                faces, cut = _clip_cell(faces, normal, offset, ("n", int(j)), eps)
                if cut:
                    r2max = max(float(np.max(np.einsum("ij,ij->i", f[2] - g, f[2] - g)))
                                for f in faces)
        cell_faces.append(faces)

    # weld one-sided bisector caps into shared facets
    facet_key_to_poly = {}
    for i, faces in enumerate(cell_faces):
        for f in faces:
            if f[3][0] != "n":
                continue
            j = f[3][1]
            key = (min(i, j), max(i, j))
            if key not in facet_key_to_poly or i == key[0]:
                if key in facet_key_to_poly and facet_key_to_poly[key][0] == key[0]:
                    continue
                facet_key_to_poly[key] = (i, f[2])

    facets = []
    for key in sorted(facet_key_to_poly):
        _, poly = facet_key_to_poly[key]
        area = _polygon_area(poly)
        if area <= eps_area:
            continue
        verts = np.asarray(poly)
        verts.flags.writeable = False
        facets.append(Facet(len(facets), key[0], key[1], verts, area,
                            _polygon_centroid(verts)))

    cells = []
    for i, faces in enumerate(cell_faces):
        g = germs[i]
        vol = 0.0
        window_faces = set()
        kept = []
        for f in faces:
            area = _polygon_area(f[2])
            if area <= eps_area:
                continue
            vol += area * (f[1] - float(f[0] @ g)) / 3.0
            if f[3][0] == "w":
                window_faces.add(f[3][1])
            verts = np.asarray(f[2])
            verts.flags.writeable = False
            kept.append(CellFace(f[0], f[1], verts, f[3]))
        cells.append(Cell(i, g, tuple(kept), vol, frozenset(window_faces)))

    germs_ro = np.asarray(germs)
    germs_ro.flags.writeable = False
    return Tessellation(window, germs_ro, tuple(cells), tuple(facets))


def facet_graph(tess: Tessellation, axis: str) -> FacetGraph:
    """Attach SOURCE/SINK terminals to the cells on the low/high window face
    along ``axis``; interior edges are weighted by facet area."""
    if axis not in _AXES:
        raise ConfigError(f"axis must be x, y or z, got {axis!r}")
    ax = _AXES[axis]
    low_face, high_face = 2 * ax, 2 * ax + 1
    source_cells = tuple(c.index for c in tess.cells if low_face in c.window_faces)
    sink_cells = tuple(c.index for c in tess.cells if high_face in c.window_faces)
    if not source_cells or not sink_cells:
        raise GenerationError(f"no cell touches a terminal face along {axis}; "
                              "tessellation is inconsistent")
    edges = tuple((f.cell_a, f.cell_b, f.index, f.area) for f in tess.facets)
    return FacetGraph(len(tess.cells), edges, source_cells, sink_cells, axis)


def export_off(tess: Tessellation, path: str) -> None:
    """Dump all interior facet polygons as an OFF mesh for inspection."""
    verts = []
    faces = []
    for f in tess.facets:
        base = len(verts)
        verts.extend(f.vertices.tolist())
        faces.append(list(range(base, base + len(f.vertices))))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(verts)} {len(faces)} 0\n")
        for v in verts:
            fh.write(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for face in faces:
            fh.write(str(len(face)) + " " + " ".join(map(str, face)) + "\n")
