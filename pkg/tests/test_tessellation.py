import math

import numpy as np
import pytest

from microforge.errors import ConfigError, GenerationError
from microforge.points import Box, PointPattern, sample_poisson
from microforge.rng import RandomStream
from microforge.tessellation import build_voronoi, export_off, facet_graph


def _pattern(points, dims=(10, 10, 10)):
    box = Box.from_dims(dims)
    return PointPattern(box, np.asarray(points, dtype=float))


def test_single_germ_cell_is_window():
    tess = build_voronoi(_pattern([[5.0, 5.0, 5.0]]))
    assert len(tess.cells) == 1
    assert len(tess.facets) == 0
    cell = tess.cells[0]
    assert cell.volume == pytest.approx(1000.0, rel=1e-12)
    assert cell.window_faces == frozenset(range(6))


def test_two_germs_bisector_facet():
    tess = build_voronoi(_pattern([[2.0, 5.0, 5.0], [8.0, 5.0, 5.0]]))
    assert len(tess.cells) == 2
    assert len(tess.facets) == 1
    facet = tess.facets[0]
    # bisector x = 5 cuts the 10x10x10 box into equal halves
    assert facet.area == pytest.approx(100.0, rel=1e-9)
    np.testing.assert_allclose(facet.vertices[:, 0], 5.0, atol=1e-9)
    np.testing.assert_allclose(facet.centroid, [5.0, 5.0, 5.0], atol=1e-9)
    for cell in tess.cells:
        assert cell.volume == pytest.approx(500.0, rel=1e-9)
    assert (facet.cell_a, facet.cell_b) == (0, 1)


def test_off_axis_bisector_volumes():
    tess = build_voronoi(_pattern([[3.0, 5.0, 5.0], [9.0, 5.0, 5.0]]))
    # bisector at x = 6: volumes 600 / 400
    assert tess.cells[0].volume == pytest.approx(600.0, rel=1e-9)
    assert tess.cells[1].volume == pytest.approx(400.0, rel=1e-9)


def test_regular_grid_facet_count():
    # 3x3x3 germ grid: cubic cells, 3 * 2 * 9 = 54 interior facets
    coords = [10 * (i + 0.5) / 3 for i in range(3)]
    pts = [[x, y, z] for x in coords for y in coords for z in coords]
    tess = build_voronoi(_pattern(pts))
    assert len(tess.cells) == 27
    assert len(tess.facets) == 54
    for facet in tess.facets:
        assert facet.area == pytest.approx((10 / 3) ** 2, rel=1e-9)
    for cell in tess.cells:
        assert cell.volume == pytest.approx(1000 / 27, rel=1e-9)


def test_volume_closure_random():
    box = Box.from_dims((24, 18, 30))
    for seed in range(5):
        germs = sample_poisson(80 / box.volume, box, RandomStream(300 + seed, 0))
        if len(germs) < 2:
            continue
        tess = build_voronoi(germs)
        assert tess.total_cell_volume == pytest.approx(box.volume, rel=1e-9)


def test_germ_inside_own_cell():
    box = Box.from_dims((12, 12, 12))
    germs = sample_poisson(40 / box.volume, box, RandomStream(11, 0))
    tess = build_voronoi(germs)
    for cell in tess.cells:
        for normal, offset, _verts, _kind in _cell_planes(cell):
            assert np.dot(normal, cell.germ) <= offset + 1e-9


def _cell_planes(cell):
    for face in cell.faces:
        yield face.normal, face.offset, face.vertices, face.kind


def test_facets_lie_on_bisectors():
    box = Box.from_dims((15, 15, 15))
    germs = sample_poisson(30 / box.volume, box, RandomStream(4, 0))
    tess = build_voronoi(germs)
    pts = germs.points
    for facet in tess.facets:
        a, b = pts[facet.cell_a], pts[facet.cell_b]
        mid = 0.5 * (a + b)
        n = (b - a) / np.linalg.norm(b - a)
        d = np.dot(n, mid)
        err = np.abs(facet.vertices @ n - d)
        assert err.max() < 1e-7
        # equidistance from both germs
        da = np.linalg.norm(facet.vertices - a, axis=1)
        db = np.linalg.norm(facet.vertices - b, axis=1)
        np.testing.assert_allclose(da, db, atol=1e-6)


def test_facet_vertices_inside_window():
    box = Box.from_dims((9, 11, 13))
    germs = sample_poisson(50 / box.volume, box, RandomStream(5, 0))
    tess = build_voronoi(germs)
    for facet in tess.facets:
        assert np.all(facet.vertices >= np.asarray(box.lo) - 1e-7)
        assert np.all(facet.vertices <= np.asarray(box.hi) + 1e-7)


def test_duplicate_germs_rejected():
    with pytest.raises(ConfigError):
        build_voronoi(_pattern([[5, 5, 5], [5, 5, 5]]))


def test_empty_pattern_rejected():
    with pytest.raises(ConfigError):
        build_voronoi(PointPattern(Box.from_dims((5, 5, 5)), np.empty((0, 3))))


def test_facet_adjacency_symmetric_and_shared_edge():
    box = Box.from_dims((14, 14, 14))
    germs = sample_poisson(35 / box.volume, box, RandomStream(8, 0))
    tess = build_voronoi(germs)
    ids = [f.index for f in tess.facets]
    adj = tess.facet_adjacency(ids)
    facets = {f.index: f for f in tess.facets}
    for fid, nbrs in adj.items():
        assert sorted(nbrs) == list(nbrs)
        for nb in nbrs:
            assert fid in adj[nb]
            # adjacency means >= 2 shared (welded) vertices
            va, vb = facets[fid].vertices, facets[nb].vertices
            d = np.linalg.norm(va[:, None, :] - vb[None, :, :], axis=2)
            assert np.sum(d.min(axis=1) < 1e-4) >= 2


def test_surface_of_cut_consistency():
    # sum of all facet areas for a given cell pair occurs once
    box = Box.from_dims((10, 10, 10))
    germs = sample_poisson(25 / box.volume, box, RandomStream(13, 0))
    tess = build_voronoi(germs)
    pairs = [(f.cell_a, f.cell_b) for f in tess.facets]
    assert len(pairs) == len(set(pairs))
    for a, b in pairs:
        assert a < b


def test_facet_graph_terminals():
    tess = build_voronoi(_pattern([[5, 5, 2], [5, 5, 5], [5, 5, 8]]))
    graph = facet_graph(tess, "z")
    assert graph.source_cells == (0,)
    assert graph.sink_cells == (2,)
    assert graph.n_cells == 3
    # both facets present as edges
    assert len(graph.edges) == 2


def test_min_cut_rejects_cell_spanning_both_faces():
    # two slab cells both span z fully: no finite cut separates the faces
    from microforge.crack import min_cut_crack
    tess = build_voronoi(_pattern([[5, 5, 5], [5, 2, 5]]))
    with pytest.raises(GenerationError):
        min_cut_crack(tess, "z")


def test_export_off(tmp_path):
    box = Box.from_dims((8, 8, 8))
    germs = sample_poisson(12 / box.volume, box, RandomStream(2, 0))
    tess = build_voronoi(germs)
    path = tmp_path / "tess.off"
    export_off(tess, path)
    text = path.read_text().splitlines()
    assert text[0] == "OFF"
    n_vert, n_face, _ = map(int, text[1].split())
    assert n_face == len(tess.facets)
    assert n_vert == sum(len(f.vertices) for f in tess.facets)


def test_window_overrides_pattern_box():
    pts = _pattern([[2, 5, 5], [8, 5, 5]])
    win = Box.from_dims((10, 10, 20))
    tess = build_voronoi(pts, win)
    assert tess.window is win
    assert tess.total_cell_volume == pytest.approx(win.volume, rel=1e-9)
