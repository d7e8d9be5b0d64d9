"""Layout and partition tests against brute-force geometric oracles."""

import math
from fractions import Fraction

import numpy as np
import pytest

from spatial_ab.lattice import (
    LayoutError,
    build_clusters,
    build_layout,
    diagnostics,
)


# ---------------------------------------------------------------------------
# oracles: reconstruct adjacency from raw cell geometry, independently of the
# index arithmetic used by the builders


def _square_edges(s):
    cells = []
    for row in range(s):
        for col in range(s):
            v = [(col, row), (col + 1, row), (col + 1, row + 1), (col, row + 1)]
            cells.append({frozenset((v[i], v[(i + 1) % 4])) for i in range(4)})
    return cells


def _triangular_edges(s):
    # Vertices in doubled-x integer coordinates so everything stays exact.
    cells = []
    for r in range(s):
        for k in range(2 * r + 1):
            j = k // 2
            if k % 2 == 0:
                v = [
                    (s - r + 2 * j, r),
                    (s - r + 2 * j - 1, r + 1),
                    (s - r + 2 * j + 1, r + 1),
                ]
            else:
                v = [
                    (s - r + 2 * j, r),
                    (s - r + 2 * j + 2, r),
                    (s - r + 2 * j + 1, r + 1),
                ]
            cells.append({frozenset((v[0], v[1])), frozenset((v[1], v[2])),
                          frozenset((v[0], v[2]))})
    return cells


def _edge_adjacency(cells):
    n = len(cells)
    out = [set() for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if cells[i] & cells[j]:
                out[i].add(j)
                out[j].add(i)
    return out


def _hex_adjacency(s):
    # Hexagons touch edge-to-edge exactly when centers are one spacing apart.
    centers = [(q + 0.5 * r, r * math.sqrt(3) / 2)
               for r in range(s) for q in range(s)]
    n = len(centers)
    out = [set() for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d = math.hypot(centers[i][0] - centers[j][0],
                           centers[i][1] - centers[j][1])
            if abs(d - 1.0) < 1e-9:
                out[i].add(j)
                out[j].add(i)
    return out


@pytest.mark.parametrize("tiling,s", [
    ("square", 3), ("square", 6), ("square", 9),
    ("triangular", 3), ("triangular", 6), ("triangular", 9),
    ("hexagonal", 3), ("hexagonal", 6), ("hexagonal", 9),
])
def test_adjacency_matches_geometry(tiling, s):
    lay = build_layout(tiling, s * s)
    if tiling == "square":
        oracle = _edge_adjacency(_square_edges(s))
    elif tiling == "triangular":
        oracle = _edge_adjacency(_triangular_edges(s))
    else:
        oracle = _hex_adjacency(s)
    assert lay.R == s * s
    for i in range(lay.R):
        assert set(int(v) for v in lay.neighbors[i]) == oracle[i]


@pytest.mark.parametrize("tiling,rmax", [
    ("triangular", 3), ("square", 4), ("hexagonal", 6),
])
def test_layout_invariants(tiling, rmax):
    lay = build_layout(tiling, 144)
    assert lay.r == rmax
    assert lay.n_neighbors.max() == rmax
    assert lay.n_neighbors.min() >= 1
    assert lay.coords.shape == (144, 2)
    assert lay.coords.min() > 0.0 and lay.coords.max() < 1.0
    # symmetric adjacency, no self-loops
    A = lay.adjacency
    assert np.array_equal(A, A.T)
    assert np.all(np.diag(A) == 0)
    # scaled distances: max possible is sqrt(2)/2 inside the unit square
    D = lay.pairwise_distance
    assert np.all(np.diag(D) == 0)
    assert D.max() < math.sqrt(2) / 2


def test_unrealizable_unit_counts_are_named():
    with pytest.raises(LayoutError, match="36 and 49"):
        build_layout("square", 40)
    with pytest.raises(LayoutError, match="not realizable"):
        build_layout("triangular", 50)
    with pytest.raises(LayoutError, match="tiling"):
        build_layout("pentagonal", 36)
    # R = 1 has an isolated unit and is rejected too
    with pytest.raises(LayoutError):
        build_layout("square", 1)


# ---------------------------------------------------------------------------
# cluster partitions


def _up_block_vertices(S, br, j):
    return [
        (Fraction(S - br, 2) + j, Fraction(br)),
        (Fraction(S - br, 2) + j - Fraction(1, 2), Fraction(br + 1)),
        (Fraction(S - br, 2) + j + Fraction(1, 2), Fraction(br + 1)),
    ]


def _down_block_vertices(S, br, j):
    return [
        (Fraction(S - br, 2) + j, Fraction(br)),
        (Fraction(S - br, 2) + j + 1, Fraction(br)),
        (Fraction(S - br, 2) + j + Fraction(1, 2), Fraction(br + 1)),
    ]


def _strictly_inside(pt, tri):
    # exact sign test: all three cross products share one sign
    (x, y) = pt
    signs = []
    for a in range(3):
        (x1, y1), (x2, y2) = tri[a], tri[(a + 1) % 3]
        signs.append((x2 - x1) * (y - y1) - (y2 - y1) * (x - x1))
    return all(v > 0 for v in signs) or all(v < 0 for v in signs)


@pytest.mark.parametrize("s,k", [(6, 1), (6, 2), (6, 3), (6, 6), (9, 3), (12, 4)])
def test_triangular_blocks_contain_their_cells(s, k):
    lay = build_layout("triangular", s * s)
    part = build_clusters(lay, k * k)
    S = s // k
    for r in range(s):
        for kk in range(2 * r + 1):
            i = r * r + kk
            j = kk // 2
            if kk % 2 == 0:
                x = Fraction(s - r, 2) + j
                y = Fraction(r) + Fraction(2, 3)
            else:
                x = Fraction(s - r, 2) + j + Fraction(1, 2)
                y = Fraction(r) + Fraction(1, 3)
            pt = (x / k, y / k)
            cid = int(part.assignment[i])
            br = math.isqrt(cid)
            rem = cid - br * br
            if rem % 2 == 0:
                tri = _up_block_vertices(S, br, rem // 2)
            else:
                tri = _down_block_vertices(S, br, rem // 2)
            assert _strictly_inside(pt, tri), (s, k, i, cid)


@pytest.mark.parametrize("tiling,s,c", [
    ("square", 6, 4), ("square", 6, 9), ("square", 12, 16),
    ("hexagonal", 6, 4), ("hexagonal", 9, 9),
    ("triangular", 6, 4), ("triangular", 12, 9),
])
def test_partition_invariants(tiling, s, c):
    lay = build_layout(tiling, s * s)
    part = build_clusters(lay, c)
    assert part.m == lay.R // c
    counts = np.bincount(part.assignment, minlength=part.m)
    assert np.all(counts == c)
    # contiguity, re-verified here with an oracle BFS
    for members in part.members:
        mset = set(int(u) for u in members)
        frontier = {int(members[0])}
        seen = set(frontier)
        while frontier:
            nxt = set()
            for u in frontier:
                for v in lay.neighbors[u]:
                    if int(v) in mset and int(v) not in seen:
                        nxt.add(int(v))
            seen |= nxt
            frontier = nxt
        assert seen == mset


def test_invalid_cluster_sizes_are_named():
    lay = build_layout("square", 36)
    with pytest.raises(LayoutError, match=r"valid sizes"):
        build_clusters(lay, 5)
    tri = build_layout("triangular", 36)
    # triangular clusters must themselves be triangular patches
    with pytest.raises(LayoutError):
        build_clusters(tri, 6)


def test_whole_region_cluster():
    for tiling in ("triangular", "square", "hexagonal"):
        lay = build_layout(tiling, 36)
        part = build_clusters(lay, 36)
        assert part.m == 1
        diag = diagnostics(lay, part)
        assert diag.omega == 1.0
        assert len(diag.cluster_neighborhood[0]) == 0
        assert np.all(diag.r_c_per_unit == 1)
        assert len(diag.R1) == 0
        assert np.all(diag.interior_mask)


# ---------------------------------------------------------------------------
# diagnostics against pure-python recomputation


def _brute_diagnostics(lay, part):
    assign = part.assignment
    m = part.m
    interior, exterior = [], []
    for j in range(m):
        members = [int(u) for u in np.flatnonzero(assign == j)]
        mset = set(members)
        inner = [u for u in members
                 if all(int(v) in mset for v in lay.neighbors[u])]
        touch = sorted({int(v) for u in members for v in lay.neighbors[u]}
                       - mset)
        interior.append(sorted(inner))
        exterior.append(touch)
    ratios = [1.0]
    for u in range(lay.R):
        by_cluster = {}
        for v in lay.neighbors[u]:
            cj = int(assign[int(v)])
            by_cluster[cj] = by_cluster.get(cj, 0) + 1
        vals = list(by_cluster.values())
        ratios.append(max(vals) / min(vals))
    reach = []
    for u in range(lay.R):
        touched = {int(assign[u])}
        touched.update(int(assign[int(v)]) for v in lay.neighbors[u])
        reach.append(touched)
    return interior, exterior, max(ratios), reach


@pytest.mark.parametrize("tiling,s,c", [
    ("square", 6, 4), ("square", 9, 9),
    ("triangular", 9, 9), ("hexagonal", 9, 9),
])
def test_diagnostics_match_brute_force(tiling, s, c):
    lay = build_layout(tiling, s * s)
    part = build_clusters(lay, c)
    diag = diagnostics(lay, part)
    interior, exterior, omega, reach = _brute_diagnostics(lay, part)
    for j in range(part.m):
        assert list(diag.interior[j]) == interior[j]
        assert list(diag.cluster_neighborhood[j]) == exterior[j]
        members = set(int(u) for u in part.members[j])
        assert members == set(diag.interior[j]) | set(diag.boundary[j])
    assert diag.omega == pytest.approx(omega)
    assert [int(v) for v in diag.r_c_per_unit] == [len(t) for t in reach]
    assert set(int(u) for u in diag.R1) == {
        u for u in range(lay.R) if len(reach[u]) > 2
    }
    # overlap counts: clusters reachable from both closed neighborhoods
    for a, b in [(0, 0), (0, 1), (3, 17), (5, 30)]:
        a, b = a % lay.R, b % lay.R
        assert diag.overlap_counts[a, b] == len(reach[a] & reach[b])
    # interior mask agrees with the per-cluster interior lists
    flat = sorted(u for j in range(part.m) for u in interior[j])
    assert list(np.flatnonzero(diag.interior_mask)) == flat


def test_reference_partition_profiles():
    # 81-unit layouts, 9-unit clusters: neighbor-count unevenness and the
    # exterior neighborhood size of the deepest interior cluster.
    expected = {"triangular": (2.0, 9), "square": (3.0, 12), "hexagonal": (3.0, 14)}
    for tiling, (omega, n_ext) in expected.items():
        lay = build_layout(tiling, 81)
        part = build_clusters(lay, 9)
        diag = diagnostics(lay, part)
        sizes = [len(v) for v in diag.cluster_neighborhood]
        assert diag.omega == omega, tiling
        assert max(sizes) == n_ext, tiling


def test_square_partition_reach_profile():
    # 9x9 grid in 3x3 blocks: block-corner units reach 3 clusters, four such
    # units around each of the four interior lattice crossings.
    lay = build_layout("square", 81)
    diag = diagnostics(lay, build_clusters(lay, 9))
    assert diag.r_c == 3
    assert len(diag.R1) == 16
    # center unit of the central block touches nothing outside its cluster
    center = 4 * 9 + 4
    assert diag.r_c_per_unit[center] == 1
