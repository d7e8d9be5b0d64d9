"""Tiled spatial layouts, interference neighborhoods, and cluster partitions.

Units are the cells of a regular tiling; two cells interfere when they share
an edge.  Three tilings are supported:

* ``triangular``: the R = s**2 up/down triangles of a side-s triangular
  region; at most 3 neighbors per unit.
* ``square``: an s x s grid, R = s**2; at most 4 neighbors.
* ``hexagonal``: an s x s rhombus of hexagons in axial coordinates,
  R = s**2; at most 6 neighbors.

Cell centers are rescaled to lie strictly inside the unit square; all
downstream distance computations use these normalized coordinates.

Cluster partitions are contiguous equal-size blocks: side-k sub-triangles
(cluster_size = k**2) for the triangular tiling and a x b blocks for the
square/hexagonal tilings.  ``diagnostics`` reports the interference structure
of a partition: interior/boundary units, exterior cluster neighborhoods, the
neighbor-unevenness ratio omega, per-unit cluster-reach counts r_c, and
pairwise cluster-overlap counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TILING_ALIASES = {
    "tri": "triangular",
    "triangular": "triangular",
    "sq": "square",
    "square": "square",
    "hex": "hexagonal",
    "hexagonal": "hexagonal",
}

MAX_NEIGHBORS = {"triangular": 3, "square": 4, "hexagonal": 6}


class LayoutError(ValueError):
    """Unrealizable layout or cluster request."""


@dataclass(frozen=True)
class SpatialLayout:
    """Immutable unit tiling with shared-edge interference neighborhoods."""

    tiling: str
    R: int
    side: int
    coords: np.ndarray  # (R, 2) centers, strictly inside (0, 1)^2
    neighbors: tuple  # tuple of sorted int arrays, one per unit

    def __post_init__(self):
        self.coords.setflags(write=False)
        for nb in self.neighbors:
            nb.setflags(write=False)

    @cached_property
    def n_neighbors(self) -> np.ndarray:
        out = np.array([len(nb) for nb in self.neighbors], dtype=np.int64)
        out.setflags(write=False)
        return out

    @property
    def r(self) -> int:
        """Maximum interference degree of the tiling."""
        return MAX_NEIGHBORS[self.tiling]

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix (R x R)."""
        A = np.zeros((self.R, self.R), dtype=np.float64)
        for i, nb in enumerate(self.neighbors):
            A[i, nb] = 1.0
        A.setflags(write=False)
        return A

    @cached_property
    def pairwise_distance(self) -> np.ndarray:
        """Scaled Euclidean distances between centers: ||x - x'|| / 2."""
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        D = np.sqrt((diff**2).sum(axis=2)) / 2.0
        D.setflags(write=False)
        return D


@dataclass(frozen=True)
class ClusterPartition:
    """Partition of a layout's units into m contiguous equal-size clusters."""

    layout: SpatialLayout
    m: int
    cluster_size: int
    assignment: np.ndarray  # (R,) cluster id per unit

    def __post_init__(self):
        self.assignment.setflags(write=False)

    @cached_property
    def members(self) -> tuple:
        return tuple(
            np.flatnonzero(self.assignment == j) for j in range(self.m)
        )


@dataclass(frozen=True)
class LayoutDiagnostics:
    """Interference structure of a (layout, partition) pair."""

    partition: ClusterPartition
    interior: tuple  # per cluster: units whose whole neighborhood stays inside
    boundary: tuple  # per cluster: the remaining units
    cluster_neighborhood: tuple  # per cluster: exterior units touched
    omega: float  # max ratio of per-cluster neighbor counts over units
    r_c_per_unit: np.ndarray  # clusters intersected by each closed neighborhood
    R1: np.ndarray  # units whose closed neighborhood spans > 2 clusters
    overlap_counts: np.ndarray  # (R, R) clusters shared by two closed neighborhoods
    interior_mask: np.ndarray = field(repr=False, default=None)

    @property
    def r_c(self) -> int:
        return int(self.r_c_per_unit.max())

    @property
    def c(self) -> int:
        return self.partition.cluster_size


def _nearest_squares(R: int) -> tuple[int, int]:
    s = max(math.isqrt(max(R, 0)), 2)
    lo = s * s
    hi = (s + 1) * (s + 1)
    if lo >= R and lo > 4:
        lo = max((s - 1) * (s - 1), 4)
    return lo, hi


def _square_layout(s: int) -> tuple[np.ndarray, list]:
    R = s * s
    coords = np.empty((R, 2))
    neighbors = []
    for row in range(s):
        for col in range(s):
            i = row * s + col
            coords[i] = ((col + 0.5) / s, (row + 0.5) / s)
            nb = []
            if col > 0:
                nb.append(i - 1)
            if col < s - 1:
                nb.append(i + 1)
            if row > 0:
                nb.append(i - s)
            if row < s - 1:
                nb.append(i + s)
            neighbors.append(np.array(sorted(nb), dtype=np.int64))
    return coords, neighbors


def _triangular_layout(s: int) -> tuple[np.ndarray, list]:
    # Row r holds 2r+1 triangles, k = 0..2r; k even points up, k odd down.
    # Unit id is r**2 + k.  Up-triangle (r, 2j) has apex x = (s - r)/2 + j.
    R = s * s
    coords = np.empty((R, 2))
    neighbors = []
    for r in range(s):
        for k in range(2 * r + 1):
            i = r * r + k
            j = k // 2
            if k % 2 == 0:
                x = (s - r) / 2 + j
                y = r + 2.0 / 3.0
            else:
                x = (s - r) / 2 + j + 0.5
                y = r + 1.0 / 3.0
            coords[i] = (x / s, y / s)
            nb = []
            if k > 0:
                nb.append(i - 1)
            if k < 2 * r:
                nb.append(i + 1)
            if k % 2 == 0:
                if r < s - 1:  # down-triangle directly below
                    nb.append((r + 1) ** 2 + k + 1)
            else:  # up-triangle directly above
                nb.append((r - 1) ** 2 + k - 1)
            neighbors.append(np.array(sorted(nb), dtype=np.int64))
    return coords, neighbors


def _hexagonal_layout(s: int) -> tuple[np.ndarray, list]:
    # Axial coordinates (q, r) on an s x s rhombus; id = r*s + q.
    offsets = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))
    R = s * s
    raw = np.empty((R, 2))
    neighbors = []
    for r in range(s):
        for q in range(s):
            i = r * s + q
            raw[i] = (q + 0.5 * r, r * math.sqrt(3) / 2)
            nb = []
            for dq, dr in offsets:
                q2, r2 = q + dq, r + dr
                if 0 <= q2 < s and 0 <= r2 < s:
                    nb.append(r2 * s + q2)
            neighbors.append(np.array(sorted(nb), dtype=np.int64))
    # Pad by half a cell spacing so every center is strictly interior.
    coords = np.empty_like(raw)
    coords[:, 0] = (raw[:, 0] + 0.5) / (1.5 * (s - 1) + 1.0)
    pad = math.sqrt(3) / 4
    coords[:, 1] = (raw[:, 1] + pad) / ((s - 1) * math.sqrt(3) / 2 + 2 * pad)
    return coords, neighbors


def build_layout(tiling: str, R: int) -> SpatialLayout:
    """Build a tiling with R units.

    R must be a perfect square s**2 with s >= 2 (so no unit is isolated);
    other counts are rejected with the nearest realizable alternatives named.
    """
    kind = TILING_ALIASES.get(str(tiling).lower())
    if kind is None:
        raise LayoutError(
            f"unknown tiling {tiling!r}; expected one of tri/square/hex"
        )
    s = math.isqrt(R) if R > 0 else 0
    if s * s != R or s < 2:
        lo, hi = _nearest_squares(R)
        raise LayoutError(
            f"R={R} is not realizable for the {kind} tiling; "
            f"nearest realizable counts are {lo} and {hi}"
        )
    builder = {
        "square": _square_layout,
        "triangular": _triangular_layout,
        "hexagonal": _hexagonal_layout,
    }[kind]
    coords, neighbors = builder(s)
    return SpatialLayout(
        tiling=kind, R=R, side=s, coords=coords, neighbors=tuple(neighbors)
    )


def _block_pairs(cluster_size: int, side: int) -> list[tuple[int, int]]:
    pairs = []
    for a in range(1, cluster_size + 1):
        if cluster_size % a:
            continue
        b = cluster_size // a
        if side % a == 0 and side % b == 0:
            pairs.append((a, b))
    return pairs


def _valid_cluster_sizes(layout: SpatialLayout) -> list[int]:
    s = layout.side
    if layout.tiling == "triangular":
        sizes = {k * k for k in range(1, s + 1) if s % k == 0}
    else:
        sizes = set()
        for a in range(1, s + 1):
            if s % a:
                continue
            for b in range(1, s + 1):
                if s % b == 0:
                    sizes.add(a * b)
    return sorted(sizes)


def _triangular_clusters(layout: SpatialLayout, k: int) -> np.ndarray:
    # Clusters are the side-k sub-triangles of the side-s region.  Membership
    # is resolved geometrically: rescale a cell's centroid by 1/k and test it
    # against the apex/top-edge pattern of the coarse row it falls in.
    s = layout.side
    S = s // k
    assign = np.empty(layout.R, dtype=np.int64)
    for r in range(s):
        for kk in range(2 * r + 1):
            i = r * r + kk
            j = kk // 2
            if kk % 2 == 0:
                x = (s - r) / 2 + j
                y = r + 2.0 / 3.0
            else:
                x = (s - r) / 2 + j + 0.5
                y = r + 1.0 / 3.0
            X, Y = x / k, y / k
            br = int(Y)
            yl = Y - br
            up = round(X - (S - br) / 2)
            if 0 <= up <= br and abs(X - ((S - br) / 2 + up)) < yl / 2:
                assign[i] = br * br + 2 * up
            else:
                down = round(X - 0.5 - (S - br) / 2)
                assign[i] = br * br + 2 * down + 1
    return assign


def _grid_clusters(layout: SpatialLayout, a: int, b: int) -> np.ndarray:
    # a rows x b columns per block, on the (row, col) or axial (r, q) grid.
    s = layout.side
    idx = np.arange(layout.R)
    row, col = idx // s, idx % s
    return (row // a) * (s // b) + (col // b)


def _check_contiguous(layout: SpatialLayout, assignment: np.ndarray, m: int):
    for j in range(m):
        members = np.flatnonzero(assignment == j)
        seen = {int(members[0])}
        stack = [int(members[0])]
        member_set = set(int(u) for u in members)
        while stack:
            u = stack.pop()
            for v in layout.neighbors[u]:
                v = int(v)
                if v in member_set and v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != len(members):
            raise LayoutError(
                f"cluster {j} is not contiguous under the {layout.tiling} adjacency"
            )


def build_clusters(layout: SpatialLayout, cluster_size: int) -> ClusterPartition:
    """Partition the layout into contiguous clusters of exactly cluster_size units."""
    R, s = layout.R, layout.side
    valid = _valid_cluster_sizes(layout)
    if cluster_size not in valid or R % cluster_size:
        raise LayoutError(
            f"cluster_size={cluster_size} does not tile the {layout.tiling} "
            f"layout with R={R}; valid sizes: {valid}"
        )
    if layout.tiling == "triangular":
        k = math.isqrt(cluster_size)
        assignment = _triangular_clusters(layout, k)
    else:
        pairs = _block_pairs(cluster_size, s)
        a, b = min(pairs, key=lambda ab: abs(ab[0] - ab[1]))
        assignment = _grid_clusters(layout, a, b)
    m = R // cluster_size
    counts = np.bincount(assignment, minlength=m)
    if len(counts) != m or not np.all(counts == cluster_size):
        raise LayoutError("internal error: cluster blocks are not equal-size")
    _check_contiguous(layout, assignment, m)
    return ClusterPartition(
        layout=layout, m=m, cluster_size=cluster_size, assignment=assignment
    )


def diagnostics(layout: SpatialLayout, partition: ClusterPartition) -> LayoutDiagnostics:
    """Compute the interference diagnostics of a cluster partition."""
    if partition.layout is not layout and partition.layout.R != layout.R:
        raise LayoutError("partition does not belong to this layout")
    R, m = layout.R, partition.m
    assign = partition.assignment

    interior, boundary, cluster_nbhd = [], [], []
    interior_mask = np.zeros(R, dtype=bool)
    for j, members in enumerate(partition.members):
        member_set = set(int(u) for u in members)
        inner, outer_touch = [], set()
        for u in members:
            nb = layout.neighbors[u]
            outside = [int(v) for v in nb if int(v) not in member_set]
            if outside:
                outer_touch.update(outside)
            else:
                inner.append(int(u))
        inner_arr = np.array(sorted(inner), dtype=np.int64)
        interior.append(inner_arr)
        interior_mask[inner_arr] = True
        boundary.append(
            np.array(sorted(member_set - set(inner)), dtype=np.int64)
        )
        cluster_nbhd.append(np.array(sorted(outer_touch), dtype=np.int64))

    # omega: worst unevenness of a unit's neighbor counts across the clusters
    # its neighborhood touches (own cluster included, zero counts excluded).
    omega = 1.0
    touch = np.zeros((R, m), dtype=np.int64)  # closed-neighborhood touch matrix
    r_c = np.zeros(R, dtype=np.int64)
    for u in range(R):
        counts = np.bincount(assign[layout.neighbors[u]], minlength=m)
        nz = counts[counts > 0]
        if nz.size:
            omega = max(omega, nz.max() / nz.min())
        touch[u, assign[u]] = 1
        touch[u, counts > 0] = 1
        r_c[u] = touch[u].sum()

    overlap = touch @ touch.T
    R1 = np.flatnonzero(r_c > 2)
    return LayoutDiagnostics(
        partition=partition,
        interior=tuple(interior),
        boundary=tuple(boundary),
        cluster_neighborhood=tuple(cluster_nbhd),
        omega=float(omega),
        r_c_per_unit=r_c,
        R1=R1,
        overlap_counts=overlap,
        interior_mask=interior_mask,
    )
