"""
Lattices, interference neighborhoods, and cluster partitions
============================================================
"""

import numpy as np

from spatial_ab.lattice import build_layout, build_clusters, diagnostics

# Three tilings realize the same unit count R = 81 with different
# interference ranges r (the maximum shared-edge neighbor count).
for tiling in ("triangular", "square", "hexagonal"):
    layout = build_layout(tiling, 81)
    counts = layout.n_neighbors
    print(f"{tiling:11s} R={layout.R}  r={layout.r}  "
          f"neighbor counts min/mean/max = "
          f"{counts.min()}/{counts.mean():.2f}/{counts.max()}")

print()

# Partition each lattice into 9-unit clusters and inspect the shape
# diagnostics: omega measures how unevenly a cluster's units spread
# their neighbors across foreign clusters, N_C is the cluster's
# exterior neighborhood, and r_c counts how many clusters touch a
# unit's closed neighborhood.
for tiling in ("triangular", "square", "hexagonal"):
    layout = build_layout(tiling, 81)
    part = build_clusters(layout, 9)
    diag = diagnostics(layout, part)
    widest = max(len(nc) for nc in diag.cluster_neighborhood)
    print(f"{tiling:11s} m={part.m} clusters of {part.cluster_size}: "
          f"omega={diag.omega:.1f}  max|N_C|={widest}  "
          f"r_c={diag.r_c}  boundary units |R1|={len(diag.R1)}")

print()

# A unit's row in the adjacency structure is all you need to check
# contiguity by hand.
layout = build_layout("square", 36)
part = build_clusters(layout, 9)
unit = 14
x, y = layout.coords[unit]
print(f"square-36, unit {unit}: coords=({x:.3f}, {y:.3f}), "
      f"cluster={part.assignment[unit]}, "
      f"neighbors={[int(v) for v in layout.neighbors[unit]]}")
members = np.flatnonzero(part.assignment == part.assignment[unit])
print(f"cluster members: {[int(v) for v in members]}")
