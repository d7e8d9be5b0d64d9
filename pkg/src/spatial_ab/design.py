"""Randomized treatment designs on spatial layouts.

A design is a spatial level (who shares one coin) crossed with a temporal
policy (how the coin evolves across within-day intervals):

* spatial ``global``: one coin for the whole region per day;
  ``individual``: one coin per unit; ``cluster``: one coin per cluster.
* temporal ``constant``: the day's draw holds for all M intervals;
  ``independent``: fresh draw each interval; ``switchback``: the day's
  draw seeds interval 0 and the arm flips every interval.

Coins are keyed by (seed, day, randomization unit, interval), so any entry of
the assignment tensor is reproducible in isolation.  Tensors are indexed
(day, unit, interval) throughout.

``mean_field`` turns a unit-level tensor into its neighborhood average: the
sum over interfering neighbors divided by the neighbor count.  Sums of 0/1
assignments are exact integers, so a unit whose neighbors all share its arm
gets a mean-field value exactly equal to that arm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from spatial_ab.lattice import ClusterPartition, SpatialLayout
from spatial_ab.rng import keyed_uniform

SPATIAL_LEVELS = ("global", "individual", "cluster")
TEMPORAL_POLICIES = ("constant", "independent", "switchback")


class DesignError(ValueError):
    """Invalid design specification."""


@dataclass(frozen=True)
class DesignSpec:
    """Spatial randomization level x temporal policy, with treatment share p."""

    spatial: str
    temporal: str
    p: float = 0.5
    partition: Optional[ClusterPartition] = None

    def __post_init__(self):
        if self.spatial not in SPATIAL_LEVELS:
            raise DesignError(
                f"spatial must be one of {SPATIAL_LEVELS}, got {self.spatial!r}"
            )
        if self.temporal not in TEMPORAL_POLICIES:
            raise DesignError(
                f"temporal must be one of {TEMPORAL_POLICIES}, got {self.temporal!r}"
            )
        if not 0.0 < self.p < 1.0:
            raise DesignError(f"p must lie strictly inside (0, 1), got {self.p}")
        if self.spatial == "cluster" and self.partition is None:
            raise DesignError("cluster designs need a ClusterPartition")
        if self.spatial != "cluster" and self.partition is not None:
            raise DesignError(f"{self.spatial} designs take no partition")

    @property
    def name(self) -> str:
        return f"{self.spatial}/{self.temporal}"

    def unit_groups(self, layout: SpatialLayout) -> np.ndarray:
        """Map each unit to the id of the coin it follows."""
        if self.spatial == "global":
            return np.zeros(layout.R, dtype=np.int64)
        if self.spatial == "individual":
            return np.arange(layout.R, dtype=np.int64)
        if self.partition.layout.R != layout.R:
            raise DesignError("partition was built for a different layout")
        return self.partition.assignment

    def n_groups(self, layout: SpatialLayout) -> int:
        if self.spatial == "global":
            return 1
        if self.spatial == "individual":
            return layout.R
        return self.partition.m


def global_design(temporal: str = "constant", p: float = 0.5) -> DesignSpec:
    return DesignSpec(spatial="global", temporal=temporal, p=p)


def individual_design(temporal: str = "constant", p: float = 0.5) -> DesignSpec:
    return DesignSpec(spatial="individual", temporal=temporal, p=p)


def cluster_design(
    partition: ClusterPartition, temporal: str = "constant", p: float = 0.5
) -> DesignSpec:
    return DesignSpec(
        spatial="cluster", temporal=temporal, p=p, partition=partition
    )


@dataclass(frozen=True)
class AssignmentTensor:
    """Realized treatments A and neighborhood means Abar, (N, R, M) each."""

    A: np.ndarray
    Abar: np.ndarray
    design: DesignSpec
    seed: int

    def __post_init__(self):
        self.A.setflags(write=False)
        self.Abar.setflags(write=False)

    @property
    def shape(self) -> tuple:
        return self.A.shape


def mean_field(layout: SpatialLayout, values: np.ndarray) -> np.ndarray:
    """Neighborhood average along the unit axis of a (..., R, M) tensor."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-2] != layout.R:
        raise DesignError(
            f"expected unit axis of length {layout.R}, got shape {values.shape}"
        )
    summed = np.einsum("ur,...rm->...um", layout.adjacency, values)
    return summed / layout.n_neighbors[:, None]


def assign(
    layout: SpatialLayout,
    design: DesignSpec,
    n_days: int,
    n_intervals: int,
    seed: int,
) -> AssignmentTensor:
    """Draw the (N, R, M) treatment tensor and its mean field."""
    if n_days < 1 or n_intervals < 1:
        raise DesignError("need at least one day and one interval")
    groups = design.unit_groups(layout)
    G = design.n_groups(layout)
    days = np.arange(n_days, dtype=np.int64)[:, None, None]
    gids = np.arange(G, dtype=np.int64)[None, :, None]

    if design.temporal == "independent":
        t_words = np.arange(n_intervals, dtype=np.int64)[None, None, :]
        coins = keyed_uniform(seed, days, gids, t_words) < design.p
        arms = coins.astype(np.float64)
    else:
        init = keyed_uniform(seed, days, gids, np.int64(0)) < design.p
        if design.temporal == "constant":
            arms = np.repeat(
                init.astype(np.float64), n_intervals, axis=2
            )
        else:  # switchback: flip the starting arm on odd intervals
            parity = (np.arange(n_intervals, dtype=np.int64) % 2)[None, None, :]
            arms = (init.astype(np.int64) ^ parity).astype(np.float64)

    A = arms[:, groups, :]
    Abar = mean_field(layout, A)
    return AssignmentTensor(A=A, Abar=Abar, design=design, seed=seed)
