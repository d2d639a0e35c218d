"""Box-scaled QMC/MC estimators built on a density evaluated over a point set."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .pointsets import PointSet, partition_along_axis


class StructureError(ValueError):
    """The point set lacks the structure an estimator requires."""


class EmptySlabError(ValueError):
    """A partition slab received no points."""

    def __init__(self, slab: int, axis: int):
        super().__init__(
            f"slab {slab} along axis {axis} is empty; increase N or decrease the part count"
        )
        self.slab = slab
        self.axis = axis


@dataclass(frozen=True)
class EvaluatedSet:
    """A point set together with the density value at every point."""

    pointset: PointSet
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.pointset.N,):
            raise ValueError("need exactly one value per point")
        if not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def box(self):
        return self.pointset.box

    @property
    def N(self) -> int:
        return self.pointset.N


def evaluate(density: Callable[[np.ndarray], np.ndarray], ps: PointSet, chunk: int = 2**16) -> EvaluatedSet:
    """Evaluate a vectorised density (``(M, s) -> (M,)``) on every point."""
    out = np.empty(ps.N)
    for start in range(0, ps.N, chunk):
        out[start:start + chunk] = density(ps.points[start:start + chunk])
    return EvaluatedSet(ps, out)


def pairwise_mean(values: np.ndarray) -> float:
    # np.add.reduce on contiguous float64 is pairwise, so the result does
    # not depend on how the values were produced
    values = np.ascontiguousarray(values, dtype=float)
    return float(np.add.reduce(values) / values.size)


def integrate(es: EvaluatedSet) -> float:
    """``V * mean(values)``: the box-volume-scaled equal-weight rule."""
    if es.N < 1:
        raise ValueError("cannot integrate over an empty point set")
    return es.box.volume() * pairwise_mean(es.values)


def pointwise_mean(es: EvaluatedSet, k: int, abscissa: float) -> float:
    """Average over the points whose ``k``-th coordinate equals ``abscissa``.

    The match is exact: grid constructors own their abscissae, so a value
    that only nearly matches signals a point set that is not grid-structured
    along ``k``.
    """
    mask = es.pointset.points[:, k] == abscissa
    m = int(mask.sum())
    if m == 0:
        raise StructureError(
            f"no point has coordinate {abscissa!r} on axis {k}; "
            "the point set is not grid-structured along this axis"
        )
    return es.box.reduced_volume(k) * pairwise_mean(es.values[mask])


def pointwise_means(es: EvaluatedSet, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise means at every distinct abscissa along ``k``.

    Returns ``(nodes, means, counts)`` with nodes sorted ascending.
    """
    nodes, inverse, counts = np.unique(es.pointset.points[:, k], return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=es.values, minlength=nodes.size)
    return nodes, es.box.reduced_volume(k) * sums / counts, counts


@dataclass(frozen=True)
class PartitionMeans:
    axis: int
    slab_centers: np.ndarray
    means: np.ndarray
    member_counts: np.ndarray
    edges: np.ndarray

    @property
    def n(self) -> int:
        return self.means.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["slab_center", "mean", "count"])
            for c, m, n in zip(self.slab_centers, self.means, self.member_counts):
                w.writerow([repr(float(c)), repr(float(m)), int(n)])

    @classmethod
    def read_csv(cls, path, axis: int = 0) -> "PartitionMeans":
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        centers = np.array([float(r["slab_center"]) for r in rows])
        width = centers[1] - centers[0] if centers.size > 1 else 0.0
        edges = np.append(centers - width / 2, centers[-1] + width / 2)
        return cls(
            axis,
            centers,
            np.array([float(r["mean"]) for r in rows]),
            np.array([int(r["count"]) for r in rows]),
            edges,
        )


def partition_means(es: EvaluatedSet, k: int, n: int) -> PartitionMeans:
    """Volume-scaled means over ``n`` equal-width slabs along axis ``k``.

    Each slab mean estimates the marginal averaged over the slab; it is
    reported at the slab midpoint.
    """
    slabs = partition_along_axis(es.pointset, k, n)
    for u, slab in enumerate(slabs):
        if slab.count == 0:
            raise EmptySlabError(u, k)
    scale = es.box.reduced_volume(k)
    means = np.array([scale * pairwise_mean(es.values[s.members]) for s in slabs])
    return PartitionMeans(
        axis=k,
        slab_centers=np.array([s.center for s in slabs]),
        means=means,
        member_counts=np.array([s.count for s in slabs]),
        edges=np.array([s.lower for s in slabs] + [slabs[-1].upper]),
    )
