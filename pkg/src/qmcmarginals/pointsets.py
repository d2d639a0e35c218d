"""Point sets over an axis-aligned support box.

Regular (midpoint) grids, Chebyshev grids, seeded random points and rank-1
Korobov lattices, plus slab partitioning and star discrepancy diagnostics.
All constructors are pure: identical arguments give identical points.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np

# below 5**10 so a 5-point grid in 10 dimensions is refused by default
DEFAULT_POINT_BUDGET = 2**23

_BINARY_MAGIC = b"QMCP"
_BINARY_VERSION = 1
_HEADER = struct.Struct("<4sHHQ")


class CapacityError(ValueError):
    """Raised when a point set would exceed the configured point budget."""


class EmptySlabWarning(UserWarning):
    """Emitted when an axis partition leaves a slab without points."""


@dataclass(frozen=True)
class Box:
    """Half-open box ``[lower, upper)`` in ``dims`` dimensions."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-D vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo >= hi):
            raise ValueError("every lower bound must be strictly below its upper bound")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dims: int) -> "Box":
        return cls(np.zeros(dims), np.ones(dims))

    @classmethod
    def cube(cls, lower: float, upper: float, dims: int) -> "Box":
        return cls(np.full(dims, float(lower)), np.full(dims, float(upper)))

    @property
    def dims(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def volume(self) -> float:
        return float(np.prod(self.widths))

    def reduced_volume(self, k: int) -> float:
        """Volume of the box with axis ``k`` removed."""
        w = self.widths
        return float(np.prod(np.delete(w, k)))

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(u) * self.widths

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.lower) / self.widths

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= self.lower) & (x < self.upper), axis=1)

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True)
class GeneratingVector:
    """Rank-1 lattice generating vector ``z`` modulo ``N``."""

    components: tuple
    modulus: int

    def __post_init__(self):
        comps = tuple(int(c) for c in self.components)
        N = int(self.modulus)
        if N < 1:
            raise ValueError("modulus must be positive")
        for c in comps:
            if N > 1 and not 1 <= c <= N - 1:
                raise ValueError(f"component {c} outside [1, {N - 1}]")
            if math.gcd(c, N) != 1:
                raise ValueError(f"component {c} is not coprime to N={N}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "modulus", N)

    @classmethod
    def korobov(cls, g: int, N: int, dims: int) -> "GeneratingVector":
        """Korobov form ``(1, g, g^2, ...) mod N``."""
        if math.gcd(int(g), int(N)) != 1:
            raise ValueError(f"Korobov parameter g={g} is not coprime to N={N}")
        comps = [pow(int(g), j, int(N)) for j in range(dims)]
        return cls(tuple(comps), N)

    @property
    def dims(self) -> int:
        return len(self.components)

    def as_array(self) -> np.ndarray:
        return np.array(self.components, dtype=np.int64)


@dataclass(frozen=True)
class PointSet:
    """``N`` points inside ``box`` together with how they were made.

    ``kind`` is one of ``"regular_grid"``, ``"chebyshev_grid"``, ``"random"``,
    ``"korobov"`` or ``"nodes"`` (explicit tensor product of given abscissae);
    ``params`` carries the constructor arguments. Grid-like kinds also record
    the per-axis abscissae in ``axis_values`` so pointwise means can match
    coordinates bit for bit.
    """

    points: np.ndarray
    box: Box
    kind: str
    params: dict = field(default_factory=dict)
    axis_values: tuple | None = None
    unit: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.box.dims:
            raise ValueError("points must be an N x s array matching the box")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def dims(self) -> int:
        return self.points.shape[1]

    def unit_points(self) -> np.ndarray:
        if self.unit is not None:
            return self.unit
        return self.box.to_unit(self.points)

    def distinct_counts(self) -> list[int]:
        return [int(np.unique(self.points[:, k]).size) for k in range(self.dims)]


def _check_budget(count: int, budget: int | None) -> None:
    budget = DEFAULT_POINT_BUDGET if budget is None else budget
    if count > budget:
        raise CapacityError(
            f"point set of size {count:,} exceeds the point budget {budget:,}"
        )


def _tensor(axes: Sequence[np.ndarray]) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def midpoint_abscissae(n: int, a: float, b: float) -> np.ndarray:
    """``n`` cell midpoints ``a + (l + 0.5)(b - a)/n``."""
    return a + (np.arange(n) + 0.5) * (b - a) / n


def chebyshev_abscissae(n: int, a: float, b: float) -> np.ndarray:
    """Roots of the degree-``n`` first-kind Chebyshev polynomial on ``[a, b)``."""
    l = np.arange(1, n + 1)
    return 0.5 * (a + b) + 0.5 * (b - a) * np.cos((2 * l - 1) * np.pi / (2 * n))


def equispaced_abscissae(n: int, a: float, b: float) -> np.ndarray:
    """``n`` equally spaced nodes including both endpoints."""
    return a + np.arange(n) * (b - a) / (n - 1)


def make_regular_grid(n: int, box: Box, budget: int | None = None) -> PointSet:
    """Tensor grid with ``n`` cell midpoints per axis (``n**s`` points)."""
    if n < 2:
        raise ValueError("a regular grid needs n >= 2 points per axis")
    _check_budget(n**box.dims, budget)
    axes = tuple(midpoint_abscissae(n, lo, hi) for lo, hi in zip(box.lower, box.upper))
    return PointSet(_tensor(axes), box, "regular_grid", {"n": n}, axis_values=axes)


def make_chebyshev_grid(n: int, box: Box, budget: int | None = None) -> PointSet:
    """Tensor grid of shifted Chebyshev roots, ``n`` per axis."""
    if n < 2:
        raise ValueError("a Chebyshev grid needs n >= 2 points per axis")
    _check_budget(n**box.dims, budget)
    axes = tuple(chebyshev_abscissae(n, lo, hi) for lo, hi in zip(box.lower, box.upper))
    return PointSet(_tensor(axes), box, "chebyshev_grid", {"n": n}, axis_values=axes)


def make_node_product(axes: Sequence[np.ndarray], box: Box, budget: int | None = None) -> PointSet:
    """Tensor product of explicitly given per-axis abscissae.

    Nodes may sit on the closed upper boundary (equidistant interpolation
    nodes include both endpoints), so box membership is not enforced here.
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    if len(axes) != box.dims:
        raise ValueError("need one abscissa vector per box axis")
    _check_budget(int(np.prod([a.size for a in axes])), budget)
    return PointSet(_tensor(axes), box, "nodes", {"sizes": [a.size for a in axes]}, axis_values=axes)


def make_random(N: int, box: Box, seed: int, budget: int | None = None) -> PointSet:
    """``N`` uniform draws over ``box`` from a seeded PCG64 generator."""
    if N < 1:
        raise ValueError("random point sets need N >= 1")
    _check_budget(N, budget)
    rng = np.random.default_rng(seed)
    u = rng.random((N, box.dims))
    return PointSet(box.from_unit(u), box, "random", {"N": N, "seed": seed}, unit=u)


def lattice_unit_points(z: np.ndarray, N: int, shift: np.ndarray | None = None) -> np.ndarray:
    """Points ``frac(i z / N + shift)`` for ``i = 0..N-1`` in the unit cube."""
    z = np.asarray(z, dtype=np.int64)
    i = np.arange(N, dtype=np.int64)[:, None]
    # integer residues keep the unshifted coordinates exact multiples of 1/N
    u = ((i * z[None, :]) % N) / N
    if shift is not None:
        u = np.mod(u + np.asarray(shift, dtype=float)[None, :], 1.0)
    return u


def make_korobov(
    N: int,
    generator: GeneratingVector | int,
    box: Box,
    shift: Sequence[float] | None = None,
    budget: int | None = None,
) -> PointSet:
    """Rank-1 lattice ``frac(i z/N + shift)`` mapped affinely onto ``box``.

    ``generator`` is either a full :class:`GeneratingVector` or a Korobov
    parameter ``g`` expanded to ``(1, g, g^2, ...) mod N``.
    """
    if N < 1:
        raise ValueError("lattices need N >= 1")
    _check_budget(N, budget)
    if isinstance(generator, GeneratingVector):
        gv = generator
        if gv.modulus != N:
            raise ValueError(f"generating vector modulus {gv.modulus} differs from N={N}")
        if gv.dims != box.dims:
            raise ValueError("generating vector dimension does not match the box")
    else:
        gv = GeneratingVector.korobov(int(generator), N, box.dims)
    sh = None
    if shift is not None:
        sh = np.asarray(shift, dtype=float)
        if sh.shape != (box.dims,) or np.any(sh < 0) or np.any(sh >= 1):
            raise ValueError("shift must be a vector in [0, 1)^s")
    u = lattice_unit_points(gv.as_array(), N, sh)
    pts = box.from_unit(u)
    # guard the half-open upper face against rounding in the affine map
    pts = np.minimum(pts, np.nextafter(box.upper, box.lower))
    params = {"N": N, "z": list(gv.components), "shift": None if sh is None else sh.tolist()}
    return PointSet(pts, box, "korobov", params, unit=u)


class Slab(NamedTuple):
    lower: float
    upper: float
    members: np.ndarray

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def count(self) -> int:
        return int(self.members.size)


def slab_indices(ps: PointSet, k: int, n: int) -> np.ndarray:
    """Slab index in ``0..n-1`` of every point along axis ``k``."""
    u = ps.unit_points()[:, k]
    return np.clip(np.floor(u * n).astype(np.int64), 0, n - 1)


def partition_along_axis(ps: PointSet, k: int, n: int) -> list[Slab]:
    """Split axis ``k`` into ``n`` equal-width slabs and assign every point."""
    if n < 2:
        raise ValueError("partitioning needs n >= 2 slabs")
    lo, hi = ps.box.lower[k], ps.box.upper[k]
    edges = lo + (hi - lo) * np.arange(n + 1) / n
    idx = slab_indices(ps, k, n)
    slabs = [Slab(float(edges[u]), float(edges[u + 1]), np.flatnonzero(idx == u)) for u in range(n)]
    empty = [u for u, s in enumerate(slabs) if s.count == 0]
    if empty:
        warnings.warn(f"slabs {empty} along axis {k} are empty", EmptySlabWarning, stacklevel=2)
    return slabs


def grid_star_discrepancy(n: int, s: int) -> float:
    """Star discrepancy ``1 - (1 - 1/n)**s`` of the ``n``-point regular grid."""
    if n < 1 or s < 1:
        raise ValueError("n and s must be positive")
    # exact integer ratio, correctly rounded once
    return (n**s - (n - 1) ** s) / n**s


class Discrepancy(NamedTuple):
    value: float
    exact: bool


EXACT_MAX_DIMS = 3
EXACT_MAX_POINTS = 2**8


def star_discrepancy(
    ps: PointSet | np.ndarray,
    n_boxes: int = 20000,
    seed: int = 0,
) -> Discrepancy:
    """Star discrepancy of a point set in the unit cube.

    Exact for ``s <= 3`` and ``N <= 256`` by enumerating every origin-anchored
    box whose corners are drawn from the point coordinates and 1, comparing
    both open and closed counts. Larger inputs get a lower bound from
    ``n_boxes`` random candidate corners, flagged by ``exact=False``.
    """
    u = ps.unit_points() if isinstance(ps, PointSet) else np.atleast_2d(np.asarray(ps, float))
    N, s = u.shape
    if N == 0:
        raise ValueError("empty point set")
    if s <= EXACT_MAX_DIMS and N <= EXACT_MAX_POINTS:
        return Discrepancy(_star_exact(u), True)
    return Discrepancy(_star_lower_bound(u, n_boxes, seed), False)


def _star_exact(u: np.ndarray) -> float:
    N, s = u.shape
    grids = [np.unique(np.append(u[:, j], 1.0)) for j in range(s)]
    shape = tuple(g.size for g in grids)
    hist = np.zeros(shape, dtype=np.int64)
    idx = tuple(np.searchsorted(grids[j], u[:, j]) for j in range(s))
    np.add.at(hist, idx, 1)

    # sweep the last axis; each slice holds counts over the leading axes
    lead = shape[:-1]
    lead_vol = np.ones(lead)
    for j in range(s - 1):
        sh = [1] * (s - 1)
        sh[j] = shape[j]
        lead_vol = lead_vol * grids[j].reshape(sh)

    def inclusive(a):
        for j in range(a.ndim):
            a = np.cumsum(a, axis=j)
        return a

    def exclusive(a):
        # points strictly below the corner on every leading axis
        a = inclusive(a)
        if a.ndim == 0:
            return a
        return np.pad(a, [(1, 0)] * a.ndim)[tuple(slice(0, m) for m in a.shape)]

    best = 0.0
    below = np.zeros(lead, dtype=np.int64)
    for c in range(shape[-1]):
        at = below + hist[..., c]
        vol = lead_vol * grids[-1][c]
        best = max(best, float(np.max(vol - exclusive(below) / N)))
        best = max(best, float(np.max(inclusive(at) / N - vol)))
        below = at
    return best


def _star_lower_bound(u: np.ndarray, n_boxes: int, seed: int) -> float:
    N, s = u.shape
    rng = np.random.default_rng(seed)
    cand = np.vstack([u, np.ones((1, s))])
    best = 0.0
    for start in range(0, n_boxes, 512):
        m = min(512, n_boxes - start)
        rows = rng.integers(0, N + 1, size=(m, s))
        corners = cand[rows, np.arange(s)]
        vol = np.prod(corners, axis=1)
        below = u[None, :, :] < corners[:, None, :]
        at_or_below = u[None, :, :] <= corners[:, None, :]
        n_open = np.all(below, axis=2).sum(axis=1)
        n_closed = np.all(at_or_below, axis=2).sum(axis=1)
        best = max(best, float(np.max(vol - n_open / N)), float(np.max(n_closed / N - vol)))
    return best


def write_csv(ps: PointSet | np.ndarray, path) -> None:
    """One point per row, shortest round-trip decimal for every coordinate."""
    pts = ps.points if isinstance(ps, PointSet) else np.asarray(ps, float)
    with open(path, "w", newline="") as fh:
        for row in pts.tolist():
            fh.write(",".join(repr(v) for v in row))
            fh.write("\n")


def read_csv(path) -> np.ndarray:
    with open(path) as fh:
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    return np.array(rows, dtype=float)


def write_binary(ps: PointSet | np.ndarray, path) -> None:
    """16-byte header ``{b"QMCP", u16 version, u16 s, u64 N}`` + LE float64 rows."""
    pts = ps.points if isinstance(ps, PointSet) else np.asarray(ps, float)
    N, s = pts.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_BINARY_MAGIC, _BINARY_VERSION, s, N))
        fh.write(np.ascontiguousarray(pts, dtype="<f8").tobytes())


def read_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, version, s, N = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _BINARY_MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != _BINARY_VERSION:
            raise ValueError(f"unsupported version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != N * s:
        raise ValueError("truncated point file")
    return data.reshape(N, s).astype(float)


def describe(ps: PointSet) -> dict[str, Any]:
    return {"kind": ps.kind, "N": ps.N, "dims": ps.dims, "params": ps.params, "box": ps.box.to_dict()}
