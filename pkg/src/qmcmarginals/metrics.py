"""Distances between tabulated 1-D densities."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

DEFAULT_PANELS = 2048


@dataclass(frozen=True)
class TabulatedDensity:
    """Nonnegative values ``ys`` on a strictly increasing mesh ``xs``."""

    xs: np.ndarray
    ys: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("xs and ys must be equal-length 1-D arrays with at least 2 entries")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("mesh must be strictly increasing")
        if np.any(ys < 0) or not np.all(np.isfinite(ys)):
            raise ValueError("density values must be finite and nonnegative")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @classmethod
    def from_function(cls, f, a: float, b: float, panels: int = DEFAULT_PANELS) -> "TabulatedDensity":
        xs = np.linspace(a, b, panels + 1)
        return cls(xs, np.asarray(f(xs), dtype=float))

    @property
    def mass(self) -> float:
        return float(trapezoid(self.ys, self.xs))

    def normalized(self) -> "TabulatedDensity":
        m = self.mass
        if not m > 0:
            raise ValueError("density has zero mass")
        return TabulatedDensity(self.xs, self.ys / m, self.meta)

    def resample(self, xs: np.ndarray) -> "TabulatedDensity":
        """Linear interpolation onto ``xs``; zero outside the original mesh."""
        ys = np.interp(xs, self.xs, self.ys, left=0.0, right=0.0)
        return TabulatedDensity(xs, ys, self.meta)

    def mode_count(self, rel_prominence: float = 0.2) -> int:
        """Number of interior local maxima rising at least ``rel_prominence``
        of the global maximum above the lower of the neighbouring minima."""
        from scipy.signal import find_peaks

        y = np.concatenate([[0.0], self.ys, [0.0]])
        peaks, _ = find_peaks(y, prominence=rel_prominence * self.ys.max())
        return int(peaks.size)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "density"])
            for x, y in zip(self.xs, self.ys):
                w.writerow([repr(float(x)), repr(float(y))])


def _common(p: TabulatedDensity, q: TabulatedDensity) -> tuple[TabulatedDensity, TabulatedDensity]:
    if p.xs.size == q.xs.size and np.array_equal(p.xs, q.xs):
        return p, q
    if p.xs.size >= q.xs.size:
        return p, q.resample(p.xs)
    return p.resample(q.xs), q


def hellinger(p: TabulatedDensity, q: TabulatedDensity) -> float:
    """``sqrt(0.5 * integral (sqrt(p) - sqrt(q))^2)`` after normalising both.

    Uses the probabilist's convention, so the result lies in ``[0, 1]``.
    """
    p, q = _common(p, q)
    p, q = p.normalized(), q.normalized()
    h2 = 0.5 * trapezoid((np.sqrt(p.ys) - np.sqrt(q.ys)) ** 2, p.xs)
    return float(np.sqrt(min(max(h2, 0.0), 1.0)))


def sup_error(p: TabulatedDensity, q: TabulatedDensity) -> float:
    p, q = _common(p, q)
    return float(np.max(np.abs(p.ys - q.ys)))


def l2_error(p: TabulatedDensity, q: TabulatedDensity) -> float:
    p, q = _common(p, q)
    return float(np.sqrt(trapezoid((p.ys - q.ys) ** 2, p.xs)))


SCORE_COLUMNS = ("target", "axis", "method", "N", "metric", "value")


def write_scores(rows, path) -> None:
    """Write score rows ``(target, axis, method, N, metric, value)`` as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORE_COLUMNS)
        for target, axis, method, N, metric, value in rows:
            w.writerow([target, axis, method, N, metric, repr(float(value))])
