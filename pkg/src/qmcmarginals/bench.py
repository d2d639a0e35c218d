"""Experiment harness: build point sets, fit every axis, score against truth."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import cbc
from .fanova import VarianceReport, variance_report
from .marginal import MarginalFit, default_parts, fit_least_squares, fit_marginal, normalize_fit, project
from .metrics import TabulatedDensity, hellinger, sup_error
from .pointsets import (
    CapacityError,
    GeneratingVector,
    PointSet,
    chebyshev_abscissae,
    lattice_unit_points,
    make_chebyshev_grid,
    make_korobov,
    make_random,
    make_regular_grid,
)
from .quadrature import EvaluatedSet, evaluate
from .targets import TargetDensity

BENCH_COLUMNS = ("marginal", "weight_percent", "method", "N", "hellinger", "sup_error", "wall_ms")
SERIES_COLUMNS = ("target", "axis", "n", "m", "N", "sup_error", "hellinger")
METHODS = ("grid", "chebyshev", "random", "korobov", "korobov-weighted")


@dataclass(frozen=True)
class RunSpec:
    """One cell of a bench matrix.

    ``size`` is the per-axis node count for ``grid``/``chebyshev`` and the
    point count otherwise.
    """

    method: str
    size: int

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.size < 1:
            raise ValueError("size must be positive")

    def evaluations(self, dims: int) -> int:
        return self.size**dims if self.method in ("grid", "chebyshev") else self.size

    @property
    def label(self) -> str:
        if self.method in ("grid", "chebyshev"):
            return f"{self.method}-{self.size}"
        if self.method.startswith("korobov"):
            return f"{self.method}-2^{int(np.log2(self.size))}" if self.size & (self.size - 1) == 0 else f"{self.method}-{self.size}"
        return f"{self.method}-{self.size}"

    @classmethod
    def parse(cls, text: str) -> "RunSpec":
        """``"korobov:2^17"``, ``"grid:5"``, ``"random:1024"``."""
        method, _, size = text.partition(":")
        if not size:
            raise ValueError(f"run spec {text!r} needs the form method:size")
        if "^" in size:
            base, exp = size.split("^")
            value = int(base) ** int(exp)
        else:
            value = int(size)
        return cls(method.strip(), value)


@dataclass
class AxisResult:
    axis: int
    fit: MarginalFit
    estimate: TabulatedDensity
    hellinger: float | None
    sup_error: float | None


@dataclass
class RunResult:
    spec: RunSpec
    N: int
    axes: list[AxisResult]
    timings_ms: dict = field(default_factory=dict)


def _tick(timings: dict, key: str, start: float) -> float:
    now = time.perf_counter()
    timings[key] = timings.get(key, 0.0) + 1e3 * (now - start)
    return now


def report_for(target: TargetDensity) -> VarianceReport:
    if target.factorization is None:
        raise ValueError(f"target {target.name!r} carries no likelihood factorization")
    return variance_report(target.factorization)


def lattice_vector(N: int, dims: int, gamma=None) -> GeneratingVector:
    """Table or freshly searched CBC vector; ``gamma=None`` means unweighted."""
    return cbc.generator_for(N, dims, gamma)


def build_pointset(target: TargetDensity, spec: RunSpec, seed: int = 0, gamma=None,
                   budget: int | None = None) -> PointSet:
    box, s = target.box, target.dims
    need = spec.evaluations(s)
    if budget is not None and need > budget:
        raise CapacityError(f"{spec.label} needs {need} evaluations, above the budget of {budget}")
    if spec.method == "grid":
        return make_regular_grid(spec.size, box, budget)
    if spec.method == "chebyshev":
        return make_chebyshev_grid(spec.size, box, budget)
    if spec.method == "random":
        return make_random(spec.size, box, seed, budget)
    if spec.method == "korobov":
        return make_korobov(spec.size, lattice_vector(spec.size, s), box, budget=budget)
    if gamma is None:
        gamma = cbc.weights_from_importances(report_for(target))
    return make_korobov(spec.size, lattice_vector(spec.size, s, gamma), box, budget=budget)


def score_fit(target: TargetDensity, fit: MarginalFit) -> tuple[TabulatedDensity, float, float]:
    est = normalize_fit(fit)
    truth = TabulatedDensity(est.xs, target.true_marginal(fit.axis)(est.xs))
    return est, hellinger(est, truth), sup_error(est, truth.normalized())


def estimate(target: TargetDensity, ps: PointSet, axes: Sequence[int] | None = None,
             parts: int | None = None, score: bool = True, timings: dict | None = None) -> tuple[EvaluatedSet, list[AxisResult]]:
    """Evaluate ``target`` on ``ps`` and fit the requested axes.

    Lattice and random sets are split into ``parts`` slabs per axis
    (default :func:`default_parts`); grids use their own nodes.
    """
    timings = {} if timings is None else timings
    t = time.perf_counter()
    es = evaluate(target, ps)
    t = _tick(timings, "evaluation", t)
    axes = range(target.dims) if axes is None else axes
    parts = default_parts(ps.N) if parts is None else parts
    out = []
    for k in axes:
        fit = fit_marginal(es, k, n=parts)
        t = _tick(timings, "fit", t)
        if score:
            est, h, se = score_fit(target, fit)
        else:
            est, h, se = normalize_fit(fit), None, None
        t = _tick(timings, "score", t)
        out.append(AxisResult(k, fit, est, h, se))
    return es, out


def run(target: TargetDensity, spec: RunSpec, seed: int = 0, parts: int | None = None,
        gamma=None, budget: int | None = None) -> RunResult:
    timings: dict = {}
    t = time.perf_counter()
    ps = build_pointset(target, spec, seed=seed, gamma=gamma, budget=budget)
    _tick(timings, "generation", t)
    _, axes = estimate(target, ps, parts=parts, timings=timings)
    return RunResult(spec, ps.N, axes, timings)


def default_matrix(target: TargetDensity) -> list[RunSpec]:
    if target.factorization is not None and target.dims >= 8:
        return [RunSpec("korobov-weighted", 2**16), RunSpec("korobov-weighted", 2**17), RunSpec("korobov", 2**17)]
    return [RunSpec("grid", 5), RunSpec("grid", 8), RunSpec("random", 1024),
            RunSpec("korobov", 512), RunSpec("korobov", 1024), RunSpec("korobov", 4096)]


def bench(target: TargetDensity, matrix: Sequence[RunSpec] | None = None, seed: int = 0,
          parts: int | None = None, budget: int | None = None, progress=None) -> tuple[list[RunResult], np.ndarray | None]:
    """Run every cell of ``matrix`` on ``target``.

    Returns the run results and, when the target has a factorization, the
    importance percentages used for the weight column and weighted lattices.
    """
    matrix = default_matrix(target) if matrix is None else list(matrix)
    percent = gamma = None
    if target.factorization is not None:
        rep = report_for(target)
        percent = rep.percentages
        gamma = cbc.weights_from_importances(rep)
    results = []
    for spec in matrix:
        res = run(target, spec, seed=seed, parts=parts, gamma=gamma if spec.method == "korobov-weighted" else None,
                  budget=budget)
        results.append(res)
        if progress:
            progress(res)
    return results, percent


def write_bench_csv(results: Sequence[RunResult], percent, path, timing: bool = False) -> None:
    """One row per (run, axis). ``wall_ms`` stays empty unless ``timing``,
    which keeps repeated runs byte-identical."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        for res in results:
            total = sum(res.timings_ms.values())
            for ax in res.axes:
                wp = "" if percent is None else f"{float(percent[ax.axis]):.3g}"
                w.writerow([
                    ax.axis + 1, wp, res.spec.method, res.N,
                    repr(float(ax.hellinger)), repr(float(ax.sup_error)),
                    f"{total:.1f}" if timing else "",
                ])


def node_lattice_set(target: TargetDensity, k: int, n: int, m: int) -> PointSet:
    """``n`` Chebyshev nodes on axis ``k`` crossed with an ``m``-point lattice
    over the remaining axes: ``n * m`` evaluations."""
    box, s = target.box, target.dims
    nodes = chebyshev_abscissae(n, box.lower[k], box.upper[k])
    rest = [j for j in range(s) if j != k]
    if rest:
        z = lattice_vector(m, len(rest)).as_array() if m >= 2 else np.zeros(len(rest), dtype=np.int64)
        u = lattice_unit_points(z, m, shift=np.full(len(rest), 0.5 / m))
        inner = box.lower[rest] + u * box.widths[rest]
    else:
        inner = np.zeros((1, 0))
    pts = np.empty((n * inner.shape[0], s))
    pts[:, k] = np.repeat(nodes, inner.shape[0])
    pts[:, rest] = np.tile(inner, (n, 1))
    return PointSet(pts, box, "nodes", {"axis": k, "n": n, "m": m})


def convergence_series(target: TargetDensity, ns=(4, 8, 12), ms=(64, 256, 1024), axes=None) -> list[tuple]:
    """Sup-error and Hellinger of node-lattice fits over an ``(n, m)`` sweep."""
    rows = []
    axes = range(target.dims) if axes is None else axes
    for k in axes:
        for n in ns:
            for m in ms:
                ps = node_lattice_set(target, k, n, m)
                es = evaluate(target, ps)
                fit = fit_least_squares(project(es, k))
                _, h, se = score_fit(target, fit)
                rows.append((target.name, k + 1, n, m, ps.N, se, h))
    return rows


def write_series_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for name, k, n, m, N, se, h in rows:
            w.writerow([name, k, n, m, N, repr(float(se)), repr(float(h))])
