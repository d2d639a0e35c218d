"""Least-squares polynomial marginals fitted to projected density evaluations.

Every density value ``pi(theta_j)`` is paired with one coordinate
``theta_{k,j}`` and a degree ``n - 1`` polynomial is fitted to that scatter.
When the scatter has exactly ``n`` distinct abscissae (grids, or slab
representatives of a partitioned lattice) the fitted polynomial
interpolates the per-abscissa sample means, whatever per-node weights are
used.

Fits are computed in a Legendre basis on the abscissa interval mapped to
``[-1, 1]`` and solved by orthogonal factorisation; predictions equal those
of the monomial Vandermonde normal equations, only the numerics differ.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as L
from numpy.polynomial import polynomial as P
from scipy.integrate import trapezoid

from .metrics import DEFAULT_PANELS, TabulatedDensity
from .pointsets import slab_indices
from .quadrature import EmptySlabError, EvaluatedSet, partition_means

MAX_DEGREE = 30
CONDITION_LIMIT = 1e12
BASES = ("shifted-legendre", "shifted-monomial")


class DegenerateNodesError(ValueError):
    """Fewer distinct abscissae than polynomial coefficients."""


class IllConditionedWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Projection:
    """The ``(theta_k, pi(theta))`` scatter for axis ``k``."""

    axis: int
    abscissae: np.ndarray
    values: np.ndarray
    interval: tuple
    scale: float

    def __post_init__(self):
        if self.abscissae.shape != self.values.shape:
            raise ValueError("abscissae and values must have equal length")


def project(es: EvaluatedSet, k: int) -> Projection:
    """Pair the ``k``-th coordinate of every point with its density value."""
    box = es.box
    return Projection(
        axis=k,
        abscissae=es.pointset.points[:, k].copy(),
        values=np.array(es.values),
        interval=(float(box.lower[k]), float(box.upper[k])),
        scale=box.reduced_volume(k),
    )


def _to_reference(x, interval):
    a, b = interval
    return (2.0 * np.asarray(x, dtype=float) - (a + b)) / (b - a)


def _design(x, degree, interval, basis):
    t = _to_reference(x, interval)
    if basis == "shifted-legendre":
        return L.legvander(t, degree)
    if basis == "shifted-monomial":
        return P.polyvander(t, degree)
    raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")


def _evaluate(x, coefficients, interval, basis):
    t = _to_reference(x, interval)
    if basis == "shifted-legendre":
        return L.legval(t, coefficients)
    return P.polyval(t, coefficients)


@dataclass(frozen=True)
class MarginalFit:
    """Degree-``degree`` polynomial for the marginal of axis ``axis``.

    ``predict`` evaluates the raw least-squares polynomial; ``density``
    multiplies by ``scale`` (the volume of the remaining axes) to give the
    marginal estimate.
    """

    axis: int
    degree: int
    coefficients: np.ndarray
    interval: tuple
    scale: float
    nodes: np.ndarray | None = None
    basis: str = "shifted-legendre"
    diagnostics: dict = field(default_factory=dict, compare=False)

    def predict(self, x) -> np.ndarray:
        return _evaluate(x, self.coefficients, self.interval, self.basis)

    def density(self, x) -> np.ndarray:
        return self.scale * self.predict(x)

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "degree": self.degree,
            "basis": self.basis,
            "coefficients": [float(c) for c in self.coefficients],
            "interval": [float(self.interval[0]), float(self.interval[1])],
            "scale": float(self.scale),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "MarginalFit":
        return cls(
            axis=int(d["axis"]),
            degree=int(d["degree"]),
            coefficients=np.asarray(d["coefficients"], dtype=float),
            interval=tuple(d["interval"]),
            scale=float(d["scale"]),
            basis=d.get("basis", "shifted-legendre"),
        )

    @classmethod
    def from_json(cls, text_or_path) -> "MarginalFit":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


def _check_degree(degree: int) -> None:
    if degree > MAX_DEGREE:
        raise ValueError(f"polynomial degree {degree} exceeds the supported maximum {MAX_DEGREE}")


def _solve(A, y, w=None):
    if w is not None:
        sw = np.sqrt(w)
        A = A * sw[:, None]
        y = y * sw
    coef, _, rank, sv = np.linalg.lstsq(A, y, rcond=None)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else math.inf
    if cond > CONDITION_LIMIT:
        warnings.warn(f"design matrix condition number {cond:.3g} exceeds {CONDITION_LIMIT:g}",
                      IllConditionedWarning, stacklevel=3)
    return coef, cond


def _node_groups(p: Projection, nodes):
    """Map every abscissa onto its node index, requiring exact matches."""
    distinct = np.unique(p.abscissae)
    if nodes is None:
        nodes = distinct
    nodes = np.asarray(nodes, dtype=float)
    if np.unique(nodes).size != nodes.size:
        raise DegenerateNodesError("nodes must be distinct")
    if distinct.size < nodes.size:
        raise DegenerateNodesError(
            f"projection has {distinct.size} distinct abscissae but {nodes.size} nodes were requested"
        )
    order = np.argsort(nodes)
    pos = np.searchsorted(nodes[order], p.abscissae)
    pos = np.clip(pos, 0, nodes.size - 1)
    if not np.array_equal(nodes[order][pos], p.abscissae):
        raise DegenerateNodesError("projection abscissae are not drawn from the given nodes")
    return nodes, order[pos]


def fit_least_squares(
    p: Projection,
    nodes=None,
    degree: int | None = None,
    allow_lower_degree: bool = False,
    basis: str = "shifted-legendre",
) -> MarginalFit:
    """Ordinary least-squares polynomial through a grid-structured projection.

    The abscissae must take exactly the ``n`` values in ``nodes`` (default:
    the distinct abscissae). With the default degree ``n - 1`` the fit
    interpolates the per-node sample means. Lower degrees are only allowed
    with ``allow_lower_degree=True``.
    """
    nodes, _ = _node_groups(p, nodes)
    n = nodes.size
    degree = n - 1 if degree is None else int(degree)
    if degree != n - 1 and not allow_lower_degree:
        raise ValueError("degree must be n - 1 unless allow_lower_degree=True")
    if degree > n - 1:
        raise DegenerateNodesError(f"degree {degree} needs at least {degree + 1} distinct nodes")
    _check_degree(degree)
    A = _design(p.abscissae, degree, p.interval, basis)
    coef, cond = _solve(A, p.values)
    return MarginalFit(p.axis, degree, coef, p.interval, p.scale, np.sort(nodes), basis,
                       {"condition": cond, "method": "ols"})


def fit_weighted_least_squares(
    p: Projection,
    nodes,
    weights,
    basis: str = "shifted-legendre",
) -> MarginalFit:
    """Degree ``n - 1`` weighted fit with one positive weight per node.

    Every observation sharing node ``l`` gets weight ``weights[l]`` (weights
    follow the order of ``nodes``). For degree ``n - 1`` the predictions
    coincide with :func:`fit_least_squares`.
    """
    nodes, group = _node_groups(p, nodes)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != nodes.shape:
        raise ValueError("need one weight per node")
    if np.any(~(weights > 0)) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be strictly positive and finite")
    degree = nodes.size - 1
    _check_degree(degree)
    A = _design(p.abscissae, degree, p.interval, basis)
    coef, cond = _solve(A, p.values, weights[group])
    return MarginalFit(p.axis, degree, coef, p.interval, p.scale, np.sort(nodes), basis,
                       {"condition": cond, "method": "wls"})


def node_sample_variances(p: Projection, nodes=None) -> np.ndarray:
    """Per-node sample variance of the projected values (in ``nodes`` order)."""
    nodes, group = _node_groups(p, nodes)
    out = np.empty(nodes.size)
    for l in range(nodes.size):
        v = p.values[group == l]
        out[l] = v.var(ddof=1) if v.size > 1 else 0.0
    return out


def default_parts(N: int) -> int:
    """Part count ``clamp(round(N ** (1/3)), 8, 24)``."""
    return int(min(24, max(8, round(N ** (1.0 / 3.0)))))


def fit_partitioned(
    es: EvaluatedSet,
    k: int,
    n: int | None = None,
    abscissae: str = "representative",
    basis: str = "shifted-legendre",
    rtol: float = 1e-8,
) -> MarginalFit:
    """Degree ``n - 1`` fit after splitting axis ``k`` into ``n`` equal slabs.

    ``abscissae="representative"`` regresses every value on its slab
    midpoint, which makes ``scale * predict(center_u)`` equal the slab's
    partition mean; this identity is checked and a ``RuntimeError`` raised
    if it fails beyond ``rtol``. ``abscissae="raw"`` regresses on the exact
    coordinates instead (a plain least-squares smooth of the scatter); the
    per-slab differences from the partition means are then only reported.
    """
    n = default_parts(es.N) if n is None else int(n)
    degree = n - 1
    _check_degree(degree)
    pm = partition_means(es, k, n)
    counts = pm.member_counts
    box = es.box
    interval = (float(box.lower[k]), float(box.upper[k]))
    scale = box.reduced_volume(k)
    if abscissae == "representative":
        x = pm.slab_centers[slab_indices(es.pointset, k, n)]
    elif abscissae == "raw":
        x = es.pointset.points[:, k]
        if np.unique(x).size < n:
            raise DegenerateNodesError(f"fewer than {n} distinct abscissae on axis {k}")
    else:
        raise ValueError("abscissae must be 'representative' or 'raw'")
    A = _design(x, degree, interval, basis)
    coef, cond = _solve(A, es.values)
    fit = MarginalFit(k, degree, coef, interval, scale, pm.slab_centers, basis,
                      {"condition": cond, "method": f"partitioned-{abscissae}",
                       "member_counts": counts.tolist()})
    residuals = fit.density(pm.slab_centers) - pm.means
    fit.diagnostics["slab_residuals"] = residuals.tolist()
    fit.diagnostics["equal_counts"] = bool(np.all(counts == counts[0]))
    if abscissae == "representative":
        tol = rtol * max(np.max(np.abs(pm.means)), np.finfo(float).tiny)
        if np.max(np.abs(residuals)) > tol:
            raise RuntimeError(
                f"fit misses the partition means by {np.max(np.abs(residuals)):.3g} (> {tol:.3g})"
            )
    return fit


def fit_marginal(es: EvaluatedSet, k: int, n: int | None = None, abscissae: str = "raw") -> MarginalFit:
    """Marginal fit for any point set.

    Grid-structured sets (regular, Chebyshev or explicit node grids) are
    fitted through their distinct abscissae; everything else is partitioned
    into ``n`` slabs (default :func:`default_parts`).
    """
    if es.pointset.kind in ("regular_grid", "chebyshev_grid", "nodes"):
        return fit_least_squares(project(es, k))
    return fit_partitioned(es, k, n, abscissae=abscissae)


@dataclass(frozen=True)
class ErrorBound:
    C: float
    n: int
    a: float
    b: float
    kind: str
    bound: float


def chebyshev_bound(C: float, n: int, a: float, b: float) -> ErrorBound:
    """Interpolation error bound ``C / (2^(n-1) n!) ((b - a)/2)^n`` for Chebyshev nodes."""
    if C < 0 or n < 1 or not a < b:
        raise ValueError("need C >= 0, n >= 1 and a < b")
    log_bound = n * math.log((b - a) / 2.0) - (n - 1) * math.log(2.0) - math.lgamma(n + 1)
    bound = 0.0 if C == 0 else C * math.exp(log_bound)
    return ErrorBound(C, n, a, b, "chebyshev", bound)


def equidistant_bound(C: float, n: int, a: float, b: float) -> ErrorBound:
    """Interpolation error bound ``C / (4n) ((b - a)/(n - 1))^n`` for equispaced nodes
    including both endpoints."""
    if C < 0 or n < 2 or not a < b:
        raise ValueError("need C >= 0, n >= 2 and a < b")
    bound = 0.0 if C == 0 else C / (4.0 * n) * math.exp(n * math.log((b - a) / (n - 1)))
    return ErrorBound(C, n, a, b, "equidistant", bound)


def normalize_fit(fit: MarginalFit, panels: int = DEFAULT_PANELS) -> TabulatedDensity:
    """Tabulate ``scale * predict`` on ``panels + 1`` points, clip negatives,
    and rescale to unit trapezoid mass.

    ``meta`` records the clipped fraction of the raw absolute mass so heavy
    clipping can be spotted downstream.
    """
    a, b = fit.interval
    xs = np.linspace(a, b, panels + 1)
    raw = fit.density(xs)
    if not np.any(raw > 0):
        raise ValueError("fitted marginal is nowhere positive")
    clipped = np.clip(raw, 0.0, None)
    abs_mass = trapezoid(np.abs(raw), xs)
    meta = {
        "clipped_fraction": float(trapezoid(clipped - raw, xs) / abs_mass),
        "raw_mass": float(trapezoid(raw, xs)),
    }
    return TabulatedDensity(xs, clipped, meta).normalized()
