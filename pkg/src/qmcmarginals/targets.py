"""Analytic test densities with exact marginals on truncated boxes.

Every target is evaluated unnormalised on a finite box; ``true_marginal(k)``
returns the exact marginal of the box-truncated joint, normalised to unit
mass on ``[a_k, b_k)``.
"""

from __future__ import annotations

import json
import math
from functools import lru_cache
from importlib import resources
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import brentq
from scipy.special import betaln

from .fanova import FactorizedTarget, exp_gamma_target
from .pointsets import Box

# default boxes leave out 1e-6 of each marginal: half per side, all of it on
# the upper side when the lower end is a natural boundary
TAIL = 5e-7
BETA_EDGE = 1e-6


class TargetDensity:
    """Base class. Subclasses implement ``evaluate`` and ``true_marginal``."""

    name: str = "target"
    box: Box
    factorization: FactorizedTarget | None = None

    @property
    def dims(self) -> int:
        return self.box.dims

    @property
    def default_box(self) -> Box:
        return self.box

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        return self.evaluate(theta)

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def true_marginal(self, k: int) -> Callable[[np.ndarray], np.ndarray]:
        raise NotImplementedError

    def smoothness_c(self, k: int, n: int) -> float | None:
        return None

    def interval(self, k: int) -> tuple[float, float]:
        return float(self.box.lower[k]), float(self.box.upper[k])


class ProductTarget(TargetDensity):
    """Separable density ``prod_k p_k(theta_k)`` from frozen scipy distributions."""

    def __init__(self, factors: Sequence, box: Box, name: str = "product",
                 factorization: FactorizedTarget | None = None, spec: dict | None = None):
        if len(factors) != box.dims:
            raise ValueError("need one factor per box dimension")
        self.factors = tuple(factors)
        self.box = box
        self.name = name
        self.factorization = factorization
        self.spec = spec or {}
        lo, hi = box.lower, box.upper
        self._mass = np.array([f.cdf(h) - f.cdf(l) for f, l, h in zip(self.factors, lo, hi)])
        if np.any(self._mass <= 0):
            raise ValueError("box carries no mass under some factor")

    def factor(self, k: int, x) -> np.ndarray:
        return self.factors[k].pdf(np.asarray(x, dtype=float))

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        out = np.ones(theta.shape[0])
        for k in range(self.dims):
            out *= self.factor(k, theta[:, k])
        return out

    def true_marginal(self, k: int) -> Callable[[np.ndarray], np.ndarray]:
        f, m = self.factors[k], self._mass[k]
        a, b = self.interval(k)

        def marginal(x):
            x = np.asarray(x, dtype=float)
            return np.where((x >= a) & (x <= b), f.pdf(x) / m, 0.0)

        return marginal

    def box_mass(self, k: int) -> float:
        """Mass of factor ``k`` inside the box."""
        return float(self._mass[k])


class ExponentialTarget(ProductTarget):
    def __init__(self, lambdas, box: Box, name: str = "exponential"):
        self.lambdas = np.asarray(lambdas, dtype=float)
        super().__init__([stats.expon(scale=1.0 / l) for l in self.lambdas], box, name,
                         spec={"type": "exponential", "params": [[float(l)] for l in self.lambdas]})

    def factor(self, k, x):
        # scipy's expon.pdf is zero below 0; keep the closed form on the box
        x = np.asarray(x, dtype=float)
        lam = self.lambdas[k]
        return lam * np.exp(-lam * x)

    def smoothness_c(self, k: int, n: int) -> float:
        """``sup |d^n/dx^n lambda e^(-lambda x)| = lambda^(n+1)`` for ``x >= 0``."""
        if n < 0:
            raise ValueError("derivative order must be nonnegative")
        return float(self.lambdas[k] ** (n + 1))


class BetaTarget(ProductTarget):
    def __init__(self, alphas, betas, box: Box, name: str = "beta"):
        self.alphas = np.asarray(alphas, dtype=float)
        self.betas = np.asarray(betas, dtype=float)
        super().__init__([stats.beta(a, b) for a, b in zip(self.alphas, self.betas)], box, name,
                         spec={"type": "beta", "params": [[float(a), float(b)] for a, b in zip(self.alphas, self.betas)]})

    def factor(self, k, x):
        # log form; clamping into the open interval keeps shapes below 1 finite
        x = np.clip(np.asarray(x, dtype=float), np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
        a, b = self.alphas[k], self.betas[k]
        return np.exp((a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x) - betaln(a, b))


class GammaTarget(ProductTarget):
    def __init__(self, shapes, rates, box: Box, name: str = "gamma", data=None):
        self.shapes = np.asarray(shapes, dtype=float)
        self.rates = np.asarray(rates, dtype=float)
        factors = [stats.gamma(a=r, scale=1.0 / v) for r, v in zip(self.shapes, self.rates)]
        self.data = None if data is None else np.asarray(data, dtype=float)
        super().__init__(factors, box, name, factorization=self._factorize(),
                         spec={"type": "gamma", "params": [[float(r), float(v)] for r, v in zip(self.shapes, self.rates)]})

    def _factorize(self) -> FactorizedTarget | None:
        # Gamma(r, v) = Gamma(r - 1, v - t) prior x exponential likelihood at t
        r, v = self.shapes, self.rates
        if np.any(r <= 1):
            return None
        t = v / 2.0 if self.data is None else self.data
        if np.any(t < 0) or np.any(t >= v):
            raise ValueError("data must satisfy 0 <= t < rate for the factorization")
        return exp_gamma_target(r - 1.0, v - t, t)


class MixtureTarget(TargetDensity):
    """Mixture of axis-aligned Gaussian products, truncated to ``box``."""

    def __init__(self, weights, means, sds, box: Box, name: str = "mixture"):
        w = np.asarray(weights, dtype=float)
        mu = np.atleast_2d(np.asarray(means, dtype=float))
        sd = np.atleast_2d(np.asarray(sds, dtype=float))
        if w.ndim != 1 or mu.shape != (w.size, box.dims) or sd.shape != mu.shape:
            raise ValueError("means and sds must have shape (components, dims)")
        if np.any(w <= 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-12):
            raise ValueError("weights must be positive and sum to 1")
        if np.any(sd <= 0):
            raise ValueError("standard deviations must be positive")
        self.weights, self.means, self.sds, self.box, self.name = w, mu, sd, box, name
        lo, hi = box.lower, box.upper
        # per-component, per-axis mass inside the box
        self._mass = stats.norm.cdf(hi, mu, sd) - stats.norm.cdf(lo, mu, sd)
        self.spec = {"type": "gaussian_mixture", "weights": w.tolist(), "means": mu.tolist(), "sds": sd.tolist()}

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        out = np.zeros(theta.shape[0])
        for j in range(self.weights.size):
            out += self.weights[j] * np.prod(stats.norm.pdf(theta, self.means[j], self.sds[j]), axis=1)
        return out

    def true_marginal(self, k: int) -> Callable[[np.ndarray], np.ndarray]:
        others = np.prod(np.delete(self._mass, k, axis=1), axis=1)
        coef = self.weights * others
        total = float(np.sum(coef * self._mass[:, k]))
        a, b = self.interval(k)
        mu, sd = self.means[:, k], self.sds[:, k]

        def marginal(x):
            x = np.asarray(x, dtype=float)
            y = np.sum(coef[:, None] * stats.norm.pdf(x.ravel()[None, :], mu[:, None], sd[:, None]), axis=0)
            y = y.reshape(x.shape) / total
            return np.where((x >= a) & (x <= b), y, 0.0)

        return marginal


def _mixture_quantile_box(weights, means, sds):
    """Per-axis ``TAIL`` quantiles of the untruncated mixture marginals."""
    z = stats.norm.isf(TAIL)
    lo, hi = [], []
    for k in range(means.shape[1]):
        mu, sd = means[:, k], sds[:, k]

        def cdf(x):
            return float(np.sum(weights * stats.norm.cdf(x, mu, sd)))

        def sf(x):
            return float(np.sum(weights * stats.norm.sf(x, mu, sd)))

        a0, b0 = float(np.min(mu - z * sd)), float(np.max(mu + z * sd))
        lo.append(brentq(lambda x: cdf(x) - TAIL, a0, float(np.max(mu)), xtol=1e-12))
        hi.append(brentq(lambda x: sf(x) - TAIL, float(np.min(mu)), b0, xtol=1e-12))
    return np.asarray(lo), np.asarray(hi)


def product_exponential(lambdas, box: Box | None = None) -> ExponentialTarget:
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or np.any(lambdas <= 0):
        raise ValueError("rates must be positive")
    if box is None:
        box = Box(np.zeros(lambdas.size), -np.log(2 * TAIL) / lambdas)
    return ExponentialTarget(lambdas, box)


def product_beta(alphas, betas, box: Box | None = None) -> BetaTarget:
    alphas, betas = np.asarray(alphas, dtype=float), np.asarray(betas, dtype=float)
    if alphas.shape != betas.shape or np.any(alphas <= 0) or np.any(betas <= 0):
        raise ValueError("Beta shapes must be positive and paired")
    if box is None:
        lo = np.where(alphas < 1, BETA_EDGE, 0.0)
        hi = np.where(betas < 1, 1.0 - BETA_EDGE, 1.0)
        box = Box(lo, hi)
    return BetaTarget(alphas, betas, box)


def product_gamma(shapes, rates, box: Box | None = None, data=None) -> GammaTarget:
    shapes, rates = np.asarray(shapes, dtype=float), np.asarray(rates, dtype=float)
    if shapes.shape != rates.shape or np.any(shapes <= 0) or np.any(rates <= 0):
        raise ValueError("Gamma shapes and rates must be positive and paired")
    if box is None:
        dists = [stats.gamma(a=r, scale=1.0 / v) for r, v in zip(shapes, rates)]
        lo = [0.0 if r <= 1 else float(d.ppf(TAIL)) for r, d in zip(shapes, dists)]
        hi = [float(d.isf(2 * TAIL)) if r <= 1 else float(d.isf(TAIL)) for r, d in zip(shapes, dists)]
        box = Box(np.asarray(lo), np.asarray(hi))
    return GammaTarget(shapes, rates, box, data=data)


def gaussian_mixture(weights, means, sds, box: Box | None = None) -> MixtureTarget:
    weights = np.asarray(weights, dtype=float)
    means = np.atleast_2d(np.asarray(means, dtype=float))
    sds = np.atleast_2d(np.asarray(sds, dtype=float))
    if box is None:
        box = Box(*_mixture_quantile_box(weights, means, sds))
    return MixtureTarget(weights, means, sds, box)


def from_config(cfg: dict) -> TargetDensity:
    """Build a target from ``{type, params, box}``.

    ``params`` lists one parameter row per dimension: ``[lambda]`` for
    exponential, ``[alpha, beta]`` for beta, ``[shape, rate]`` for gamma.
    Gaussian mixtures use ``weights``, ``means`` and ``sds`` instead. ``box``
    is ``[[lower...], [upper...]]`` and may be omitted.
    """
    kind = cfg["type"]
    box = None
    if cfg.get("box") is not None:
        lo, hi = cfg["box"]
        box = Box(np.asarray(lo, float), np.asarray(hi, float))
    if kind == "gaussian_mixture":
        target = gaussian_mixture(cfg["weights"], cfg["means"], cfg["sds"], box)
    else:
        params = np.asarray(cfg["params"], dtype=float)
        if kind == "exponential":
            target = product_exponential(params[:, 0], box)
        elif kind == "beta":
            target = product_beta(params[:, 0], params[:, 1], box)
        elif kind == "gamma":
            target = product_gamma(params[:, 0], params[:, 1], box, data=cfg.get("data"))
        else:
            raise ValueError(f"unknown target type {kind!r}")
    target.name = cfg.get("name", kind)
    return target


@lru_cache(maxsize=1)
def _presets() -> dict:
    with resources.files("qmcmarginals.data").joinpath("presets.json").open() as fh:
        return json.load(fh)


def preset_names() -> list[str]:
    return sorted(k for k in _presets() if not k.startswith("_"))


def preset(name: str) -> TargetDensity:
    """Named artifact-default instance (see ``data/presets.json``)."""
    table = _presets()
    if name.startswith("_") or name not in table:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    cfg = dict(table[name])
    cfg.setdefault("name", name)
    return from_config(cfg)


def resolve(name_or_cfg) -> TargetDensity:
    if isinstance(name_or_cfg, TargetDensity):
        return name_or_cfg
    if isinstance(name_or_cfg, dict):
        return from_config(name_or_cfg)
    return preset(str(name_or_cfg))
