"""First-order anchored f-ANOVA of a likelihood over the prior-weighted space.

For a likelihood that factorises as ``f(t|theta) = prod_k f(t_k|theta_k)``
and a product prior ``g``, write ``a_k = f(t_k|c_k) g(c_k)`` at the anchor
``c``. The first-order components and their variances are::

    f_k(theta_k) = prod_{i != k} a_i * (f(t_k|theta_k) - a_k)
    sigma_k^2    = integral f_k(theta_k)^2 g(theta_k) dtheta_k
    sigma_0^2    = prod_i a_i^2

The other prior factors integrate to one, so each variance is a 1-D
integral. For an exponential likelihood with Gamma(r, v) priors the
integral has a closed form.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

TAIL = 1e-16


class QuadratureConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FactorizedTarget:
    """Likelihood factors ``f(t_k|theta_k)`` with independent unit-mass priors.

    ``likelihood[k]`` is a vectorised callable of ``theta_k`` with the datum
    ``t_k`` already bound; ``priors[k]`` is a frozen scipy distribution.
    ``gamma_exp`` holds ``(shapes, rates)`` when the likelihood is
    exponential and the priors are Gamma, enabling the closed form.
    """

    likelihood: tuple
    priors: tuple
    data: np.ndarray
    gamma_exp: tuple | None = None

    @property
    def dims(self) -> int:
        return len(self.priors)

    def joint_likelihood(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(theta)
        out = np.ones(theta.shape[0])
        for k, f in enumerate(self.likelihood):
            out *= f(theta[:, k])
        return out

    def prior_interval(self, k: int) -> tuple[float, float]:
        """Prior support, with infinite ends cut at tail probability 1e-16."""
        g = self.priors[k]
        lo, hi = g.support()
        if not np.isfinite(lo):
            lo = float(g.ppf(TAIL))
        if not np.isfinite(hi):
            hi = float(g.isf(TAIL))
        return float(lo), float(hi)

    def anchor_constants(self, c) -> np.ndarray:
        """``a_k = f(t_k|c_k) g(c_k)`` for every dimension."""
        c = self._check_anchor(c)
        return np.array([float(self.likelihood[k](np.array([c[k]]))[0] * self.priors[k].pdf(c[k]))
                         for k in range(self.dims)])

    def _check_anchor(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if c.shape != (self.dims,):
            raise ValueError("anchor must have one coordinate per dimension")
        for k, g in enumerate(self.priors):
            lo, hi = g.support()
            if not lo <= c[k] <= hi:
                raise ValueError(f"anchor coordinate {c[k]} lies outside the support of dimension {k}")
        return c

    def posterior_mode(self) -> np.ndarray:
        """Componentwise mode of ``f(t_k|theta_k) g(theta_k)``."""
        if self.gamma_exp is not None:
            r, v = self.gamma_exp
            # posterior is Gamma(r + 1, v + t); clamp to the boundary when r < 0
            return np.maximum(np.asarray(r, float), 0.0) / (np.asarray(v, float) + self.data)
        out = np.empty(self.dims)
        for k in range(self.dims):
            lo, hi = self.prior_interval(k)
            f, g = self.likelihood[k], self.priors[k]

            def neg(x, f=f, g=g):
                return -float(f(np.array([x]))[0] * g.pdf(x))

            out[k] = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                     options={"xatol": 1e-10 * (hi - lo)}).x
        return out


def exponential_likelihood(t: float) -> Callable[[np.ndarray], np.ndarray]:
    """``theta -> theta * exp(-theta t)``."""
    def f(theta):
        theta = np.asarray(theta, dtype=float)
        return theta * np.exp(-theta * t)
    return f


def exp_gamma_target(shapes: Sequence[float], rates: Sequence[float], data: Sequence[float]) -> FactorizedTarget:
    """Exponential waiting-time likelihood with independent Gamma(r_k, v_k) priors."""
    r = np.asarray(shapes, dtype=float)
    v = np.asarray(rates, dtype=float)
    t = np.asarray(data, dtype=float)
    if not (r.shape == v.shape == t.shape):
        raise ValueError("shapes, rates and data need equal lengths")
    if np.any(r <= 0) or np.any(v <= 0):
        raise ValueError("Gamma shapes and rates must be positive")
    if np.any(t < 0):
        raise ValueError("waiting times must be nonnegative")
    return FactorizedTarget(
        likelihood=tuple(exponential_likelihood(tk) for tk in t),
        priors=tuple(stats.gamma(a=rk, scale=1.0 / vk) for rk, vk in zip(r, v)),
        data=t,
        gamma_exp=(tuple(r), tuple(v)),
    )


def anchored_component(ft: FactorizedTarget, c, k: int) -> Callable[[np.ndarray], np.ndarray]:
    """First-order anchored component ``f_k`` as a function of ``theta_k``."""
    a = ft.anchor_constants(c)
    others = float(np.prod(np.delete(a, k)))
    f0 = float(np.prod(a))
    fk = ft.likelihood[k]

    def component(theta):
        return fk(np.asarray(theta, dtype=float)) * others - f0

    return component


def _graded_gauss_legendre(lo: float, hi: float, panels: int, nodes: int):
    """Composite Gauss-Legendre rule under ``x = lo + (hi - lo) u^2``.

    The square-root grading clusters panels near ``lo`` and absorbs the
    ``x^(r-1)`` endpoint singularity of Gamma priors with ``r >= 1/2``.
    """
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, 1.0, panels + 1)
    left, right = edges[:-1, None], edges[1:, None]
    u = 0.5 * (left + right) + 0.5 * (right - left) * gx[None, :]
    wu = 0.5 * (right - left) * gw[None, :]
    x = lo + (hi - lo) * u * u
    w = wu * (hi - lo) * 2.0 * u
    return x.ravel(), w.ravel()


def variance_component_numeric(
    ft: FactorizedTarget,
    c,
    k: int,
    panels: int = 64,
    nodes: int = 8,
    rtol: float = 1e-6,
) -> float:
    """``integral f_k^2 g_k`` by composite Gauss-Legendre over the prior support.

    The rule is repeated with doubled panels; the refined value is returned
    and a :class:`QuadratureConvergenceWarning` is issued when the two differ
    by more than ``rtol`` relative.
    """
    comp = anchored_component(ft, c, k)
    g = ft.priors[k]
    lo, hi = ft.prior_interval(k)

    def rule(p):
        x, w = _graded_gauss_legendre(lo, hi, p, nodes)
        return float(np.sum(w * comp(x) ** 2 * g.pdf(x)))

    coarse, fine = rule(panels), rule(2 * panels)
    scale = max(abs(fine), np.finfo(float).tiny)
    if abs(fine - coarse) > rtol * scale:
        warnings.warn(
            f"variance component {k}: relative change {abs(fine - coarse) / scale:.2e} after doubling panels",
            QuadratureConvergenceWarning,
            stacklevel=2,
        )
    return fine


def _exp_gamma_constants(r, v, t, c):
    r, v, t, c = (np.asarray(x, dtype=float) for x in (r, v, t, c))
    if np.any(r <= 0) or np.any(v <= 0):
        raise ValueError("Gamma shapes and rates must be positive")
    log_g = r * np.log(v) - gammaln(r) + (r - 1) * np.log(c) - v * c
    a = c * np.exp(-c * t) * np.exp(log_g)
    return r, v, t, a


def variance_component_gamma_exp(r, v, t, c, k: int) -> float:
    """Closed form of ``sigma_k^2`` for an exponential likelihood with
    normalised Gamma(r, v) priors ``g(x) = v^r x^(r-1) e^(-v x) / Gamma(r)``."""
    r, v, t, a = _exp_gamma_constants(r, v, t, c)
    rk, vk, tk, ak = r[k], v[k], t[k], a[k]
    # E_g[f^2] and E_g[f] for f(x) = x e^(-x t)
    second = math.exp(rk * math.log(vk) - gammaln(rk) + gammaln(rk + 2) - (rk + 2) * math.log(2 * tk + vk))
    first = math.exp(rk * math.log(vk) - gammaln(rk) + gammaln(rk + 1) - (rk + 1) * math.log(tk + vk))
    others = float(np.prod(np.delete(a, k) ** 2))
    return others * (second - 2.0 * ak * first + ak * ak)


@dataclass(frozen=True)
class VarianceReport:
    anchor: np.ndarray
    sigma0sq: float
    sigma_k_sq: np.ndarray
    importance: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def percentages(self) -> np.ndarray:
        return 100.0 * self.importance

    def to_dict(self) -> dict:
        return {
            "anchor": [float(x) for x in self.anchor],
            "sigma0sq": float(self.sigma0sq),
            "sigmaKsq": [float(x) for x in self.sigma_k_sq],
            "importance": [float(x) for x in self.importance],
            "percent": [float(x) for x in self.percentages],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "VarianceReport":
        return cls(
            anchor=np.asarray(d["anchor"], float),
            sigma0sq=float(d["sigma0sq"]),
            sigma_k_sq=np.asarray(d["sigmaKsq"], float),
            importance=np.asarray(d["importance"], float),
        )

    @classmethod
    def from_json(cls, path) -> "VarianceReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def weights_table(self) -> str:
        """Marginal / weight-percent table with 3 significant figures."""
        lines = ["marginal  weight(%)"]
        for k, p in enumerate(self.percentages, start=1):
            lines.append(f"{k:>8}  {float(f'{p:.3g}'):>9g}")
        return "\n".join(lines)


def importances(sigma_k_sq, anchor=None, sigma0sq: float = float("nan")) -> VarianceReport:
    """Relative importances ``S_k = sigma_k^2 / sum_j sigma_j^2``.

    Only first-order components enter the denominator, so interactions are
    neglected; this is recorded in ``meta``.
    """
    s = np.asarray(sigma_k_sq, dtype=float)
    if np.any(s < 0):
        raise ValueError("variance components must be nonnegative")
    total = s.sum()
    if not total > 0:
        raise ValueError("all variance components are zero")
    anchor = np.full(s.size, np.nan) if anchor is None else np.asarray(anchor, float)
    return VarianceReport(anchor, sigma0sq, s, s / total, {"denominator": "sum of first-order components"})


def variance_report(ft: FactorizedTarget, c=None, method: str = "auto", **quad) -> VarianceReport:
    """Anchored first-order variance components and importances.

    ``c`` defaults to the componentwise posterior mode. ``method`` is
    ``"closed"`` (exponential/Gamma only), ``"numeric"`` or ``"auto"``.
    """
    c = ft.posterior_mode() if c is None else np.asarray(c, dtype=float)
    a = ft.anchor_constants(c)
    if method == "auto":
        method = "closed" if ft.gamma_exp is not None else "numeric"
    if method == "closed":
        if ft.gamma_exp is None:
            raise ValueError("closed form needs an exponential likelihood with Gamma priors")
        r, v = ft.gamma_exp
        sig = [variance_component_gamma_exp(r, v, ft.data, c, k) for k in range(ft.dims)]
    elif method == "numeric":
        sig = [variance_component_numeric(ft, c, k, **quad) for k in range(ft.dims)]
    else:
        raise ValueError(f"unknown method {method!r}")
    a0 = float(np.prod(a))
    rep = importances(sig, anchor=c, sigma0sq=a0 * a0)
    rep.meta["method"] = method
    return rep
