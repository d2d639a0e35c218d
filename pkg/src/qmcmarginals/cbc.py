"""Component-by-component construction of rank-1 lattice generating vectors.

The search criterion is the squared worst-case error of the shift-invariant
weighted Korobov space with smoothness 2 and product weights ``gamma_j``::

    e2(z) = -1 + 1/N * sum_i prod_j (1 + gamma_j * omega(frac(i z_j / N)))
    omega(x) = 2 pi^2 (x^2 - x + 1/6)
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numba
import numpy as np

from .pointsets import GeneratingVector

if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

MAX_N = 2**20
MAX_DIMS = 64
WEIGHT_FLOOR = 1e-4
_TIE_RTOL = 1e-12


class SearchBudgetError(ValueError):
    pass


def omega(x):
    x = np.asarray(x, dtype=float)
    return 2.0 * np.pi**2 * (x * x - x + 1.0 / 6.0)


@dataclass(frozen=True)
class WeightedSearchSpec:
    N: int
    s: int
    gamma: tuple
    alpha: int = 2

    def __post_init__(self):
        gamma = tuple(float(g) for g in self.gamma)
        if len(gamma) != self.s:
            raise ValueError("need one weight per dimension")
        if any(not g >= 0 for g in gamma):
            raise ValueError("weights must be nonnegative")
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if self.alpha != 2:
            raise ValueError("only smoothness alpha = 2 is supported")
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def unweighted(cls, N: int, s: int) -> "WeightedSearchSpec":
        return cls(N, s, (1.0,) * s)


@dataclass(frozen=True)
class CBCResult:
    vector: GeneratingVector
    gamma: tuple
    e2_sequence: tuple

    def to_dict(self) -> dict:
        return {
            "N": self.vector.modulus,
            "s": self.vector.dims,
            "z": list(self.vector.components),
            "gamma": list(self.gamma),
            "e2_sequence": list(self.e2_sequence),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "CBCResult":
        return cls(GeneratingVector(tuple(d["z"]), int(d["N"])), tuple(d["gamma"]), tuple(d["e2_sequence"]))


def worst_case_error_sq(z, spec: WeightedSearchSpec) -> float:
    """Direct evaluation of ``e2(z)`` over all ``N`` lattice points."""
    z = np.asarray(z.components if isinstance(z, GeneratingVector) else z, dtype=np.int64)
    N = spec.N
    if z.size != spec.s:
        raise ValueError("generating vector length does not match the spec")
    i = np.arange(N, dtype=np.int64)
    prod = np.ones(N)
    for zj, gj in zip(z, spec.gamma):
        prod *= 1.0 + gj * omega(((i * zj) % N) / N)
    return float(-1.0 + prod.sum() / N)


def candidates(N: int) -> np.ndarray:
    """Odd integers for powers of two, otherwise all residues coprime to ``N``."""
    r = np.arange(1, N, dtype=np.int64)
    if N & (N - 1) == 0:
        return r[r % 2 == 1]
    return r[np.gcd(r, N) == 1]


@numba.njit(parallel=True, cache=True)
def _score_candidates(P, omega_table, cands, gamma, N):
    # P and omega are symmetric under i -> N - i, so sum half the indices
    half = N // 2
    out = np.empty(cands.size)
    for c in numba.prange(cands.size):
        z = cands[c]
        acc = P[0] * (1.0 + gamma * omega_table[0])
        idx = 0
        for i in range(1, half + 1):
            idx += z
            if idx >= N:
                idx -= N
            w = 1.0 if (2 * i == N) else 2.0
            acc += w * P[i] * (1.0 + gamma * omega_table[idx])
        out[c] = acc
    return out


def cbc_search(
    spec: WeightedSearchSpec,
    max_candidates: int | None = None,
    seed: int = 0,
) -> CBCResult:
    """Greedy coordinate-wise minimisation of :func:`worst_case_error_sq`.

    Each coordinate takes the candidate coprime to ``N`` that minimises the
    criterion with earlier coordinates fixed; ties go to the smallest
    candidate. ``max_candidates`` restricts each step to a seeded random
    subset of the candidates (used for building tables at large ``N``).
    """
    N, s = spec.N, spec.s
    if N > MAX_N or s > MAX_DIMS:
        raise SearchBudgetError(f"CBC search limited to N <= {MAX_N} and s <= {MAX_DIMS}")
    cand_all = candidates(N)
    # e2(z) = e2(N - z); the smaller representative wins ties anyway
    cand_all = cand_all[cand_all <= N // 2]
    rng = np.random.default_rng(seed)
    omega_table = omega(np.arange(N) / N)
    P = np.ones(N)
    i = np.arange(N, dtype=np.int64)
    z, e2 = [], []
    for j in range(s):
        cand = cand_all
        if max_candidates is not None and cand_all.size > max_candidates:
            cand = np.sort(rng.choice(cand_all, size=max_candidates, replace=False))
        scores = _score_candidates(P, omega_table, cand, spec.gamma[j], N)
        best = scores.min()
        pick = int(cand[np.flatnonzero(scores <= best * (1.0 + _TIE_RTOL))[0]])
        z.append(pick)
        P *= 1.0 + spec.gamma[j] * omega_table[(i * pick) % N]
        e2.append(float(-1.0 + P.sum() / N))
    return CBCResult(GeneratingVector(tuple(z), N), spec.gamma, tuple(e2))


def weights_from_importances(importances, floor: float = WEIGHT_FLOOR) -> np.ndarray:
    """Product weights ``S_k / max S``, floored so every coordinate counts.

    Accepts an importance vector (fractions or percentages) or anything with
    an ``importance`` attribute.
    """
    S = np.asarray(getattr(importances, "importance", importances), dtype=float)
    if S.ndim != 1 or S.size == 0 or np.any(S < 0) or not np.any(S > 0):
        raise ValueError("importances must be nonnegative with at least one positive entry")
    return np.maximum(S / S.max(), floor)


@lru_cache(maxsize=1)
def _table() -> dict:
    path = resources.files("qmcmarginals.data").joinpath("lattice_table.json")
    if not path.is_file():
        return {"vectors": {}}
    with path.open() as fh:
        return json.load(fh)


def table_lookup(N: int, s: int) -> GeneratingVector | None:
    """Bundled unweighted CBC vector for ``(N, s)``, or ``None``."""
    entry = _table()["vectors"].get(str(N))
    if entry is None or s > len(entry["z"]):
        return None
    return GeneratingVector(tuple(entry["z"][:s]), N)


def generator_for(N: int, s: int, gamma=None) -> GeneratingVector:
    """Table vector when unweighted and available, otherwise a fresh CBC search."""
    if gamma is None or np.all(np.asarray(gamma) == 1.0):
        gv = table_lookup(N, s)
        if gv is not None:
            return gv
        gamma = (1.0,) * s
    return cbc_search(WeightedSearchSpec(N, s, tuple(gamma))).vector


def build_table(exponents=range(10, 21), s: int = 16, full_up_to: int = 2**19,
                subset: int = 16384, seed: int = 0, progress=None) -> dict:
    """Recompute the bundled table (slow at the largest ``N``)."""
    vectors = {}
    for m in exponents:
        N = 2**m
        limit = None if N <= full_up_to else subset
        res = cbc_search(WeightedSearchSpec.unweighted(N, s), max_candidates=limit, seed=seed)
        vectors[str(N)] = {
            "z": list(res.vector.components),
            "e2_sequence": list(res.e2_sequence),
            "search": "full" if limit is None else f"random-subset-{limit}",
        }
        if progress:
            progress(N, vectors[str(N)])
    return {"criterion": "weighted Korobov, alpha=2, gamma_j=1", "s": s, "vectors": vectors}

