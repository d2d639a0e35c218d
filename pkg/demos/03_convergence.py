"""
Integration error and marginal error against sample size
=========================================================

On a smooth separable density the lattice rule error falls close to
1/N, faster than with independent uniform points.

The second part places n nodes on one axis and an m-point lattice on
the remaining axes. For a separable target the inner rule only rescales
the marginal, which normalization removes, so the error depends on n
alone. For the non-separable mixture it falls in m as well, until the
degree n - 1 polynomial becomes the limit.
"""

import numpy as np

from qmcmarginals.bench import convergence_series
from qmcmarginals.cbc import generator_for
from qmcmarginals.pointsets import make_korobov, make_random
from qmcmarginals.quadrature import evaluate, integrate
from qmcmarginals.targets import preset

target = preset("exp2")
exact = float(np.prod([target.box_mass(k) for k in range(target.dims)]))

Ns = [2**m for m in range(8, 17, 2)]
print(f"{'N':>7} {'korobov':>10} {'random (median of 10)':>22}")
for N in Ns:
    kor = abs(integrate(evaluate(target, make_korobov(N, generator_for(N, 2), target.box))) - exact)
    rnd = np.median([abs(integrate(evaluate(target, make_random(N, target.box, seed))) - exact) for seed in range(10)])
    print(f"{N:>7} {kor:>10.2e} {rnd:>22.2e}")

for name, ns in (("exp2", (4, 8, 12)), ("multimodal4", (8, 12, 16))):
    print()
    print(f"{name}, axis 1")
    print(f"{'n':>3} {'m':>5} {'sup error':>10} {'hellinger':>10}")
    for _, _, n, m, _, se, h in convergence_series(preset(name), ns=ns, ms=(64, 256, 1024), axes=[0]):
        print(f"{n:>3} {m:>5} {se:>10.2e} {h:>10.3f}")
