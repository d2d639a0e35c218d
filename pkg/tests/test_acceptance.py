"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary lists every
criterion with its measured values.
"""

import math
import time

import numpy as np
import pytest

from oracles import (
    equal_count_lattice_case,
    exponential_hellinger,
    grid_structured_case,
    quad_1d,
    record,
    smooth_density,
)
from qmcmarginals import bench
from qmcmarginals.cbc import generator_for
from qmcmarginals.cli import main
from qmcmarginals.fanova import exp_gamma_target, variance_component_gamma_exp, variance_report
from qmcmarginals.marginal import (
    chebyshev_bound,
    equidistant_bound,
    fit_least_squares,
    fit_partitioned,
    fit_weighted_least_squares,
    project,
)
from qmcmarginals.metrics import TabulatedDensity, hellinger
from qmcmarginals.pointsets import (
    Box,
    GeneratingVector,
    PointSet,
    chebyshev_abscissae,
    equispaced_abscissae,
    grid_star_discrepancy,
    make_chebyshev_grid,
    make_korobov,
    make_random,
    make_regular_grid,
    star_discrepancy,
)
from qmcmarginals.quadrature import evaluate, integrate, partition_means, pointwise_means
from qmcmarginals.targets import preset, product_exponential


def test_criterion_01_wls_equals_ols():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for i in range(50):
        s, n, m = int(rng.choice([2, 3])), int(rng.integers(3, 11)), int(rng.integers(4, 65))
        es, nodes = grid_structured_case(rng, s, n, m, nodes="midpoint" if i % 2 else "chebyshev")
        p = project(es, 0)
        w = 10.0 ** rng.uniform(-3, 3, n)
        mesh = np.linspace(*p.interval, 101)
        ols = fit_least_squares(p).predict(mesh)
        wls = fit_weighted_least_squares(p, nodes, w).predict(mesh)
        worst = max(worst, np.max(np.abs(wls - ols)) / np.max(np.abs(es.values)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 10
    assert record(1, ok, f"max |WLS-OLS|/max|values| = {worst:.2e} (<= 1e-8), {elapsed:.1f} s (< 10 s)")


def test_criterion_02_interpolation_identities():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst_grid = worst_part = 0.0
    for i in range(50):
        s, n = int(rng.choice([2, 3])), int(rng.integers(3, 11))
        box = Box.cube(-1.0, 2.0, s)
        ps = make_regular_grid(n, box) if i % 2 == 0 else make_chebyshev_grid(n, box)
        es = evaluate(smooth_density, ps)
        k = int(rng.integers(0, s))
        nodes, means, _ = pointwise_means(es, k)
        fit = fit_least_squares(project(es, k))
        worst_grid = max(worst_grid, np.max(np.abs(fit.density(nodes) - means) / np.abs(means)))
    for _ in range(50):
        s, n, m = int(rng.choice([2, 3])), int(rng.integers(3, 11)), int(rng.integers(4, 65))
        es = equal_count_lattice_case(rng, s, n, m)
        pm = partition_means(es, 0, n)
        fit = fit_partitioned(es, 0, n, abscissae="representative")
        worst_part = max(worst_part, np.max(np.abs(fit.density(pm.slab_centers) - pm.means) / np.abs(pm.means)))
    elapsed = time.perf_counter() - start
    ok = worst_grid <= 1e-8 and worst_part <= 1e-8 and elapsed < 10
    assert record(2, ok, f"grid rel {worst_grid:.2e}, partition rel {worst_part:.2e} (<= 1e-8), {elapsed:.1f} s (< 10 s)")


def test_criterion_03_bound_compliance():
    start = time.perf_counter()
    b = 4.0
    mesh = np.linspace(0.0, b, 1001)
    worst_ratio, violations, cases = 0.0, 0, 0
    for lam in (0.5, 1.0, 2.0):
        target = product_exponential([lam, 1.0], box=Box([0.0, 0.0], [b, b]))
        for kind in ("chebyshev", "equidistant"):
            for n in range(4, 13):
                nodes = chebyshev_abscissae(n, 0.0, b) if kind == "chebyshev" else equispaced_abscissae(n, 0.0, b)
                for m in (64, 256, 1024):
                    inner = (np.arange(m) + 0.5) / m * b
                    pts = np.column_stack([np.repeat(nodes, m), np.tile(inner, n)])
                    es = evaluate(lambda x: lam * np.exp(-lam * x[:, 0]) * np.exp(-x[:, 1]),
                                  PointSet(pts, target.box, "nodes"))
                    fit = fit_least_squares(project(es, 0))
                    inner_exact = 1.0 - math.exp(-b)
                    inner_rule = b * float(np.mean(np.exp(-inner)))
                    measured = np.max(np.abs(fit.density(mesh) - inner_exact * lam * np.exp(-lam * mesh)))
                    rule = chebyshev_bound if kind == "chebyshev" else equidistant_bound
                    # the fit interpolates inner_rule * f; the bound covers inner_exact * f
                    bound = max(inner_rule, 1.0) * rule(target.smoothness_c(0, n), n, 0.0, b).bound
                    slack = abs(inner_rule - inner_exact) * lam
                    cases += 1
                    # relative margin for rounding where the error equals the slack exactly
                    violations += measured > (bound + slack) * (1 + 1e-12)
                    worst_ratio = max(worst_ratio, measured / (bound + slack))
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 30
    assert record(3, ok, f"{violations}/{cases} violations, worst measured/(bound+slack) = {worst_ratio:.3f}, {elapsed:.1f} s (< 30 s)")


def test_criterion_04_discrepancy_values():
    closed = grid_star_discrepancy(5, 4)
    hand = [
        (np.array([[0.5]]), 0.5),
        (np.array([[0.25], [0.75]]), 0.25),
        (np.array([[0.0], [0.25], [0.5], [0.75]]), 0.25),
        (np.array([[0.5, 0.5]]), 0.75),
        (np.array([[0.25, 0.25], [0.75, 0.75]]), 7 / 16),
        (np.array([[0.0, 0.0], [0.5, 0.5]]), 0.75),
    ]
    errs = [abs(star_discrepancy(u).value - v) for u, v in hand]
    ok = closed == 0.5904 and max(errs) <= 1e-15 and all(star_discrepancy(u).exact for u, _ in hand)
    assert record(4, ok, f"gridStarDiscrepancy(5,4) = {closed!r}, max hand-value error {max(errs):.1e}")


def test_criterion_05_projection_regularity():
    triples = [(8, 5, 2), (16, 3, 4), (31, 7, 3), (64, 11, 5), (97, 13, 6), (128, 45, 4), (210, 17, 3),
               (256, 37, 8), (343, 19, 4), (500, 21, 3), (512, 77, 6), (625, 12, 4), (729, 101, 5),
               (1000, 203, 4), (1021, 76, 10), (1024, 125, 10), (2048, 405, 7), (3001, 281, 5),
               (4096, 1163, 4), (8192, 1487, 6)]
    bad = []
    for N, g, s in triples:
        ps = make_korobov(N, GeneratingVector.korobov(g, N, s), Box.unit(s))
        if ps.distinct_counts() != [N] * s:
            bad.append((N, g, s))
    assert record(5, not bad, f"{len(triples) - len(bad)}/{len(triples)} triples fully projection regular")


def _slope(Ns, errs):
    return float(np.polyfit(np.log(Ns), np.log(errs), 1)[0])


def test_criterion_06_convergence_rates():
    start = time.perf_counter()
    target = preset("exp4")
    exact = float(np.prod([target.box_mass(k) for k in range(4)]))
    Ns = [2**m for m in range(8, 17)]
    kor = [abs(integrate(evaluate(target, make_korobov(N, generator_for(N, 4), target.box))) - exact) for N in Ns]
    rand = np.median(
        [[abs(integrate(evaluate(target, make_random(N, target.box, seed))) - exact) for N in Ns] for seed in range(10)],
        axis=0,
    )
    sk, sr = _slope(Ns, kor), _slope(Ns, rand)
    elapsed = time.perf_counter() - start
    ok = sk <= -0.8 and abs(sr + 0.5) <= 0.15 and elapsed < 120
    assert record(6, ok, f"Korobov slope {sk:.3f} (<= -0.8), random slope {sr:.3f} (-0.5 +/- 0.15), {elapsed:.1f} s")


def test_criterion_07_shape_capture():
    start = time.perf_counter()
    lines, ok = [], True
    for name, korobov_N, axes in (("multimodal4", 1024, (0, 1, 2, 3)), ("beta4", 512, (0, 2))):
        t = preset(name)
        kor = bench.run(t, bench.RunSpec("korobov", korobov_N))
        for n in (5, 8):
            grid = bench.run(t, bench.RunSpec("grid", n))
            for k in axes:
                hk, hg = kor.axes[k].hellinger, grid.axes[k].hellinger
                if not hk < hg:
                    ok = False
                    lines.append(f"{name} axis {k + 1}: korobov-{korobov_N} {hk:.3f} vs grid-{n} {hg:.3f}")
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 60
    detail = "all comparisons won" if not lines else "lost: " + "; ".join(lines)
    assert record(7, ok, f"{detail}, {elapsed:.1f} s (< 60 s)")


@pytest.fixture(scope="module")
def gamma10_runs():
    t = preset("gamma10")
    start = time.perf_counter()
    unweighted = bench.run(t, bench.RunSpec("korobov", 2**17))
    t_unweighted = time.perf_counter() - start
    start = time.perf_counter()
    weighted = bench.run(t, bench.RunSpec("korobov-weighted", 2**17))
    t_weighted = time.perf_counter() - start
    return t, unweighted, weighted, t_unweighted, t_weighted


def test_criterion_08_high_dimensional_accuracy(gamma10_runs):
    _, unweighted, _, t10, _ = gamma10_runs
    h10 = [a.hellinger for a in unweighted.axes]
    start = time.perf_counter()
    g12 = bench.run(preset("gamma12"), bench.RunSpec("korobov", 2**19))
    t12 = time.perf_counter() - start
    h12 = [a.hellinger for a in g12.axes]
    ok = max(h10) <= 0.15 and max(h12) <= 0.15 and t10 + t12 < 300
    detail = (f"gamma10 2^17 max H {max(h10):.3f}, gamma12 2^19 max H {max(h12):.3f} (<= 0.15), "
              f"{t10 + t12:.0f} s (< 300 s)")
    assert record(8, ok, detail)


def test_criterion_09_weighting_helps(gamma10_runs):
    t, unweighted, weighted, _, tw = gamma10_runs
    top = np.argsort(variance_report(t.factorization).importance)[::-1][:3]
    hu = float(np.mean([unweighted.axes[k].hellinger for k in top]))
    hw = float(np.mean([weighted.axes[k].hellinger for k in top]))
    ok = hw < hu and tw < 300
    assert record(9, ok, f"top-3 axes {sorted(int(k) + 1 for k in top)}: weighted {hw:.3f} vs unweighted {hu:.3f}, {tw:.0f} s")


def test_criterion_10_fanova_closed_form():
    from scipy import stats

    start = time.perf_counter()
    worst, cases = 0.0, 0
    for r in (0.5, 1.0, 2.0, 5.0):
        for v in (0.5, 1.0, 2.0, 5.0):
            for tk in (0.1, 1.0, 10.0):
                rr, vv, tt, c = [r, 2.0], [v, 1.0], [tk, 1.0], [r / v, 2.0]
                closed = variance_component_gamma_exp(rr, vv, tt, c, 0)
                g = stats.gamma(a=r, scale=1 / v)
                a = exp_gamma_target(rr, vv, tt).anchor_constants(c)

                def integrand(x):
                    return (x * math.exp(-x * tk) * a[1] - a[0] * a[1]) ** 2 * g.pdf(x)

                split = max(r - 1, 0) / v + 1
                ref = quad_1d(integrand, 0.0, split) + quad_1d(integrand, split, np.inf)
                worst = max(worst, abs(closed - ref) / abs(ref))
                cases += 1
    ft = exp_gamma_target([2.0, 3.0, 4.0], [1.0, 2.0, 0.5], [0.5, 1.0, 2.0])
    rep = variance_report(ft)
    a0 = float(np.prod(ft.anchor_constants(rep.anchor)))
    exact = rep.sigma0sq == a0 * a0
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and cases >= 36 and exact and elapsed < 5
    assert record(10, ok, f"{cases} cases, worst rel {worst:.1e} (<= 1e-6), sigma0^2 == a0^2: {exact}, {elapsed:.2f} s")


def test_criterion_11_hellinger_exponentials():
    p = TabulatedDensity.from_function(lambda x: np.exp(-x), 0.0, 40.0)
    q = TabulatedDensity.from_function(lambda x: 2 * np.exp(-2 * x), 0.0, 40.0)
    h = hellinger(p, q)
    ref = exponential_hellinger(1.0, 2.0)
    ok = abs(h - 0.2391) <= 1e-3 and abs(h - ref) <= 1e-3
    assert record(11, ok, f"H = {h:.5f}, analytic {ref:.5f}, target 0.2391 +/- 1e-3")


def test_criterion_12_determinism(tmp_path):
    outputs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        assert main(["--seed", "11", "--out-dir", str(out), "bench", "--target", "exp2", "--series"]) == 0
        outputs.append(((out / "bench.csv").read_bytes(), (out / "convergence.csv").read_bytes()))
    ok = outputs[0] == outputs[1]
    assert record(12, ok, f"bench.csv and convergence.csv byte-identical across runs: {ok}")
