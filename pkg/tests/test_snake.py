import numpy as np
import pytest

from tsystems import (
    NodeSet,
    SparsePoly,
    best_approx,
    eval_basis,
    interval,
    monomial_family,
    optimize_ratio,
    poly_from_zeros,
    snake,
)
from tsystems.errors import NoSeparator
from tsystems.moments import MomentFunctional

from conftest import lp_best_approx_oracle


def test_best_approx_parabola():
    fam = monomial_family([0, 1], interval(-1, 1))
    tfam = monomial_family([0, 1, 2], interval(-1, 1))
    res = best_approx(fam, SparsePoly((0.0, 0.0, 1.0), tfam))
    assert abs(res.deviation - 0.5) < 1e-10
    assert np.allclose(res.poly.a, [0.5, 0.0], atol=1e-10)
    assert np.allclose(res.alternation_points, [-1, 0, 1], atol=1e-8)


def test_best_approx_member_is_exact():
    fam = monomial_family([0, 1], interval(-1, 1))
    res = best_approx(fam, SparsePoly((0.3, -0.7), fam))
    assert res.deviation < 1e-13


def test_best_approx_cubic_known_value():
    # best affine approximation of x^3 on [-1,1] is (3/4) x with deviation 1/4
    fam = monomial_family([0, 1], interval(-1, 1))
    tfam = monomial_family([0, 1, 2, 3], interval(-1, 1))
    res = best_approx(fam, SparsePoly((0, 0, 0, 1.0), tfam))
    assert abs(res.deviation - 0.25) < 1e-10
    assert np.allclose(res.poly.a, [0.0, 0.75], atol=1e-9)


def test_best_approx_lp_oracle_agreement(rng):
    for _ in range(6):
        n = int(rng.integers(1, 5))
        fam = monomial_family(list(range(n + 1)), interval(-1, 1))
        coeffs = rng.standard_normal(n + 3)
        tfam = monomial_family(list(range(n + 3)), interval(-1, 1))
        f = SparsePoly(tuple(coeffs), tfam)
        res = best_approx(fam, f)
        xs = np.linspace(-1, 1, 1501)
        dev_lp, _ = lp_best_approx_oracle(fam, f(xs), xs)
        assert abs(res.deviation - dev_lp) < 1e-6 * max(1.0, dev_lp) + 1e-9


def test_best_approx_monotone_lower_bounds():
    # the Remez lower bound (the solved |d|) is nondecreasing across iterations
    fam = monomial_family([0, 1, 2], interval(-1, 1))
    f = lambda x, order=0: np.abs(np.asarray(x)) if order == 0 else np.sign(np.asarray(x))
    res = best_approx(fam, f)
    lb = np.array(res.lower_bounds)
    assert len(lb) >= 2
    assert np.all(np.diff(lb) >= -1e-12 * max(1.0, res.deviation))
    assert lb[-1] <= res.deviation + 1e-12


def test_best_approx_two_references_agree(rng):
    fam = monomial_family([0, 1, 2], interval(0, 1))
    tfam = monomial_family([0, 1, 2, 3, 4], interval(0, 1))
    f = SparsePoly(tuple(rng.standard_normal(5)), tfam)
    r1 = best_approx(fam, f, init="chebyshev")
    r2 = best_approx(fam, f, init="equispaced")
    assert abs(r1.deviation - r2.deviation) < 1e-10 * max(1, r1.deviation)
    assert np.allclose(r1.poly.a, r2.poly.a, atol=1e-8)


def test_snake_affine_band():
    fam = monomial_family([0, 1], interval(-1, 1))
    sol = snake(fam, -1.0, 1.0, which="f_star")
    assert np.allclose(sol.poly.a, [0.0, 1.0], atol=1e-10)
    assert [s for _, s in sol.touch_points] == ["lower", "upper"]
    sol2 = snake(fam, -1.0, 1.0, which="f_upper_star")
    assert np.allclose(sol2.poly.a, [0.0, -1.0], atol=1e-10)


def test_snake_band_around_member():
    # band f +- eps around a family member: the snake is f plus the scaled
    # Chebyshev-pattern snake of [-eps, eps]
    fam = monomial_family([0, 1, 2], interval(0, 1))
    ftarget = SparsePoly((0.5, -1.0, 2.0), fam)
    eps = 0.1

    def g1(x, order=0):
        return ftarget(x, order) - (eps if order == 0 else 0.0)

    def g2(x, order=0):
        return ftarget(x, order) + (eps if order == 0 else 0.0)

    sol = snake(fam, g1, g2, which="f_star")
    # shifted Chebyshev pattern on [0,1]: T2(2x-1) = 8x^2 - 8x + 1
    expect = ftarget.a + eps * np.array([1.0, -8.0, 8.0])
    assert np.allclose(sol.poly.a, expect, atol=1e-8)
    assert sol.max_violation <= 1e-10


def test_snake_constant_family():
    fam = monomial_family([0], interval(0, 1))

    def g2(x, order=0):
        return 3 + np.asarray(x, dtype=float) if order == 0 else np.ones_like(np.asarray(x))

    sol = snake(fam, -2.0, g2, which="f_star")
    assert abs(sol.poly.a[0] - 3.0) < 1e-9  # min of g2
    sol2 = snake(fam, -2.0, g2, which="f_upper_star")
    assert abs(sol2.poly.a[0] + 2.0) < 1e-9  # max of g1


def test_snake_no_separator():
    fam = monomial_family([0], interval(0, 1))
    with pytest.raises(NoSeparator):
        # bounds cross: no constant fits strictly between
        snake(fam, lambda x: np.asarray(x, float), lambda x: 1 - np.asarray(x, float))


def test_snake_lp_oracle_for_affine_band(rng):
    # LP oracle: among band polynomials, the slope coefficient is maximized
    # uniquely by the snake f_* for the band [-1, 1] over {1, x}
    from scipy.optimize import linprog

    fam = monomial_family([0, 1], interval(-1, 1))
    xs = np.linspace(-1, 1, 1001)
    basis = fam.eval_grid(xs)
    c = np.zeros(2)
    c[1] = -1.0
    A = np.vstack([basis, -basis])
    b = np.concatenate([np.ones(len(xs)), np.ones(len(xs))])
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * 2, method="highs")
    sol = snake(fam, -1.0, 1.0, which="f_star")
    assert np.allclose(res.x, sol.poly.a, atol=1e-9)


def test_snake_approx_consistency(rng):
    # deviation from the snake construction with d = 1/|c| matches best_approx
    for n in (1, 2, 3):
        fam = monomial_family(list(range(n + 1)), interval(-1, 1))
        ext = monomial_family(list(range(n + 2)), interval(-1, 1))
        f = SparsePoly(tuple([0.0] * (n + 1) + [1.0]), ext)
        res = best_approx(fam, f)
        sol = snake(ext, -1.0, 1.0, which="f_upper_star")
        c = sol.poly.a[-1]
        assert abs(1 / abs(c) - res.deviation) < 1e-8 * max(1, res.deviation)


def test_optimize_ratio_identity():
    fam = monomial_family([0, 1, 2], interval(0, 1))
    S = MomentFunctional((1.0, 0.5, 1 / 3), fam)
    val, poly, top5 = optimize_ratio(fam, S, S)
    assert abs(val - 1.0) < 1e-12


def test_optimize_ratio_evaluation_vs_integral(rng):
    fam = monomial_family([0, 1, 2], interval(0, 1))
    S = MomentFunctional((1.0, 0.5, 1 / 3), fam)
    x0 = 0.3
    L = MomentFunctional(tuple(eval_basis(fam, x0)), fam)
    val, poly, top5 = optimize_ratio(fam, L, S, sense="max")
    # brute-force over the extremal parameter grid
    best = -np.inf
    for t in np.linspace(0.005, 0.995, 200):
        p = poly_from_zeros(fam, NodeSet.of((t, 2)), check_certificate=False)
        best = max(best, L(p) / S(p))
    p_ab = poly_from_zeros(fam, NodeSet.of((0.0, 1), (1.0, 1)), check_certificate=False)
    best = max(best, L(p_ab) / S(p_ab))
    assert val >= best - 1e-6
    assert abs(val - best) < 1e-3 * max(1, abs(best))


def test_optimize_ratio_constant_family():
    fam = monomial_family([0], interval(0, 1))
    L = MomentFunctional((2.0,), fam)
    S = MomentFunctional((4.0,), fam)
    val, poly, _ = optimize_ratio(fam, L, S)
    assert abs(val - 0.5) < 1e-12
