import math

import numpy as np
import pytest

from tsystems import (
    SparsePoly,
    decompose_halfline,
    decompose_nonneg_ab,
    decompose_pos_ab,
    decompose_realline,
    halfline,
    interval,
    lukacs_decompose,
    monomial_family,
    power_family,
    real_line,
)
from tsystems.errors import (
    NegativeSomewhere,
    NotPositive,
    OddDegree,
    TooManyZeros,
)

from conftest import random_nonneg_dense, random_strictly_positive


def check_decomposition(dec, f, grid=None):
    """Common decomposition invariants on a 5000-point grid."""
    fam = f.family
    lo, hi = fam.domain.window() if grid is None else grid
    xs = np.linspace(lo, hi, 5000)
    fv = f(xs)
    scale = float(np.max(np.abs(fv)))
    # additivity by construction (f^* := f - f_*), exact to round-off in the
    # parts' own coefficient magnitude
    part_scale = max(float(np.max(np.abs(dec.f_lower.a))), 1.0)
    assert np.max(np.abs(dec.f_lower.a + dec.f_upper.a - f.a)) <= 4e-16 * part_scale
    assert dec.residual_sup <= 1e-11 * scale * part_scale / max(np.max(np.abs(f.a)), 1.0)
    # nonnegativity of both parts
    assert dec.f_lower(xs).min() >= -1e-9 * scale
    assert dec.f_upper(xs).min() >= -1e-9 * scale


def test_pos_ab_power_alpha_family():
    # the classical split of 1 over {1, x^alpha} on [0, 1]
    for alpha in (0.5, 1.0, 2.0):
        fam = power_family([0, alpha], interval(0, 1))
        f = SparsePoly((1.0, 0.0), fam)
        dec = decompose_pos_ab(f)
        assert np.allclose(dec.f_lower.a, [0.0, 1.0], atol=1e-12)
        assert np.allclose(dec.f_upper.a, [1.0, -1.0], atol=1e-12)
        assert dec.converged


def test_pos_ab_parabola_hand_computed():
    # f = x^2 + 1 on [-1, 1]: f_* = 2x^2, f^* = 1 - x^2
    fam = monomial_family([0, 1, 2], interval(-1, 1))
    f = SparsePoly((1.0, 0.0, 1.0), fam)
    dec = decompose_pos_ab(f)
    assert np.allclose(dec.f_lower.a, [0, 0, 2], atol=1e-9)
    assert np.allclose(dec.f_upper.a, [1, 0, -1], atol=1e-9)
    check_decomposition(dec, f)
    # endpoint conditions
    assert abs(dec.f_upper(1.0)) < 1e-9
    assert abs(dec.f_lower(1.0) - f(1.0)) < 1e-9


def test_pos_ab_constant():
    fam = monomial_family([0], interval(0, 1))
    dec = decompose_pos_ab(SparsePoly((3.0,), fam))
    assert dec.f_lower.a[0] == 3.0 and dec.f_upper.a[0] == 0.0


def test_pos_ab_rejects_nonpositive():
    fam = monomial_family([0, 1], interval(0, 1))
    with pytest.raises(NotPositive):
        decompose_pos_ab(SparsePoly((-0.1, 1.0), fam))


def test_pos_ab_zero_sets_have_full_index_and_interlace(rng):
    for trial in range(6):
        n = int(rng.integers(2, 7))
        fam = monomial_family(list(range(n + 1)), interval(0.2, 1.7))
        f = random_strictly_positive(fam, rng)
        dec = decompose_pos_ab(f)
        check_decomposition(dec, f)
        from tsystems import index_of

        assert index_of(dec.zeros_lower) == n
        assert index_of(dec.zeros_upper) == n
        # strict interlacing of the zero abscissae
        merged = sorted(
            [(z[0], "l") for z in dec.zeros_lower.zeros]
            + [(z[0], "u") for z in dec.zeros_upper.zeros]
        )
        sides = [s for _, s in merged]
        assert all(sides[i] != sides[i + 1] for i in range(len(sides) - 1))
        gaps = np.diff([p for p, _ in merged])
        assert np.all(gaps > 1e-8 * 1.5)


def test_pos_ab_uniqueness_two_inits(rng):
    for trial in range(4):
        n = int(rng.integers(2, 7))
        fam = monomial_family(list(range(n + 1)), interval(0.0, 1.0))
        f = random_strictly_positive(fam, rng)
        d1 = decompose_pos_ab(f, init="chebyshev")
        d2 = decompose_pos_ab(f, init="equispaced")
        z1 = [z[0] for z in d1.zeros_lower.zeros]
        z2 = [z[0] for z in d2.zeros_lower.zeros]
        assert np.allclose(z1, z2, atol=1e-6)


def test_nonneg_ab_shared_zero_worked_example():
    # f = x^2 (x^2 + 1) over monomials 0..4 on [0, 1]:
    # f_* = c x^2 (x - x1)^2 with x1 = sqrt(2) - 1, f^* = (c - 1) x^3 (1 - x)
    fam = monomial_family([0, 1, 2, 3, 4], interval(0, 1))
    f = SparsePoly((0.0, 0.0, 1.0, 0.0, 1.0), fam)
    dec = decompose_nonneg_ab(f)
    check_decomposition(dec, f)
    x1 = math.sqrt(2) - 1
    zl = {round(z[0], 7): z[1] for z in dec.zeros_lower.zeros}
    assert any(abs(k - x1) < 1e-7 for k in zl)
    assert any(abs(k - 0.0) < 1e-9 and m == 2 for k, m in zl.items())
    c = 3 + 2 * math.sqrt(2)  # 1/x1^2
    expected_upper = (c - 1) * np.array([0.0, 0.0, 0.0, 1.0, -1.0])
    assert np.allclose(dec.f_upper.a, expected_upper, atol=1e-7)


def test_nonneg_ab_strictly_positive_delegates():
    fam = monomial_family([0, 1, 2], interval(-1, 1))
    f = SparsePoly((1.0, 0.0, 1.0), fam)
    dec = decompose_nonneg_ab(f)
    assert np.allclose(dec.f_lower.a, [0, 0, 2], atol=1e-9)


def test_nonneg_ab_too_many_zeros():
    fam = monomial_family([0, 1, 2], interval(-1, 1))
    f = SparsePoly((0.25, -1.0, 1.0), fam)  # (x-0.5)^2: r = 2 = n
    with pytest.raises(TooManyZeros):
        decompose_nonneg_ab(f)


def test_nonneg_ab_r_equals_n_minus_1():
    # f = (x-0.5)^2 over cubics: r = 2, n = 3, single remaining index-1 zero
    fam = monomial_family([0, 1, 2, 3], interval(0, 1))
    f = SparsePoly((0.25, -1.0, 1.0, 0.0), fam)
    dec = decompose_nonneg_ab(f)
    check_decomposition(dec, f)
    # lower part holds the endpoint-a zero, upper part the endpoint-b zero
    assert any(abs(z[0] - 0.0) < 1e-9 for z in dec.zeros_lower.zeros)
    assert any(abs(z[0] - 1.0) < 1e-9 for z in dec.zeros_upper.zeros)


def test_halfline_quadratic_hand_computed():
    fam = monomial_family([0, 1, 2], halfline(0.0))
    f = SparsePoly((2.0, -2.0, 1.0), fam)
    dec = decompose_halfline(f)
    x1 = dec.zeros_lower.zeros[0][0]
    assert abs(x1 - math.sqrt(2)) < 1e-8
    assert np.allclose(dec.f_upper.a, [0.0, 2 * math.sqrt(2) - 2, 0.0], atol=1e-8)
    assert dec.f_lower.a[-1] == f.a[-1]  # top coefficient inherited exactly


def test_halfline_linear():
    fam = monomial_family([0, 1], halfline(0.0))
    dec = decompose_halfline(SparsePoly((1.0, 1.0), fam))
    assert np.allclose(dec.f_lower.a, [0.0, 1.0], atol=1e-12)
    assert np.allclose(dec.f_upper.a, [1.0, 0.0], atol=1e-12)


def test_halfline_constant():
    fam = monomial_family([0], halfline(0.0))
    dec = decompose_halfline(SparsePoly((1.0,), fam))
    assert dec.f_lower.a[0] == 1.0 and dec.f_upper.a[0] == 0.0


def test_halfline_factor_out_when_f0_zero():
    # f = x^2 + x^3 = x^2 (1 + x): factor out x^2, decompose 1 + x
    fam = monomial_family([0, 1, 2, 3], halfline(0.0))
    f = SparsePoly((0.0, 0.0, 1.0, 1.0), fam)
    dec = decompose_halfline(f, mode="nonneg")
    assert "factor_out" in dec.solver_path
    assert np.allclose(dec.f_lower.a, [0, 0, 0, 1], atol=1e-10)
    assert np.allclose(dec.f_upper.a, [0, 0, 1, 0], atol=1e-10)


def test_halfline_sparse_power_family(rng):
    fam = power_family([0, 0.5, 2, 3.5], halfline(0.0))
    f = random_strictly_positive(fam, rng, grid=2001)
    dec = decompose_halfline(f)
    xs = np.concatenate([np.linspace(0, 20, 3000), np.geomspace(20, 1e5, 200)])
    scale = np.abs(f(np.linspace(0, 10, 500))).max()
    assert dec.f_lower(xs).min() >= -1e-9 * scale
    assert dec.f_upper(xs).min() >= -1e-9 * scale
    assert abs(dec.f_lower.a[-1] - f.a[-1]) <= 1e-12 * abs(f.a[-1])


def test_realline_parabola():
    fam = monomial_family([0, 1, 2], real_line())
    dec = decompose_realline(SparsePoly((1.0, 0.0, 1.0), fam))
    assert abs(dec.zeros_lower.zeros[0][0]) < 1e-8  # x1 = 0
    assert abs(dec.f_upper.a[0] - 1.0) < 1e-8  # b = 1
    assert np.allclose(dec.f_lower.a, [0, 0, 1], atol=1e-8)


def test_realline_nonneg_with_shared_zero():
    # (x^2 + 1)(x - 1)^2: z = 1 (mult 2), then a = 1, x1 = 0, b = 1
    fam = monomial_family([0, 1, 2, 3, 4], real_line())
    co = np.convolve([1.0, -2.0, 1.0], [1.0, 0.0, 1.0])[::-1]
    f = SparsePoly(tuple(np.convolve(np.convolve([-1.0, 1.0], [-1.0, 1.0]), [1.0, 0.0, 1.0])), fam)
    dec = decompose_realline(f, mode="nonneg")
    zl = {round(z[0], 7): z[1] for z in dec.zeros_lower.zeros}
    assert zl.get(0.0) == 2 and zl.get(1.0) == 2
    fu = dec.f_upper.a
    # f^* = (x - 1)^2
    assert np.allclose(fu, [1.0, -2.0, 1.0, 0.0, 0.0], atol=1e-8)


def test_realline_constant():
    fam = monomial_family([0], real_line())
    dec = decompose_realline(SparsePoly((2.5,), fam))
    assert dec.f_lower.a[0] == 2.5 and dec.f_upper.a[0] == 0.0


def test_realline_odd_degree_rejected():
    fam = monomial_family([0, 1], real_line())
    with pytest.raises(OddDegree):
        decompose_realline(SparsePoly((1.0, 1.0), fam))


def test_lukacs_fixtures():
    ld = lukacs_decompose([1.0, 0.0, 1.0], real_line())
    assert abs(ld.alpha - 1.0) < 1e-12 and abs(ld.beta - 1.0) < 1e-12
    assert np.allclose(ld.xs, [0.0], atol=1e-12) and ld.ys == ()

    ld = lukacs_decompose([0.0, 1.0], halfline(0.0))  # p = x
    assert ld.zfactors == ((0.0, 1),)
    assert ld.reconstruction_error < 1e-12

    ld = lukacs_decompose([-1.0, 2.5, -1.0], interval(0.5, 2.0))  # (x-a)(b-x)
    assert {round(z, 12) for z, _ in ld.zfactors} == {0.5, 2.0}
    assert ld.reconstruction_error < 1e-12


def test_lukacs_ab_product_identity():
    # (x-a)(b-x) = [(x-a)^2(b-x) + (x-a)(b-x)^2]/(b-a): verify by expansion
    a, b = 0.5, 2.0
    lhs = np.convolve([-a, 1.0], [b, -1.0])
    t1 = np.convolve(np.convolve([-a, 1.0], [-a, 1.0]), [b, -1.0])
    t2 = np.convolve([-a, 1.0], np.convolve([b, -1.0], [b, -1.0]))
    rhs = (t1 + t2) / (b - a)
    assert np.allclose(np.pad(lhs, (0, 1)), rhs, atol=1e-14)


def test_lukacs_rejects_negative():
    with pytest.raises(NegativeSomewhere):
        lukacs_decompose([-1.0, 0.0, 1.0], interval(0, 0.5))  # x^2 - 1 < 0 there


def test_lukacs_random_reconstruction(rng):
    for trial in range(12):
        deg = int(rng.integers(2, 9))
        kind = trial % 3
        if kind == 0:
            dom = interval(-0.5, 1.5)
        elif kind == 1:
            dom = halfline(0.0)
        else:
            dom = real_line()
            deg += deg % 2
        pd = random_nonneg_dense(deg, dom, rng)
        if dom.kind != "closed_interval" and pd[-1] <= 0:
            continue
        ld = lukacs_decompose(pd, dom)
        assert ld.reconstruction_error <= 1e-9
        assert ld.alpha >= 0 and ld.beta >= 0


def test_decomposition_json():
    fam = monomial_family([0, 1, 2], interval(-1, 1))
    dec = decompose_pos_ab(SparsePoly((1.0, 0.0, 1.0), fam))
    d = dec.to_dict()
    assert d["converged"] is True and "f_lower" in d
