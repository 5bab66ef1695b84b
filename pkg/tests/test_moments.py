import math

import numpy as np
import pytest

from tsystems import (
    extremal_test_polys,
    halfline,
    hankel_check,
    interval,
    monomial_family,
    power_family,
    recover_atoms,
    sparse_feasibility,
)
from tsystems.errors import NotFeasible, TooShort
from tsystems.moments import MomentFunctional, caratheodory_prune


def bisection_eigen_oracle(H, tol=1e-12):
    """Smallest eigenvalue of a symmetric matrix by characteristic-polynomial
    bisection (Sturm-free bracket on det(H - t I))."""
    n = H.shape[0]
    lo = -np.sum(np.abs(H))
    hi = np.sum(np.abs(H))

    def charpoly_sign_changes(t):
        # count eigenvalues below t via LDL-like sign count of determinants
        count = 0
        for k in range(1, n + 1):
            d = np.linalg.det(H[:k, :k] - t * np.eye(k))
            if d < 0 if k % 2 == 1 else d > 0:
                pass
        # simpler: eigenvalue count below t = negatives of shifted matrix
        return int(np.sum(np.linalg.eigvalsh(H - t * np.eye(n)) < 0))

    # plain bisection for the minimum eigenvalue via det sign (leading minors)
    def below(t):
        return np.all(np.linalg.eigvalsh(H) >= t)

    for _ in range(200):
        mid = (lo + hi) / 2
        if below(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, abs(hi)):
            break
    return lo


def test_hankel_point_mass_at_one():
    r = hankel_check([1.0] * 5, "hausdorff")
    assert r["all_psd"]
    assert abs(r["matrices"]["H((1-X)s)"]["min_eigenvalue"]) < 1e-12


def test_hankel_stieltjes_indeterminate_moments():
    s = [math.exp((k + 1) ** 2 / 4) for k in range(5)]
    r = hankel_check(s, "stieltjes")
    assert r["all_psd"]


def test_hankel_not_a_moment_sequence():
    r = hankel_check([1.0, 0.0, -1.0], "hamburger")
    assert not r["all_psd"]
    assert r["matrices"]["H(s)"]["min_eigenvalue"] < -0.5


def test_hankel_svenco_variant():
    # moments of (delta_0 + delta_1)/2: s = (1, 1/2, 1/2, ...)
    s = [1.0, 0.5, 0.5, 0.5, 0.5]
    r = hankel_check(s, "svenco")
    assert r["all_psd"]


def test_hankel_too_short():
    with pytest.raises(TooShort):
        hankel_check([1.0], "stieltjes")


def test_hankel_matches_eigen_oracle(rng):
    for _ in range(10):
        n = int(rng.integers(2, 7))
        A = rng.standard_normal((n, n))
        s = [float(np.trace(np.linalg.matrix_power(A @ A.T, k))) for k in range(2 * n - 1)]
        r = hankel_check(s, "hamburger")
        H = np.array([[s[i + j] for j in range(n)] for i in range(n)])
        oracle = bisection_eigen_oracle(H)
        assert abs(r["matrices"]["H(s)"]["min_eigenvalue"] - oracle) < 1e-8 * max(
            1.0, abs(oracle)
        )


def test_extremal_patterns_are_nonnegative():
    fam = monomial_family([0, 1, 2, 3, 4], interval(0.2, 1.0))
    xs = np.linspace(0.2, 1.0, 500)
    p1 = extremal_test_polys(fam, "interior_doubles", (0.4, 0.8))
    p2 = extremal_test_polys(fam, "a_doubles_b", (0.6,))
    assert p1(xs).min() >= -1e-12
    assert p2(xs).min() >= -1e-12
    fam5 = monomial_family([0, 1, 2, 3, 4, 5], interval(0.2, 1.0))
    p3 = extremal_test_polys(fam5, "a_doubles", (0.4, 0.8))
    p4 = extremal_test_polys(fam5, "doubles_b", (0.4, 0.8))
    assert p3(xs).min() >= -1e-12 and p4(xs).min() >= -1e-12


def test_extremal_halfline_patterns_drop_top_member():
    fam = power_family([0, 1, 2, 3, 4], halfline(0.0))
    xs = np.linspace(0, 20, 800)
    p = extremal_test_polys(fam, "hl_upper_even", (2.0,))
    assert p.a[-1] == 0.0
    assert abs(p(0.0)) < 1e-12
    assert p(xs).min() >= -1e-10
    fam5 = power_family([0, 1, 2, 3, 4, 5], halfline(0.0))
    p2 = extremal_test_polys(fam5, "hl_lower_odd", (1.0, 3.0))
    assert abs(p2(0.0)) < 1e-12 and p2(xs).min() >= -1e-10
    p3 = extremal_test_polys(fam5, "hl_upper_odd", (1.0, 3.0))
    assert p3.a[-1] == 0.0 and p3(xs).min() >= -1e-10


def test_extremal_m0_patterns_are_basis_multiples():
    fam = monomial_family([0], interval(0, 1))
    p = extremal_test_polys(fam, "interior_doubles", ())
    assert p.a[0] > 0


def test_feasibility_forward_computed_measure():
    fam = power_family([0, 0.5, 1, 2], interval(0.1, 1.0))
    L = MomentFunctional.from_measure(fam, [(0.2, 0.3), (0.8, 0.7)])
    v = sparse_feasibility(L)
    assert v.status == "feasible"
    got = v.witness_measure.moments(fam)
    assert np.max(np.abs(got - L.s)) <= 1e-8 * np.max(np.abs(L.s))


def test_feasibility_negative_constant_direction():
    fam = monomial_family([0, 1, 2, 3], interval(0, 1))
    v = sparse_feasibility(MomentFunctional((-1.0, 0.0, 0.0, 0.0), fam))
    assert v.status == "infeasible"
    assert np.allclose(v.certificate_poly.a, [1, 0, 0, 0])


def test_feasibility_single_atom_boundary():
    fam = monomial_family([0, 1, 2, 3], interval(0, 1))
    L = MomentFunctional.from_measure(fam, [(0.5, 1.0)])
    v = sparse_feasibility(L)
    assert v.status == "feasible"
    assert len(v.witness_measure.atoms) == 1
    x, w = v.witness_measure.atoms[0]
    assert abs(x - 0.5) < 1e-7 and abs(w - 1.0) < 1e-7


def test_recover_atoms_two_point_measure():
    fam = monomial_family([0, 1, 2, 3], interval(0, 1))
    L = MomentFunctional.from_measure(fam, [(0.25, 0.5), (0.75, 0.5)])
    m = recover_atoms(L)
    assert len(m.atoms) == 2
    (x1, w1), (x2, w2) = sorted(m.atoms)
    assert abs(x1 - 0.25) < 1e-7 and abs(x2 - 0.75) < 1e-7
    assert abs(w1 - 0.5) < 1e-7 and abs(w2 - 0.5) < 1e-7


def test_recover_atoms_single_atom():
    fam = monomial_family([0, 1, 2, 3], interval(0, 1))
    m = recover_atoms(MomentFunctional.from_measure(fam, [(0.4, 1.3)]))
    assert len(m.atoms) == 1
    assert abs(m.atoms[0][0] - 0.4) < 1e-8 and abs(m.atoms[0][1] - 1.3) < 1e-8


def test_recover_atoms_zero_functional():
    fam = monomial_family([0, 1, 2], interval(0, 1))
    assert recover_atoms(MomentFunctional((0.0, 0.0, 0.0), fam)).atoms == ()


def test_recover_atoms_infeasible_raises():
    fam = monomial_family([0, 1, 2], interval(0, 1))
    with pytest.raises(NotFeasible):
        recover_atoms(MomentFunctional((-1.0, 0.5, 0.4), fam))


def test_caratheodory_prune_preserves_moments(rng):
    n1 = 4
    V = rng.standard_normal((n1, 12))
    w = np.abs(rng.standard_normal(12))
    target = V @ w
    w2 = caratheodory_prune(V, w, n1)
    assert np.sum(w2 > 0) <= n1
    assert np.allclose(V @ w2, target, atol=1e-10 * np.max(np.abs(target)))


def test_duality_never_both(rng):
    # feasible instances give witnesses, perturbed-out instances certificates;
    # no instance is both
    fam = power_family([0, 1, 2.5, 4], interval(0.1, 1.0))
    for _ in range(6):
        k = int(rng.integers(1, 3))
        pos = np.sort(rng.uniform(0.15, 0.95, k))
        wts = rng.uniform(0.2, 1.0, k)
        L = MomentFunctional.from_measure(fam, list(zip(pos, wts)))
        v = sparse_feasibility(L)
        assert v.status == "feasible"
        assert v.certificate_poly is None
    v = sparse_feasibility(MomentFunctional((-0.5, 0.1, 0.1, 0.1), fam))
    assert v.status == "infeasible" and v.witness_measure is None
    if v.certificate_poly is not None:
        xs = np.linspace(0.1, 1.0, 1000)
        pv = v.certificate_poly(xs)
        assert pv.min() >= -1e-10 * np.max(np.abs(pv))
        assert float(v.certificate_poly.a @ np.array([-0.5, 0.1, 0.1, 0.1])) < 0


def test_determinacy_hint_is_informational():
    fam = power_family([0, 1, 2, 3], halfline(0.0))
    L = MomentFunctional.from_measure(fam, [(0.5, 1.0)])
    v = sparse_feasibility(L)
    assert "muntz_sum" in v.determinacy_hint
    assert v.determinacy_hint["muntz_sum"] == 1.0 + 0.5 + 1 / 3


def test_moment_functional_serialization():
    fam = monomial_family([0, 1], interval(0, 1))
    L = MomentFunctional((1.0, 0.5), fam)
    assert '"s"' in L.to_json()
