"""Snake-theorem interlacing, generalized Remez best approximation, and
optimization of linear-functional ratios over the nonnegative cone."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize

from .colloc import NodeSet, certify
from .errors import (
    CertificationRequired,
    InvariantViolation,
    NoSeparator,
    SNotStrictlyPositive,
)
from .family import FamilySpec
from .zeros import SparsePoly, poly_from_zeros

LOWER = "lower"
UPPER = "upper"


def _as_callable(g, family: FamilySpec):
    """Accept a callable, SparsePoly, constant, or (xs, ys) table."""
    if callable(g):
        return g
    if isinstance(g, SparsePoly):
        return g
    if np.isscalar(g):
        c = float(g)
        return lambda x, order=0: (c if order == 0 else 0.0) * np.ones_like(
            np.asarray(x, dtype=float)
        )
    xs, ys = np.asarray(g[0], dtype=float), np.asarray(g[1], dtype=float)

    def tab(x, order=0):
        if order == 0:
            return np.interp(np.asarray(x, dtype=float), xs, ys)
        h = (xs[-1] - xs[0]) / (4 * len(xs))
        xv = np.asarray(x, dtype=float)
        return (np.interp(xv + h, xs, ys) - np.interp(xv - h, xs, ys)) / (2 * h)

    return tab


def _call(g, x, order=0):
    try:
        return np.asarray(g(x, order), dtype=float)
    except TypeError:
        if order == 0:
            return np.asarray(g(x), dtype=float)
        h = 1e-6
        xv = np.asarray(x, dtype=float)
        return (np.asarray(g(xv + h)) - np.asarray(g(xv - h))) / (2 * h)


@dataclass(frozen=True)
class SnakeSolution:
    poly: SparsePoly
    touch_points: tuple  # of (point, side)
    which: str
    max_violation: float

    def to_dict(self) -> dict:
        return {
            "poly": self.poly.to_dict(),
            "touch_points": [[float(t), s] for t, s in self.touch_points],
            "which": self.which,
            "max_violation": self.max_violation,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class BestApproximation:
    poly: SparsePoly
    deviation: float
    alternation_points: tuple
    sign: int
    stalled: bool = False
    lower_bounds: tuple = ()  # per-iteration alternation deviations |d|

    def to_dict(self) -> dict:
        return {
            "poly": self.poly.to_dict(),
            "deviation": self.deviation,
            "alternation_points": list(map(float, self.alternation_points)),
            "sign": self.sign,
            "stalled": self.stalled,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# -- snake --------------------------------------------------------------------


def snake(
    family: FamilySpec,
    g1,
    g2,
    which: str = "f_star",
    grid: int = 2001,
    certificate=None,
) -> SnakeSolution:
    """The unique band polynomial with n+1 alternating touch points.

    ``which="f_star"`` touches the upper bound at its rightmost touch point,
    ``which="f_upper_star"`` the lower bound.  Feasibility (existence of a
    strictly separating polynomial) is certified by a grid LP first.
    """
    if which not in ("f_star", "f_upper_star"):
        raise ValueError("which must be 'f_star' or 'f_upper_star'")
    if certificate is None:
        certificate = certify(family, "T")
    if not certificate:
        raise CertificationRequired("snake needs a T-certified family")
    dom = family.domain
    lo, hi = dom.window()
    xs = np.linspace(lo, hi, grid)
    G1 = _as_callable(g1, family)
    G2 = _as_callable(g2, family)
    v1 = _call(G1, xs)
    v2 = _call(G2, xs)
    basis = family.eval_grid(xs)
    n = family.order

    # separator LP: maximize margin t with g1 + t <= p <= g2 - t on the grid
    nv = family.size
    c = np.zeros(nv + 1)
    c[-1] = -1.0
    A_ub = np.vstack(
        [
            np.hstack([basis, np.ones((grid, 1))]),
            np.hstack([-basis, np.ones((grid, 1))]),
        ]
    )
    b_ub = np.concatenate([v2, -v1])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * nv + [(0, None)], method="highs")
    band = float(np.max(v2 - v1))
    if not res.success or res.x[-1] <= 1e-12 * max(band, 1.0):
        raise NoSeparator("no strictly separating polynomial on the grid")
    sep = res.x[:nv]

    if n == 0:
        # single touch point: the constant pinned to the nearer bound
        if which == "f_star":
            i = int(np.argmin(v2 / basis[:, 0]))
            cconst = v2[i] / basis[i, 0]
            touch = ((float(xs[i]), UPPER),)
        else:
            i = int(np.argmax(v1 / basis[:, 0]))
            cconst = v1[i] / basis[i, 0]
            touch = ((float(xs[i]), LOWER),)
        poly = SparsePoly((float(cconst),), family)
        viol = _band_violation(poly, xs, v1, v2)
        return SnakeSolution(poly, touch, which, viol)

    sides = _sides_for(which, n)
    ref = _initial_reference(lo, hi, n + 1)
    coeffs = None
    prev_refs = set()
    for _ in range(80):
        coeffs = _interp_bounds(family, ref, sides, G1, G2)
        poly_vals = basis @ coeffs
        over = poly_vals - v2
        under = v1 - poly_vals
        worst = max(float(over.max()), float(under.max()))
        if worst <= 1e-12 * max(band, 1.0):
            break
        xi = int(np.argmax(np.maximum(over, under)))
        side = UPPER if over[xi] >= under[xi] else LOWER
        ref, sides = _exchange(ref, sides, float(xs[xi]), side)
        key = tuple(np.round(ref, 12))
        if key in prev_refs:
            break
        prev_refs.add(key)

    # polish: Newton on touch values/derivatives for interior touch points
    ref, coeffs = _polish_snake(family, ref, sides, G1, G2, lo, hi)
    poly = SparsePoly(tuple(coeffs), family)
    viol = _band_violation(poly, xs, v1, v2)
    touch = tuple((float(t), s) for t, s in zip(ref, sides))
    _snake_invariants(touch, n)
    return SnakeSolution(poly, touch, which, viol)


def _sides_for(which: str, n: int) -> list:
    # rightmost touch: f_star -> upper bound, f_upper_star -> lower bound
    last = UPPER if which == "f_star" else LOWER
    sides = []
    for i in range(n + 1):
        even_from_right = (n - i) % 2 == 0
        if last == UPPER:
            sides.append(UPPER if even_from_right else LOWER)
        else:
            sides.append(LOWER if even_from_right else UPPER)
    return sides


def _initial_reference(lo, hi, count) -> np.ndarray:
    if count == 1:
        return np.array([(lo + hi) / 2])
    j = np.arange(count)
    return lo + (hi - lo) * (1 - np.cos(np.pi * j / (count - 1))) / 2


def _interp_bounds(family, ref, sides, G1, G2) -> np.ndarray:
    A = family.eval_grid(np.asarray(ref))
    b = np.array(
        [float(_call(G2 if s == UPPER else G1, t)) for t, s in zip(ref, sides)]
    )
    return np.linalg.solve(A, b)


def _exchange(ref, sides, x_new, side_new):
    """Single-point exchange keeping the alternation pattern."""
    ref = list(ref)
    sides = list(sides)
    pos = np.searchsorted(ref, x_new)
    if pos < len(ref) and sides[pos] == side_new:
        ref[pos] = x_new
    elif pos > 0 and sides[pos - 1] == side_new:
        ref[pos - 1] = x_new
    elif pos == 0:
        ref = [x_new] + ref[:-1] if sides[0] != side_new else [x_new] + ref[1:]
        sides = ([side_new] + sides[:-1]) if sides[0] != side_new else sides
    else:
        ref = ref[1:] + [x_new] if sides[-1] != side_new else ref[:-1] + [x_new]
        sides = (sides[1:] + [side_new]) if sides[-1] != side_new else sides
    order = np.argsort(ref)
    ref = [ref[i] for i in order]
    sides = [sides[i] for i in order]
    return np.array(ref), sides


def _polish_snake(family, ref, sides, G1, G2, lo, hi):
    """Newton on the touch system: values at all touches, slopes at interior."""
    n = family.order
    ref = np.asarray(ref, dtype=float).copy()
    interior = [i for i, t in enumerate(ref) if lo + 1e-12 < t < hi - 1e-12]

    def system(r):
        A = family.eval_grid(r)
        coeffs = _interp_bounds(family, r, sides, G1, G2)
        out = []
        for i in interior:
            bound = G2 if sides[i] == UPPER else G1
            d1 = family.eval_grid(np.array([r[i]]), 1)[0] @ coeffs
            out.append(d1 - float(_call(bound, r[i], 1)))
        return np.array(out), coeffs

    coeffs = _interp_bounds(family, ref, sides, G1, G2)
    if not interior:
        return ref, coeffs
    for _ in range(50):
        R, coeffs = system(ref)
        if np.max(np.abs(R)) < 1e-13 * (1 + np.max(np.abs(coeffs))):
            break
        h = 1e-7 * (hi - lo)
        J = np.zeros((len(R), len(interior)))
        for j, idx in enumerate(interior):
            rp, rm = ref.copy(), ref.copy()
            rp[idx] += h
            rm[idx] -= h
            J[:, j] = (system(rp)[0] - system(rm)[0]) / (2 * h)
        try:
            dz = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        ok = False
        for _ in range(30):
            rn = ref.copy()
            for j, idx in enumerate(interior):
                rn[idx] += t * dz[j]
            if np.all(np.diff(rn) > 0) and rn[0] >= lo and rn[-1] <= hi:
                Rn, _ = system(rn)
                if np.max(np.abs(Rn)) < np.max(np.abs(R)):
                    ref = rn
                    ok = True
                    break
            t /= 2
        if not ok:
            break
    coeffs = _interp_bounds(family, ref, sides, G1, G2)
    return ref, coeffs


def _band_violation(poly, xs, v1, v2) -> float:
    pv = poly(xs)
    return float(max(np.max(pv - v2), np.max(v1 - pv), 0.0))


def _snake_invariants(touch, n):
    if len(touch) != n + 1:
        raise InvariantViolation(f"{len(touch)} touch points, expected {n + 1}")
    for i in range(len(touch) - 1):
        if touch[i][1] == touch[i + 1][1]:
            raise InvariantViolation("touch sides do not alternate")


# -- best approximation (generalized Remez) ------------------------------------


def best_approx(
    family: FamilySpec,
    f,
    grid: int = 4001,
    tol: float = 1e-12,
    max_iter: int = 60,
    init: str = "chebyshev",
    certificate=None,
) -> BestApproximation:
    """Best sup-norm approximation of f from lin(family) on [a, b].

    Multi-point Remez exchange on the n+2 alternation system; extrema are
    located by golden-section refinement on sign-consistent subintervals of
    the evaluation grid.
    """
    if certificate is None:
        certificate = certify(family, "T")
    if not certificate:
        raise CertificationRequired("best_approx needs a T-certified family")
    F = _as_callable(f, family)
    lo, hi = family.domain.window()
    n = family.order
    xs = np.linspace(lo, hi, grid)
    fv = _call(F, xs)
    basis = family.eval_grid(xs)

    if init == "chebyshev":
        ref = _initial_reference(lo, hi, n + 2)
    else:
        ref = np.linspace(lo, hi, n + 2)

    best = None
    stalled = False
    seen = set()
    lower_bounds = []
    it = 0
    for it in range(max_iter):
        A = np.column_stack(
            [family.eval_grid(ref), ((-1.0) ** np.arange(n + 2))[:, None]]
        )
        rhs = _call(F, ref)
        sol = np.linalg.solve(A, rhs)
        coeffs, d = sol[:-1], float(sol[-1])
        err = fv - basis @ coeffs
        dev_lower = abs(d)
        lower_bounds.append(dev_lower)
        dev_upper = float(np.max(np.abs(err)))
        best = (coeffs, d, ref.copy())
        if dev_upper - dev_lower <= tol * max(dev_upper, 1e-300):
            break
        new_ref = _alternant(xs, err, n + 2, F, family, coeffs, lo, hi)
        if len(new_ref) != n + 2:
            # degenerate error (fewer sign blocks than n+2): single exchange
            new_ref = _single_exchange(ref, xs, err, F, family, coeffs)
        key = tuple(np.round(new_ref, 13))
        if key in seen or len(new_ref) != n + 2:
            stalled = True
            break
        seen.add(key)
        ref = new_ref

    coeffs, d, ref = best
    poly = SparsePoly(tuple(coeffs), family)
    errs = _call(F, ref) - poly(ref)
    sign = 1 if errs[0] >= 0 else -1
    return BestApproximation(
        poly, float(np.max(np.abs(fv - poly(xs)))), tuple(map(float, ref)), sign,
        stalled, tuple(lower_bounds),
    )


def _single_exchange(ref, xs, err, F, family, coeffs) -> np.ndarray:
    """Classic first-algorithm exchange: swap the worst point in, keeping
    the reference alternation-compatible."""
    i_star = int(np.argmax(np.abs(err)))
    x_star = float(xs[i_star])
    s_star = math.copysign(1.0, err[i_star])

    def err_at(x):
        return float(_call(F, x)) - float(family.eval_grid(np.array([x]))[0] @ coeffs)

    ref = list(ref)
    pos = int(np.searchsorted(ref, x_star))
    if pos == 0:
        j = 0
    elif pos >= len(ref):
        j = len(ref) - 1
    else:
        left, right = err_at(ref[pos - 1]), err_at(ref[pos])
        if left * s_star > 0 and right * s_star <= 0:
            j = pos - 1
        elif right * s_star > 0 and left * s_star <= 0:
            j = pos
        else:
            j = pos - 1 if abs(x_star - ref[pos - 1]) <= abs(x_star - ref[pos]) else pos
    ref[j] = x_star
    return np.array(sorted(ref))


def _alternant(xs, err, count, F, family, coeffs, lo, hi) -> np.ndarray:
    """Pick an alternating set of local extremum points including the worst."""
    sign = np.sign(err)
    sign[sign == 0] = 1
    blocks = []
    start = 0
    for i in range(1, len(xs)):
        if sign[i] != sign[start]:
            blocks.append((start, i - 1))
            start = i
    blocks.append((start, len(xs) - 1))

    def golden(i0, i1, s):
        a_, b_ = xs[max(i0 - 1, 0)], xs[min(i1 + 1, len(xs) - 1)]
        phi = (math.sqrt(5) - 1) / 2

        def h(x):
            return s * (float(_call(F, x)) - float(family.eval_grid(np.array([x]))[0] @ coeffs))

        c_ = b_ - phi * (b_ - a_)
        d_ = a_ + phi * (b_ - a_)
        hc, hd = h(c_), h(d_)
        for _ in range(60):
            if hc >= hd:
                b_, d_, hd = d_, c_, hc
                c_ = b_ - phi * (b_ - a_)
                hc = h(c_)
            else:
                a_, c_, hc = c_, d_, hd
                d_ = a_ + phi * (b_ - a_)
                hd = h(d_)
        x_ = (a_ + b_) / 2
        return x_, h(x_)

    cands = []
    for i0, i1 in blocks:
        s = float(sign[i0])
        xloc, hval = golden(i0, i1, s)
        cands.append((xloc, s, hval))
    cands.sort()
    # collapse same-sign neighbours, keep the larger
    merged = []
    for c in cands:
        if merged and merged[-1][1] == c[1]:
            if c[2] > merged[-1][2]:
                merged[-1] = c
        else:
            merged.append(c)
    # trim to the requested count keeping the global max
    while len(merged) > count:
        imax = max(range(len(merged)), key=lambda i: merged[i][2])
        if merged[0][2] <= merged[-1][2] and imax != 0:
            merged.pop(0)
        elif imax != len(merged) - 1:
            merged.pop()
        else:
            merged.pop(0)
    return np.array([c[0] for c in merged])


# -- ratio optimization ---------------------------------------------------------


def _index_patterns(n: int, lo: float, hi: float, halfline: bool):
    """Zero-placement patterns of index n: (tag, #interior doubles, fixed nodes)."""
    pats = []
    if n % 2 == 0:
        m = n // 2
        pats.append(("interior_doubles", m, ()))
        if m >= 1 and not halfline:
            pats.append(("a_doubles_b", m - 1, ((lo, 1), (hi, 1))))
        if halfline and m >= 1:
            pats.append(("origin_doubles", m - 1, ((lo, 1),), True))
    else:
        m = (n - 1) // 2
        pats.append(("a_doubles", m, ((lo, 1),)))
        if not halfline:
            pats.append(("doubles_b", m, ((hi, 1),)))
        else:
            pats.append(("doubles_top", m, (), True))
    out = []
    for p in pats:
        tag, m, fixed = p[0], p[1], p[2]
        drop_top = len(p) > 3 and p[3]
        out.append((tag, m, fixed, drop_top))
    return out


def optimize_ratio(
    family: FamilySpec,
    L,
    S,
    sense: str = "max",
    grid: int = 200,
    starts: int = 6,
    seed: int = 0,
    certificate=None,
):
    """Optimize L(p)/S(p) over nonnegative polynomials with index-n zero sets.

    Both endpoint/parity patterns are searched with multi-start Nelder-Mead
    over the interior double-zero positions; returns (value, argmax, top5).
    """
    if certificate is None:
        certificate = certify(family, "ET")
    if not certificate:
        raise CertificationRequired("optimize_ratio needs an ET-certified family")
    n = family.order
    lo, hi = family.domain.window()
    Lv = np.asarray(L.values if hasattr(L, "values") else L, dtype=float)
    Sv = np.asarray(S.values if hasattr(S, "values") else S, dtype=float)
    sgn = 1.0 if sense == "max" else -1.0
    rng = np.random.default_rng(seed)

    def make_poly(tag, m, fixed, theta):
        nodes = list(fixed) + [(t, 2) for t in theta]
        nodes = sorted(nodes)
        ns = NodeSet(tuple(nodes))
        return poly_from_zeros(family, ns, "auto_nonneg", certificate=certificate)

    def ratio(p):
        num = float(Lv @ p.a)
        den = float(Sv @ p.a)
        if den <= 0:
            raise SNotStrictlyPositive(f"S(p) = {den} <= 0 at a test polynomial")
        return num / den

    results = []
    for tag, m, fixed, _drop in _index_patterns(n, lo, hi, False):
        if m == 0:
            try:
                p = make_poly(tag, m, fixed, np.array([]))
                results.append((ratio(p), tag, (), p))
            except Exception:
                pass
            continue

        def neg_obj(theta):
            th = np.sort(theta)
            if th[0] <= lo + 1e-9 * (hi - lo) or th[-1] >= hi - 1e-9 * (hi - lo):
                return 1e100
            if np.any(np.diff(th) <= 1e-9 * (hi - lo)):
                return 1e100
            try:
                p = make_poly(tag, m, fixed, th)
                return -sgn * ratio(p)
            except Exception:
                return 1e100

        for s in range(starts):
            if s == 0:
                theta0 = lo + (hi - lo) * (np.arange(1, m + 1)) / (m + 1)
            else:
                theta0 = np.sort(lo + (hi - lo) * rng.uniform(0.05, 0.95, m))
            res = minimize(neg_obj, theta0, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
            if res.fun < 1e90:
                th = np.sort(res.x)
                p = make_poly(tag, m, fixed, th)
                results.append((ratio(p), tag, tuple(map(float, th)), p))

    if not results:
        raise InvariantViolation("no admissible extremal pattern found")
    results.sort(key=lambda r: sgn * r[0], reverse=True)
    value, tag, theta, poly = results[0]
    top5 = [(float(r[0]), r[1], r[2]) for r in results[:5]]
    return value, poly, top5
