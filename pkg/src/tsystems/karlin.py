"""Karlin decompositions f = f_* + f^* on [a,b], [0,inf), and the real line.

The primary solver is Newton on the tangency system: the unknowns are the
interior double zeros of f_* and the touch points of f - f_*, the equations
are value/derivative vanishing at the touch points plus the endpoint
condition.  Globalization is by continuation: a surrogate with known exact
decomposition (a sum of the two pattern polynomials, which by uniqueness IS
its own decomposition) is morphed into f with Newton warm starts.  A damped
delta-equalization sweep provides initial configurations when the direct
start fails.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .colloc import node_rows, null_vector
from .errors import (
    InvariantViolation,
    LeadingCoefficientNonpositive,
    NegativeLeading,
    NegativeSomewhere,
    NoConvergence,
    NotPositive,
    OddDegree,
    OddInteriorMultiplicity,
    TooManyZeros,
    ValueAtZeroNonpositive,
)
from .family import FamilySpec
from .zeros import NODAL, NON_NODAL, SparsePoly, ZeroConfig, count_zeros

CONVERGED_TOL = 1e-10
POS_GRID = 5000


@dataclass(frozen=True)
class KarlinDecomposition:
    """The unique pair (f_*, f^*) with interlacing full-index zero sets."""

    f_lower: SparsePoly
    f_upper: SparsePoly
    zeros_lower: ZeroConfig
    zeros_upper: ZeroConfig
    residual_sup: float
    iterations: int
    converged: bool
    solver_path: str = "newton"
    touch_residual: float = 0.0

    def to_dict(self) -> dict:
        return {
            "f_lower": self.f_lower.to_dict(),
            "f_upper": self.f_upper.to_dict(),
            "zeros_lower": self.zeros_lower.to_dict(),
            "zeros_upper": self.zeros_upper.to_dict(),
            "residual_sup": self.residual_sup,
            "iterations": self.iterations,
            "converged": self.converged,
            "solver_path": self.solver_path,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _merge_nodes(nodes) -> tuple:
    """Sort (point, mult) pairs and merge coincident points."""
    out: list[list] = []
    for x, m in sorted(nodes):
        if out and math.isclose(out[-1][0], x, rel_tol=0, abs_tol=1e-14):
            out[-1][1] += m
        else:
            out.append([float(x), int(m)])
    return tuple((p, m) for p, m in out)


def _poly_eval(family: FamilySpec, coeffs: np.ndarray, xs, order: int = 0):
    vals = family.eval_grid(np.atleast_1d(np.asarray(xs, dtype=float)), order)
    return vals @ coeffs


class _TangencySolver:
    """Shared Newton/continuation machinery for [a,b] and half-line patterns."""

    def __init__(
        self,
        family: FamilySpec,
        f: np.ndarray,
        shared: tuple,
        n_eff: int,
        lo: float,
        hi: float | None,
        pin: str,
        grid: np.ndarray,
    ):
        self.family = family
        self.f = np.asarray(f, dtype=float)
        self.shared = shared
        self.n_eff = n_eff
        self.even = n_eff % 2 == 0
        self.m = n_eff // 2 if self.even else (n_eff - 1) // 2
        self.lo = lo
        self.hi = hi  # None on the half-line
        self.pin = pin  # "endpoint" (at hi) or "leading" (coefficient of f_n)
        self.grid = grid
        self.scale = float(np.max(np.abs(_poly_eval(family, self.f, grid))))
        self.width = (hi - lo) if hi is not None else max(1.0, 2 * float(grid[-1] - lo))
        self.k_lo = next((m for z, m in shared if math.isclose(z, lo, abs_tol=1e-14)), 0)
        self.k_hi = 0
        if hi is not None:
            self.k_hi = next((m for z, m in shared if math.isclose(z, hi, abs_tol=1e-14)), 0)

    # -- patterns -------------------------------------------------------------

    def _clip(self, pts) -> np.ndarray:
        """Keep transient probe points (FD steps, LM trials) inside the domain."""
        lo = self.lo + 1e-14 * self.width
        hi = self.hi - 1e-14 * self.width if self.hi is not None else None
        return np.clip(np.asarray(pts, dtype=float), lo, hi)

    def lower_nodes(self, xs) -> tuple:
        pat = [(x, 2) for x in np.sort(self._clip(xs))]
        if not self.even:
            pat.append((self.lo, 1))
        return _merge_nodes(list(self.shared) + pat)

    def upper_nodes(self, ys) -> tuple:
        pat = [(y, 2) for y in np.sort(ys)]
        if self.even:
            pat.append((self.lo, 1))
            if self.hi is not None:
                pat.append((self.hi, 1))
        else:
            if self.hi is not None:
                pat.append((self.hi, 1))
        return _merge_nodes(list(self.shared) + pat)

    def upper_family_cols(self) -> slice:
        """Columns of the family used by the f^* pattern (half-line drops f_n)."""
        return slice(0, self.family.size - (1 if self.pin == "leading" else 0))

    def f_lower(self, xs, fc) -> np.ndarray:
        P = null_vector(node_rows(self.family, self.lower_nodes(xs)))
        if self.pin == "endpoint":
            k = self.k_hi
            num = float(_poly_eval(self.family, fc, [self.hi], k)[0])
            den = float(_poly_eval(self.family, P, [self.hi], k)[0])
        else:
            num = fc[-1]
            den = P[-1]
        return (num / den) * P

    def upper_pattern_poly(self, ys) -> np.ndarray:
        """Unit-scale f^*-pattern polynomial (embedded in the full family)."""
        cols = self.upper_family_cols()
        sub = _subfamily(self.family, cols)
        nodes = self.upper_nodes(ys)
        Q = null_vector(node_rows(sub, nodes))
        out = np.zeros(self.family.size)
        out[cols] = Q
        return out

    # -- residuals ------------------------------------------------------------

    def resid(self, z, fc) -> np.ndarray:
        xs = np.sort(z[: self.m])
        ys = self._clip(np.sort(z[self.m :]))
        d = fc - self.f_lower(xs, fc)
        parts = []
        if self.even:
            parts.append(float(_poly_eval(self.family, d, [self.lo], self.k_lo)[0]))
        if len(ys):
            parts.extend(_poly_eval(self.family, d, ys))
            parts.extend(_poly_eval(self.family, d, ys, 1))
        return np.array(parts)

    def phase_ok(self, z) -> bool:
        xs = np.sort(z[: self.m])
        ys = np.sort(z[self.m :])
        seq = [self.lo]
        if self.even:
            for i in range(self.m):
                seq.append(xs[i])
                if i < len(ys):
                    seq.append(ys[i])
        else:
            for i in range(self.m):
                seq.append(ys[i])
                seq.append(xs[i])
        if self.hi is not None:
            seq.append(self.hi)
        eps = 1e-13 * self.width
        return all(seq[i] + eps < seq[i + 1] for i in range(len(seq) - 1))

    def newton(self, z, fc, tol, maxit=40):
        z = np.asarray(z, dtype=float).copy()
        sc = float(np.max(np.abs(_poly_eval(self.family, fc, self.grid))))
        last = math.inf
        it = 0
        for it in range(maxit):
            R = self.resid(z, fc)
            nR = float(np.max(np.abs(R))) if len(R) else 0.0
            if nR < tol * sc or len(R) == 0:
                return z, True, it, nR / sc if sc else 0.0
            h = 1e-7 * self.width
            J = np.empty((len(R), len(z)))
            for j in range(len(z)):
                zp, zm = z.copy(), z.copy()
                zp[j] += h
                zm[j] -= h
                J[:, j] = (self.resid(zp, fc) - self.resid(zm, fc)) / (2 * h)
            try:
                dz = np.linalg.solve(J, -R)
            except np.linalg.LinAlgError:
                return z, False, it, nR / sc
            t = 1.0
            moved = False
            for _ in range(45):
                zn = z + t * dz
                if self.phase_ok(zn) and np.max(np.abs(self.resid(zn, fc))) < nR:
                    z = zn
                    moved = True
                    break
                t /= 2
            if not moved:
                return z, nR < 100 * tol * sc, it, nR / sc
            last = nR
        R = self.resid(z, fc)
        nR = float(np.max(np.abs(R))) if len(R) else 0.0
        return z, nR < tol * sc, it, nR / sc if sc else 0.0

    # -- initial configurations ------------------------------------------------

    def _span_hi(self, span) -> float:
        if span is not None:
            return span
        return self.hi if self.hi is not None else float(self.grid[-1])

    def chebyshev_init(self, span=None) -> np.ndarray:
        lo = self.lo
        hi = self._span_hi(span)
        w = hi - lo
        m = self.m
        if m == 0:
            return np.array([])
        xs = lo + w * (1 - np.cos((2 * np.arange(1, m + 1) - 1) / (2 * m) * np.pi)) / 2
        return lo + (xs - lo) * 0.8 + 0.1 * w

    def equispaced_init(self, span=None) -> np.ndarray:
        lo = self.lo
        hi = self._span_hi(span)
        m = self.m
        if m == 0:
            return np.array([])
        return lo + (hi - lo) * np.arange(1, m + 1) / (m + 1)

    def ys_for(self, xs) -> np.ndarray:
        xs = np.sort(xs)
        if self.even:
            return (xs[:-1] + xs[1:]) / 2 if self.m >= 1 else np.array([])
        prev = np.concatenate([[self.lo], xs[:-1]])
        return (prev + xs) / 2

    # -- delta-equalization sweeps ----------------------------------------------

    def _deltas(self, xs, fc):
        nodes = self.lower_nodes(xs)
        P = null_vector(node_rows(self.family, nodes))
        Pv = _poly_eval(self.family, P, self.grid)
        if Pv[np.argmax(np.abs(Pv))] < 0:
            Pv = -Pv
        fv = _poly_eval(self.family, fc, self.grid)
        ratio = np.where(fv > 0, Pv / np.where(fv > 0, fv, 1.0), 0.0)
        edges = np.concatenate([[self.grid[0]], np.sort(xs), [self.grid[-1]]])
        seg = np.clip(np.searchsorted(edges, self.grid, side="right") - 1, 0, self.m)
        return np.array(
            [max(float(ratio[seg == i].max()) if np.any(seg == i) else 0.0, 1e-300) for i in range(self.m + 1)]
        )

    def cyclic_fixed_point(self, fc, iters=50, damping=0.5):
        """Damped cyclic simplex map over the gap lengths (existence-style
        construction run as an iteration; useful as a warm start)."""
        m = self.m
        lo = self.lo
        span = self.grid[-1] - lo
        xi = np.full(m + 1, span / (m + 1))
        best, best_spread = None, math.inf
        for _ in range(iters):
            xs = lo + np.cumsum(xi)[:-1]
            deltas = self._deltas(xs, fc)
            F = deltas - deltas.min()
            spread = float((deltas.max() - deltas.min()) / deltas.max())
            if spread < best_spread:
                best, best_spread = xs.copy(), spread
            S = float(F.sum())
            if S <= 0 or spread < 1e-9:
                break
            Fnext = np.concatenate([F[1:], [F[0]]])
            xi = (1 - damping) * xi + damping * (Fnext / S * span)
            xi = np.maximum(xi, 1e-9 * span)
            xi *= span / xi.sum()
        return best, best_spread

    def leveling(self, fc, iters=160, gamma=0.6):
        """Multiplicative equalization of the per-segment delta values."""
        m = self.m
        lo = self.lo
        span = self.grid[-1] - lo
        xi = np.full(m + 1, span / (m + 1))
        best, best_spread = None, math.inf
        for _ in range(iters):
            xs = lo + np.cumsum(xi)[:-1]
            deltas = self._deltas(xs, fc)
            spread = float((deltas.max() - deltas.min()) / deltas.max())
            if spread < best_spread:
                best, best_spread = xs.copy(), spread
            if spread < 1e-9:
                break
            target = float(np.exp(np.mean(np.log(deltas))))
            fac = np.clip((deltas / target) ** (-gamma), 0.4, 2.5)
            xi = xi * fac
            xi = np.maximum(xi, 1e-11 * span)
            xi *= span / xi.sum()
        return best, best_spread

    # -- continuation -----------------------------------------------------------

    def surrogate(self, xs, ys) -> np.ndarray:
        """A polynomial whose decomposition is known exactly: P + Q themselves."""
        P = null_vector(node_rows(self.family, self.lower_nodes(xs)))
        Pv = _poly_eval(self.family, P, self.grid)
        if Pv[np.argmax(np.abs(Pv))] < 0:
            P, Pv = -P, -Pv
        Q = self.upper_pattern_poly(ys)
        Qv = _poly_eval(self.family, Q, self.grid)
        if Qv[np.argmax(np.abs(Qv))] < 0:
            Q, Qv = -Q, -Qv
        e = self.scale * (P / np.max(np.abs(Pv)) + Q / np.max(np.abs(Qv)))
        if self.pin == "leading" and e[-1] <= 0:
            # ensure a positive top coefficient for the pin
            e = e + self.scale * 1e-3 * P / np.max(np.abs(Pv)) if P[-1] > 0 else e
        return e

    def continuation(self, xs0, tol):
        ys0 = self.ys_for(xs0)
        e = self.surrogate(xs0, ys0)
        z = np.concatenate([np.sort(xs0), np.sort(ys0)])
        tpath, step, fails = 0.0, 0.2, 0
        while tpath < 1.0 - 1e-12 and fails < 80:
            tnext = min(1.0, tpath + step)
            fc = (1 - tnext) * e + tnext * self.f
            zn, ok, _, _ = self.newton(z, fc, max(tol, 1e-11), maxit=25)
            if ok:
                z, tpath = zn, tnext
                step = min(step * 1.6, 0.4)
            else:
                step /= 2
                fails += 1
        # long-leash rescue on the true target
        z, ok, it, res = self.newton(z, self.f, tol, maxit=80)
        return z, ok, res

    # -- driver -----------------------------------------------------------------

    def solve(self, init: str = "chebyshev", tol: float = CONVERGED_TOL):
        """Returns (xs, ys, f_lower_coeffs, info)."""
        attempts = []
        m = self.m
        if m == 0:
            fl = self.f_lower(np.array([]), self.f)
            res = self.resid(np.array([]), self.f)
            r = float(np.max(np.abs(res))) / self.scale if len(res) else 0.0
            return np.array([]), np.array([]), fl, {
                "path": "direct",
                "iterations": 0,
                "residual": r,
                "converged": r < tol,
            }

        inits = []
        if init == "chebyshev":
            inits.append(("direct", self.chebyshev_init()))
            inits.append(("direct-equi", self.equispaced_init()))
        else:
            inits.append(("direct", self.equispaced_init()))
            inits.append(("direct-cheb", self.chebyshev_init()))

        tol_inner = min(tol, 1e-12)
        for label, xs0 in inits:
            z0 = np.concatenate([np.sort(xs0), np.sort(self.ys_for(xs0))])
            if not self.phase_ok(z0):
                continue
            z, ok, it, res = self.newton(z0, self.f, tol_inner)
            if (ok or res < tol) and self._valid(z):
                return self._unpack(z, "newton:" + label, it, res, tol)
            attempts.append((label, res))

        # damped cyclic simplex map, then Newton
        xs_fp, spread = self.cyclic_fixed_point(self.f)
        if xs_fp is not None and len(xs_fp) == m:
            z0 = np.concatenate([np.sort(xs_fp), np.sort(self.ys_for(xs_fp))])
            if self.phase_ok(z0):
                z, ok, it, res = self.newton(z0, self.f, tol_inner)
                if (ok or res < tol) and self._valid(z):
                    return self._unpack(z, "fixed_point", it, res, tol)
                attempts.append(("fixed_point", res))

        # multiplicative leveling, then Newton
        xs_lv, spread = self.leveling(self.f)
        if xs_lv is not None and len(xs_lv) == m:
            z0 = np.concatenate([np.sort(xs_lv), np.sort(self.ys_for(xs_lv))])
            if self.phase_ok(z0):
                z, ok, it, res = self.newton(z0, self.f, tol_inner)
                if (ok or res < tol) and self._valid(z):
                    return self._unpack(z, "leveling", it, res, tol)
                attempts.append(("leveling", res))

        # continuation from leveled then Chebyshev configurations
        for label, xs0 in (("homotopy-leveled", xs_lv), ("homotopy-cheb", self.chebyshev_init())):
            if xs0 is None or len(xs0) != m:
                continue
            z, ok, res = self.continuation(xs0, tol_inner)
            if self._valid(z) and (ok or res < 100 * tol):
                return self._unpack(z, label, -1, res, tol)
            attempts.append((label, res))

        raise NoConvergence(
            "tangency solver failed on all paths", {"attempts": attempts}
        )

    def _valid(self, z) -> bool:
        if not self.phase_ok(z):
            return False
        xs = np.sort(z[: self.m])
        fl = self.f_lower(xs, self.f)
        flv = _poly_eval(self.family, fl, self.grid)
        dv = _poly_eval(self.family, self.f - fl, self.grid)
        return float(flv.min()) >= -1e-9 * self.scale and float(dv.min()) >= -1e-9 * self.scale

    def lm_polish(self, z):
        """Levenberg-Marquardt finisher; returns the better of old/new."""
        if len(z) == 0:
            return z
        r0 = float(np.max(np.abs(self.resid(z, self.f))))
        try:
            sol = least_squares(
                lambda zz: self.resid(zz, self.f), z, method="lm",
                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400,
            )
        except Exception:
            return z
        if not self.phase_ok(sol.x):
            return z
        r1 = float(np.max(np.abs(self.resid(sol.x, self.f))))
        return sol.x if r1 < r0 else z

    def _unpack(self, z, path, it, res, tol):
        z = self.lm_polish(z)
        res = float(np.max(np.abs(self.resid(z, self.f)))) / self.scale if len(z) else res
        xs = np.sort(z[: self.m])
        ys = np.sort(z[self.m :])
        fl = self.f_lower(xs, self.f)
        return xs, ys, fl, {
            "path": path,
            "iterations": it,
            "residual": res,
            "converged": res < tol,
        }


def _subfamily(family: FamilySpec, cols: slice) -> FamilySpec:
    if family.variant == "custom":
        return FamilySpec("custom", (), family.domain, family.evaluators[cols], family.name)
    return FamilySpec(family.variant, family.params[cols], family.domain)


def _zero_config(solver: _TangencySolver, nodes, domain) -> ZeroConfig:
    zeros = []
    for p, m in nodes:
        endpoint = (
            math.isclose(p, domain.a or -math.inf, abs_tol=1e-13)
            if domain.kind != "real_line"
            else False
        ) or (domain.kind == "closed_interval" and math.isclose(p, domain.b, abs_tol=1e-13))
        if endpoint:
            kind = NODAL
        else:
            kind = NON_NODAL if m % 2 == 0 else NODAL
        zeros.append((float(p), int(m), kind))
    return ZeroConfig(tuple(sorted(zeros)), domain)


def _build_decomposition(solver, xs, ys, fl, info, family) -> KarlinDecomposition:
    f_lower = SparsePoly(tuple(fl), family)
    f_upper = SparsePoly(tuple(solver.f - fl), family)
    zl = _zero_config(solver, solver.lower_nodes(xs), family.domain)
    zu = _zero_config(solver, solver.upper_nodes(ys), family.domain)
    resid_sup = float(
        np.max(np.abs(_poly_eval(family, solver.f - f_lower.a - f_upper.a, solver.grid)))
    )
    return KarlinDecomposition(
        f_lower,
        f_upper,
        zl,
        zu,
        resid_sup,
        max(info["iterations"], 0),
        info["converged"],
        info["path"],
        info["residual"],
    )


def _check_positive(f: SparsePoly, grid: np.ndarray, extra=()):
    vals = f(grid)
    scale = float(np.max(np.abs(vals)))
    pts = list(extra)
    if pts:
        vals_extra = f(np.array(pts))
        if float(np.min(vals_extra)) <= 0:
            raise NotPositive("f must be strictly positive")
    if float(vals.min()) <= 0:
        raise NotPositive(f"min f = {vals.min():.3e} on the check grid")
    return scale


def decompose_pos_ab(
    f: SparsePoly,
    init: str = "chebyshev",
    grid: int = POS_GRID,
    certificate=None,
) -> KarlinDecomposition:
    """Karlin decomposition of a strictly positive polynomial on [a, b]."""
    family = f.family
    if family.domain.kind != "closed_interval":
        raise InvariantViolation("decompose_pos_ab needs a closed interval domain")
    a, b = family.domain.a, family.domain.b
    xs_grid = np.linspace(a, b, grid)
    _check_positive(f, xs_grid)
    solver = _TangencySolver(
        family, f.a, (), family.order, a, b, "endpoint", xs_grid
    )
    xs, ys, fl, info = solver.solve(init=init)
    return _build_decomposition(solver, xs, ys, fl, info, family)


def decompose_nonneg_ab(
    f: SparsePoly,
    init: str = "chebyshev",
    grid: int = POS_GRID,
    zero_tol: float = 1e-9,
) -> KarlinDecomposition:
    """Karlin decomposition of a nonnegative polynomial with r < n zeros."""
    family = f.family
    if family.domain.kind != "closed_interval":
        raise InvariantViolation("decompose_nonneg_ab needs a closed interval domain")
    a, b = family.domain.a, family.domain.b
    n = family.order
    cfg = count_zeros(f, tol=zero_tol)
    shared = tuple((p, m) for p, m, _ in cfg.zeros)
    r = sum(m for _, m in shared)
    if r == 0:
        return decompose_pos_ab(f, init=init, grid=grid)
    if r >= n:
        raise TooManyZeros(f"f has {r} zeros; needs fewer than n = {n}")
    for p, m, _ in cfg.zeros:
        if not cfg.is_endpoint(p) and m % 2 == 1:
            raise OddInteriorMultiplicity(f"interior zero at {p} has odd multiplicity {m}")
    xs_grid = np.linspace(a, b, grid)
    solver = _TangencySolver(family, f.a, shared, n - r, a, b, "endpoint", xs_grid)
    xs, ys, fl, info = solver.solve(init=init)
    return _build_decomposition(solver, xs, ys, fl, info, family)


def _halfline_window(family: FamilySpec) -> float:
    """Truncation where the top member dominates (tail checks beyond)."""
    alpha_n = float(family.params[-1])
    if alpha_n <= 0:
        return 10.0
    return max(10.0, 10.0 ** min(6.0 / alpha_n, 30.0))


def decompose_halfline(
    f: SparsePoly,
    mode: str = "positive",
    init: str = "chebyshev",
    grid: int = POS_GRID,
    zero_tol: float = 1e-9,
) -> KarlinDecomposition:
    """Karlin decomposition on [0, inf) for power families with alpha_0 = 0.

    ``mode="positive"`` needs f > 0 on the half-line; ``mode="nonneg"``
    allows interior double zeros and factors out x^alpha when f(0) = 0.
    """
    family = f.family
    if family.variant not in ("power", "monomial"):
        raise InvariantViolation("half-line decomposition needs a power family")
    if family.domain.kind != "left_closed_halfline" or family.domain.a != 0.0:
        raise InvariantViolation("half-line decomposition needs the domain [0, inf)")
    if float(family.params[0]) != 0.0:
        raise InvariantViolation("half-line decomposition needs alpha_0 = 0")
    a_n = float(f.a[-1])
    if a_n <= 0:
        raise LeadingCoefficientNonpositive(f"a_n = {a_n} must be positive")

    n = family.order
    X = _halfline_window(family)
    xs_grid = np.concatenate(
        [np.linspace(0.0, X, grid // 2), np.geomspace(max(X, 1e-3), 1e6, grid // 10)]
    )
    xs_grid = np.unique(xs_grid)

    if mode == "positive":
        vals = f(xs_grid)
        if float(vals.min()) <= 0:
            raise NotPositive(f"min f = {vals.min():.3e} on [0, {xs_grid[-1]:.1e}]")
        shared: tuple = ()
        factor_i = 0
    elif mode == "nonneg":
        if abs(f.a[0]) <= 1e-300 or f.a[0] == 0.0:
            return _halfline_factor_out(f, init=init, grid=grid, zero_tol=zero_tol)
        if f.a[0] < 0:
            raise ValueAtZeroNonpositive(f"f(0) = {f.a[0]} must be positive")
        cfg = count_zeros(f, tol=zero_tol, window=(0.0, X))
        shared = tuple((p, m) for p, m, _ in cfg.zeros)
        r = sum(m for _, m in shared)
        if r >= n:
            raise TooManyZeros(f"f has {r} zeros; needs fewer than n = {n}")
        for p, m, _ in cfg.zeros:
            if p > 0 and m % 2 == 1:
                raise OddInteriorMultiplicity(f"zero at {p} has odd multiplicity {m}")
        if r == 0:
            shared = ()
        factor_i = 0
    else:
        raise ValueError(f"mode must be 'positive' or 'nonneg', not {mode!r}")

    r = sum(m for _, m in shared)
    work_grid = np.linspace(0.0, _solve_span(f, X), grid)
    solver = _TangencySolver(family, f.a, shared, n - r, 0.0, None, "leading", work_grid)
    xs, ys, fl, info = solver.solve(init=init)
    return _build_decomposition(solver, xs, ys, fl, info, family)


def _halfline_factor_out(f: SparsePoly, **kw) -> KarlinDecomposition:
    """Factor x^alpha_i0 out when f(0) = 0 and decompose the cofactor."""
    family = f.family
    coeffs = f.a
    i0 = int(np.nonzero(np.abs(coeffs) > 0)[0][0])
    if coeffs[i0] <= 0:
        raise ValueAtZeroNonpositive("first nonzero coefficient must be positive")
    base = float(family.params[i0])
    sub_params = tuple(float(p) - base for p in family.params[i0:])
    sub = FamilySpec("power", sub_params, family.domain)
    g = SparsePoly(tuple(coeffs[i0:]), sub)
    dec = decompose_halfline(g, mode="nonneg", **kw)

    def lift(p: SparsePoly) -> SparsePoly:
        out = np.zeros(family.size)
        out[i0:] = p.a
        return SparsePoly(tuple(out), family)

    zl = ZeroConfig(
        _with_zero_at_origin(dec.zeros_lower.zeros, base), family.domain
    )
    zu = ZeroConfig(
        _with_zero_at_origin(dec.zeros_upper.zeros, base), family.domain
    )
    return KarlinDecomposition(
        lift(dec.f_lower),
        lift(dec.f_upper),
        zl,
        zu,
        dec.residual_sup,
        dec.iterations,
        dec.converged,
        dec.solver_path + "+factor_out",
        dec.touch_residual,
    )


def _with_zero_at_origin(zeros, base: float):
    if base == 0:
        return zeros
    out = [z for z in zeros if z[0] != 0.0]
    k = int(base) if float(base).is_integer() else None
    added = False
    for z in zeros:
        if z[0] == 0.0:
            out.append((0.0, z[1] + (k or 0), z[2]))
            added = True
    if not added and k:
        out.append((0.0, k, NODAL))
    return tuple(sorted(out))


def _solve_span(f: SparsePoly, X: float) -> float:
    """Working span: where f is smallest relative to its top member."""
    family = f.family
    alpha_n = float(family.params[-1])
    probe = np.geomspace(1e-3, X, 400)
    rel = f(probe) / (1.0 + probe**alpha_n)
    x_c = float(probe[np.argmin(rel)])
    return max(4 * x_c, 2.0, min(X, 4 * x_c + 2.0))


# -- real line ---------------------------------------------------------------


def decompose_realline(f: SparsePoly, mode: str = "positive") -> KarlinDecomposition:
    """Karlin decomposition on the real line for dense monomial families.

    f = a prod (x-x_i)^2 + b prod (x-y_i)^2 (after factoring shared zeros in
    nonneg mode); a equals the leading coefficient.
    """
    family = f.family
    if family.variant != "monomial" or family.domain.kind != "real_line":
        raise InvariantViolation("real-line decomposition needs monomials on R")
    degrees = [int(d) for d in family.params]
    if degrees != list(range(len(degrees))):
        raise InvariantViolation("real-line decomposition needs dense degrees 0..2m")
    n = family.order
    if n % 2 != 0:
        raise OddDegree(f"top degree {n} must be even")
    a_lead = float(f.a[-1])
    if a_lead <= 0:
        raise NegativeLeading(f"leading coefficient {a_lead} must be positive")

    coeffs = f.a.copy()
    shared: list = []
    if mode == "nonneg":
        B = 1.0 + float(np.max(np.abs(coeffs[:-1] / coeffs[-1]))) if n > 0 else 1.0
        cfg = count_zeros(f, window=(-B, B))
        for p, m, _ in cfg.zeros:
            if m % 2 == 1:
                raise OddInteriorMultiplicity(f"zero at {p} has odd multiplicity {m}")
            shared.append((p, m))
        for p, m in shared:
            for _ in range(m):
                coeffs = _deflate(coeffs, p)
    elif mode != "positive":
        raise ValueError(f"mode must be 'positive' or 'nonneg', not {mode!r}")

    q = coeffs  # ascending dense coefficients, positive on R
    deg = len(q) - 1
    M = deg // 2
    B = 1.0 + (float(np.max(np.abs(q[:-1] / q[-1]))) if deg > 0 else 1.0)
    grid = np.linspace(-B, B, 3001)
    if np.polyval(q[::-1], grid).min() <= 0 and mode == "positive":
        raise NotPositive("f must be strictly positive on R")

    xs, ys, info = _realline_tangency(q, M, B)
    fl_dense = q[-1] * _poly_from_roots_sq(xs)
    # rebuild in the original (pre-deflation) basis
    for p, m in shared:
        for _ in range(m):
            fl_dense = np.convolve(fl_dense, [-p, 1.0])
    fl = np.zeros(family.size)
    fl[: len(fl_dense)] = fl_dense
    f_lower = SparsePoly(tuple(fl), family)
    f_upper = SparsePoly(tuple(f.a - fl), family)

    zl_nodes = _merge_nodes(shared + [(x, 2) for x in xs])
    zu_nodes = _merge_nodes(shared + [(y, 2) for y in ys])
    zl = ZeroConfig(tuple((p, m, NON_NODAL) for p, m in zl_nodes), family.domain)
    zu = ZeroConfig(tuple((p, m, NON_NODAL) for p, m in zu_nodes), family.domain)
    resid = 0.0
    return KarlinDecomposition(
        f_lower, f_upper, zl, zu, resid, info["iterations"], info["converged"],
        info["path"], info["residual"],
    )


def _deflate(coeffs: np.ndarray, root: float) -> np.ndarray:
    """Synthetic division by (x - root); ascending coefficients."""
    c = coeffs[::-1]
    out = np.empty(len(c) - 1)
    acc = c[0]
    for i in range(len(c) - 1):
        out[i] = acc
        acc = c[i + 1] + acc * root
    return out[::-1]


def _poly_from_roots_sq(roots) -> np.ndarray:
    out = np.array([1.0])
    for r in roots:
        out = np.convolve(out, [-r, 1.0])
    return np.convolve(out, out)


def _realline_tangency(q: np.ndarray, M: int, B: float):
    """Newton on the real-line tangency system for q > 0 (ascending coeffs)."""
    if M == 0:
        return np.array([]), np.array([]), {
            "iterations": 0, "converged": True, "path": "direct", "residual": 0.0,
        }
    scale = float(np.max(np.abs(np.polyval(q[::-1], np.linspace(-B, B, 1001)))))
    lead = q[-1]
    a_odd = q[-2] if len(q) >= 2 else 0.0

    def resid(z):
        xs = np.sort(z[:M])
        ys = np.sort(z[M:])
        r = [a_odd + 2 * lead * np.sum(xs)]
        if len(ys):
            fl = lead * _poly_from_roots_sq(xs)
            d = q - np.pad(fl, (0, len(q) - len(fl)))
            dpoly = d[::-1]
            r.extend(np.polyval(dpoly, ys))
            r.extend(np.polyval(np.polyder(dpoly), ys))
        return np.array(r)

    def phase_ok(z):
        xs = np.sort(z[:M])
        ys = np.sort(z[M:])
        seq = []
        for i in range(M):
            seq.append(xs[i])
            if i < len(ys):
                seq.append(ys[i])
        return all(seq[i] < seq[i + 1] - 1e-13 * B for i in range(len(seq) - 1))

    def newton(z, tol, maxit=60):
        z = z.copy()
        for it in range(maxit):
            R = resid(z)
            nR = float(np.max(np.abs(R)))
            if nR < tol * scale:
                return z, True, it, nR / scale
            h = 1e-7 * B
            J = np.empty((len(R), len(z)))
            for j in range(len(z)):
                zp, zm = z.copy(), z.copy()
                zp[j] += h
                zm[j] -= h
                J[:, j] = (resid(zp) - resid(zm)) / (2 * h)
            try:
                dz = np.linalg.solve(J, -R)
            except np.linalg.LinAlgError:
                return z, False, it, nR / scale
            t, moved = 1.0, False
            for _ in range(45):
                zn = z + t * dz
                if phase_ok(zn) and np.max(np.abs(resid(zn))) < nR:
                    z, moved = zn, True
                    break
                t /= 2
            if not moved:
                return z, nR < 100 * tol * scale, it, nR / scale
        return z, False, maxit, float(np.max(np.abs(resid(z)))) / scale

    grid = np.linspace(-B, B, 2001)
    qv = np.polyval(q[::-1], grid)

    def lm(z0):
        try:
            sol = least_squares(resid, z0, method="lm", xtol=1e-15, ftol=1e-15,
                                gtol=1e-15, max_nfev=600)
            return sol.x
        except Exception:
            return z0

    def valid(z):
        if not phase_ok(z) and M > 1:
            return False
        xs = np.sort(z[:M])
        fl = lead * _poly_from_roots_sq(xs)
        flv = np.polyval(fl[::-1], grid)
        dv = qv - flv
        sc = float(np.max(np.abs(qv)))
        return flv.min() >= -1e-9 * sc and dv.min() >= -1e-9 * sc

    # center the initial layout on the balance point of the leading terms
    center = -a_odd / (2 * lead * M)
    spread = max(B / 2, 1e-3)
    best = None
    for width in (spread, spread / 4, spread * 2, B, spread / 16):
        xs0 = center + width * np.cos(np.pi * (2 * np.arange(1, M + 1) - 1) / (2 * M))[::-1]
        ys0 = (xs0[:-1] + xs0[1:]) / 2 if M > 1 else np.array([])
        z0 = np.concatenate([xs0, ys0])
        z, ok, it, res = newton(z0, CONVERGED_TOL)
        z = lm(z)
        res = float(np.max(np.abs(resid(z)))) / scale
        if valid(z) and res < 1e-8:
            return np.sort(z[:M]), np.sort(z[M:]), {
                "iterations": it, "converged": res < CONVERGED_TOL, "path": "newton",
                "residual": res,
            }
        if best is None or res < best[1]:
            best = (z, res)
    raise NoConvergence("real-line tangency solver failed", {"center": center, "best_residual": best[1]})


# -- Lukacs/Markov closed forms (dense polynomials, companion-matrix path) ----


@dataclass(frozen=True)
class LukacsDecomposition:
    """Closed-form decomposition of a dense nonnegative polynomial."""

    domain_kind: str
    zfactors: tuple  # (root, multiplicity) inside the domain
    alpha: float
    beta: float
    xs: tuple
    ys: tuple
    f_lower: tuple  # dense ascending coefficients, alpha part (with zfactors)
    f_upper: tuple
    reconstruction_error: float

    def to_dict(self) -> dict:
        return {
            "domain_kind": self.domain_kind,
            "zfactors": [[float(z), int(m)] for z, m in self.zfactors],
            "alpha": self.alpha,
            "beta": self.beta,
            "xs": list(self.xs),
            "ys": list(self.ys),
            "reconstruction_error": self.reconstruction_error,
        }


def _polish_root(coeffs_asc: np.ndarray, z, steps: int = 8):
    """Newton-polish a simple root of an explicit polynomial in long double."""
    c = np.asarray(coeffs_asc, dtype=np.clongdouble)
    dc = c[1:] * np.arange(1, len(c), dtype=np.clongdouble)
    z = np.clongdouble(z)
    for _ in range(steps):
        v = np.clongdouble(0)
        for ck in c[::-1]:
            v = v * z + ck
        d = np.clongdouble(0)
        for ck in dc[::-1]:
            d = d * z + ck
        if d == 0:
            break
        step = v / d
        z = z - step
        if abs(step) < 1e-30 * (1 + abs(z)):
            break
    return complex(z)


def _real_roots_polished(coeffs_asc: np.ndarray) -> np.ndarray:
    if len(coeffs_asc) <= 1:
        return np.array([])
    roots = np.roots(coeffs_asc[::-1])
    out = []
    for r in roots:
        z = _polish_root(coeffs_asc, r)
        out.append(z.real)
    return np.sort(np.array(out))


def _hb_split(q: np.ndarray):
    """Hermite-Biehler split of q > 0 on R: q = A^2 + B^2, roots interlacing.

    Companion-matrix path: complex roots of q (polished by long-double
    Newton), upper-half-plane product.
    """
    lead = q[-1]
    roots = np.roots(q[::-1])
    upper = [w for w in roots if np.imag(w) > 0]
    h = np.array([np.clongdouble(1.0)])
    for w in upper:
        wz = _polish_root(q, w)
        h = np.convolve(h, np.array([1.0, -wz], dtype=np.clongdouble))
    h = h * np.clongdouble(math.sqrt(lead))
    A = np.asarray(np.real(h), dtype=float)[::-1]  # ascending
    Bc = np.asarray(np.imag(h), dtype=float)[::-1]
    return A, Bc


def _trim(c: np.ndarray, tol: float) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    big = np.max(np.abs(c)) if len(c) else 0.0
    idx = np.nonzero(np.abs(c) > tol * max(big, 1e-300))[0]
    return c[: idx[-1] + 1] if len(idx) else np.array([0.0])


def _domain_zeros(p: np.ndarray, domain) -> tuple:
    """Real zeros of p inside the domain, with multiplicities (roots path)."""
    deg = len(p) - 1
    if deg <= 0:
        return ()
    roots = np.roots(p[::-1])
    real = roots[np.abs(np.imag(roots)) < 1e-7 * (1 + np.abs(roots))]
    cand = sorted(np.real(real))
    groups: list[list] = []
    for r in cand:
        if groups and abs(r - np.mean(groups[-1])) < 1e-3 * (1 + abs(r)):
            groups[-1].append(r)
        else:
            groups.append([r])
    zeros = []
    pscale = float(np.max(np.abs(p)))
    for g in groups:
        z = float(np.mean(g))
        if not domain.contains(z):
            continue
        m = len(g)
        # polish on the (m-1)-th derivative where the zero is simple
        dp = p[::-1]
        for _ in range(m - 1):
            dp = np.polyder(dp)
        for _ in range(50):
            v, d = np.polyval(dp, z), np.polyval(np.polyder(dp), z)
            if d == 0:
                break
            step = v / d
            z -= step
            if abs(step) < 1e-15 * (1 + abs(z)):
                break
        val = abs(np.polyval(p[::-1], z))
        if val < 1e-7 * pscale * (1 + abs(z)) ** deg:
            zeros.append((z, m))
    return tuple(zeros)


def lukacs_decompose(p, domain) -> LukacsDecomposition:
    """Closed-form decomposition of a dense polynomial p >= 0 on the domain.

    Zeros inside the domain are factored out; the strictly positive cofactor
    is split into the two weighted squares of the classical representation.
    All locations come from companion-matrix roots, never from the Newton
    tangency path, so this is an independent oracle for the Karlin solvers.
    """
    p = np.asarray(p, dtype=float)
    p = _trim(p, 1e-300)
    kind = domain.kind
    lo, hi = domain.window()
    chk = np.linspace(lo, hi, 4001)
    vals = np.polyval(p[::-1], chk)
    pscale = float(np.max(np.abs(vals)))
    if float(vals.min()) < -1e-9 * pscale:
        raise NegativeSomewhere(f"min p = {vals.min():.3e} on the domain window")

    zf = _domain_zeros(p, domain)
    q = p.copy()
    orientation = 1.0
    for z, m in zf:
        if kind != "real_line" and not (domain.contains(z)):
            continue
        interior = domain.contains(z) and not (
            (kind == "closed_interval" and (math.isclose(z, domain.a) or math.isclose(z, domain.b)))
            or (kind == "left_closed_halfline" and math.isclose(z, domain.a))
        )
        if interior and m % 2 == 1:
            raise NegativeSomewhere(f"odd-multiplicity interior zero at {z}")
        if kind == "closed_interval" and math.isclose(z, domain.b) and m % 2 == 1:
            # orient the endpoint factor as (b - x) so the cofactor stays positive
            orientation = -orientation
        for _ in range(m):
            q = _deflate(q, z)
    q = orientation * _trim(q, 1e-12)
    d = len(q) - 1
    if kind != "closed_interval" and q[-1] < 0:
        raise NegativeSomewhere("cofactor has negative leading coefficient")

    if kind == "real_line":
        alpha, beta, xs, ys, fl_q, fu_q = _lukacs_realline(q)
    elif kind == "left_closed_halfline":
        alpha, beta, xs, ys, fl_q, fu_q = _lukacs_halfline(q)
    else:
        alpha, beta, xs, ys, fl_q, fu_q = _lukacs_interval(q, domain.a, domain.b)

    zpoly = np.array([orientation])
    for z, m in zf:
        for _ in range(m):
            zpoly = np.convolve(zpoly, [-z, 1.0])
    fl = np.convolve(zpoly, fl_q)
    fu = np.convolve(zpoly, fu_q) if len(fu_q) else np.zeros(1)
    rec = np.zeros(len(p))
    rec[: len(fl)] += fl
    if len(fu):
        rec[: len(fu)] += fu
    err = float(np.max(np.abs(rec - p))) / max(float(np.max(np.abs(p))), 1e-300)
    return LukacsDecomposition(
        kind, zf, float(alpha), float(beta), tuple(np.sort(xs)), tuple(np.sort(ys)),
        tuple(fl), tuple(fu), err,
    )


def _lukacs_realline(q: np.ndarray):
    d = len(q) - 1
    if d == 0:
        return q[0], 0.0, (), (), q.copy(), np.array([])
    A, Bc = _hb_split(q)
    A = _trim(A, 1e-13)
    Bc = _trim(Bc, 1e-13)
    xs = _real_roots_polished(A) if len(A) > 1 else np.array([])
    ys = _real_roots_polished(Bc) if len(Bc) > 1 else np.array([])
    fl = np.convolve(A, A)
    fu = np.convolve(Bc, Bc)
    return A[-1] ** 2, (Bc[-1] ** 2 if len(Bc) else 0.0), xs, ys, fl, fu


def _even_odd_parts(C: np.ndarray):
    """C(t) = E(t^2) + t*O(t^2); returns (E, O) in the squared variable."""
    E = C[0::2].copy()
    O = C[1::2].copy()
    return _trim(E, 1e-11), _trim(O, 1e-11)


def _lukacs_halfline(q: np.ndarray):
    d = len(q) - 1
    if d == 0:
        return q[0], 0.0, (), (), q.copy(), np.array([])
    Q = np.zeros(2 * d + 1)
    Q[0::2] = q  # Q(t) = q(t^2)
    A, Bc = _hb_split(Q)
    EA, OA = _even_odd_parts(A)
    EB, OB = _even_odd_parts(Bc)
    # one of A, B is even (the F part), the other odd (the sqrt(x) G part)
    if np.max(np.abs(OA)) if len(OA) else 0 <= (np.max(np.abs(EA)) if len(EA) else 0):
        pass
    evenA = (np.max(np.abs(EA)) if len(EA) else 0) >= (np.max(np.abs(OA)) if len(OA) else 0)
    F = EA if evenA else EB
    G = OA if not evenA else OB
    # q = F(x)^2 + x*G(x)^2
    xs = _real_roots_polished(F) if len(F) > 1 else np.array([])
    ys = _real_roots_polished(G) if len(G) > 1 else np.array([])
    sq = np.convolve(F, F)
    wq = np.convolve([0.0, 1.0], np.convolve(G, G)) if len(G) else np.array([])
    if d % 2 == 0:
        # even case: the plain square carries the lead and is the f_* part
        return F[-1] ** 2, (G[-1] ** 2 if len(G) else 0.0), xs, ys, sq, wq
    # odd case: the x-weighted square carries the lead (the f_* part);
    # the record keeps alpha/xs for the plain square per the classical form
    return (F[-1] ** 2 if len(F) else 0.0), G[-1] ** 2, xs, ys, wq, sq


def _lukacs_interval(q: np.ndarray, a: float, b: float):
    d = len(q) - 1
    if d == 0:
        return q[0], 0.0, (), (), q.copy(), np.array([])
    # R(u) = (1+u)^d q((a + b u)/(1 + u)) via binomial convolution
    R = np.zeros(d + 1)
    for k, qk in enumerate(q):
        term = np.array([1.0])
        for _ in range(k):
            term = np.convolve(term, [a, b])
        for _ in range(d - k):
            term = np.convolve(term, [1.0, 1.0])
        R[: len(term)] += qk * term
    Q = np.zeros(2 * d + 1)
    Q[0::2] = R
    A, Bc = _hb_split(Q)
    EA, OA = _even_odd_parts(A)
    EB, OB = _even_odd_parts(Bc)
    evenA = (np.max(np.abs(EA)) if len(EA) else 0) >= (np.max(np.abs(OA)) if len(OA) else 0)
    F = EA if evenA else EB  # even part: plain square in u
    G = OA if not evenA else OB  # odd part: u-weighted square
    m_even = d // 2

    def back_map(u: float) -> float:
        return (a + b * u) / (1 + u)

    def lift(H: np.ndarray, top: int) -> np.ndarray:
        """sum H_k (x-a)^k (b-x)^(top-k) as dense ascending coefficients."""
        out = np.zeros(top + 1)
        for k, hk in enumerate(H):
            term = np.array([1.0])
            for _ in range(k):
                term = np.convolve(term, [-a, 1.0])
            for _ in range(top - k):
                term = np.convolve(term, [b, -1.0])
            out[: len(term)] += hk * term
        return out

    scale = (b - a) ** (-d)
    if d % 2 == 0:
        m = d // 2
        At = lift(F, m)
        Bt = lift(G, m - 1) if len(G) else np.zeros(1)
        fl = scale * np.convolve(At, At)
        w = np.convolve([-a, 1.0], [b, -1.0])
        fu = scale * np.convolve(w, np.convolve(Bt, Bt)) if len(G) else np.array([])
        alpha = scale * At[-1] ** 2 if len(At) == m + 1 else scale * At[-1] ** 2
        beta = scale * Bt[-1] ** 2 if len(Bt) else 0.0
        xs = _real_roots_polished(At) if len(At) > 1 else np.array([])
        ys = _real_roots_polished(Bt) if len(Bt) > 1 else np.array([])
        return alpha, beta, xs, ys, fl, fu
    m = (d - 1) // 2
    # odd: q = scale[(x-a) P~^2 + (b-x) R~^2], P~ from the u-odd part
    Pt = lift(G, m) if len(G) else np.zeros(1)
    Rt = lift(F, m)
    fl = scale * np.convolve([-a, 1.0], np.convolve(Pt, Pt))
    fu = scale * np.convolve([b, -1.0], np.convolve(Rt, Rt))
    alpha = scale * Pt[-1] ** 2 if len(Pt) else 0.0
    beta = scale * Rt[-1] ** 2
    xs = _real_roots_polished(Pt) if len(Pt) > 1 else np.array([])
    ys = _real_roots_polished(Rt) if len(Rt) > 1 else np.array([])
    return alpha, beta, xs, ys, fl, fu
