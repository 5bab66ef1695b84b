"""Index calculus, generalized polynomials with prescribed zeros, zero counting.

A "polynomial" here is a linear combination f = sum a_i f_i over a family.
Prescribed-zero construction expands the bordered confluent determinant along
its symbolic first row, so the coefficients are the signed cofactors of the
node matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .colloc import (
    NodeSet,
    SystemCertificate,
    certify,
    det,
    node_rows,
    null_vector,
)
from .errors import (
    CertificationRequired,
    IndexTooLarge,
    InvariantViolation,
    ZeroPolynomial,
)
from .family import CLOSED_INTERVAL, Domain, FamilySpec

NODAL = "nodal"
NON_NODAL = "non_nodal"


@dataclass(frozen=True)
class ZeroConfig:
    """Zeros of a polynomial: (point, multiplicity, nodal/non_nodal) triples."""

    zeros: tuple
    domain: Domain

    def __post_init__(self):
        pts = [z[0] for z in self.zeros]
        if any(pts[i] >= pts[i + 1] for i in range(len(pts) - 1)):
            raise InvariantViolation("zero points must be strictly increasing")

    @property
    def points(self) -> tuple:
        return tuple(z[0] for z in self.zeros)

    @property
    def total_multiplicity(self) -> int:
        return sum(int(z[1]) for z in self.zeros)

    def is_endpoint(self, x: float) -> bool:
        d = self.domain
        if d.kind == CLOSED_INTERVAL and (x == d.a or x == d.b):
            return True
        if d.kind == "left_closed_halfline" and x == d.a:
            return True
        return False

    def to_dict(self) -> dict:
        return {
            "zeros": [[float(p), int(m), k] for p, m, k in self.zeros],
            "domain": self.domain.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def index_of(config: ZeroConfig) -> int:
    """Index of the zero set: interior points weigh max(2, multiplicity),
    endpoints weigh their multiplicity (1 for simple endpoint zeros)."""
    total = 0
    for p, m, _kind in config.zeros:
        if config.is_endpoint(p):
            total += int(m)
        else:
            total += max(2, int(m))
    return total


@dataclass(frozen=True)
class SparsePoly:
    """f = sum a_i f_i in a family basis."""

    coeffs: tuple
    family: FamilySpec

    def __post_init__(self):
        if len(self.coeffs) != self.family.size:
            raise InvariantViolation(
                f"{len(self.coeffs)} coefficients for family of size {self.family.size}"
            )

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def __call__(self, x, order: int = 0):
        vals = self.family.eval_grid(np.atleast_1d(np.asarray(x, dtype=float)), order)
        out = vals @ self.a
        return float(out[0]) if np.isscalar(x) else out

    def __add__(self, other: "SparsePoly") -> "SparsePoly":
        return SparsePoly(tuple(self.a + other.a), self.family)

    def __sub__(self, other: "SparsePoly") -> "SparsePoly":
        return SparsePoly(tuple(self.a - other.a), self.family)

    def __mul__(self, c: float) -> "SparsePoly":
        return SparsePoly(tuple(c * self.a), self.family)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        return {"family": self.family.to_dict(), "coeffs": list(map(float, self.coeffs))}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_dict(d: dict) -> "SparsePoly":
        return SparsePoly(tuple(d["coeffs"]), FamilySpec.from_dict(d["family"]))


def cofactor_coefficients(family: FamilySpec, nodes: NodeSet) -> np.ndarray:
    """Signed cofactors along the symbolic first row of the bordered matrix."""
    B = node_rows(family, nodes.nodes)
    n1 = family.size
    return np.array(
        [(-1.0) ** i * det(np.delete(B, i, axis=1)) for i in range(n1)]
    )


def pattern_coefficients(family: FamilySpec, nodes) -> np.ndarray:
    """Fast path: unit-norm null vector of the node matrix (same direction)."""
    return null_vector(node_rows(family, nodes))


def poly_from_zeros(
    family: FamilySpec,
    nodes: NodeSet,
    sign: str = "auto_nonneg",
    certificate: SystemCertificate | None = None,
    check_certificate: bool = True,
    probe: int = 2000,
) -> SparsePoly:
    """Polynomial with the prescribed zeros, via determinant cofactors.

    ``sign="auto_nonneg"`` scales so the polynomial is >= 0 on a probe grid
    (possible when interior multiplicities are even and the total index does
    not exceed the order); ``sign="raw"`` keeps the cofactor orientation.
    Coefficients are normalized to unit max-norm.
    """
    n = family.order
    if nodes.total_multiplicity != n:
        raise IndexTooLarge(
            f"total multiplicity {nodes.total_multiplicity} must equal order {n}"
        )
    lo, hi = family.domain.window()
    if sign == "auto_nonneg":
        idx = 0
        for p, m in nodes.nodes:
            at_end = p in (lo, hi) and family.domain.kind == CLOSED_INTERVAL or (
                family.domain.kind == "left_closed_halfline" and p == lo
            )
            if at_end:
                idx += int(m)
            else:
                if m % 2 == 1:
                    raise IndexTooLarge(f"interior zero at {p} has odd multiplicity {m}")
                idx += max(2, int(m))
        if idx > n:
            raise IndexTooLarge(f"index {idx} exceeds order {n}")
    if check_certificate and certificate is None:
        target = "ET" if any(m > 1 for _, m in nodes.nodes) else "T"
        certificate = certify(family, target)
        if not certificate:
            raise CertificationRequired(
                f"family failed {target} certification; counterexample {certificate.counterexample}"
            )

    a = cofactor_coefficients(family, nodes)
    nrm = np.max(np.abs(a))
    if nrm == 0:
        raise InvariantViolation("degenerate node matrix: zero cofactor vector")
    a = a / nrm
    if sign == "auto_nonneg":
        xs = np.linspace(lo, hi, probe)
        vals = family.eval_grid(xs) @ a
        if vals[np.argmax(np.abs(vals))] < 0:
            a = -a
    return SparsePoly(tuple(a), family)


def count_zeros(
    f: SparsePoly,
    tol: float = 1e-9,
    window: tuple | None = None,
    grid: int = 2001,
) -> ZeroConfig:
    """Locate and classify the zeros of f on the (windowed) domain.

    Nodal zeros come from sign-change bisection; non-nodal candidates from
    local minima of |f| pushed through a Newton polish on f'.  All thresholds
    are relative to a LOCAL magnitude of f (a windowed running maximum), so
    zeros are found even where the family's top member dwarfs f locally.
    Multiplicity m is read off the Taylor ladder and the position is then
    re-polished on f^(m-1), where the zero is simple.  Raises
    InvariantViolation if the configuration breaks 2k + l <= n.
    """
    family = f.family
    lo, hi = family.domain.window() if window is None else window
    xs = np.linspace(lo, hi, grid)
    vals = f(xs)
    scale = float(np.max(np.abs(vals)))
    if scale == 0.0 or scale <= tol * np.max(np.abs(f.a)) * 1e-6:
        raise ZeroPolynomial("polynomial is numerically zero on the window")
    width = hi - lo
    step = width / (grid - 1)
    K = max(3, grid // 50)
    sloc = _running_max(np.abs(vals), K)
    W = K * step

    def local_scale(x: float) -> float:
        i = int(np.clip(round((x - lo) / step), 0, grid - 1))
        return max(float(sloc[i]), 1e-300 * scale)

    roots: list[float] = []
    s = np.sign(vals)
    for i in range(grid - 1):
        if s[i] != 0 and s[i] * s[i + 1] < 0:
            a_, b_ = xs[i], xs[i + 1]
            fa = vals[i]
            for _ in range(100):
                m_ = (a_ + b_) / 2
                fm = f(m_)
                if fa * fm <= 0:
                    b_ = m_
                else:
                    a_, fa = m_, fm
            roots.append(float((a_ + b_) / 2))

    absv = np.abs(vals)
    for i in range(grid):
        left = absv[max(i - 1, 0)]
        right = absv[min(i + 1, grid - 1)]
        if absv[i] <= left and absv[i] <= right and absv[i] < 1e-2 * sloc[i]:
            x0 = _polish_critical(f, float(xs[i]), lo, hi, width)
            if abs(f(x0)) <= tol * local_scale(x0):
                roots.append(x0)
    for xe in (lo, hi):
        if abs(f(xe)) <= tol * local_scale(xe):
            roots.append(float(xe))

    merged = _merge_basins(f, sorted(roots), tol, local_scale, width)

    zeros = []
    for r in merged:
        r, mult = _resolve_multiplicity(f, r, W, local_scale, lo, hi, width, tol)
        kind = _classify(f, r, lo, hi, width, local_scale(r))
        zeros.append((float(min(max(r, lo), hi)), mult, kind))
    zeros = sorted(zeros)
    dedup = []
    for z in zeros:
        if dedup and abs(z[0] - dedup[-1][0]) <= 1e-12 * width:
            continue
        dedup.append(z)

    cfg = ZeroConfig(tuple(dedup), family.domain)
    n = family.order
    k = sum(1 for z in dedup if z[2] == NON_NODAL)
    l = sum(1 for z in dedup if z[2] == NODAL)
    if 2 * k + l > n:
        raise InvariantViolation(f"zero count bound violated: 2*{k} + {l} > {n}", cfg)
    return cfg


def _running_max(a: np.ndarray, K: int) -> np.ndarray:
    out = a.copy()
    for shift in range(1, K + 1):
        out[shift:] = np.maximum(out[shift:], a[:-shift])
        out[:-shift] = np.maximum(out[:-shift], a[shift:])
    return out


def _merge_basins(f, roots, tol, local_scale, width):
    """Merge candidate roots connected by an |f| <= 10*tol*local band."""
    merged: list[float] = []
    for r in roots:
        if merged:
            prev = merged[-1]
            if abs(r - prev) <= 1e-9 * width:
                continue
            probes = np.linspace(prev, r, 9)[1:-1]
            if len(probes) == 0 or np.all(
                np.abs(f(probes)) <= 10 * tol * local_scale((prev + r) / 2)
            ):
                merged[-1] = min([prev, r] + list(probes), key=lambda t: abs(f(t)))
                continue
        merged.append(r)
    return merged


def _polish_critical(f: SparsePoly, x0: float, lo: float, hi: float, width: float) -> float:
    """Newton on f' to land on the local minimum of |f| near x0."""
    x = x0
    for _ in range(60):
        d1 = f(x, 1)
        d2 = f(x, 2)
        if d2 == 0:
            break
        step = -d1 / d2
        if abs(step) > 0.05 * width:
            step = math.copysign(0.05 * width, step)
        x_new = min(max(x + step, lo), hi)
        if abs(x_new - x) < 1e-15 * width:
            x = x_new
            break
        x = x_new
    return x


def _resolve_multiplicity(f, r0, W, local_scale, lo, hi, width, tol):
    """Largest consistent multiplicity, with the position polished on f^(m-1).

    For each candidate m (from the order down), polish on f^(m-1) where a
    multiplicity-m zero is simple, then require the Taylor terms below m to
    be negligible against the m-th and the m-th term to carry the local
    scale.  m = 1 is the simple-zero fallback.
    """
    n = f.family.order
    sloc = local_scale(r0)
    for m_try in range(n, 1, -1):
        rt = _polish_on_derivative(f, r0, m_try, lo, hi, width)
        if abs(rt - r0) > 0.5 * W:
            continue
        terms = [abs(f(rt, j)) * W**j / math.factorial(j) for j in range(n + 1)]
        t_m = terms[m_try]
        if t_m < 1e-3 * sloc:
            continue
        if abs(f(rt)) > 10 * tol * sloc:
            continue
        if all(terms[j] <= 1e-7 * t_m for j in range(m_try)):
            return rt, m_try
    rt = _polish_on_derivative(f, r0, 1, lo, hi, width)
    if abs(rt - r0) > 0.5 * W or abs(f(rt)) > abs(f(r0)):
        rt = r0
    return rt, 1


def _polish_on_derivative(f, r, mult, lo, hi, width) -> float:
    """Newton on f^(m-1), where a multiplicity-m zero is simple."""
    x = r
    for _ in range(60):
        v = f(x, mult - 1)
        d = f(x, mult)
        if d == 0:
            break
        step = -v / d
        if abs(step) > 0.02 * width:
            step = math.copysign(0.02 * width, step)
        xn = min(max(x + step, lo), hi)
        if abs(xn - x) < 1e-16 * max(width, abs(x)):
            x = xn
            break
        x = xn
    return x if abs(x - r) <= 0.05 * width else r


def _classify(f: SparsePoly, r: float, lo: float, hi: float, width: float, sloc: float) -> str:
    # endpoint zeros are nodal by convention
    if abs(r - lo) <= 1e-12 * width or abs(r - hi) <= 1e-12 * width:
        return NODAL
    delta = 1e-4 * width
    floor = 1e-9 * width
    while delta >= floor:
        left = f(max(r - delta, lo))
        right = f(min(r + delta, hi))
        if abs(left) > 1e-11 * sloc and abs(right) > 1e-11 * sloc:
            return NODAL if left * right < 0 else NON_NODAL
        delta /= 2
    return NON_NODAL
