"""Collocation matrices, Wronskians, and T/ET/ECT certification.

Determinants are evaluated by partial-pivot LU with extended-precision
(long double) accumulation.  Dimensions are capped at 12: the constructions
in this toolkit never need more than n+1 rows, and confluent Vandermonde
matrices grow too ill-conditioned beyond desk scale for the certificates to
stay trustworthy.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CertificationRequired,
    DimensionMismatch,
    NonPositiveLeadFunction,
)
from .family import FamilySpec, custom_family

DET_DIM_CAP = 12
#: |det| <= REL_TOL * (product of row max-norms) counts as vanishing.
REL_TOL = 1e-12


@dataclass(frozen=True)
class NodeSet:
    """Ordered collocation points with multiplicities."""

    nodes: tuple  # of (point, multiplicity)

    def __post_init__(self):
        pts = [p for p, _ in self.nodes]
        if any(pts[i] >= pts[i + 1] for i in range(len(pts) - 1)):
            raise DimensionMismatch("node points must be strictly increasing")
        if any(m < 1 or int(m) != m for _, m in self.nodes):
            raise DimensionMismatch("multiplicities must be positive naturals")

    @property
    def total_multiplicity(self) -> int:
        return sum(int(m) for _, m in self.nodes)

    @property
    def points(self) -> tuple:
        return tuple(p for p, _ in self.nodes)

    def to_dict(self) -> dict:
        return {"nodes": [[float(p), int(m)] for p, m in self.nodes]}

    @staticmethod
    def of(*nodes) -> "NodeSet":
        """NodeSet.of((x1, m1), (x2, m2), ...) or NodeSet.of(x1, x2, ...); sorts."""
        norm = sorted(
            (float(n), 1) if np.isscalar(n) else (float(n[0]), int(n[1])) for n in nodes
        )
        return NodeSet(tuple(norm))


def det(matrix: np.ndarray) -> float:
    """Determinant by partial-pivot LU in long-double accumulation (dim <= 12)."""
    A = np.array(matrix, dtype=np.longdouble, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"square matrix required, got {A.shape}")
    n = A.shape[0]
    if n > DET_DIM_CAP:
        raise DimensionMismatch(f"dimension {n} exceeds cap {DET_DIM_CAP}")
    d = np.longdouble(1.0)
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if A[p, k] == 0:
            return 0.0
        if p != k:
            A[[k, p]] = A[[p, k]]
            d = -d
        d *= A[k, k]
        A[k + 1 :, k] /= A[k, k]
        A[k + 1 :, k + 1 :] -= np.outer(A[k + 1 :, k], A[k, k + 1 :])
    return float(d)


def det_scale(matrix: np.ndarray) -> float:
    """Product of row max-norms; the reference scale for the vanishing test."""
    m = np.asarray(matrix, dtype=float)
    return float(np.prod(np.max(np.abs(m), axis=1)))


def vanishes(matrix: np.ndarray) -> bool:
    return _vanishing(matrix, det(matrix))


def _vanishing(rows: np.ndarray, d: float) -> bool:
    """Scale-invariant vanishing test; a row collapsing relative to the rest
    (all entries tiny) also counts, since the limit matrix has a zero row."""
    rowmax = np.max(np.abs(rows), axis=1)
    sc = float(np.prod(rowmax))
    if sc == 0.0:
        return True
    if abs(d) <= REL_TOL * sc:
        return True
    return float(np.min(rowmax)) <= 1e-30 * float(np.max(rowmax))


def krein_matrix(family: FamilySpec, nodes: NodeSet) -> np.ndarray:
    """Collocation matrix (f_i(x_j))_{j,i}; all multiplicities must be 1."""
    if any(m != 1 for _, m in nodes.nodes):
        raise DimensionMismatch("krein_matrix needs all multiplicities 1")
    if len(nodes.nodes) != family.size:
        raise DimensionMismatch(
            f"{len(nodes.nodes)} nodes for a family of size {family.size}"
        )
    return family.eval_grid(np.array(nodes.points))


def confluent_matrix(family: FamilySpec, nodes: NodeSet) -> np.ndarray:
    """Starred collocation matrix: repeated points become derivative rows.

    For each node (x, m) the rows f_i(x), f_i'(x), ..., f_i^(m-1)(x) appear
    consecutively, in node order.
    """
    if nodes.total_multiplicity != family.size:
        raise DimensionMismatch(
            f"total multiplicity {nodes.total_multiplicity} != family size {family.size}"
        )
    return node_rows(family, nodes.nodes)


def node_rows(family: FamilySpec, nodes) -> np.ndarray:
    """Derivative-row block for arbitrary (point, multiplicity) pairs."""
    rows = []
    for x, m in nodes:
        for k in range(int(m)):
            rows.append(family.eval_grid(np.array([x]), k)[0])
    return np.array(rows) if rows else np.zeros((0, family.size))


def wronskian(family: FamilySpec, k: int, x: float) -> float:
    """Wronskian of f_0..f_k at x: det (f_i^(j)(x))_{i,j=0..k}."""
    if k >= family.size:
        raise DimensionMismatch(f"k = {k} exceeds order {family.order}")
    cols = np.column_stack([family.eval_grid(np.array([x]), j)[0, : k + 1] for j in range(k + 1)])
    return det(cols)


# -- null vectors of node matrices (pattern polynomials) ----------------------


def null_vector(B: np.ndarray) -> np.ndarray:
    """Unit-infinity-norm null vector of an n x (n+1) node matrix.

    Full-pivot elimination in long double; this is the coefficient vector of
    the polynomial vanishing at the nodes (up to scale, the cofactor vector).
    """
    B = np.array(B, dtype=np.longdouble, copy=True)
    nr, nc = B.shape
    if nc != nr + 1:
        raise DimensionMismatch(f"expected n x (n+1) matrix, got {B.shape}")
    perm = list(range(nc))
    rank = nr
    for k in range(nr):
        sub = np.abs(B[k:, k:])
        i, j = np.unravel_index(int(np.argmax(sub)), sub.shape)
        i += k
        j += k
        if B[i, j] == 0:
            rank = k
            break
        if i != k:
            B[[k, i]] = B[[i, k]]
        if j != k:
            B[:, [k, j]] = B[:, [j, k]]
            perm[k], perm[j] = perm[j], perm[k]
        B[k + 1 :, k:] -= np.outer(B[k + 1 :, k] / B[k, k], B[k, k:])
    x = np.zeros(nc, dtype=np.longdouble)
    x[rank] = 1.0
    for k in range(rank - 1, -1, -1):
        x[k] = -(B[k, k + 1 :] @ x[k + 1 :]) / B[k, k]
    a = np.zeros(nc, dtype=np.longdouble)
    for i, p in enumerate(perm):
        a[p] = x[i]
    a = np.asarray(a, dtype=float)
    nrm = np.max(np.abs(a))
    return a / nrm if nrm > 0 else a


# -- certification -------------------------------------------------------------


@dataclass(frozen=True)
class SystemCertificate:
    """Outcome of a T/ET/ECT check.

    ``level`` is the requested target when the check passed, else ``"none"``
    with a refuting NodeSet attached.  A pass for T/ET is grid-level evidence
    (``exhaustive`` tells whether the tuple enumeration was complete); a
    refutation is sound: the counterexample determinant is below the
    scale-invariant vanishing tolerance.
    """

    level: str
    evidence: float
    counterexample: NodeSet | None = None
    canonical_sign: tuple = ()
    grid_points: int = 0
    seed: int = 0
    exhaustive: bool = True
    window: tuple = ()

    def __bool__(self) -> bool:
        return self.level != "none"

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "evidence": self.evidence,
            "counterexample": None if self.counterexample is None else self.counterexample.to_dict(),
            "canonical_sign": list(self.canonical_sign),
            "grid_points": self.grid_points,
            "seed": self.seed,
            "exhaustive": self.exhaustive,
            "window": list(self.window),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


_CERT_CACHE: dict = {}


def certify(
    family: FamilySpec,
    target: str = "T",
    grid: int = 201,
    budget: int = 100_000,
    seed: int = 0,
    window: tuple | None = None,
) -> SystemCertificate:
    """Certify (grid-level) or refute (soundly) T/ET/ECT structure.

    ECT is a deterministic scan of the n+1 Wronskian functions with
    sign-change bisection.  T and ET sample ordered node tuples: all of them
    when the count fits the budget, otherwise ``budget`` random sorted tuples
    (fixed seed), always including the full diagonal (x, ..., x) scan for ET.
    """
    target = target.upper()
    if target not in ("T", "ET", "ECT"):
        raise ValueError(f"target must be T, ET, or ECT, not {target!r}")
    key = None
    if family.variant != "custom":
        key = (family.to_json(), target, grid, budget, seed, window)
        if key in _CERT_CACHE:
            return _CERT_CACHE[key]
    lo, hi = family.domain.window() if window is None else window
    xs = np.linspace(lo, hi, grid)
    n = family.order

    sign = _canonical_sign(family, lo, hi)

    if target == "ECT":
        cert = _certify_ect(family, xs, sign, seed, (lo, hi))
    else:
        cert = _certify_tuples(family, xs, target, sign, budget, seed, (lo, hi))
    if key is not None:
        _CERT_CACHE[key] = cert
    return cert


def _canonical_sign(family: FamilySpec, lo: float, hi: float) -> np.ndarray:
    """+1 per member, with f_n flipped if the ordered determinant is negative."""
    n = family.order
    pts = np.linspace(lo, hi, n + 3)[1:-1] if n > 0 else np.array([(lo + hi) / 2])
    sign = np.ones(family.size)
    d = det(family.eval_grid(pts[: n + 1]))
    if d < 0:
        sign[-1] = -1.0
    return sign


def _bisect_vanishing(family, tup_lo, tup_hi, sign, d_lo, d_hi):
    """Bisect between two sorted node tuples until the determinant vanishes.

    Each midpoint is evaluated with its own coincidence pattern; the sign of
    the starred determinant is continuous along sorted interpolation paths.
    """
    a = np.array(tup_lo, dtype=float)
    b = np.array(tup_hi, dtype=float)

    def at(t):
        mid = (1 - t) * a + t * b
        orders = _orders_of(tuple(mid))
        rows = np.array(
            [family.eval_grid(np.array([x]), k)[0] * sign for x, k in zip(mid, orders)]
        )
        return mid, rows, det(rows)

    t0, t1 = 0.0, 1.0
    for _ in range(100):
        tm = (t0 + t1) / 2
        mid, rows, dm = at(tm)
        rowmax = np.max(np.abs(rows), axis=1)
        if dm == 0.0 or np.min(rowmax) <= 1e-30 * max(np.max(rowmax), 1e-300):
            return mid, True
        if (dm > 0) == (d_lo > 0):
            t0 = tm
        else:
            t1 = tm
    # bracket collapsed; confirm the crossing is real (not determinant noise)
    ts = (t0 + t1) / 2
    delta = 1e-5
    _, rows_m, d_m = at(max(ts - delta, 0.0))
    _, rows_p, d_p = at(min(ts + delta, 1.0))
    sc_m = det_scale(rows_m)
    sc_p = det_scale(rows_p)
    genuine = (
        d_m * d_p < 0
        and abs(d_m) >= 1e-13 * max(sc_m, 1e-300)
        and abs(d_p) >= 1e-13 * max(sc_p, 1e-300)
    )
    mid, _, _ = at(ts)
    return mid, genuine


def _tuple_to_nodeset(tup) -> NodeSet:
    nodes = []
    for x in tup:
        if nodes and math.isclose(nodes[-1][0], x, rel_tol=0, abs_tol=1e-15):
            nodes[-1][1] += 1
        else:
            nodes.append([float(x), 1])
    return NodeSet(tuple((p, m) for p, m in nodes))


def _orders_of(tup) -> list:
    orders = []
    prev = None
    k = 0
    for x in tup:
        k = k + 1 if prev is not None and x == prev else 0
        orders.append(k)
        prev = x
    return orders


_SCREEN_TOL = 1e-9


def _certify_tuples(family, xs, target, sign, budget, seed, window) -> SystemCertificate:
    n = family.order
    grid = len(xs)
    max_order = n if target == "ET" else 0
    tables = np.stack([family.eval_grid(xs, k) * sign for k in range(max_order + 1)])

    if target == "T":
        count = math.comb(grid, n + 1)
    else:
        count = math.comb(grid + n, n + 1)
    rng = np.random.default_rng(seed)
    exhaustive = count <= budget
    if exhaustive:
        it = (
            itertools.combinations(range(grid), n + 1)
            if target == "T"
            else itertools.combinations_with_replacement(range(grid), n + 1)
        )
        tuples = np.array(list(it), dtype=int)
    else:
        if target == "T":
            draws = rng.integers(0, grid, size=(int(budget * 1.2), n + 1))
            draws.sort(axis=1)
            keep = np.all(np.diff(draws, axis=1) > 0, axis=1)
            tuples = draws[keep][:budget]
        else:
            draws = rng.integers(0, grid, size=(budget, n + 1))
            draws.sort(axis=1)
            # Diagonal tuples first: confluent failures (e.g. a flat
            # Wronskian point) live on the diagonal.
            diag = np.tile(np.arange(grid)[:, None], (1, n + 1))
            tuples = np.vstack([diag, draws])

    orders = np.zeros_like(tuples)
    if target == "ET":
        same = tuples[:, 1:] == tuples[:, :-1]
        for c in range(1, n + 1):
            orders[:, c] = np.where(same[:, c - 1], orders[:, c - 1] + 1, 0)

    min_scaled = math.inf
    ref_x = None
    ref_det = 0.0
    counterexample = None

    chunk = 20_000
    for start in range(0, len(tuples), chunk):
        tt = tuples[start : start + chunk]
        oo = orders[start : start + chunk]
        rows = tables[oo, tt, :]  # (B, n+1, n+1)
        dets = np.linalg.det(rows)
        scales = np.prod(np.max(np.abs(rows), axis=2), axis=1)
        scaled = np.abs(dets) / np.where(scales > 0, scales, 1.0)
        bmin = float(scaled.min())
        if bmin < min_scaled:
            min_scaled = bmin
        if ref_x is None:
            good = dets > _SCREEN_TOL * scales
            if np.any(good):
                gi = int(np.argmax(good))
                ref_x, ref_det = xs[tt[gi]], float(dets[gi])
        # Smallness alone is not a refutation (clustered tuples have genuinely
        # tiny determinants); only exact zeros, row collapse, or a confirmed
        # sign crossing refute.
        suspicious = np.nonzero(dets <= 0)[0]
        suspicious = sorted(suspicious, key=lambda si: scaled[si])
        for si in suspicious:
            tup_x = xs[tt[si]]
            rws = np.array(
                [family.eval_grid(np.array([x]), int(k))[0] * sign for x, k in zip(tup_x, oo[si])]
            )
            d = det(rws)
            sc = det_scale(rws)
            rowmax = np.max(np.abs(rws), axis=1)
            collapsed = float(np.min(rowmax)) <= 1e-30 * max(float(np.max(rowmax)), 1e-300)
            if d == 0.0 or sc == 0.0 or collapsed:
                counterexample = _tuple_to_nodeset(tup_x)
                min_scaled = min(min_scaled, 0.0 if sc <= 0 else abs(d) / sc)
                break
            if d < 0 and ref_x is not None and abs(d) >= 1e-13 * sc:
                mid, sound = _bisect_vanishing(family, ref_x, tup_x, sign, ref_det, d)
                if sound:
                    counterexample = _tuple_to_nodeset(mid)
                    break
        if counterexample is not None:
            break

    if counterexample is not None:
        return SystemCertificate(
            "none", min_scaled, counterexample, tuple(sign), len(xs), seed, exhaustive, window
        )
    return SystemCertificate(
        target, min_scaled, None, tuple(sign), len(xs), seed, exhaustive, window
    )


def _certify_ect(family, xs, sign, seed, window) -> SystemCertificate:
    n = family.order
    tables = [family.eval_grid(xs, k) * sign for k in range(n + 1)]
    min_scaled = math.inf
    for k in range(n + 1):
        vals = np.empty(len(xs))
        scales = np.empty(len(xs))
        for gi in range(len(xs)):
            m = np.column_stack([tables[j][gi, : k + 1] for j in range(k + 1)])
            vals[gi] = det(m)
            scales[gi] = det_scale(m)
        scaled = np.abs(vals) / np.where(scales > 0, scales, 1.0)
        min_scaled = min(min_scaled, float(scaled.min()))
        bad = vals <= 0
        if np.any(bad):
            gi = int(np.argmax(bad))
            x_bad = xs[gi]
            # refine by bisection toward an actual sign change when available
            if 0 < gi < len(xs) - 1 and vals[gi - 1] > 0 > vals[min(gi + 1, len(xs) - 1)]:
                lo_x, hi_x = xs[gi - 1], xs[gi + 1]
                for _ in range(200):
                    mid = (lo_x + hi_x) / 2
                    if wronskian(family, k, mid) > 0:
                        lo_x = mid
                    else:
                        hi_x = mid
                x_bad = (lo_x + hi_x) / 2
            ce = NodeSet(((float(x_bad), k + 1),))
            return SystemCertificate(
                "none", float(scaled.min()), ce, tuple(sign), len(xs), seed, True, window
            )
    return SystemCertificate("ECT", min_scaled, None, tuple(sign), len(xs), seed, True, window)


def require_certificate(family: FamilySpec, target: str, **kw) -> SystemCertificate:
    cert = certify(family, target, **kw)
    if not cert:
        raise CertificationRequired(
            f"family failed {target} certification; counterexample {cert.counterexample}"
        )
    return cert


# -- reduction and canonical ECT weights --------------------------------------


def _quotient_derivs(u: np.ndarray, v: np.ndarray, order: int) -> float:
    """order-th derivative of u/v from derivative lists u[k], v[k] at a point."""
    h = np.empty(order + 1)
    for mm in range(order + 1):
        s = u[mm]
        for j in range(1, mm + 1):
            s -= math.comb(mm, j) * h[mm - j] * v[j]
        h[mm] = s / v[0]
    return float(h[order])


def reduced_system(family: FamilySpec, grid: int = 201) -> FamilySpec:
    """The reduced system g_i = (f_{i+1}/f_0)'.

    Requires f_0 > 0 on the domain (checked on a grid).  Derivatives of the
    g_i are composed analytically from family derivatives via the quotient
    rule, so the reduced family is again exact.
    """
    lo, hi = family.domain.window()
    xs = np.linspace(lo, hi, grid)
    f0 = family.eval_grid(xs)[:, 0]
    if np.min(f0) <= 0:
        raise NonPositiveLeadFunction("f_0 must be positive on the domain")
    n = family.order

    def make_eval(i):
        def ev(x: float, order: int = 0) -> float:
            pt = np.array([x])
            u = np.array([family.eval_grid(pt, k)[0, i + 1] for k in range(order + 2)])
            v = np.array([family.eval_grid(pt, k)[0, 0] for k in range(order + 2)])
            return _quotient_derivs(u, v, order + 1)

        return ev

    evs = tuple(make_eval(i) for i in range(n))
    return custom_family(evs, family.domain, name=f"reduced({family.variant})")


def ect_canonical_weights(
    family: FamilySpec, grid: int = 201, certificate: SystemCertificate | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Tabulated canonical ECT weights g_0..g_n on a grid.

    g_0 = f_0, g_1 = W(f_0,f_1)/f_0^2, and
    g_i = W(f_0..f_i) W(f_0..f_{i-2}) / W(f_0..f_{i-1})^2 for i >= 2.
    Returns (xs, G) with G[i] the tabulated g_i, all strictly positive.
    """
    if certificate is None or certificate.level != "ECT":
        certificate = certify(family, "ECT", grid=grid)
    if certificate.level != "ECT":
        raise CertificationRequired("ect_canonical_weights needs an ECT family")
    sign = np.array(certificate.canonical_sign)
    lo, hi = certificate.window if certificate.window else family.domain.window()
    xs = np.linspace(lo, hi, grid)
    n = family.order
    W = np.empty((n + 1, grid))
    tables = [family.eval_grid(xs, k) * sign for k in range(n + 1)]
    for k in range(n + 1):
        for gi in range(grid):
            W[k, gi] = det(np.column_stack([tables[j][gi, : k + 1] for j in range(k + 1)]))
    G = np.empty((n + 1, grid))
    G[0] = W[0]
    if n >= 1:
        G[1] = W[1] / W[0] ** 2
    for i in range(2, n + 1):
        G[i] = W[i] * W[i - 2] / W[i - 1] ** 2
    if np.min(G) <= 0:
        raise CertificationRequired("canonical weights not strictly positive")
    return xs, G
