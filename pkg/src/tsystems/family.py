"""Function families {f_0, ..., f_n} on an interval, half-line, or the real line.

A family is the raw material of every other module: it knows how to evaluate
each member and its derivatives exactly (no numerical differentiation happens
inside the library), and it carries the domain the system lives on.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainViolation, NonDifferentiable

CLOSED_INTERVAL = "closed_interval"
LEFT_CLOSED_HALFLINE = "left_closed_halfline"
REAL_LINE = "real_line"


@dataclass(frozen=True)
class Domain:
    """One of [a, b], [a, inf), or the whole real line."""

    kind: str
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        if self.kind not in (CLOSED_INTERVAL, LEFT_CLOSED_HALFLINE, REAL_LINE):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == CLOSED_INTERVAL:
            if self.a is None or self.b is None or not self.a < self.b:
                raise ValueError("closed_interval requires a < b")
        if self.kind == LEFT_CLOSED_HALFLINE:
            if self.a is None or not math.isfinite(self.a):
                raise ValueError("left_closed_halfline requires finite a")

    def contains(self, x: float) -> bool:
        if self.kind == REAL_LINE:
            return True
        if self.kind == LEFT_CLOSED_HALFLINE:
            return x >= self.a
        return self.a <= x <= self.b

    @property
    def inf(self) -> float:
        return -math.inf if self.kind == REAL_LINE else float(self.a)

    @property
    def width(self) -> float:
        """Finite width for intervals; callers truncate non-compact domains."""
        if self.kind == CLOSED_INTERVAL:
            return float(self.b - self.a)
        return math.inf

    def window(self, span: float = 10.0) -> tuple[float, float]:
        """A compact working window: the interval itself, or a truncation."""
        if self.kind == CLOSED_INTERVAL:
            return float(self.a), float(self.b)
        if self.kind == LEFT_CLOSED_HALFLINE:
            return float(self.a), float(self.a) + span
        return -span, span

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.a is not None:
            d["a"] = self.a
        if self.b is not None:
            d["b"] = self.b
        return d

    @staticmethod
    def from_dict(d: dict) -> "Domain":
        return Domain(d["kind"], d.get("a"), d.get("b"))


def interval(a: float, b: float) -> Domain:
    return Domain(CLOSED_INTERVAL, float(a), float(b))


def halfline(a: float = 0.0) -> Domain:
    return Domain(LEFT_CLOSED_HALFLINE, float(a))


def real_line() -> Domain:
    return Domain(REAL_LINE)


def _falling(alpha: float, k: int) -> float:
    """alpha (alpha-1) ... (alpha-k+1); the k-th derivative factor of x^alpha."""
    out = 1.0
    for j in range(k):
        out *= alpha - j
    return out


@dataclass(frozen=True)
class FamilySpec:
    """An ordered family of real functions with exact derivative evaluation.

    Variants
    --------
    power        f_i(x) = x**alpha_i              (alpha real, strictly increasing)
    monomial     f_i(x) = x**d_i                  (d_i natural numbers)
    exponential  f_i(x) = exp(alpha_i * x)
    rational     f_i(x) = 1 / (x + alpha_i)
    custom       caller-supplied evaluators e_i(x, order) -> f_i^(order)(x)
    """

    variant: str
    params: tuple = ()
    domain: Domain = field(default_factory=real_line)
    evaluators: tuple = ()
    name: str = ""

    @property
    def size(self) -> int:
        """Number of members n+1."""
        if self.variant == "custom":
            return len(self.evaluators)
        return len(self.params)

    @property
    def order(self) -> int:
        """System order n."""
        return self.size - 1

    # -- evaluation ---------------------------------------------------------

    def eval_one(self, i: int, x: float, order: int = 0) -> float:
        """f_i^(order)(x) for a single member at a single point."""
        return float(self.eval_grid(np.array([x]), order)[0, i])

    def eval_grid(self, xs: np.ndarray, order: int = 0) -> np.ndarray:
        """Matrix of f_i^(order)(x) with shape (len(xs), size).

        Raises DomainViolation for points outside the domain and
        NonDifferentiable for power families asked for derivatives at 0
        with non-integer exponents.
        """
        xs = np.asarray(xs, dtype=float)
        flat = xs.ravel()
        for x in flat:
            if not self.domain.contains(x):
                raise DomainViolation(f"x = {x} outside {self.domain.kind}")
        out = np.empty((flat.size, self.size))
        if self.variant in ("power", "monomial"):
            self._eval_power(flat, order, out)
        elif self.variant == "exponential":
            alphas = np.asarray(self.params, dtype=float)
            for i, al in enumerate(alphas):
                out[:, i] = al**order * np.exp(al * flat) if order else np.exp(al * flat)
        elif self.variant == "rational":
            alphas = np.asarray(self.params, dtype=float)
            fac = (-1.0) ** order * math.factorial(order)
            for i, al in enumerate(alphas):
                den = flat + al
                if np.any(den == 0):
                    raise DomainViolation(f"pole of 1/(x+{al}) inside evaluation set")
                out[:, i] = fac / den ** (order + 1)
        elif self.variant == "custom":
            for i, ev in enumerate(self.evaluators):
                out[:, i] = [ev(float(x), order) for x in flat]
        else:
            raise ValueError(f"unknown variant {self.variant!r}")
        return out.reshape(xs.shape + (self.size,)) if xs.ndim > 1 else out

    def _eval_power(self, flat: np.ndarray, order: int, out: np.ndarray) -> None:
        alphas = np.asarray(self.params, dtype=float)
        at_zero = flat == 0.0
        for i, al in enumerate(alphas):
            is_int = float(al).is_integer() and al >= 0
            fac = _falling(al, order)
            if np.any(at_zero):
                if order >= 1 and not is_int:
                    raise NonDifferentiable(
                        f"derivative of x^{al} at 0 requires a natural exponent"
                    )
            col = np.empty_like(flat)
            nz = ~at_zero
            if fac == 0.0:
                col[:] = 0.0
            else:
                col[nz] = fac * np.power(flat[nz], al - order)
            if np.any(at_zero):
                if is_int:
                    col[at_zero] = math.factorial(order) if al == order else 0.0
                else:
                    # order 0 only (order >= 1 raised above); x^al at 0 with al > 0
                    col[at_zero] = 1.0 if al == 0 else 0.0
            out[:, i] = col

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        if self.variant == "custom":
            raise ValueError("custom families are code-only, not serializable")
        return {
            "variant": self.variant,
            "params": list(self.params),
            "domain": self.domain.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_dict(d: dict) -> "FamilySpec":
        return FamilySpec(d["variant"], tuple(d["params"]), Domain.from_dict(d["domain"]))

    @staticmethod
    def from_json(s: str) -> "FamilySpec":
        return FamilySpec.from_dict(json.loads(s))


@dataclass(frozen=True)
class Validation:
    ok: bool
    violations: tuple = ()

    def __bool__(self) -> bool:
        return self.ok


def validate(family: FamilySpec) -> Validation:
    """Check every FamilySpec invariant; returns a verdict, never raises."""
    v: list[str] = []
    if family.variant == "custom":
        if family.size == 0:
            v.append("custom family has no evaluators")
        return Validation(not v, tuple(v))

    params = list(family.params)
    if len(params) == 0:
        v.append("empty parameter sequence")
    if any(params[i] >= params[i + 1] for i in range(len(params) - 1)):
        v.append("parameter sequence not strictly increasing")

    dom = family.domain
    if family.variant == "power":
        if dom.contains(0.0):
            if params and params[0] != 0:
                v.append(f"α_0 = {params[0]} ≠ 0 with 0 in domain")
            if any(p < 0 for p in params):
                v.append("negative exponent with 0 in domain")
        if any(p < 0 for p in params) and not dom.inf > 0:
            v.append("negative exponents require domain inf > 0")
        if any(not float(p).is_integer() for p in params) and dom.inf < 0:
            v.append("non-integer exponents require domain inf ≥ 0")
    elif family.variant == "monomial":
        if any(p < 0 or not float(p).is_integer() for p in params):
            v.append("monomial degrees must be naturals")
    elif family.variant == "rational":
        if params and not (-params[0] < dom.inf):
            v.append(f"−α_0 = {-params[0]} ≥ a = {dom.inf}")
    elif family.variant not in ("exponential",):
        v.append(f"unknown variant {family.variant!r}")
    return Validation(not v, tuple(v))


def _checked(family: FamilySpec) -> FamilySpec:
    verdict = validate(family)
    if not verdict.ok:
        raise ValueError("; ".join(verdict.violations))
    return family


def power_family(exponents: Sequence[float], domain: Domain) -> FamilySpec:
    return _checked(FamilySpec("power", tuple(float(e) for e in exponents), domain))


def monomial_family(degrees: Sequence[int], domain: Domain) -> FamilySpec:
    return _checked(FamilySpec("monomial", tuple(int(d) for d in degrees), domain))


def exponential_family(rates: Sequence[float], domain: Domain) -> FamilySpec:
    return _checked(FamilySpec("exponential", tuple(float(r) for r in rates), domain))


def rational_family(shifts: Sequence[float], domain: Domain) -> FamilySpec:
    return _checked(FamilySpec("rational", tuple(float(s) for s in shifts), domain))


def custom_family(
    evaluators: Sequence[Callable[[float, int], float]],
    domain: Domain,
    name: str = "",
) -> FamilySpec:
    """Family from caller-supplied evaluators e(x, order).

    Evaluators must return exact analytic derivatives; the library refuses to
    differentiate numerically because confluent determinants are only as good
    as their derivative rows.
    """
    return FamilySpec("custom", (), domain, tuple(evaluators), name)


def eval_basis(family: FamilySpec, x: float, order: int = 0) -> np.ndarray:
    """Vector (f_0^(order)(x), ..., f_n^(order)(x))."""
    return family.eval_grid(np.array([float(x)]), order)[0]
