"""Exact-rational exponent formulas for L^p -> L^p' bounds.

Everything here works in :class:`fractions.Fraction`.  Flat orders enter
only through ``1/order``, which is an exact zero for ``FLAT``.

With ``t = 1/p - 1/2`` the sharp threshold is

* case (i), ``2m >= n``:  ``(5 - 2/n) t``
* case (ii), ``2m < n``, ``m >= 3`` (R-condition when ``n`` is flat):
  ``max((5 - 1/m) t, (6 - 2(m+1)/n) t - 1/2 + m/n)``
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

from .errors import DomainError
from .orders import FLAT, Order, format_order, parse_order, reciprocal

__all__ = [
    "ExponentQuery",
    "ExponentResult",
    "k_sharp",
    "branch_values",
    "branch_crossover",
    "sugimoto_upper",
    "threshold_from_lq_decay",
    "threshold_from_linfty_decay",
    "exponent_table",
    "exponent_table_csv",
    "rational_p_grid",
    "surface_type_of",
]

HALF = Fraction(1, 2)


def surface_type_of(m: Order, n: Order) -> str:
    if n is not FLAT:
        return "I"
    if m is not FLAT:
        return "II"
    return "III"


@dataclass(frozen=True)
class ExponentQuery:
    p: Fraction
    m: Order
    n: Order
    surface_type: Optional[str] = None
    r_condition: bool = False

    def __post_init__(self):
        p = Fraction(self.p)
        if not (1 <= p <= 2):
            raise DomainError(f"p must lie in [1, 2], got {p}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "m", parse_order(self.m))
        object.__setattr__(self, "n", parse_order(self.n))
        expected = surface_type_of(self.m, self.n)
        if self.surface_type is None:
            object.__setattr__(self, "surface_type", expected)
        elif self.surface_type != expected:
            raise DomainError(
                f"surface type {self.surface_type} inconsistent with (m, n) = "
                f"({format_order(self.m)}, {format_order(self.n)}), expected {expected}"
            )
        if self.m is not FLAT and self.m < 2:
            raise DomainError("m must be at least 2")
        if self.n is not FLAT and self.n < 2:
            raise DomainError("n must be at least 2")

    @property
    def t(self) -> Fraction:
        return 1 / self.p - HALF

    @property
    def p_dual(self):
        return None if self.p == 1 else self.p / (self.p - 1)


@dataclass(frozen=True)
class ExponentResult:
    query: ExponentQuery
    k_p: Optional[Fraction]
    regime: str
    binding_branch: Optional[str]
    branch_values: Optional[Tuple[Fraction, Fraction]]
    sugimoto_upper: Fraction
    covered: bool
    reason: str = ""

    @property
    def gap(self) -> Optional[Fraction]:
        return None if self.k_p is None else self.sugimoto_upper - self.k_p


def _regime(m: Order, n: Order) -> str:
    if m is FLAT:
        return "case_i"
    if n is FLAT:
        return "case_ii"
    return "case_i" if 2 * m >= n else "case_ii"


def branch_values(t: Fraction, m: int, n: Order) -> Tuple[Fraction, Fraction]:
    """The two branches of the case-(ii) maximum at ``t = 1/p - 1/2``."""
    first = (5 - reciprocal(m)) * t
    inv_n = reciprocal(n)
    second = (6 - 2 * (m + 1) * inv_n) * t - HALF + m * inv_n
    return first, second


def sugimoto_upper(q: ExponentQuery) -> Fraction:
    """Class-level upper bound: ``(5 - 2/n) t`` for types I and III, the
    two-branch maximum at ``n = FLAT`` for type II."""
    t = q.t
    if q.surface_type == "II":
        first, second = branch_values(t, q.m, FLAT)
        return max(first, second, Fraction(0))
    return (5 - 2 * reciprocal(q.n)) * t


def k_sharp(q: ExponentQuery) -> ExponentResult:
    t = q.t
    regime = _regime(q.m, q.n)
    upper = sugimoto_upper(q)
    if regime == "case_i":
        k = (5 - 2 * reciprocal(q.n)) * t
        return ExponentResult(q, k, regime, None, None, upper, True)
    first, second = branch_values(t, q.m, q.n)
    if first > second:
        binding = "first"
    elif second > first:
        binding = "second"
    else:
        binding = "tie"
    reasons = []
    if q.m < 3:
        reasons.append(f"m={q.m} uncovered by the two-branch formula (needs m >= 3)")
    if q.n is FLAT and not q.r_condition:
        reasons.append("n=FLAT without R-condition uncovered")
    if reasons:
        return ExponentResult(q, None, regime, binding, (first, second), upper, False, "; ".join(reasons))
    k = max(first, second, Fraction(0))
    return ExponentResult(q, k, regime, binding, (first, second), upper, True)


def branch_crossover(m: int, n: Order) -> Optional[Fraction]:
    """``p*`` in [1, 2] where the two case-(ii) branches are equal, else None."""
    inv_n = reciprocal(n)
    # (5 - 1/m) t = (6 - 2(m+1)/n) t - 1/2 + m/n, linear in t
    slope = (6 - 2 * (m + 1) * inv_n) - (5 - reciprocal(m))
    const = m * inv_n - HALF
    if slope == 0:
        return None
    t = -const / slope
    if not (0 <= t <= HALF):
        return None
    return 1 / (t + HALF)


def threshold_from_lq_decay(alpha, q, nu: int = 3):
    """``L^q`` decay of order ``alpha`` gives boundedness for ``k > nu - alpha - 1/q``
    at ``p = 2q/(2q-1)``.  Returns ``(k_threshold, p)``; ``q = inf`` allowed."""
    if q == float("inf"):
        alpha = _rat(alpha)
        return nu - alpha, Fraction(1)
    q = _rat(q)
    alpha = _rat(alpha)
    if q < 2:
        raise DomainError(f"q must be at least 2, got {q}")
    if alpha < 0:
        raise DomainError(f"alpha must be non-negative, got {alpha}")
    return nu - alpha - 1 / q, 2 * q / (2 * q - 1)


def threshold_from_linfty_decay(alpha, nu: int, p):
    """Uniform decay of order ``alpha`` gives boundedness for
    ``k > (2 nu - 2 alpha)(1/p - 1/2)``."""
    alpha = _rat(alpha)
    p = _rat(p)
    if alpha < 0:
        raise DomainError(f"alpha must be non-negative, got {alpha}")
    if not (1 <= p <= 2):
        raise DomainError(f"p must lie in [1, 2], got {p}")
    return (2 * nu - 2 * alpha) * (1 / p - HALF)


def _rat(x):
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12) if x == x else x
    return Fraction(x)


def rational_p_grid(count: int = 101) -> List[Fraction]:
    """``count`` equally spaced rational exponents from 1 to 2."""
    if count < 2:
        raise DomainError("p-grid needs at least two points")
    return [1 + Fraction(i, count - 1) for i in range(count)]


def exponent_table(m: Order, n: Order, p_grid: Iterable, r_condition: bool = True):
    """Rows ``(p, k_sharp, branch, sugimoto_upper, gap)`` over a p-grid."""
    m, n = parse_order(m), parse_order(n)
    rows = []
    for p in p_grid:
        res = k_sharp(ExponentQuery(Fraction(p), m, n, r_condition=r_condition))
        rows.append(res)
    return rows


def exponent_table_csv(m: Order, n: Order, p_grid: Iterable, r_condition: bool = True) -> str:
    rows = exponent_table(m, n, p_grid, r_condition)
    m, n = parse_order(m), parse_order(n)
    cross = branch_crossover(m, n) if (m is not FLAT and _regime(m, n) == "case_ii") else None
    buf = io.StringIO()
    buf.write("# schema: osclab.exponent_table v1\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "k_sharp", "regime", "branch", "sugimoto_upper", "gap", "covered", "crossover"])
    for r in rows:
        w.writerow([
            str(r.query.p),
            "" if r.k_p is None else str(r.k_p),
            r.regime,
            r.binding_branch or "",
            str(r.sugimoto_upper),
            "" if r.gap is None else str(r.gap),
            int(r.covered),
            int(cross is not None and r.query.p == cross),
        ])
    return buf.getvalue()
