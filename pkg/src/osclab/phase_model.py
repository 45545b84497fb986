"""Phase functions, amplitude cutoffs and the built-in model-phase corpus.

A phase is a real function ``phi(x1, x2)`` near the origin with
``phi(0) = 0``, ``grad phi(0) = 0`` and ``d2^2 phi(0) != 0``.  Two concrete
carriers exist: :class:`SmoothPhase` wraps any vectorised callable (with an
optional analytic derivative oracle, finite differences otherwise) and
:class:`PolynomialPhase` stores exact rational coefficients.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np
from scipy import integrate

from .errors import CapabilityError, DomainError, PhaseLoadError

__all__ = [
    "TAU_FLAT",
    "D_MAX",
    "SmoothPhase",
    "PolynomialPhase",
    "AmplitudeCutoff",
    "make_bump",
    "make_chi0",
    "make_chi1",
    "eval_partial",
    "fd_weights",
    "CORPUS",
    "corpus_phase",
    "corpus_names",
    "parse_phase_text",
    "load_phase_file",
    "dump_phase_text",
]

TAU_FLAT = 1e-10
D_MAX = 8

Box = Tuple[Tuple[float, float], Tuple[float, float]]


def fd_weights(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Second-order central finite-difference stencil for the ``order``-th derivative.

    Returns integer offsets and the matching weights (unit step).
    """
    if order == 0:
        return np.array([0]), np.array([1.0])
    p = (order + 1) // 2
    offsets = list(range(-p, p + 1))
    size = len(offsets)
    # Vandermonde solve in exact arithmetic: sum_i w_i s_i^l = order! delta_{l,order}
    mat = [[Fraction(s) ** l for s in offsets] for l in range(size)]
    rhs = [Fraction(math.factorial(order)) if l == order else Fraction(0) for l in range(size)]
    for col in range(size):
        piv = next(r for r in range(col, size) if mat[r][col] != 0)
        mat[col], mat[piv] = mat[piv], mat[col]
        rhs[col], rhs[piv] = rhs[piv], rhs[col]
        for r in range(size):
            if r != col and mat[r][col] != 0:
                f = mat[r][col] / mat[col][col]
                mat[r] = [a - f * b for a, b in zip(mat[r], mat[col])]
                rhs[r] -= f * rhs[col]
    weights = [rhs[i] / mat[i][i] for i in range(size)]
    return np.array(offsets), np.array([float(w) for w in weights])


class SmoothPhase:
    """A phase ``phi(x1, x2)`` given by a vectorised callable.

    Parameters
    ----------
    func : callable
        ``func(x1, x2)`` accepting numpy arrays.
    partials : callable, optional
        ``partials(gamma, x1, x2)`` returning the exact partial derivative
        ``d1^gamma[0] d2^gamma[1] phi``.  When absent, derivatives are taken by
        central finite differences with one Richardson level.
    d_max : int
        Highest total derivative order the oracle supports.
    domain : ((a1, b1), (a2, b2))
        Validity box, must contain the origin.
    validate : bool
        Check the flatness and curvature hypotheses at construction.
    """

    exact = False

    def __init__(
        self,
        func: Callable,
        partials: Optional[Callable] = None,
        d_max: int = D_MAX,
        domain: Box = ((-1.0, 1.0), (-1.0, 1.0)),
        name: Optional[str] = None,
        tau_flat: float = TAU_FLAT,
        validate: bool = True,
    ):
        if d_max < 4:
            raise DomainError("d_max must be at least 4")
        (a1, b1), (a2, b2) = domain
        if not (a1 < 0 < b1 and a2 < 0 < b2):
            raise DomainError("phase domain must contain the origin in its interior")
        self._func = func
        self._partials = partials
        self.d_max = int(d_max)
        self.domain = ((float(a1), float(b1)), (float(a2), float(b2)))
        self.name = name or "phase"
        self.tau_flat = tau_flat
        if validate:
            self.check_hypotheses()

    # -- evaluation -----------------------------------------------------
    def evaluate(self, x1, x2):
        return self._func(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))

    __call__ = evaluate

    def in_domain(self, x1, x2) -> bool:
        (a1, b1), (a2, b2) = self.domain
        return bool(np.all((a1 <= np.asarray(x1)) & (np.asarray(x1) <= b1)
                           & (a2 <= np.asarray(x2)) & (np.asarray(x2) <= b2)))

    @property
    def scale(self) -> float:
        (a1, b1), (a2, b2) = self.domain
        return max(-a1, b1, -a2, b2)

    def _check_gamma(self, gamma):
        g1, g2 = (int(g) for g in gamma)
        if g1 < 0 or g2 < 0:
            raise DomainError(f"multi-index must be non-negative, got {gamma!r}")
        if g1 + g2 > self.d_max:
            raise CapabilityError(f"|gamma| = {g1 + g2} exceeds d_max = {self.d_max}")
        return g1, g2

    def partial(self, gamma, x1, x2):
        """Partial derivative ``d^gamma phi`` at (vectorised) points."""
        return self.partial_with_error(gamma, x1, x2)[0]

    def partial_with_error(self, gamma, x1, x2):
        g1, g2 = self._check_gamma(gamma)
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if g1 == 0 and g2 == 0:
            return self.evaluate(x1, x2), np.zeros(np.broadcast(x1, x2).shape)
        if self._partials is not None:
            value = self._partials((g1, g2), x1, x2)
            if value is not None:
                return np.asarray(value, dtype=float), np.zeros(np.broadcast(x1, x2).shape)
        return self._fd_partial(g1, g2, x1, x2)

    def _fd_partial(self, g1, g2, x1, x2):
        order = g1 + g2
        # fourth-order (after Richardson) optimal step, scaled by domain size
        h = np.finfo(float).eps ** (1.0 / (order + 4)) * self.scale
        s1, w1 = fd_weights(g1)
        s2, w2 = fd_weights(g2)

        def diff(step):
            acc = 0.0
            for a, wa in zip(s1, w1):
                for b, wb in zip(s2, w2):
                    if wa == 0.0 or wb == 0.0:
                        continue
                    acc = acc + wa * wb * self.evaluate(x1 + a * step, x2 + b * step)
            return acc / step**order

        coarse = diff(h)
        fine = diff(h / 2)
        value = (4.0 * fine - coarse) / 3.0
        return value, np.abs(fine - coarse) / 3.0

    def check_hypotheses(self):
        """Verify phi(0)=0, grad phi(0)=0 and d2^2 phi(0) != 0."""
        tol = self.tau_flat
        v0 = float(self.evaluate(0.0, 0.0))
        d1 = float(self.partial((1, 0), 0.0, 0.0))
        d2 = float(self.partial((0, 1), 0.0, 0.0))
        if abs(v0) > tol or abs(d1) > tol or abs(d2) > tol:
            raise DomainError(
                f"{self.name}: phase must vanish to first order at the origin "
                f"(phi={v0:.3g}, d1={d1:.3g}, d2={d2:.3g})"
            )
        h22 = float(self.partial((0, 2), 0.0, 0.0))
        if abs(h22) <= tol:
            raise DomainError(f"{self.name}: d2^2 phi(0,0) vanishes; not an A-type point")

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


def _monomial_eval(coeffs, x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    out = np.zeros(np.broadcast(x1, x2).shape)
    for (i, j), c in sorted(coeffs.items()):
        out = out + float(c) * x1**i * x2**j
    return out


def _shift(coeffs, g1, g2):
    out = {}
    for (i, j), c in coeffs.items():
        if i < g1 or j < g2:
            continue
        f = Fraction(math.perm(i, g1) * math.perm(j, g2))
        out[(i - g1, j - g2)] = out.get((i - g1, j - g2), 0) + c * f
    return {k: v for k, v in out.items() if v != 0}


class PolynomialPhase(SmoothPhase):
    """Polynomial phase with exact rational coefficients.

    ``coefficients`` maps ``(i, j)`` to the coefficient of ``x1**i * x2**j``.
    Derivatives are obtained by shifting coefficients, so they are exact.
    """

    exact = True

    def __init__(
        self,
        coefficients: Dict[Tuple[int, int], object],
        domain: Box = ((-1.0, 1.0), (-1.0, 1.0)),
        name: Optional[str] = None,
        validate: bool = True,
    ):
        coeffs = {}
        for (i, j), c in coefficients.items():
            i, j = int(i), int(j)
            if i < 0 or j < 0:
                raise DomainError(f"negative exponent in monomial ({i}, {j})")
            c = Fraction(c)
            if c != 0:
                coeffs[(i, j)] = coeffs.get((i, j), Fraction(0)) + c
        self.coefficients = {k: v for k, v in sorted(coeffs.items()) if v != 0}
        if validate:
            for key in ((0, 0), (1, 0), (0, 1)):
                if self.coefficients.get(key, 0) != 0:
                    raise DomainError(f"coefficient of x1^{key[0]} x2^{key[1]} must vanish")
            if self.coefficients.get((0, 2), 0) == 0:
                raise DomainError("coefficient of x2^2 must be non-zero (A-type hypothesis)")
        degree = max((i + j for i, j in self.coefficients), default=0)
        super().__init__(
            lambda a, b: _monomial_eval(self.coefficients, a, b),
            partials=self._exact_partial,
            d_max=max(D_MAX, degree),
            domain=domain,
            name=name or self.to_string(),
            validate=False,
        )

    @property
    def degree(self) -> int:
        return max((i + j for i, j in self.coefficients), default=0)

    def derivative_coefficients(self, gamma) -> Dict[Tuple[int, int], Fraction]:
        return _shift(self.coefficients, int(gamma[0]), int(gamma[1]))

    def _exact_partial(self, gamma, x1, x2):
        return _monomial_eval(self.derivative_coefficients(gamma), x1, x2)

    def partial_exact(self, gamma, pt) -> Fraction:
        """Exact rational value of ``d^gamma phi`` at a rational point."""
        self._check_gamma(gamma)
        a, b = Fraction(pt[0]), Fraction(pt[1])
        return sum(
            (c * a**i * b**j for (i, j), c in self.derivative_coefficients(gamma).items()),
            Fraction(0),
        )

    def scaled(self, factor) -> "PolynomialPhase":
        f = Fraction(factor)
        return PolynomialPhase({k: f * v for k, v in self.coefficients.items()},
                               domain=self.domain, name=f"{f}*({self.name})")

    def to_string(self) -> str:
        if not self.coefficients:
            return "0"
        parts = []
        for (i, j), c in sorted(self.coefficients.items(), key=lambda kv: (kv[0][0] + kv[0][1], kv[0])):
            mono = "*".join(
                t for t in (
                    "" if i == 0 else ("x1" if i == 1 else f"x1^{i}"),
                    "" if j == 0 else ("x2" if j == 1 else f"x2^{j}"),
                ) if t
            )
            if mono and c == 1:
                parts.append(mono)
            elif mono and c == -1:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c}*{mono}" if mono else str(c))
        return " + ".join(parts).replace("+ -", "- ")

    def __eq__(self, other):
        return isinstance(other, PolynomialPhase) and self.coefficients == other.coefficients

    def __hash__(self):
        return hash(tuple(self.coefficients.items()))


def eval_partial(phase: SmoothPhase, gamma, pt, with_error: bool = False):
    """Evaluate ``d^gamma phi`` at the point ``pt``.

    Polynomial phases at rational points give an exact ``Fraction``; other
    phases return a float (plus an error estimate when ``with_error``).
    """
    x1, x2 = pt
    if not phase.in_domain(float(x1), float(x2)):
        raise DomainError(f"point {pt!r} lies outside the phase domain {phase.domain}")
    if isinstance(phase, PolynomialPhase):
        if all(isinstance(v, (int, Fraction)) for v in pt):
            value = phase.partial_exact(gamma, pt)
        else:
            value = float(phase.partial(gamma, float(x1), float(x2)))
        return (value, 0.0) if with_error else value
    value, err = phase.partial_with_error(gamma, float(x1), float(x2))
    return (float(value), float(err)) if with_error else float(value)


# ---------------------------------------------------------------------------
# amplitudes and cutoffs


def _smooth_step(t):
    """C-infinity transition: 1 for t <= 0, 0 for t >= 1, monotone between."""
    t = np.asarray(t, dtype=float)
    out = np.where(t <= 0.0, 1.0, 0.0)
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    a = np.exp(-1.0 / (1.0 - tm))
    b = np.exp(-1.0 / tm)
    out[mid] = a / (a + b)
    return out


def _bump_profile(rho):
    rho = np.asarray(rho, dtype=float)
    out = np.zeros(rho.shape)
    inside = rho < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - rho[inside] ** 2))
    return out


@dataclass(frozen=True)
class AmplitudeCutoff:
    """Radial amplitude or cutoff on the plane.

    ``kind`` is one of ``bump`` (mollifier of the given radius), ``chi0``
    (1 on the unit disc, 0 beyond radius 2) and ``chi1`` (``chi0(x) - chi0(2x)``).
    """

    kind: str
    support_radius: float
    radius: float = 1.0
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def radial(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        if self.kind == "bump":
            return _bump_profile(r / self.radius)
        if self.kind == "chi0":
            return _smooth_step(r - 1.0)
        if self.kind == "chi1":
            return _smooth_step(r - 1.0) - _smooth_step(2.0 * r - 1.0)
        raise DomainError(f"unknown cutoff kind {self.kind!r}")

    def evaluate(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return self.radial(np.hypot(x1, x2))

    __call__ = evaluate

    def integral(self) -> float:
        """Integral over the plane (polar quadrature of the radial profile)."""
        if "integral" not in self._cache:
            val, _ = integrate.quad(
                lambda r: float(self.radial(r)) * r, 0.0, self.support_radius,
                epsabs=1e-14, epsrel=1e-12, limit=200,
            )
            self._cache["integral"] = 2.0 * math.pi * val
        return self._cache["integral"]

    def abs_integral(self) -> float:
        val, _ = integrate.quad(
            lambda r: abs(float(self.radial(r))) * r, 0.0, self.support_radius,
            epsabs=1e-14, epsrel=1e-12, limit=200,
        )
        return 2.0 * math.pi * val

    def describe(self) -> str:
        if self.kind == "bump":
            return f"bump(radius={self.radius!r})"
        return self.kind


def make_bump(radius: float) -> AmplitudeCutoff:
    """Standard mollifier ``exp(-1/(1-(|x|/radius)^2))`` supported in the disc."""
    if not radius > 0:
        raise DomainError(f"bump radius must be positive, got {radius!r}")
    return AmplitudeCutoff("bump", float(radius), float(radius))


def make_chi0() -> AmplitudeCutoff:
    return AmplitudeCutoff("chi0", 2.0)


def make_chi1() -> AmplitudeCutoff:
    return AmplitudeCutoff("chi1", 2.0)


# ---------------------------------------------------------------------------
# corpus

CORPUS: Dict[str, Dict[Tuple[int, int], object]] = {
    # x2^2 + x1^n
    "power_n2": {(0, 2): 1, (2, 0): 1},
    "power_n3": {(0, 2): 1, (3, 0): 1},
    "power_n4": {(0, 2): 1, (4, 0): 1},
    "power_n6": {(0, 2): 1, (6, 0): 1},
    # (x2 - x1^m)^2
    "fold_m2": {(0, 2): 1, (2, 1): -2, (4, 0): 1},
    "fold_m3": {(0, 2): 1, (3, 1): -2, (6, 0): 1},
    "fold_m4": {(0, 2): 1, (4, 1): -2, (8, 0): 1},
    # (x2 - x1^3)^2 + x1^8
    "fold_m3_n8": {(0, 2): 1, (3, 1): -2, (6, 0): 1, (8, 0): 1},
    # x2^2 + x1^2 x2 + x1^5
    "tilted_m2_n4": {(0, 2): 1, (2, 1): 1, (5, 0): 1},
    # x2^2 + x1^3 x2 + x1^5
    "tilted_m3_n5": {(0, 2): 1, (3, 1): 1, (5, 0): 1},
    # x2^2 + x2^3 + x1^4, non-constant b = 1 + x2
    "cubic_b_n4": {(0, 2): 1, (0, 3): 1, (4, 0): 1},
    # (x2 - x1^2)^2 + x1^5
    "fold_m2_n5": {(0, 2): 1, (2, 1): -2, (4, 0): 1, (5, 0): 1},
}


def corpus_names():
    return sorted(CORPUS)


def corpus_phase(name: str) -> PolynomialPhase:
    try:
        coeffs = CORPUS[name]
    except KeyError:
        raise PhaseLoadError(f"unknown corpus phase {name!r}; known: {', '.join(corpus_names())}") from None
    return PolynomialPhase(coeffs, name=name)


_LINE = re.compile(r"^\s*(-?\d+)\s+(-?\d+)\s+(-?\d+)\s+(-?\d+)\s*$")


def parse_phase_text(text: str, name: Optional[str] = None) -> PolynomialPhase:
    """Parse the monomial-list format (``i j numerator denominator`` per line).

    ``#`` starts a comment; blank lines are ignored.  A line ``# name: <id>``
    names the phase.
    """
    coeffs: Dict[Tuple[int, int], Fraction] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        if raw.strip().startswith("#"):
            m = re.match(r"^\s*#\s*name\s*:\s*(\S+)", raw)
            if m and name is None:
                name = m.group(1)
            continue
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise PhaseLoadError(f"line {lineno}: expected 'i j numerator denominator', got {raw!r}")
        i, j, num, den = (int(g) for g in m.groups())
        if i < 0 or j < 0:
            raise PhaseLoadError(f"line {lineno}: exponents must be non-negative")
        if den <= 0:
            raise PhaseLoadError(f"line {lineno}: denominator must be positive")
        if (i, j) in coeffs:
            raise PhaseLoadError(f"line {lineno}: duplicate monomial ({i}, {j})")
        coeffs[(i, j)] = Fraction(num, den)
    if not coeffs:
        raise PhaseLoadError("no monomials found")
    try:
        return PolynomialPhase(coeffs, name=name)
    except DomainError as exc:
        raise PhaseLoadError(str(exc)) from exc


def load_phase_file(path) -> PolynomialPhase:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise PhaseLoadError(f"cannot read phase file {path}: {exc}") from exc
    return parse_phase_text(text, name=None)


def dump_phase_text(phase: PolynomialPhase) -> str:
    lines = [f"# name: {phase.name}"] if phase.name and " " not in phase.name else []
    for (i, j), c in sorted(phase.coefficients.items()):
        lines.append(f"{i} {j} {c.numerator} {c.denominator}")
    return "\n".join(lines) + "\n"
