"""Fold-curve normal form ``phi = b (x2 - psi(x1))^2 + b0(x1)`` and surface types.

The fold curve ``psi`` is the branch of ``d2 phi = 0`` through the origin;
``b0`` is the restriction of ``phi`` to it.  Their vanishing orders at the
origin give the adapted pair ``(m, n)`` which decides the surface type:

* type I   -- ``n`` finite,
* type II  -- ``b0`` flat, ``psi`` of finite order ``m``,
* type III -- both flat.

Polynomial phases are handled in exact arithmetic by power-series inversion;
other phases go through Newton continuation and sampled order detection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import AmbiguityError, DecompositionError, FoldTraceError
from .orders import FLAT, Order, format_order, parse_order
from .phase_model import TAU_FLAT, PolynomialPhase, SmoothPhase

__all__ = [
    "K_MAX",
    "N_FOLD_GRID",
    "SurfaceProfile",
    "Decomposition",
    "VanishingOrder",
    "trace_fold_curve",
    "solve_x2_critical",
    "decompose",
    "vanishing_order",
    "fold_series",
    "residual_series",
    "classify",
    "analyze",
]

K_MAX = 12
N_FOLD_GRID = 201
NEWTON_TOL = 1e-12
NEWTON_MAXIT = 60
CONTINUITY_TOL = 1e-8
SLOPE_TOL = 0.2


def default_radius(phase: SmoothPhase) -> float:
    (a1, b1), (a2, b2) = phase.domain
    return 0.5 * min(-a1, b1, -a2, b2)


# ---------------------------------------------------------------------------
# fold curve


def _newton_scalar(phase, x1, seed, z2=0.0):
    x2 = seed
    for _ in range(NEWTON_MAXIT):
        g = float(phase.partial((0, 1), x1, x2)) + z2
        h = float(phase.partial((0, 2), x1, x2))
        if h == 0.0 or not np.isfinite(h):
            return x2, g, h, False
        step = g / h
        x2 -= step
        if abs(step) <= 1e-15 * max(1.0, abs(x2)):
            g = float(phase.partial((0, 1), x1, x2)) + z2
            return x2, g, float(phase.partial((0, 2), x1, x2)), abs(g) < NEWTON_TOL
    g = float(phase.partial((0, 1), x1, x2)) + z2
    return x2, g, float(phase.partial((0, 2), x1, x2)), abs(g) < NEWTON_TOL


def trace_fold_curve(phase: SmoothPhase, grid=None, radius: Optional[float] = None):
    """Tabulate the fold curve ``psi`` on a symmetric ``x1`` grid.

    Each node is solved by Newton's method on ``d2 phi(x1, x2) = 0`` seeded
    with the solution at the neighbouring node (continuation outward from
    ``psi(0) = 0``).  Returns ``(grid, psi)``.
    """
    if grid is None:
        r = default_radius(phase) if radius is None else radius
        grid = np.linspace(-r, r, N_FOLD_GRID)
    grid = np.asarray(grid, dtype=float)
    order = np.argsort(np.abs(grid), kind="stable")
    i0 = order[0]
    psi = np.full(grid.shape, np.nan)
    h0 = float(phase.partial((0, 2), 0.0, 0.0))
    sign0 = np.sign(h0)
    if sign0 == 0:
        raise FoldTraceError("d2^2 phi vanishes at the origin", x1=0.0)

    def solve(i, seed):
        x1 = float(grid[i])
        x2, g, h, ok = _newton_scalar(phase, x1, seed)
        if not ok or not np.isfinite(x2):
            raise FoldTraceError(f"Newton failed on the fold curve at x1={x1:.6g} (residual {g:.3g})", x1=x1)
        if np.sign(h) != sign0:
            raise FoldTraceError(f"d2^2 phi changes sign on the fold at x1={x1:.6g}", x1=x1)
        psi[i] = x2

    solve(i0, 0.0)
    right = [i for i in np.argsort(grid, kind="stable") if grid[i] > grid[i0]]
    left = [i for i in np.argsort(-grid, kind="stable") if grid[i] < grid[i0]]
    for branch in (right, left):
        prev = psi[i0]
        for i in branch:
            solve(i, prev)
            prev = psi[i]
    return grid, psi


def solve_x2_critical(phase: SmoothPhase, x1, seed, z2: float = 0.0, h_min: float = 0.0):
    """Vectorised Newton solve of ``d2 phi(x1, x2) + z2 = 0`` from ``seed``.

    Returns ``(x2c, hessian22, converged_mask)``.
    """
    x1 = np.asarray(x1, dtype=float)
    shape = x1.shape
    x1 = x1.reshape(-1)
    x2 = np.array(np.broadcast_to(seed, shape), dtype=float).reshape(-1)
    active = np.ones(x1.shape, dtype=bool)
    for _ in range(NEWTON_MAXIT):
        if not active.any():
            break
        g = phase.partial((0, 1), x1[active], x2[active]) + z2
        h = phase.partial((0, 2), x1[active], x2[active])
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(np.abs(h) > h_min, g / h, np.nan)
        x2[active] = x2[active] - step
        done = np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(x2[active]))
        done |= ~np.isfinite(step)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    g = phase.partial((0, 1), x1, x2) + z2
    h = phase.partial((0, 2), x1, x2)
    ok = np.isfinite(x2) & (np.abs(g) < NEWTON_TOL) & (np.abs(h) > h_min)
    return x2.reshape(shape), h.reshape(shape), ok.reshape(shape)


# ---------------------------------------------------------------------------
# decomposition


_GL_T, _GL_W = leggauss(16)
_GL_T = 0.5 * (_GL_T + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass
class Decomposition:
    """Tabulated ``psi`` and ``b0`` plus an evaluator for ``b``."""

    phase: SmoothPhase
    grid: np.ndarray
    psi_samples: np.ndarray
    b0_samples: np.ndarray
    switch: float
    continuity_error: float

    def psi(self, x1):
        x1 = np.asarray(x1, dtype=float)
        seed = np.interp(x1, self.grid, self.psi_samples)
        x2, _, ok = solve_x2_critical(self.phase, x1, seed)
        return np.where(ok, x2, seed)

    def b0(self, x1):
        x1 = np.asarray(x1, dtype=float)
        return self.phase.evaluate(x1, self.psi(x1))

    def b_quotient(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        ps = self.psi(x1)
        return (self.phase.evaluate(x1, x2) - self.phase.evaluate(x1, ps)) / (x2 - ps) ** 2

    def b_taylor(self, x1, x2):
        """``b = int_0^1 (1-t) d2^2 phi(x1, psi + t d) dt`` (integral remainder)."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        ps = self.psi(x1)
        d = x2 - ps
        acc = 0.0
        for t, w in zip(_GL_T, _GL_W):
            acc = acc + w * (1.0 - t) * self.phase.partial((0, 2), x1, ps + t * d)
        return acc

    def b(self, x1, x2):
        """Normal-form factor: quotient off the fold, Taylor remainder near it."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        d = x2 - self.psi(x1)
        near = np.abs(d) < self.switch
        out = np.empty(x1.shape)
        if near.any():
            out[near] = self.b_taylor(x1[near], x2[near])
        if (~near).any():
            out[~near] = self.b_quotient(x1[~near], x2[~near])
        return out

    def reconstruction_error(self, n: int = 41) -> float:
        r = float(np.max(np.abs(self.grid)))
        g = np.linspace(-r, r, n)
        x1, x2 = np.meshgrid(g, g, indexing="ij")
        ps = self.psi(x1)
        rebuilt = self.b(x1, x2) * (x2 - ps) ** 2 + self.b0(x1)
        return float(np.max(np.abs(self.phase.evaluate(x1, x2) - rebuilt)))


def decompose(phase: SmoothPhase, grid, psi_samples, switch: Optional[float] = None) -> Decomposition:
    """Split ``phi`` into ``b (x2 - psi)^2 + b0`` on the traced fold.

    ``b`` is continuous across the fold: the quotient used away from it and
    the Taylor-remainder form used within ``switch`` of it must agree to
    ``1e-8`` where they meet.
    """
    grid = np.asarray(grid, dtype=float)
    psi_samples = np.asarray(psi_samples, dtype=float)
    b0 = phase.evaluate(grid, psi_samples)
    r = float(np.max(np.abs(grid)))
    if switch is None:
        switch = 1e-2 * r
    dec = Decomposition(phase, grid, psi_samples, b0, switch, 0.0)
    probe = grid[:: max(1, len(grid) // 20)]
    worst = 0.0
    for sgn in (-1.0, 1.0):
        x2 = psi_samples[:: max(1, len(grid) // 20)] + sgn * switch
        q = dec.b_quotient(probe, x2)
        t = dec.b_taylor(probe, x2)
        worst = max(worst, float(np.max(np.abs(q - t))))
    dec.continuity_error = worst
    if not worst < CONTINUITY_TOL:
        raise DecompositionError(f"b jumps by {worst:.3g} across the fold (tolerance {CONTINUITY_TOL:g})")
    return dec


# ---------------------------------------------------------------------------
# vanishing orders


@dataclass(frozen=True)
class VanishingOrder:
    order: Order
    leading: Optional[object]
    certified_up_to: Optional[int] = None
    slope: Optional[float] = None
    note: str = ""


def vanishing_order(samples=None, coefficients=None, tau_flat: float = TAU_FLAT, k_max: int = K_MAX) -> VanishingOrder:
    """Order of vanishing at 0 from exact coefficients or symmetric samples.

    ``coefficients`` is a Taylor coefficient sequence (index = power).  With
    ``samples=(x, f)`` the Taylor coefficients up to ``k_max`` come from a
    least-squares fit, and the detected order is cross-checked by the log-log
    slope of ``|f|`` against ``|x|`` near 0.
    """
    if coefficients is not None:
        coeffs = list(coefficients)
        for k, c in enumerate(coeffs[: k_max + 1]):
            if c != 0:
                return VanishingOrder(k, c)
        return VanishingOrder(FLAT, None, certified_up_to=min(k_max, len(coeffs) - 1),
                              note=f"flat up to order {min(k_max, len(coeffs) - 1)}")
    if samples is None:
        raise ValueError("vanishing_order needs samples or coefficients")
    x, f = (np.asarray(a, dtype=float) for a in samples)
    w = float(np.max(np.abs(x)))
    u = x / w
    vander = np.vander(u, k_max + 1, increasing=True)
    scaled, *_ = np.linalg.lstsq(vander, f, rcond=None)
    taylor = scaled / w ** np.arange(k_max + 1)
    derivs = taylor * np.array([math.factorial(k) for k in range(k_max + 1)], dtype=float)
    order: Order = FLAT
    for k in range(k_max + 1):
        if abs(derivs[k]) > tau_flat:
            order = k
            break
    if order is FLAT:
        return VanishingOrder(FLAT, None, certified_up_to=k_max,
                              note=f"flat: certified only up to order {k_max}")
    # log-log slope on the sample points nearest 0 that sit above round-off
    floor = 1e-13 * max(float(np.max(np.abs(f))), 1e-300)
    cand = np.flatnonzero((x != 0) & (np.abs(f) > floor))
    cand = cand[np.argsort(np.abs(x[cand]), kind="stable")][:8]
    slope = None
    note = ""
    if len(np.unique(np.abs(x[cand]))) >= 3:
        slope = float(np.polyfit(np.log(np.abs(x[cand])), np.log(np.abs(f[cand])), 1)[0])
        if abs(slope - order) > SLOPE_TOL:
            raise AmbiguityError(
                f"derivative test gives order {order} but log-log slope is {slope:.3f}"
            )
    else:
        note = "slope check skipped: too few samples above round-off"
    return VanishingOrder(order, float(taylor[order]), slope=slope, note=note)


# ---------------------------------------------------------------------------
# exact power series (polynomial phases)


def _series_mul(a, b, order):
    out = [Fraction(0)] * (order + 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j in range(0, order + 1 - i):
            if j < len(b) and b[j] != 0:
                out[i + j] += ai * b[j]
    return out


def _compose_x2(coeffs, psi, order):
    """Series in x1 of ``sum c_ij x1^i psi(x1)^j`` truncated at ``order``."""
    max_j = max((j for _, j in coeffs), default=0)
    powers = [[Fraction(1)] + [Fraction(0)] * order]
    for _ in range(max_j):
        powers.append(_series_mul(powers[-1], psi, order))
    out = [Fraction(0)] * (order + 1)
    for (i, j), c in coeffs.items():
        if i > order:
            continue
        pw = powers[j]
        for k in range(0, order + 1 - i):
            if pw[k] != 0:
                out[i + k] += c * pw[k]
    return out


def fold_series(phase: PolynomialPhase, order: int = K_MAX) -> List[Fraction]:
    """Taylor coefficients of the fold curve ``psi`` up to ``x1**order``."""
    d2 = phase.derivative_coefficients((0, 1))
    h0 = phase.derivative_coefficients((0, 2)).get((0, 0), Fraction(0))
    psi = [Fraction(0)] * (order + 1)
    for _ in range(order + 1):
        resid = _compose_x2(d2, psi, order)
        if all(c == 0 for c in resid):
            break
        psi = [p - r / h0 for p, r in zip(psi, resid)]
    return psi


def residual_series(phase: PolynomialPhase, psi: Sequence[Fraction], order: int = K_MAX) -> List[Fraction]:
    """Taylor coefficients of ``b0(x1) = phi(x1, psi(x1))``."""
    return _compose_x2(phase.coefficients, list(psi), order)


# ---------------------------------------------------------------------------
# profile


def _series_eval(coeffs, x, shift=0):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    for k in range(len(coeffs) - 1, shift - 1, -1):
        out = out * x + float(coeffs[k])
    return out


@dataclass(eq=False)
class SurfaceProfile:
    """Normal-form data of a phase at the origin."""

    phase_name: str
    grid: np.ndarray
    psi_samples: np.ndarray
    b0_samples: np.ndarray
    b_at_origin: float
    m: Order
    n: Order
    omega0: Optional[object]
    beta0: Optional[object]
    surface_type: str
    r_condition: bool
    regime: str
    exact: bool
    certified_up_to: Optional[int] = None
    psi_series: Optional[Tuple[Fraction, ...]] = None
    b0_series: Optional[Tuple[Fraction, ...]] = None
    reconstruction_error: Optional[float] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def psi(self, x1):
        if self.psi_series is not None:
            return _series_eval(self.psi_series, x1)
        return np.interp(x1, self.grid, self.psi_samples)

    def b0(self, x1):
        if self.b0_series is not None:
            return _series_eval(self.b0_series, x1)
        return np.interp(x1, self.grid, self.b0_samples)

    def omega(self, x1):
        """``omega(x1) = psi(x1) / x1**m``."""
        return self._quotient(x1, self.m, self.omega0, self.psi_series, self.psi_samples)

    def beta(self, x1):
        """``beta(x1) = b0(x1) / x1**n``."""
        return self._quotient(x1, self.n, self.beta0, self.b0_series, self.b0_samples)

    def _quotient(self, x1, order, lead, series, samples):
        from .errors import ProfileError

        if order is FLAT or lead is None:
            raise ProfileError(f"{self.phase_name}: order is flat, no leading-coefficient tabulation")
        x1 = np.asarray(x1, dtype=float)
        if series is not None:
            return _series_eval(list(series)[order:], x1)
        small = np.abs(x1) < 1e-3 * float(np.max(np.abs(self.grid)))
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.interp(x1, self.grid, samples) / x1**order
        return np.where(small, float(lead), q)

    def to_record(self) -> dict:
        def num(v):
            if v is None:
                return None
            if isinstance(v, Fraction):
                return str(v)
            return float(v)

        return {
            "phase": self.phase_name,
            "m": format_order(self.m),
            "n": format_order(self.n),
            "type": self.surface_type,
            "r_condition": bool(self.r_condition),
            "regime": self.regime,
            "omega0": num(self.omega0),
            "beta0": num(self.beta0),
            "b_at_origin": float(self.b_at_origin),
            "exact": bool(self.exact),
            "certified_up_to": self.certified_up_to,
            "reconstruction_error": self.reconstruction_error,
            "psi_series": None if self.psi_series is None else [str(c) for c in self.psi_series],
            "b0_series": None if self.b0_series is None else [str(c) for c in self.b0_series],
            "grid": [float(v) for v in self.grid],
            "psi_samples": [float(v) for v in self.psi_samples],
            "b0_samples": [float(v) for v in self.b0_samples],
            "notes": list(self.notes),
        }

    def to_text(self) -> str:
        return json.dumps(self.to_record(), indent=2, sort_keys=True)

    @classmethod
    def from_record(cls, rec: dict) -> "SurfaceProfile":
        def lead(v):
            if v is None:
                return None
            return Fraction(v) if isinstance(v, str) else float(v)

        return cls(
            phase_name=rec["phase"],
            grid=np.array(rec["grid"], dtype=float),
            psi_samples=np.array(rec["psi_samples"], dtype=float),
            b0_samples=np.array(rec["b0_samples"], dtype=float),
            b_at_origin=float(rec["b_at_origin"]),
            m=parse_order(rec["m"]),
            n=parse_order(rec["n"]),
            omega0=lead(rec["omega0"]),
            beta0=lead(rec["beta0"]),
            surface_type=rec["type"],
            r_condition=bool(rec["r_condition"]),
            regime=rec["regime"],
            exact=bool(rec["exact"]),
            certified_up_to=rec.get("certified_up_to"),
            psi_series=None if rec.get("psi_series") is None else tuple(Fraction(c) for c in rec["psi_series"]),
            b0_series=None if rec.get("b0_series") is None else tuple(Fraction(c) for c in rec["b0_series"]),
            reconstruction_error=rec.get("reconstruction_error"),
            notes=tuple(rec.get("notes", ())),
        )

    def __eq__(self, other):
        return isinstance(other, SurfaceProfile) and self.to_record() == other.to_record()


def _regime(m: Order, n: Order) -> str:
    # 2m >= n, with FLAT = infinity
    if m is FLAT:
        return "case_i"
    if n is FLAT:
        return "case_ii"
    return "case_i" if 2 * m >= n else "case_ii"


def classify(dec: Decomposition, m_info: VanishingOrder, n_info: VanishingOrder,
             tau_flat: float = TAU_FLAT, exact: bool = False,
             psi_series=None, b0_series=None) -> SurfaceProfile:
    """Assemble the surface profile and tag its type, R-condition and regime."""
    m, n = m_info.order, n_info.order
    if n is not FLAT:
        stype = "I"
    elif m is not FLAT:
        stype = "II"
    else:
        stype = "III"
    r_condition = bool(n is FLAT and float(np.max(np.abs(dec.b0_samples))) <= tau_flat)
    notes = tuple(s for s in (m_info.note and f"psi: {m_info.note}", n_info.note and f"b0: {n_info.note}") if s)
    certified = None
    if not exact and (m is FLAT or n is FLAT):
        certified = m_info.certified_up_to if m is FLAT else n_info.certified_up_to
    phase = dec.phase
    return SurfaceProfile(
        phase_name=phase.name,
        grid=dec.grid,
        psi_samples=dec.psi_samples,
        b0_samples=dec.b0_samples,
        b_at_origin=float(phase.partial((0, 2), 0.0, float(dec.psi(0.0)))) / 2.0,
        m=m,
        n=n,
        omega0=m_info.leading,
        beta0=n_info.leading,
        surface_type=stype,
        r_condition=r_condition,
        regime=_regime(m, n),
        exact=exact,
        certified_up_to=certified,
        psi_series=None if psi_series is None else tuple(psi_series),
        b0_series=None if b0_series is None else tuple(b0_series),
        reconstruction_error=dec.reconstruction_error(),
        notes=notes,
    )


def analyze(phase: SmoothPhase, radius: Optional[float] = None, n_grid: int = N_FOLD_GRID,
            k_max: int = K_MAX, tau_flat: float = TAU_FLAT) -> SurfaceProfile:
    """Full pipeline: trace, decompose, detect orders, classify."""
    r = default_radius(phase) if radius is None else radius
    grid, psi = trace_fold_curve(phase, np.linspace(-r, r, n_grid))
    dec = decompose(phase, grid, psi)
    if isinstance(phase, PolynomialPhase):
        ps = fold_series(phase, k_max)
        bs = residual_series(phase, ps, k_max)
        m_info = vanishing_order(coefficients=ps, k_max=k_max)
        n_info = vanishing_order(coefficients=bs, k_max=k_max)
        return classify(dec, m_info, n_info, tau_flat, exact=True, psi_series=ps, b0_series=bs)
    m_info = vanishing_order(samples=(grid, psi), tau_flat=tau_flat, k_max=k_max)
    n_info = vanishing_order(samples=(grid, dec.b0_samples), tau_flat=tau_flat, k_max=k_max)
    return classify(dec, m_info, n_info, tau_flat, exact=False)
