"""Panel-resolved quadrature for ``I(lam, z) = int exp(i lam (z.x + phi(x))) g(x) dx``.

Two routes are provided:

* :func:`eval_I_direct` -- tensor-product Gauss-Legendre panels over the
  amplitude support, panel widths shrinking with the local phase gradient;
* :func:`eval_I1` -- stationary phase in ``x2`` (one Fresnel factor) followed
  by 1-D panel quadrature of the reduced integral.

Both report an error estimate from a half-width panel refinement; the
reduced route adds an ``O(lam^-3/2)`` allowance for the stationary-phase
remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DegeneracyError, DomainError, ResolutionError
from .normal_form import solve_x2_critical, trace_fold_curve
from .phase_model import AmplitudeCutoff, SmoothPhase

__all__ = [
    "NODES_PER_PANEL",
    "C_OSC",
    "DEFAULT_BUDGET",
    "REMAINDER_UNIT",
    "remainder_allowance",
    "OscSample",
    "ReducedPhase",
    "panel_breaks",
    "gauss_panels",
    "eval_I_direct",
    "reduce_in_x2",
    "eval_I1",
    "eval_I1_batch",
    "vdc_probe_1d",
    "calibrate_remainder",
    "samples_to_csv",
]

NODES_PER_PANEL = 16
# phase advance allowed per 16-node panel, in radians (one full wave)
C_OSC = 2.0 * math.pi
MIN_PANELS = 8
DEFAULT_BUDGET = 2**22
H_MIN_REL = 1e-6
# stationary-phase remainder allowance |R| <= (REMAINDER_UNIT / support_radius) * lam^-3/2.
# calibrate_remainder() over the 12 corpus phases with bump(1/4), lam in {32, 128, 512}
# gave at most 3.25; the constant scales like 1/radius (checked at 1/8 and 1/2).
# Frozen with a safety factor 2.
REMAINDER_UNIT = 1.625

_GX, _GW = leggauss(NODES_PER_PANEL)


@dataclass(frozen=True)
class OscSample:
    lam: float
    z: tuple
    value: complex
    abs_error_estimate: float
    method: str
    nodes: int = 0


def panel_breaks(a: float, b: float, freq: Callable, lam: float, c_osc: float = C_OSC,
                 min_panels: int = MIN_PANELS, n_samples: int = 2049) -> np.ndarray:
    """Breakpoints on ``[a, b]`` with ``width * (1 + lam * sup|phase'|) <= c_osc``.

    ``freq(x)`` returns ``|d phase / dx|`` sampled at ``x`` (vectorised).  The
    sup over each panel is taken over the sampling cells it touches.
    """
    xs = np.linspace(a, b, n_samples)
    f = np.abs(np.asarray(freq(xs), dtype=float))
    cell_sup = np.maximum(f[:-1], f[1:])
    # local gradient may peak inside a cell; pad by one neighbour
    cell_sup = np.maximum.reduce([cell_sup, np.r_[cell_sup[1:], cell_sup[-1]], np.r_[cell_sup[0], cell_sup[:-1]]])
    density = (1.0 + lam * cell_sup) / c_osc
    cum = np.r_[0.0, np.cumsum(density * np.diff(xs))]
    npan = max(min_panels, int(math.ceil(cum[-1])))
    targets = np.linspace(0.0, cum[-1], npan + 1)
    breaks = np.interp(targets, cum, xs)
    breaks[0], breaks[-1] = a, b
    return breaks


def gauss_panels(breaks: np.ndarray):
    """Nodes and weights of composite 16-point Gauss-Legendre on ``breaks``."""
    lo, hi = breaks[:-1], breaks[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = (half[:, None] * _GX + mid[:, None]).ravel()
    w = (half[:, None] * _GW).ravel()
    return x, w


def _halve(breaks: np.ndarray) -> np.ndarray:
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    out = np.empty(2 * len(breaks) - 1)
    out[0::2] = breaks
    out[1::2] = mids
    return out


# ---------------------------------------------------------------------------
# direct 2-D quadrature


def _direct_sum(phase, amplitude, lam, z, x1, w1, x2, w2, chunk=2**20):
    total = 0.0 + 0.0j
    rows = max(1, chunk // max(1, len(x2)))
    for s in range(0, len(x1), rows):
        a = x1[s:s + rows, None]
        b = x2[None, :]
        g = amplitude.evaluate(a, b)
        mask = g != 0.0
        if not mask.any():
            continue
        ph = lam * (z[0] * a + z[1] * b + phase.evaluate(a, b))
        vals = np.where(mask, g * np.exp(1j * ph), 0.0)
        total += np.sum(w1[s:s + rows, None] * vals * w2[None, :])
    return total


def eval_I_direct(lam: float, z, phase: SmoothPhase, amplitude: AmplitudeCutoff,
                  budget: int = DEFAULT_BUDGET, c_osc: float = C_OSC) -> OscSample:
    """Tensor-product panel quadrature of the full 2-D oscillatory integral."""
    if not lam > 0:
        raise DomainError(f"lam must be positive, got {lam!r}")
    z = (float(z[0]), float(z[1]))
    R = amplitude.support_radius
    (a1, b1), (a2, b2) = phase.domain
    if R > min(-a1, b1, -a2, b2) + 1e-12:
        raise DomainError("amplitude support exceeds the phase domain")
    probe = np.linspace(-R, R, 257)
    P1, P2 = np.meshgrid(probe, probe, indexing="ij")
    inside = P1**2 + P2**2 <= R * R * 1.0001
    g1 = np.where(inside, np.abs(z[0] + phase.partial((1, 0), P1, P2)), 0.0)
    g2 = np.where(inside, np.abs(z[1] + phase.partial((0, 1), P1, P2)), 0.0)
    sup1 = g1.max(axis=1)
    sup2 = g2.max(axis=0)
    br1 = panel_breaks(-R, R, lambda x: np.interp(x, probe, sup1), lam, c_osc)
    br2 = panel_breaks(-R, R, lambda x: np.interp(x, probe, sup2), lam, c_osc)
    n_coarse = (len(br1) - 1) * (len(br2) - 1) * NODES_PER_PANEL**2
    n_total = 5 * n_coarse
    if n_total > budget:
        raise ResolutionError(
            f"direct quadrature at lam={lam:g} needs {n_total} nodes, budget {budget}", lam=lam
        )
    x1, w1 = gauss_panels(br1)
    x2, w2 = gauss_panels(br2)
    coarse = _direct_sum(phase, amplitude, lam, z, x1, w1, x2, w2)
    x1, w1 = gauss_panels(_halve(br1))
    x2, w2 = gauss_panels(_halve(br2))
    fine = _direct_sum(phase, amplitude, lam, z, x1, w1, x2, w2)
    return OscSample(lam, z, complex(fine), float(abs(fine - coarse)), "direct2d", n_total)


# ---------------------------------------------------------------------------
# reduction in x2


@dataclass
class ReducedPhase:
    """Critical point ``x2c(x1)`` of ``phi + z2 x2`` in ``x2`` and the reduced phase.

    ``Phi1(x1, z) = phi(x1, x2c) + z2 x2c + z1 x1``.
    """

    phase: SmoothPhase
    z2: float
    grid: np.ndarray
    x2c: np.ndarray
    hessian22: np.ndarray
    fold_grid: np.ndarray
    fold_psi: np.ndarray
    h_min: float
    _cache: dict = field(default_factory=dict, repr=False)

    def critical(self, x1):
        """``(x2c, hessian22)`` at arbitrary ``x1`` inside the tabulation."""
        x1 = np.asarray(x1, dtype=float)
        seed = np.interp(x1, self.grid, self.x2c)
        x2, h, ok = solve_x2_critical(self.phase, x1, seed, self.z2, self.h_min)
        if not ok.all():
            bad = x1[~ok].ravel()[0]
            raise DegeneracyError(f"x2 critical point not found at x1={bad:.6g}, z2={self.z2:g}")
        return x2, h

    def base(self, x1):
        """``Phi1`` without the ``z1 x1`` term, and ``dPhi1/dx1`` at ``z1 = 0``."""
        x2, h = self.critical(x1)
        val = self.phase.evaluate(x1, x2) + self.z2 * x2
        slope = self.phase.partial((1, 0), x1, x2)
        return val, slope, x2, h

    def Phi1(self, x1, z1):
        return self.base(x1)[0] + z1 * np.asarray(x1, dtype=float)


def _fold_table(phase, radius, n=401):
    key = ("fold", radius, n)
    cache = getattr(phase, "_osclab_cache", None)
    if cache is None:
        cache = {}
        try:
            phase._osclab_cache = cache
        except AttributeError:
            pass
    if key not in cache:
        cache[key] = trace_fold_curve(phase, np.linspace(-radius, radius, n))
    return cache[key]


def reduce_in_x2(phase: SmoothPhase, z2: float, x1_grid=None, radius: Optional[float] = None) -> ReducedPhase:
    """Solve ``d2 phi(x1, x2) + z2 = 0`` along an ``x1`` grid.

    Seeds come from the fold curve (the ``z2 = 0`` solution) shifted by the
    first-order correction ``-z2 / d2^2 phi``.
    """
    if x1_grid is None:
        r = 1.0 if radius is None else radius
        x1_grid = np.linspace(-r, r, 401)
    x1_grid = np.asarray(x1_grid, dtype=float)
    r = float(np.max(np.abs(x1_grid)))
    fg, fpsi = _fold_table(phase, r)
    psi = np.interp(x1_grid, fg, fpsi)
    h0 = phase.partial((0, 2), x1_grid, psi)
    seed = psi - z2 / h0
    h_min = H_MIN_REL * abs(float(phase.partial((0, 2), 0.0, 0.0)))
    x2, h, ok = solve_x2_critical(phase, x1_grid, seed, z2, h_min)
    if not ok.all():
        bad = x1_grid[~ok][0]
        raise DegeneracyError(f"reduction failed at x1={bad:.6g}, z2={z2:g}")
    # stay on the branch continued from the fold
    jump = float(np.max(np.abs(x2 - seed)))
    allowed = 1e-3 * max(r, 1.0) + 10.0 * abs(z2) / float(np.min(np.abs(h0)))
    if jump > allowed:
        raise DegeneracyError(f"x2 critical branch jumped by {jump:.3g} at z2={z2:g}")
    return ReducedPhase(phase, float(z2), x1_grid, x2, h, fg, fpsi, h_min)


def _amp_support(reduced: ReducedPhase, amplitude: AmplitudeCutoff):
    key = ("support", amplitude)
    if key in reduced._cache:
        return reduced._cache[key]
    R = amplitude.support_radius
    g = reduced.grid
    a = amplitude.evaluate(g, reduced.x2c)
    pos = np.flatnonzero(a > 0)
    if len(pos) == 0:
        out = None
    else:
        lo = g[max(pos[0] - 1, 0)]
        hi = g[min(pos[-1] + 1, len(g) - 1)]
        out = (max(lo, -R), min(hi, R))
    reduced._cache[key] = out
    return out


def _reduced_sum(reduced, amplitude, lam, z1, breaks):
    x, w = gauss_panels(breaks)
    val, slope, x2, h = reduced.base(x)
    amp = amplitude.evaluate(x, x2)
    weight = w * amp * np.abs(h) ** -0.5 * np.exp(1j * (lam * val + 0.25 * math.pi * np.sign(h)))
    keep = weight != 0
    x, weight = x[keep], weight[keep]
    z1 = np.atleast_1d(np.asarray(z1, dtype=float))
    out = np.empty(z1.shape, dtype=complex)
    step = max(1, 2**22 // max(1, len(x)))
    for s in range(0, len(z1), step):
        out[s:s + step] = np.exp(1j * lam * np.outer(z1[s:s + step], x)) @ weight
    return out * math.sqrt(2.0 * math.pi / lam), len(w)


def eval_I1_batch(lam: float, z1, reduced: ReducedPhase, amplitude: AmplitudeCutoff,
                  c_osc: float = C_OSC, remainder_const: Optional[float] = None,
                  budget: int = DEFAULT_BUDGET, estimate_error: bool = True):
    """Reduced-route values of ``I(lam, (z1, reduced.z2))`` for many ``z1``.

    Returns ``(values, abs_error_estimates, nodes)``; ``values`` include the
    Fresnel prefactor ``sqrt(2 pi / lam) |h|^-1/2 exp(i pi/4 sgn h)``.  With
    ``estimate_error=False`` only the base panels are summed and the estimate
    is the remainder allowance alone (used by the large sweeps).
    """
    if not lam > 0:
        raise DomainError(f"lam must be positive, got {lam!r}")
    z1 = np.atleast_1d(np.asarray(z1, dtype=float))
    supp = _amp_support(reduced, amplitude)
    if supp is None:
        return np.zeros(z1.shape, complex), np.zeros(z1.shape), 0
    lo, hi = supp
    zmin, zmax = float(np.min(z1)), float(np.max(z1))

    def freq(x):
        s = reduced.base(x)[1]
        return np.maximum(np.abs(s + zmin), np.abs(s + zmax))

    br = panel_breaks(lo, hi, freq, lam, c_osc)
    nodes = (3 if estimate_error else 1) * (len(br) - 1) * NODES_PER_PANEL
    if nodes > budget:
        raise ResolutionError(f"reduced quadrature at lam={lam:g} needs {nodes} nodes", lam=lam)
    if remainder_const is None:
        remainder_const = REMAINDER_UNIT / amplitude.support_radius
    coarse, _ = _reduced_sum(reduced, amplitude, lam, z1, br)
    if not estimate_error:
        return coarse, np.full(z1.shape, remainder_const * lam**-1.5), nodes
    fine, _ = _reduced_sum(reduced, amplitude, lam, z1, _halve(br))
    err = np.abs(fine - coarse) + remainder_const * lam**-1.5
    return fine, err, nodes


def eval_I1(lam: float, z, reduced: ReducedPhase, amplitude: AmplitudeCutoff,
            c_osc: float = C_OSC, remainder_const: Optional[float] = None,
            budget: int = DEFAULT_BUDGET) -> OscSample:
    """Stationary phase in ``x2`` then 1-D quadrature; approximates ``I(lam, z)``."""
    z = (float(z[0]), float(z[1]))
    if abs(z[1] - reduced.z2) > 1e-15 * max(1.0, abs(z[1])):
        raise DomainError(f"reduced phase built for z2={reduced.z2}, asked for z2={z[1]}")
    vals, errs, nodes = eval_I1_batch(lam, [z[0]], reduced, amplitude, c_osc, remainder_const, budget)
    return OscSample(float(lam), z, complex(vals[0]), float(errs[0]), "reduced1d", nodes)


def remainder_allowance(lam: float, amplitude: AmplitudeCutoff) -> float:
    """Default stationary-phase remainder allowance at ``lam``."""
    return REMAINDER_UNIT / amplitude.support_radius * lam**-1.5


def calibrate_remainder(cases, lams=(32.0, 64.0, 128.0), safety: float = 2.0) -> float:
    """Fit the stationary-phase remainder constant against the direct route.

    ``cases`` is an iterable of ``(phase, amplitude, z)``; returns
    ``safety * max |I1 - I_direct| * lam^{3/2}``.
    """
    worst = 0.0
    for phase, amplitude, z in cases:
        red = reduce_in_x2(phase, z[1], radius=amplitude.support_radius)
        for lam in lams:
            d = eval_I_direct(lam, z, phase, amplitude, budget=2**28)
            r = eval_I1(lam, z, red, amplitude, remainder_const=0.0)
            worst = max(worst, (abs(d.value - r.value) - d.abs_error_estimate - r.abs_error_estimate) * lam**1.5)
    return safety * worst


# ---------------------------------------------------------------------------
# 1-D probes


def vdc_probe_1d(lams: Sequence[float], phase1d: Callable, k: int, amplitude1d: Callable,
                 support=(-1.0, 1.0), dphase1d: Optional[Callable] = None, c_osc: float = C_OSC):
    """``max_lam lam^{1/k} |int exp(i lam phase1d) a|`` over the given ``lams``.

    Returns ``(statistic, per_lam_values)`` where the per-lambda values are
    the scaled moduli ``lam^{1/k} |integral|``.
    """
    a, b = support
    xs = np.linspace(a, b, 4097)
    if dphase1d is None:
        vals = phase1d(xs)
        slope = np.gradient(vals, xs)
        dphase1d = lambda x: np.interp(x, xs, slope)  # noqa: E731
    scaled = []
    for lam in lams:
        br = panel_breaks(a, b, dphase1d, lam, c_osc)
        x, w = gauss_panels(_halve(br))
        val = np.sum(w * amplitude1d(x) * np.exp(1j * lam * phase1d(x)))
        scaled.append(float(lam ** (1.0 / k) * abs(val)))
    scaled = np.array(scaled)
    return float(scaled.max()) if len(scaled) else 0.0, scaled


def samples_to_csv(samples: Sequence[OscSample]) -> str:
    lines = ["# schema: osclab.osc_samples v1", "lambda,z1,z2,re,im,abs,error,method"]
    for s in sorted(samples, key=lambda s: (s.lam, s.z, s.method)):
        lines.append(
            f"{s.lam!r},{s.z[0]!r},{s.z[1]!r},{s.value.real!r},{s.value.imag!r},"
            f"{abs(s.value)!r},{s.abs_error_estimate!r},{s.method}"
        )
    return "\n".join(lines) + "\n"
