"""Decay-rate measurements for ``I(lam, z)`` over dyadic ``lam = 2**j``.

* :func:`sup_decay` -- ``sup_z |I(lam, z)|`` over a small z-box;
* :func:`lq_decay` -- ``||I(lam, .)||_{L^q(z-box)}``;
* :func:`region_probe` -- ratio of the reduced 1-D integral to the
  van der Corput bound on the two z-regions separated by
  ``|z2| = delta |z1|^((n-m)/(n-1))``.

Values are fitted by :func:`decay_fit`, a least-squares line through
``(j, log2 value)``.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize

from .errors import DataError, DomainError
from .normal_form import SurfaceProfile, analyze
from .orders import FLAT, Order, format_order, reciprocal
from .osc_quad import eval_I1_batch, reduce_in_x2
from .phase_model import AmplitudeCutoff, SmoothPhase, make_bump

__all__ = [
    "Z_BOX",
    "J_RANGE",
    "EPS_REPORT",
    "DecayFit",
    "DecaySweep",
    "RegionProbe",
    "decay_fit",
    "default_amplitude",
    "sup_decay",
    "lq_decay",
    "region_probe",
    "graded_nodes",
    "sweep_to_csv",
    "sweep_to_svg",
]

Z_BOX = 0.125
J_RANGE = (6, 14)
EPS_REPORT = 0.05
SUP_GRID = 65
LQ_NODES = 8
N_POLISH = 6
ZOOM_POINTS = 9
# zoom until the local mesh spacing is below ZOOM_FLOOR / lam
ZOOM_FLOOR = 0.05


def default_amplitude() -> AmplitudeCutoff:
    """Unit-radius mollifier, the largest standard bump inside the corpus domain."""
    return make_bump(1.0)


@dataclass(frozen=True)
class DecayFit:
    alpha_hat: float
    intercept: float
    r_squared: float
    j_range: Tuple[int, int]
    predicted_alpha: Optional[float]
    norm_kind: str
    residual_max: float = 0.0

    def passes(self, tol: float) -> Optional[bool]:
        """``|alpha_hat - predicted| <= tol``; None without a prediction."""
        if self.predicted_alpha is None:
            return None
        return abs(self.alpha_hat - self.predicted_alpha) <= tol


@dataclass
class DecaySweep:
    """Per-lambda values of a norm together with their power-law fit."""

    fit: DecayFit
    js: List[int]
    values: List[float]
    argmax: List[Optional[Tuple[float, float]]] = field(default_factory=list)
    note: str = ""

    @property
    def lams(self):
        return [2.0**j for j in self.js]


@dataclass(frozen=True)
class RegionProbe:
    region: str
    delta: float
    ratio_stat: float
    per_lambda: Tuple[float, ...] = ()
    js: Tuple[int, ...] = ()

    @property
    def variation(self) -> float:
        """max/min of the per-lambda sup ratios (1 if not defined)."""
        vals = [v for v in self.per_lambda if v > 0]
        if not vals:
            return 1.0
        return max(vals) / min(vals)


def decay_fit(js: Sequence[int], values: Sequence[float], predicted_alpha=None,
              norm_kind: str = "sup") -> DecayFit:
    """Fit ``values ~ C * 2^(-alpha j)`` by least squares on ``log2``."""
    js = np.asarray(js, dtype=float)
    v = np.asarray(values, dtype=float)
    if js.shape != v.shape or js.ndim != 1:
        raise DataError("js and values must be 1-D of equal length")
    if len(js) < 5 or js.max() - js.min() < 4:
        raise DataError("a decay fit needs at least five dyadic points spanning four octaves")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise DataError("decay values must be finite and positive")
    y = np.log2(v)
    A = np.column_stack([js, np.ones_like(js)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * js + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    pred = None if predicted_alpha is None else float(predicted_alpha)
    return DecayFit(
        alpha_hat=float(-slope) + 0.0,
        intercept=float(intercept),
        r_squared=r2,
        j_range=(int(js.min()), int(js.max())),
        predicted_alpha=pred,
        norm_kind=norm_kind,
        residual_max=float(np.max(np.abs(resid))),
    )


def _profile(phase, profile):
    return profile if profile is not None else analyze(phase)


def _pmap(func, items, workers: int):
    if workers <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _row_abs(phase, amplitude, lam, z1, z2):
    red = reduce_in_x2(phase, z2, radius=amplitude.support_radius)
    vals, _, _ = eval_I1_batch(lam, z1, red, amplitude, estimate_error=False)
    return np.abs(vals)


# ---------------------------------------------------------------------------
# sup norm


def sup_decay(phase: SmoothPhase, profile: Optional[SurfaceProfile] = None, z_box: float = Z_BOX,
              js: Sequence[int] = range(J_RANGE[0], J_RANGE[1] + 1),
              amplitude: Optional[AmplitudeCutoff] = None, grid: int = SUP_GRID,
              workers: int = 1) -> DecaySweep:
    """Sup of ``|I(lam, z)|`` over ``|z1|, |z2| <= z_box`` for each ``lam = 2**j``.

    The sup is taken over a uniform ``grid x grid`` mesh and then polished by
    Nelder-Mead from the best mesh points (caustic peaks narrow like a power
    of ``1/lam`` and fall between mesh nodes).  Predicted exponent
    ``1/2 + 1/n``.
    """
    profile = _profile(phase, profile)
    amplitude = amplitude or default_amplitude()
    js = [int(j) for j in js]
    zg = np.linspace(-z_box, z_box, grid)
    reduced = _pmap(lambda z2: reduce_in_x2(phase, float(z2), radius=amplitude.support_radius), list(zg), workers)
    values, argmax = [], []
    for j in js:
        lam = 2.0**j
        rows = _pmap(lambda red: np.abs(eval_I1_batch(lam, zg, red, amplitude, estimate_error=False)[0]),
                     reduced, workers)
        mesh = np.array(rows)  # [z2 index, z1 index]
        best, where = _polish(phase, amplitude, lam, mesh, zg, z_box)
        values.append(best)
        argmax.append(where)
    pred = Fraction(1, 2) + reciprocal(profile.n)
    fit = decay_fit(js, values, float(pred), "sup")
    return DecaySweep(fit, js, values, argmax)


def _candidates(mesh, count):
    """Largest mesh values with their 3x3 neighbourhoods suppressed."""
    work = mesh.astype(float).copy()
    out = []
    for _ in range(min(count, work.size)):
        k = int(np.argmax(work))
        if not np.isfinite(work.flat[k]):
            break
        i2, i1 = np.unravel_index(k, work.shape)
        out.append((i2, i1))
        work[max(i2 - 1, 0):i2 + 2, max(i1 - 1, 0):i1 + 2] = -np.inf
    return out


def _polish(phase, amplitude, lam, mesh, zg, z_box):
    """Zoom on the best mesh points with successively finer local meshes,
    then finish with Nelder-Mead."""
    best = float(mesh.max())
    i2, i1 = np.unravel_index(int(np.argmax(mesh)), mesh.shape)
    where = (float(zg[i1]), float(zg[i2]))
    offsets = np.linspace(-1.0, 1.0, ZOOM_POINTS)

    def value(z1, z2):
        return float(_row_abs(phase, amplitude, lam, [z1], z2)[0])

    for i2, i1 in _candidates(mesh, N_POLISH):
        c1, c2 = float(zg[i1]), float(zg[i2])
        cand = float(mesh[i2, i1])
        # the first window spans two mesh cells each way: a narrow peak can sit
        # next to a lower node while a higher node lies on its flank
        step = 2.0 * float(zg[1] - zg[0])
        first = True
        while step > ZOOM_FLOOR / lam:
            pts = np.linspace(-1.0, 1.0, 2 * ZOOM_POINTS - 1) if first else offsets
            z1s = np.clip(c1 + step * pts, -z_box, z_box)
            z2s = np.clip(c2 + step * pts, -z_box, z_box)
            local = np.array([_row_abs(phase, amplitude, lam, z1s, float(z2)) for z2 in z2s])
            a2, a1 = np.unravel_index(int(np.argmax(local)), local.shape)
            if local[a2, a1] >= cand:
                cand, c1, c2 = float(local[a2, a1]), float(z1s[a1]), float(z2s[a2])
            step *= 2.0 / (len(pts) - 1)
            first = False
        res = minimize(lambda z: -value(float(np.clip(z[0], -z_box, z_box)), float(np.clip(z[1], -z_box, z_box))),
                       np.array([c1, c2]), method="Nelder-Mead",
                       bounds=[(-z_box, z_box), (-z_box, z_box)],
                       options={"initial_simplex": np.array([[c1, c2], [c1 + step, c2], [c1, c2 + step]]),
                                "xatol": 1e-3 * step, "fatol": 1e-12 * max(cand, 1e-300), "maxfev": 120})
        if -res.fun > cand:
            cand, c1, c2 = float(-res.fun), float(np.clip(res.x[0], -z_box, z_box)), float(np.clip(res.x[1], -z_box, z_box))
        if cand > best:
            best, where = cand, (c1, c2)
    return best, where


# ---------------------------------------------------------------------------
# L^q norm


def graded_nodes(half_width: float, finest: float, nodes: int = LQ_NODES):
    """Gauss-Legendre nodes on ``[-H, H]`` with dyadic breakpoints ``+-H 2^-k``
    refined down to ``finest`` around the origin."""
    if half_width <= 0 or finest <= 0:
        raise DomainError("graded grid needs positive widths")
    K = max(1, int(math.ceil(math.log2(half_width / finest))) + 1)
    pos = [half_width * 2.0**-k for k in range(K + 1)]
    bps = np.array(sorted([-b for b in pos] + [0.0] + pos))
    gx, gw = leggauss(nodes)
    lo, hi = bps[:-1], bps[1:]
    x = ((hi - lo)[:, None] / 2 * gx + (hi + lo)[:, None] / 2).ravel()
    w = ((hi - lo)[:, None] / 2 * gw).ravel()
    return x, w


def _lq_prediction(profile: SurfaceProfile):
    m, n = profile.m, profile.n
    if m is FLAT or m < 3:
        return None, "outside the L^(m+1) estimate hypotheses (needs m >= 3)"
    if n is not FLAT and not 2 * m < n:
        return None, "outside the L^(m+1) estimate hypotheses (needs 2m < n)"
    if n is FLAT and not profile.r_condition:
        return None, "n flat without b0 == 0"
    return 0.5 + 2.0 / (m + 1) - EPS_REPORT, f"predicted 1/2 + 2/(m+1) - eps with eps = {EPS_REPORT}"


def lq_decay(phase: SmoothPhase, q: Optional[float] = None, profile: Optional[SurfaceProfile] = None,
             z_box: float = Z_BOX, js: Sequence[int] = range(J_RANGE[0], J_RANGE[1] + 1),
             amplitude: Optional[AmplitudeCutoff] = None, nodes: int = LQ_NODES,
             workers: int = 1) -> DecaySweep:
    """``||I(lam, .)||_{L^q([-z_box, z_box]^2)}`` for each ``lam = 2**j``.

    The z-integral uses Gauss-Legendre panels graded dyadically towards
    ``z = 0`` down to width ``1/lam``, where the caustics of the model phases
    accumulate.  ``q`` defaults to ``m + 1``.
    """
    profile = _profile(phase, profile)
    amplitude = amplitude or default_amplitude()
    if q is None:
        if profile.m is FLAT:
            raise DomainError("q must be given when m is flat")
        q = profile.m + 1
    q = float(q)
    if q < 1:
        raise DomainError(f"q must be at least 1, got {q}")
    if profile.m is FLAT or q != profile.m + 1:
        pred, note = None, "q differs from m + 1; no prediction"
    else:
        pred, note = _lq_prediction(profile)
    js = [int(j) for j in js]
    values = []
    for j in js:
        lam = 2.0**j
        z, w = graded_nodes(z_box, 1.0 / lam, nodes)
        rows = _pmap(lambda z2: _row_abs(phase, amplitude, lam, z, float(z2)), list(z), workers)
        mesh = np.array(rows)
        total = float(np.sum(w[:, None] * w[None, :] * mesh**q))
        values.append(total ** (1.0 / q))
    fit = decay_fit(js, values, pred, f"L{q:g}")
    return DecaySweep(fit, js, values, [], note)


# ---------------------------------------------------------------------------
# region probe


def _region_exponents(m: int, n: int):
    lam_exp = Fraction(2, m + 1)
    z1_exp = Fraction(2 * n - m - 1, (n - 1) * (m + 1))
    z2_exp = Fraction(2 * n - m - 1, (n - m) * (m + 1))
    boundary = Fraction(n - m, n - 1)
    return lam_exp, z1_exp, z2_exp, boundary


def region_probe(phase: SmoothPhase, delta: float, profile: Optional[SurfaceProfile] = None,
                 js: Sequence[int] = range(8, 15), amplitude: Optional[AmplitudeCutoff] = None,
                 z_max: float = Z_BOX, n_z1: int = 24, n_theta: int = 9,
                 workers: int = 1) -> Tuple[RegionProbe, RegionProbe]:
    """Ratios of the reduced integral to the two-region van der Corput bounds.

    Inner region ``|z2| < delta |z1|^((n-m)/(n-1))`` is compared with
    ``lam^(-2/(m+1)) |z1|^(-(2n-m-1)/((n-1)(m+1)))``; the outer region with the
    same power of ``lam`` times ``|z2|^(-(2n-m-1)/((n-m)(m+1)))``.  The reduced
    integral here excludes the ``sqrt(2 pi/lam)`` Fresnel factor.

    ``z1`` runs over a geometric grid from ``lam^(-(n-1)/n)`` (the regime
    ``lam |z1|^(n/(n-1)) > 1``) to ``z_max``, both signs.
    """
    profile = _profile(phase, profile)
    m, n = profile.m, profile.n
    if m is FLAT or n is FLAT or not 2 * m < n:
        raise DomainError(
            f"region probe needs 2m < n with both finite, got (m, n) = ({format_order(m)}, {format_order(n)})"
        )
    if not delta > 0:
        raise DomainError("delta must be positive")
    amplitude = amplitude or default_amplitude()
    lam_e, z1_e, z2_e, bd = (float(v) for v in _region_exponents(m, n))
    js = [int(j) for j in js]
    inner_per, outer_per = [], []
    thetas = np.linspace(-1.0, 1.0, n_theta)
    for j in js:
        lam = 2.0**j
        floor = lam ** (-(n - 1) / n)
        mags = np.geomspace(floor, z_max, n_z1)
        z1s = np.concatenate([-mags[::-1], mags])
        # inner samples: z2 = theta * delta |z1|^bd
        pairs = [(float(z1), float(t * delta * abs(z1) ** bd)) for z1 in z1s for t in thetas]
        # outer samples: |z2| geometric between the boundary and z_max
        outer = []
        for z1 in z1s:
            lo = delta * abs(z1) ** bd
            if lo < z_max:
                for mag in np.geomspace(lo, z_max, max(3, n_theta // 2 + 1))[1:]:
                    outer += [(float(z1), float(mag)), (float(z1), float(-mag))]
        inner_per.append(_ratio_sup(phase, amplitude, lam, pairs, lambda z1, z2: lam**-lam_e * abs(z1) ** -z1_e, workers))
        outer_per.append(_ratio_sup(phase, amplitude, lam, outer, lambda z1, z2: lam**-lam_e * abs(z2) ** -z2_e, workers))
    inner = RegionProbe("inner", float(delta), float(max(inner_per)), tuple(inner_per), tuple(js))
    outer_p = RegionProbe("outer", float(delta), float(max(outer_per)) if outer_per else 0.0, tuple(outer_per), tuple(js))
    return inner, outer_p


def _ratio_sup(phase, amplitude, lam, pairs, bound: Callable, workers):
    if not pairs:
        return 0.0
    by_z2 = {}
    for z1, z2 in pairs:
        by_z2.setdefault(z2, []).append(z1)
    keys = sorted(by_z2)
    fresnel = math.sqrt(2.0 * math.pi / lam)

    def row(z2):
        z1 = np.array(by_z2[z2])
        vals = _row_abs(phase, amplitude, lam, z1, z2) / fresnel
        b = np.array([bound(a, z2) for a in z1])
        return float(np.max(vals / b))

    return max(_pmap(row, keys, workers))


# ---------------------------------------------------------------------------
# artifacts


def sweep_to_csv(sweep: DecaySweep, label: str = "") -> str:
    out = io.StringIO()
    out.write("# schema: osclab.decay v1\n")
    out.write("j,lambda,value\n")
    for j, v in zip(sweep.js, sweep.values):
        out.write(f"{j},{2.0**j!r},{v!r}\n")
    f = sweep.fit
    out.write(f"# fit.norm_kind={f.norm_kind}\n")
    out.write(f"# fit.alpha_hat={f.alpha_hat!r}\n")
    out.write(f"# fit.intercept={f.intercept!r}\n")
    out.write(f"# fit.r_squared={f.r_squared!r}\n")
    out.write(f"# fit.predicted_alpha={'' if f.predicted_alpha is None else repr(f.predicted_alpha)}\n")
    if label:
        out.write(f"# label={label}\n")
    if sweep.note:
        out.write(f"# note={sweep.note}\n")
    return out.getvalue()


def sweep_to_svg(sweep: DecaySweep, title: str = "") -> str:
    """Log-log plot of the sweep with the fitted and predicted slopes."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "osclab"
    js = np.array(sweep.js, dtype=float)
    y = np.log2(sweep.values)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(js, y, "o", label=sweep.fit.norm_kind)
    ax.plot(js, -sweep.fit.alpha_hat * js + sweep.fit.intercept, "-", label=f"fit {sweep.fit.alpha_hat:.3f}")
    if sweep.fit.predicted_alpha is not None:
        mid = js.mean()
        y0 = -sweep.fit.alpha_hat * mid + sweep.fit.intercept
        ax.plot(js, y0 - sweep.fit.predicted_alpha * (js - mid), "--",
                label=f"predicted {sweep.fit.predicted_alpha:.3f}")
    ax.set_xlabel("j  (lambda = 2^j)")
    ax.set_ylabel("log2 norm")
    if title:
        ax.set_title(title)
    ax.legend()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
