"""Witness families showing growth of ``||M_k u_j||_{L^p'}`` below the threshold.

A witness at dyadic index ``j`` localises frequencies to a box of extents
``2^j x 2^(j sigma1) x 2^(j sigma2)`` in the ``(xi3, xi1, xi2)`` directions and
is normalised in ``L^p``.  On the dual spatial box
``|x3 - 1| <= c 2^-j``, ``|x1| <= c 2^(-j sigma1)``, ``|x2| <= c 2^(-j sigma2)``
the operator image equals an explicit prefactor times a reduced integral
``J_j(x)`` whose phase stays small (non-oscillation), so

    surrogate_j = vol_j^(1/p') * min_box |J_j| * 2^(j E)

is a lower bound for the norm up to a j-independent constant.  Here
``N = 1 + sigma1 + sigma2`` and ``E = N/p - k`` (plus ``m/n - 1/2`` in the
case with a Fresnel factor from the curved direction), giving the growth
exponent ``2 N (1/p - 1/2) - k`` (respectively the second branch of the
two-branch threshold).

Coordinates: ``x1`` is the degenerate direction of the phase, ``x2`` the
curved one.  ``s1``, ``s2`` are the frequency scaling exponents of the
homogeneous coordinates ``y1 = xi1/xi3``, ``y2 = xi2/xi3`` and
``sigma_i = 1 - s_i``.
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

from .errors import DomainError, InsufficientDataError, ProfileError
from .exponents import HALF
from .normal_form import SurfaceProfile
from .orders import FLAT, Order, format_order, parse_order, reciprocal
from .phase_model import SmoothPhase

__all__ = [
    "CASES",
    "C_BOX",
    "PROFILE_RADIUS",
    "CASE_II_CENTER",
    "NONOSC_LIMIT",
    "WitnessSpec",
    "GrowthReport",
    "ProfilePack",
    "default_profiles",
    "witness_scalings",
    "make_spec",
    "predicted_growth",
    "growth_prefactor",
    "build_witness",
    "Witness",
    "growth_fit",
    "growth_to_csv",
    "growth_to_svg",
]

CASES = ("case_i", "case_ii", "remark_nonadapted")
C_BOX = Fraction(1, 100)
PROFILE_RADIUS = 0.25
CASE_II_CENTER = 1e-4
NONOSC_LIMIT = 0.2
CENTER_FRACTION = 0.7
QUAD_NODES = 24


# ---------------------------------------------------------------------------
# profiles


def _bump1d(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


@dataclass(frozen=True)
class ProfilePack:
    """One-dimensional witness profiles.

    ``f`` and ``g`` are the transverse profiles (value 1 at 0, support
    ``|y| < radius``); ``cutoff`` localises the radial frequency variable
    around ``center`` with half-width ``width``.
    """

    radius: float = PROFILE_RADIUS
    center: float = 1.0
    width: float = 0.25

    def f(self, y):
        return _bump1d(np.asarray(y, dtype=float) / self.radius)

    def g(self, y):
        return _bump1d(np.asarray(y, dtype=float) / self.radius)

    def cutoff(self, lam):
        return _bump1d((np.asarray(lam, dtype=float) - self.center) / self.width)

    def nodes(self, which: str, count: int = QUAD_NODES):
        """Gauss-Legendre nodes/weights over the support of a profile."""
        gx, gw = leggauss(count)
        if which == "cutoff":
            a, b = self.center - self.width, self.center + self.width
        else:
            a, b = -self.radius, self.radius
        return 0.5 * (b - a) * gx + 0.5 * (a + b), 0.5 * (b - a) * gw


def default_profiles(case: str) -> ProfilePack:
    if case == "case_ii":
        return ProfilePack(PROFILE_RADIUS, CASE_II_CENTER, CASE_II_CENTER / 2)
    return ProfilePack()


# ---------------------------------------------------------------------------
# specs and exponents


def witness_scalings(case: str, m: Order, n: Order) -> Tuple[Fraction, Fraction]:
    """``(s1, s2)`` for the degenerate and the curved direction."""
    m, n = parse_order(m), parse_order(n)
    if case == "case_i":
        if n is FLAT:
            raise DomainError("case_i witness needs a finite n")
        return Fraction(1, n), HALF
    if case == "remark_nonadapted":
        if m is FLAT:
            raise DomainError("remark witness needs a finite m")
        return Fraction(1, 2 * m), HALF
    if case == "case_ii":
        if m is FLAT or n is FLAT:
            raise DomainError("case_ii witness needs finite m and n")
        if not 2 * m < n:
            raise DomainError("case_ii witness needs 2m < n")
        return Fraction(1, n), Fraction(m, n)
    raise DomainError(f"unknown witness case {case!r}; expected one of {CASES}")


@dataclass(frozen=True)
class WitnessSpec:
    case: str
    j: int
    p: Fraction
    k: Fraction
    m: Order
    n: Order
    c_box: Fraction = C_BOX

    def __post_init__(self):
        object.__setattr__(self, "p", Fraction(self.p))
        object.__setattr__(self, "k", _rat(self.k))
        object.__setattr__(self, "c_box", Fraction(self.c_box))
        object.__setattr__(self, "m", parse_order(self.m))
        object.__setattr__(self, "n", parse_order(self.n))
        if not (1 <= self.p <= 2):
            raise DomainError(f"p must lie in [1, 2], got {self.p}")
        if not (0 < self.c_box <= Fraction(1, 100)):
            raise DomainError("c_box must lie in (0, 1/100]")
        witness_scalings(self.case, self.m, self.n)

    @property
    def scalings(self) -> Tuple[Fraction, Fraction]:
        return witness_scalings(self.case, self.m, self.n)

    @property
    def sigmas(self) -> Tuple[Fraction, Fraction]:
        s1, s2 = self.scalings
        return 1 - s1, 1 - s2

    @property
    def box_exponent(self) -> Fraction:
        """``N``: the spatial box has volume ``(2c)^3 2^(-j N)``."""
        s1, s2 = self.sigmas
        return 1 + s1 + s2

    def box_half_widths(self) -> Tuple[float, float, float]:
        """Half-widths in ``(x1, x2, x3 - 1)``."""
        s1, s2 = self.sigmas
        c = float(self.c_box)
        return c * 2.0 ** (-self.j * s1), c * 2.0 ** (-self.j * s2), c * 2.0 ** (-self.j)


def make_spec(case, j, p, k, m, n, c_box=C_BOX) -> WitnessSpec:
    return WitnessSpec(case, int(j), Fraction(p), k, m, n, c_box)


def _rat(x):
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**9)
    return Fraction(x)


def predicted_growth(case: str, p, k, m: Order, n: Order) -> Fraction:
    """Growth exponent of the witness norms, exact in rationals.

    * case_i: ``(5 - 2/n) t - k``
    * remark_nonadapted: ``(5 - 1/m) t - k``
    * case_ii: ``(6 - 2(m+1)/n) t - 1/2 + m/n - k``

    with ``t = 1/p - 1/2``.
    """
    p, k = Fraction(p), _rat(k)
    t = 1 / p - HALF
    m, n = parse_order(m), parse_order(n)
    if case == "case_i":
        return (5 - 2 * reciprocal(n)) * t - k
    if case == "remark_nonadapted":
        return (5 - reciprocal(m)) * t - k
    if case == "case_ii":
        inv_n = reciprocal(n)
        return (6 - 2 * (m + 1) * inv_n) * t - HALF + m * inv_n - k
    raise DomainError(f"unknown witness case {case!r}")


def growth_prefactor(spec: WitnessSpec) -> Fraction:
    """``E`` in the explicit ``2^(jE)`` factor of the operator image on the box."""
    N = spec.box_exponent
    E = N / spec.p - spec.k
    if spec.case == "case_ii":
        inv_n = reciprocal(spec.n)
        E += spec.m * inv_n - HALF
    return E


# ---------------------------------------------------------------------------
# reduced integrals


@dataclass
class Witness:
    """Evaluable reduced integral ``J_j(x)`` of one witness."""

    spec: WitnessSpec
    profiles: ProfilePack
    phase_fn: Callable  # (x1, x2, x3, nodes...) -> phase array
    amplitude: np.ndarray
    nodes: Tuple[np.ndarray, ...]

    def phase(self, x1, x2, x3):
        """Phase ``2^j lam * (...)`` at all quadrature nodes for one box point."""
        return self.phase_fn(float(x1), float(x2), float(x3))

    def value(self, x1, x2, x3) -> complex:
        return complex(np.sum(self.amplitude * np.exp(1j * self.phase(x1, x2, x3))))

    def trivial_value(self) -> float:
        """Integral of the amplitude alone (the zero-phase value)."""
        return float(np.sum(self.amplitude))

    def box_points(self, per_axis: int = 3):
        h1, h2, h3 = self.spec.box_half_widths()
        t = np.linspace(-1.0, 1.0, per_axis)
        return [(a * h1, b * h2, 1.0 + c * h3) for a in t for b in t for c in t]


def build_witness(spec: WitnessSpec, phase: SmoothPhase, profile: Optional[SurfaceProfile] = None,
                  profiles: Optional[ProfilePack] = None) -> Witness:
    """Assemble the reduced integral of the witness family at index ``spec.j``.

    case_i / remark_nonadapted: triple integral over ``(lam, y1, y2)`` of
    ``cutoff(lam) f(y1) g(y2) exp(i 2^j lam ((x3 - 1) - 2^(-j s1) y1 x1
    - 2^(-j s2) y2 x2 - x3 phi(2^(-j s1) y1, 2^(-j s2) y2)))``.

    case_ii: double integral over ``(lam, z1)`` left after stationary phase
    in the curved frequency direction, with phase ``2^j lam Phi4`` where
    ``Phi4 = (1 - x3) - x1 z1 2^(-j/n) + x2 2^(-jm/n) z1^m omega(2^(-j/n) z1)
    + 2^-j z1^n beta(2^(-j/n) z1) + x2^2 2^(-2jm/n) B(z1)`` and ``B`` is the
    coefficient ``-1/(4 b)`` of the Legendre dual, frozen at ``x2 = 0``.
    The Fresnel factor ``lam^(-1/2)`` sits in the amplitude; its ``2^j``
    part is in :func:`growth_prefactor`.
    """
    profiles = profiles or default_profiles(spec.case)
    j = spec.j
    s1, s2 = (float(v) for v in spec.scalings)
    if spec.case in ("case_i", "remark_nonadapted"):
        lam, wl = profiles.nodes("cutoff")
        y1, w1 = profiles.nodes("f")
        y2, w2 = profiles.nodes("g")
        L, Y1, Y2 = np.meshgrid(lam, y1, y2, indexing="ij")
        amp = (wl[:, None, None] * w1[None, :, None] * w2[None, None, :]
               * profiles.cutoff(L) * profiles.f(Y1) * profiles.g(Y2))
        u1 = 2.0 ** (-j * s1) * Y1
        u2 = 2.0 ** (-j * s2) * Y2
        scaled_phi = 2.0**j * phase.evaluate(u1, u2)
        big = 2.0**j * L

        def phase_fn(x1, x2, x3):
            return (big * (x3 - 1.0) - big * (u1 * x1 + u2 * x2) - L * x3 * scaled_phi)

        return Witness(spec, profiles, phase_fn, amp, (L, Y1, Y2))

    # case_ii
    if profile is None:
        raise ProfileError("case_ii witness needs a surface profile with omega and beta")
    m, n = spec.m, spec.n
    lam, wl = profiles.nodes("cutoff")
    z1, w1 = profiles.nodes("f")
    L, Z1 = np.meshgrid(lam, z1, indexing="ij")
    amp = wl[:, None] * w1[None, :] * profiles.cutoff(L) * profiles.f(Z1) * L**-0.5
    y1 = 2.0 ** (-j / n) * z1
    try:
        omega = np.asarray(profile.omega(y1), dtype=float)
        beta = np.asarray(profile.beta(y1), dtype=float)
    except Exception as exc:  # noqa: BLE001 - surface the missing tabulation
        raise ProfileError(f"omega/beta tabulation unavailable: {exc}") from exc
    if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(beta))):
        raise ProfileError("omega/beta tabulation is not finite on the witness support")
    b_fold = 0.5 * np.asarray(phase.partial((0, 2), y1, np.asarray(profile.psi(y1), dtype=float)), dtype=float)
    B = -1.0 / (4.0 * b_fold)
    t_x1 = -(2.0 ** (-j / n)) * z1
    t_x2 = 2.0 ** (-j * m / n) * z1**m * omega
    t_0 = 2.0**-j * z1**n * beta
    t_x22 = 2.0 ** (-2 * j * m / n) * B
    big = 2.0**j * L

    def phase_fn(x1, x2, x3):
        inner = (1.0 - x3) + x1 * t_x1 + x2 * t_x2 + t_0 + x2 * x2 * t_x22
        return big * inner[None, :]

    return Witness(spec, profiles, phase_fn, amp, (L, Z1))


# ---------------------------------------------------------------------------
# growth fit


@dataclass(frozen=True)
class GrowthRow:
    j: int
    certified: bool
    surrogate: float
    log2_surrogate: float
    nonoscillation_max_phase: float
    center_ratio: float


@dataclass
class GrowthReport:
    fitted_exponent: float
    predicted_exponent: Fraction
    j_range: Tuple[int, int]
    nonoscillation_max_phase: float
    rows: List[GrowthRow] = field(default_factory=list)
    dropped: List[int] = field(default_factory=list)
    case: str = ""
    note: str = ""

    @property
    def sign_agrees(self) -> bool:
        return (self.fitted_exponent > 0) == (self.predicted_exponent > 0)


def _evaluate_j(spec: WitnessSpec, phase, profile, profiles):
    w = build_witness(spec, phase, profile, profiles)
    pts = w.box_points()
    mods, maxph = [], 0.0
    for x in pts:
        ph = w.phase(*x)
        maxph = max(maxph, float(np.max(np.abs(ph))))
        mods.append(abs(complex(np.sum(w.amplitude * np.exp(1j * ph)))))
    center = abs(w.value(0.0, 0.0, 1.0))
    trivial = w.trivial_value()
    N = spec.box_exponent
    c = float(spec.c_box)
    log2_vol = 3.0 * math.log2(2.0 * c) - spec.j * float(N)
    inv_pdual = float(1 - 1 / spec.p)
    log2_s = inv_pdual * log2_vol + math.log2(min(mods)) + spec.j * float(growth_prefactor(spec))
    certified = maxph <= NONOSC_LIMIT
    return GrowthRow(spec.j, certified, 2.0**log2_s, log2_s, maxph, center / trivial)


def growth_fit(case: str, phase: SmoothPhase, p, k, m: Order, n: Order,
               js: Sequence[int] = range(6, 15), profile: Optional[SurfaceProfile] = None,
               profiles: Optional[ProfilePack] = None, c_box=C_BOX, workers: int = 1) -> GrowthReport:
    """Fit the growth exponent of the witness surrogates over ``js``.

    Indices whose non-oscillation certificate exceeds the limit are dropped
    and listed in the report.
    """
    specs = [make_spec(case, j, p, k, m, n, c_box) for j in js]

    def one(spec):
        return _evaluate_j(spec, phase, profile, profiles)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, specs))
    else:
        rows = [one(s) for s in specs]
    used = [r for r in rows if r.certified]
    dropped = [r.j for r in rows if not r.certified]
    if len(used) < 4:
        raise InsufficientDataError(
            f"only {len(used)} certified indices (need 4); dropped {dropped}"
        )
    x = np.array([r.j for r in used], dtype=float)
    y = np.array([r.log2_surrogate for r in used])
    slope = float(np.polyfit(x, y, 1)[0])
    note = ""
    if case == "case_ii":
        note = "predicted exponent taken from the second branch of the two-branch threshold"
    return GrowthReport(
        fitted_exponent=slope,
        predicted_exponent=predicted_growth(case, p, k, m, n),
        j_range=(int(x.min()), int(x.max())),
        nonoscillation_max_phase=max(r.nonoscillation_max_phase for r in used),
        rows=rows,
        dropped=dropped,
        case=case,
        note=note,
    )


def growth_to_csv(report: GrowthReport) -> str:
    out = io.StringIO()
    out.write("# schema: osclab.growth v1\n")
    out.write("j,certified,surrogate,log2_surrogate,nonoscillation_max_phase\n")
    for r in report.rows:
        out.write(f"{r.j},{int(r.certified)},{r.surrogate!r},{r.log2_surrogate!r},{r.nonoscillation_max_phase!r}\n")
    out.write(f"# fit.case={report.case}\n")
    out.write(f"# fit.fitted_exponent={report.fitted_exponent!r}\n")
    out.write(f"# fit.predicted_exponent={report.predicted_exponent}\n")
    out.write(f"# fit.dropped={' '.join(str(j) for j in report.dropped)}\n")
    return out.getvalue()


def growth_to_svg(report: GrowthReport, title: str = "") -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "osclab"
    used = [r for r in report.rows if r.certified]
    js = np.array([r.j for r in used], dtype=float)
    y = np.array([r.log2_surrogate for r in used])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(js, y, "o", label="log2 surrogate")
    mid, ymid = js.mean(), y.mean()
    ax.plot(js, ymid + report.fitted_exponent * (js - mid), "-", label=f"fit {report.fitted_exponent:.3f}")
    ax.plot(js, ymid + float(report.predicted_exponent) * (js - mid), "--",
            label=f"predicted {float(report.predicted_exponent):.3f}")
    ax.set_xlabel("j")
    ax.set_ylabel("log2 surrogate")
    if title:
        ax.set_title(title)
    ax.legend()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
