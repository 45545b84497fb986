import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osclab.errors import CapabilityError, DomainError, PhaseLoadError
from osclab.orders import FLAT, format_order, parse_order, reciprocal
from osclab.phase_model import (
    PolynomialPhase,
    SmoothPhase,
    corpus_names,
    corpus_phase,
    dump_phase_text,
    eval_partial,
    fd_weights,
    make_bump,
    make_chi0,
    make_chi1,
    parse_phase_text,
)

X2SQ_X1CUBE = PolynomialPhase({(0, 2): 1, (3, 0): 1})
FOLD2 = PolynomialPhase({(0, 2): 1, (2, 1): -2, (4, 0): 1})


# -- orders ---------------------------------------------------------------

def test_flat_orders_compare_above_every_integer():
    assert FLAT > 10**9 and not FLAT < 3 and FLAT >= 2
    assert reciprocal(FLAT) == 0
    assert reciprocal(4) == Fraction(1, 4)


@pytest.mark.parametrize("text, expected", [("flat", FLAT), ("inf", FLAT), ("∞", FLAT), ("7", 7), (3, 3)])
def test_parse_order(text, expected):
    assert parse_order(text) == expected


def test_format_order_round_trip():
    for order in (2, 5, FLAT):
        assert parse_order(format_order(order)) == order


# -- cutoffs --------------------------------------------------------------

def test_bump_center_value_is_inverse_e():
    assert make_bump(1).evaluate(0.0, 0.0) == pytest.approx(math.exp(-1), abs=1e-15)


def test_bump_vanishes_outside_support():
    assert make_bump(1).evaluate(1.5, 0.0) == 0.0
    assert make_bump(1).evaluate(0.0, -1.0) == 0.0


def test_bump_integral_matches_reference():
    # 2 pi int_0^1 r exp(-1/(1-r^2)) dr = pi (e^-1 - E1(1))
    from scipy.special import exp1

    exact = math.pi * (math.exp(-1) - exp1(1.0))
    assert make_bump(1).integral() == pytest.approx(0.466512, abs=1e-4)
    assert make_bump(1).integral() == pytest.approx(exact, rel=1e-10)


def test_bump_integral_scales_with_area():
    assert make_bump(0.5).integral() == pytest.approx(make_bump(1).integral() / 4, rel=1e-10)


@pytest.mark.parametrize("radius", [0.0, -1.0])
def test_bump_rejects_nonpositive_radius(radius):
    with pytest.raises(DomainError):
        make_bump(radius)


def test_chi0_plateau_and_support():
    chi0 = make_chi0()
    assert chi0.evaluate(0.5, 0.0) == 1.0
    assert chi0.evaluate(3.0, 0.0) == 0.0


def test_chi1_golden_value():
    chi1, chi0 = make_chi1(), make_chi0()
    value = float(chi1.evaluate(0.75, 0.0))
    assert 0.0 < value < 1.0
    assert value == pytest.approx(1.0 - float(chi0.evaluate(1.5, 0.0)), abs=1e-15)
    # the joiner is symmetric about the midpoint of [1, 2]
    assert value == pytest.approx(0.5, abs=1e-15)


def test_chi0_monotone_in_radius():
    r = np.linspace(0, 2.5, 2001)
    vals = make_chi0().radial(r)
    assert np.all(np.diff(vals) <= 1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_dyadic_cutoff_identity(x1, x2):
    chi0, chi1 = make_chi0(), make_chi1()
    lhs = chi1.evaluate(x1, x2) + chi0.evaluate(2 * x1, 2 * x2)
    assert lhs == pytest.approx(float(chi0.evaluate(x1, x2)), abs=1e-14)


@pytest.mark.parametrize("cutoff", [make_bump(1.0), make_chi0(), make_chi1()], ids=lambda c: c.kind)
def test_cutoff_derivatives_bounded_near_support_edge(cutoff):
    # fourth differences stay bounded as the step shrinks: no kink at the edge
    R = cutoff.support_radius
    r = np.linspace(0.8 * R, 1.05 * R, 4001)
    f = cutoff.radial(r)
    h = r[1] - r[0]
    d4 = np.diff(f, 4) / h**4
    assert np.all(np.isfinite(d4))
    assert np.max(np.abs(d4)) < 1e4


# -- polynomial phases ----------------------------------------------------

@pytest.mark.parametrize(
    "phase, gamma, expected",
    [
        (X2SQ_X1CUBE, (0, 2), 2),
        (X2SQ_X1CUBE, (3, 0), 6),
        (FOLD2, (1, 1), 0),
        (FOLD2, (2, 1), -4),
        (FOLD2, (4, 0), 24),
    ],
)
def test_exact_partials_at_origin(phase, gamma, expected):
    value = eval_partial(phase, gamma, (0, 0))
    assert isinstance(value, Fraction)
    assert value == expected


def test_partial_order_cap():
    with pytest.raises(CapabilityError):
        eval_partial(X2SQ_X1CUBE, (5, 4), (0, 0))


def test_partial_outside_domain():
    with pytest.raises(DomainError):
        eval_partial(X2SQ_X1CUBE, (1, 0), (3.0, 0.0))


@pytest.mark.parametrize("key", [(0, 0), (1, 0), (0, 1)])
def test_polynomial_rejects_low_order_terms(key):
    with pytest.raises(DomainError):
        PolynomialPhase({(0, 2): 1, key: 1})


def test_polynomial_requires_curvature():
    with pytest.raises(DomainError):
        PolynomialPhase({(4, 0): 1, (1, 1): 1})


coeff = st.fractions(min_value=-3, max_value=3, max_denominator=7)


@settings(max_examples=40, deadline=None)
@given(
    st.dictionaries(st.tuples(st.integers(0, 5), st.integers(0, 4)), coeff, min_size=1, max_size=6),
    st.tuples(st.integers(0, 4), st.integers(0, 3)),
    st.fractions(-1, 1, max_denominator=9),
    st.fractions(-1, 1, max_denominator=9),
)
def test_exact_partial_matches_symbolic_shift(coeffs, gamma, a, b):
    coeffs = {k: v for k, v in coeffs.items() if k not in ((0, 0), (1, 0), (0, 1))}
    coeffs[(0, 2)] = Fraction(1)
    phase = PolynomialPhase(coeffs)
    g1, g2 = gamma
    expected = Fraction(0)
    for (i, j), c in phase.coefficients.items():
        if i >= g1 and j >= g2:
            expected += c * math.perm(i, g1) * math.perm(j, g2) * a ** (i - g1) * b ** (j - g2)
    assert eval_partial(phase, gamma, (a, b)) == expected


def test_scaling_scales_coefficients():
    scaled = FOLD2.scaled(Fraction(1, 3))
    assert scaled.coefficients[(2, 1)] == Fraction(-2, 3)


# -- finite-difference oracle ----------------------------------------------

def _closed_form_phase():
    # phi = cosh(x1) x2^2/2... shifted: x2^2 e^{x1} + sin(x1)^3 has phi=grad=0 at 0
    func = lambda a, b: b**2 * np.exp(a) + np.sin(a) ** 3
    return SmoothPhase(func, name="closed")


def _closed_form_partial(gamma, a, b):
    g1, g2 = gamma
    # d1^g1 d2^g2 [x2^2 e^{x1}]
    poly = {0: b**2, 1: 2 * b, 2: 2.0 * np.ones_like(b)}.get(g2, 0.0 * b)
    first = poly * np.exp(a)
    if g2 == 0:
        # derivatives of sin^3 = (3 sin x - sin 3x)/4
        d = [np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t)]
        second = (3 * d[g1 % 4](a) - 3**g1 * d[g1 % 4](3 * a)) / 4
    else:
        second = 0.0
    return first + second


def test_fd_weights_reproduce_polynomials():
    for order in range(0, 5):
        s, w = fd_weights(order)
        for deg in range(order + 2):
            val = float(np.sum(w * s.astype(float) ** deg))
            expected = math.factorial(order) if deg == order else 0.0
            assert val == pytest.approx(expected, abs=1e-9)


def test_fd_partials_match_closed_form(rng):
    phase = _closed_form_phase()
    pts = rng.uniform(-0.9, 0.9, size=(100, 2))
    gammas = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)]
    worst = 0.0
    for g in gammas:
        val, err = phase.partial_with_error(g, pts[:, 0], pts[:, 1])
        ref = _closed_form_partial(g, pts[:, 0], pts[:, 1])
        scale = np.maximum(np.abs(ref), 1.0)
        worst = max(worst, float(np.max(np.abs(val - ref) / scale)))
        assert np.all(err >= 0)
    assert worst < 1e-6


def test_fd_partial_of_order_zero_is_evaluate(rng):
    phase = _closed_form_phase()
    pts = rng.uniform(-0.9, 0.9, size=(20, 2))
    np.testing.assert_array_equal(phase.partial((0, 0), pts[:, 0], pts[:, 1]), phase.evaluate(pts[:, 0], pts[:, 1]))


def test_smooth_phase_hypothesis_checks():
    with pytest.raises(DomainError):
        SmoothPhase(lambda a, b: b**2 + a)  # gradient does not vanish
    with pytest.raises(DomainError):
        SmoothPhase(lambda a, b: a**2 + b**4)  # no curvature in x2


# -- corpus and text format ------------------------------------------------

def test_corpus_has_twelve_phases():
    assert len(corpus_names()) == 12


def test_unknown_corpus_name():
    with pytest.raises(PhaseLoadError):
        corpus_phase("no_such_phase")


@pytest.mark.parametrize("name", corpus_names())
def test_phase_text_round_trip(name):
    phase = corpus_phase(name)
    again = parse_phase_text(dump_phase_text(phase))
    assert again == phase
    assert again.name == name


@pytest.mark.parametrize(
    "text",
    ["", "0 2 1\n", "0 2 1 0\n", "0 2 1 1\n0 2 3 1\n", "-1 2 1 1\n", "1 0 1 1\n0 2 1 1\n"],
)
def test_phase_text_errors(text):
    with pytest.raises(PhaseLoadError):
        parse_phase_text(text)


def test_phase_text_comments_and_name():
    text = "# name: mine\n0 2 1 1   # curvature\n\n4 0 -1 3\n"
    phase = parse_phase_text(text)
    assert phase.name == "mine"
    assert phase.coefficients == {(0, 2): Fraction(1), (4, 0): Fraction(-1, 3)}
