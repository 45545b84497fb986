from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from osclab.errors import DomainError, InsufficientDataError, ProfileError
from osclab.exponents import ExponentQuery, branch_values, k_sharp, rational_p_grid
from osclab.sharpness_lab import (
    NONOSC_LIMIT,
    CENTER_FRACTION,
    ProfilePack,
    build_witness,
    default_profiles,
    growth_fit,
    growth_to_csv,
    growth_to_svg,
    make_spec,
    predicted_growth,
    witness_scalings,
)
from osclab.orders import FLAT
from osclab.phase_model import corpus_phase

GRID = rational_p_grid(101)


@pytest.mark.parametrize(
    "case, p, k, m, n, expected",
    [
        ("case_i", 1, F(7, 4), FLAT, 2, F(1, 4)),
        ("case_i", 2, F(3), FLAT, 4, F(-3)),
        ("case_ii", 1, 2, 3, 8, F(3, 8)),
        ("remark_nonadapted", 1, 2, 3, FLAT, F(1, 3)),
    ],
)
def test_predicted_growth_values(case, p, k, m, n, expected):
    assert predicted_growth(case, p, k, m, n) == expected


@given(st.integers(0, 100), st.fractions(0, 3, max_denominator=12))
def test_no_growth_at_p2(i, k):
    assert predicted_growth("case_i", 2, k, FLAT, 3) == -k


@pytest.mark.parametrize("n", [2, 3, 4, 6, 9])
def test_case_i_meets_upper_bound(n):
    for p in GRID:
        assert predicted_growth("case_i", p, 0, FLAT, n) == k_sharp(ExponentQuery(p, FLAT, n)).k_p


@pytest.mark.parametrize("m, n", [(3, 7), (3, 8), (4, 9), (5, 40)])
def test_case_ii_meets_second_branch(m, n):
    for p in GRID:
        t = 1 / p - F(1, 2)
        assert predicted_growth("case_ii", p, 0, m, n) == branch_values(t, m, n)[1]


@pytest.mark.parametrize("m", [3, 4, 5])
def test_remark_meets_first_branch(m):
    for p in GRID:
        t = 1 / p - F(1, 2)
        assert predicted_growth("remark_nonadapted", p, 0, m, FLAT) == (5 - F(1, m)) * t


@pytest.mark.parametrize(
    "case, m, n, expected",
    [("case_i", FLAT, 4, (F(1, 4), F(1, 2))), ("remark_nonadapted", 3, FLAT, (F(1, 6), F(1, 2))),
     ("case_ii", 3, 8, (F(1, 8), F(3, 8)))],
)
def test_scalings(case, m, n, expected):
    assert witness_scalings(case, m, n) == expected


@pytest.mark.parametrize("case, m, n", [("case_i", 3, FLAT), ("case_ii", 3, 5), ("case_ii", FLAT, 8),
                                        ("remark_nonadapted", FLAT, 4), ("other", 3, 8)])
def test_scalings_reject_inconsistent_cases(case, m, n):
    with pytest.raises(DomainError):
        witness_scalings(case, m, n)


def test_spec_validation():
    with pytest.raises(DomainError):
        make_spec("case_i", 8, F(3), 1, FLAT, 2)
    with pytest.raises(DomainError):
        make_spec("case_i", 8, 1, 1, FLAT, 2, c_box=F(1, 10))


def test_box_center_phase_is_scale_free_and_small():
    # for a quasi-homogeneous phase the scaled phase at the box centre is the
    # same at every j, and small enough to keep the integral near trivial
    phase = corpus_phase("power_n2")
    centre = []
    for j in (8, 11, 14):
        w = build_witness(make_spec("case_i", j, 1, F(7, 4), FLAT, 2), phase)
        centre.append(w.phase(0.0, 0.0, 1.0))
        assert np.max(np.abs(centre[-1])) <= NONOSC_LIMIT
        assert abs(w.value(0.0, 0.0, 1.0)) >= CENTER_FRACTION * w.trivial_value() > 0
    np.testing.assert_allclose(centre[0], centre[2], atol=1e-12)


def test_box_corner_certificate():
    spec = make_spec("case_i", 8, 1, F(7, 4), FLAT, 2)
    w = build_witness(spec, corpus_phase("power_n2"))
    h1, h2, h3 = spec.box_half_widths()
    assert np.max(np.abs(w.phase(h1, h2, 1 + h3))) <= NONOSC_LIMIT


@pytest.mark.parametrize("name, n", [("cubic_b_n4", 4), ("tilted_m3_n5", 5)])
def test_scaled_phase_tends_to_quasi_homogeneous_part(name, n):
    # 2^j phi(2^(-j/n) y1, 2^(-j/2) y2) - (y2^2 + c y1^n) shrinks as j grows
    phase = corpus_phase(name)
    lead = float(phase.coefficients[(n, 0)])
    y = np.linspace(-0.25, 0.25, 11)
    Y1, Y2 = np.meshgrid(y, y)
    gaps = []
    for j in range(8, 15):
        scaled = 2.0**j * phase.evaluate(2.0 ** (-j / n) * Y1, 2.0 ** (-j / 2) * Y2)
        gaps.append(float(np.max(np.abs(scaled - (Y2**2 + lead * Y1**n)))))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.01


def test_case_ii_needs_profile():
    spec = make_spec("case_ii", 8, 1, 2, 3, 8)
    with pytest.raises(ProfileError):
        build_witness(spec, corpus_phase("fold_m3_n8"), None, default_profiles("case_ii"))


def test_profile_pack_normalisation():
    pack = ProfilePack()
    assert pack.f(0.0) == 1.0 and pack.g(0.0) == 1.0 and pack.cutoff(1.0) == 1.0
    assert pack.f(pack.radius) == 0.0
    x, w = pack.nodes("cutoff")
    assert np.all((x > pack.center - pack.width) & (x < pack.center + pack.width))
    assert default_profiles("case_ii").center == pytest.approx(1e-4)


@pytest.fixture(scope="module")
def n2_reports():
    phase = corpus_phase("power_n2")
    return [growth_fit("case_i", phase, 1, k, FLAT, 2) for k in (F(7, 4), F(9, 4))]


def test_growth_fit_below_and_above_threshold(n2_reports):
    below, above = n2_reports
    assert below.fitted_exponent == pytest.approx(0.25, abs=0.1)
    assert above.fitted_exponent == pytest.approx(-0.25, abs=0.1)
    assert below.sign_agrees and above.sign_agrees


def test_growth_rows_certified_and_center_ratio(n2_reports):
    for rep in n2_reports:
        assert rep.nonoscillation_max_phase <= NONOSC_LIMIT
        for row in rep.rows:
            if row.certified:
                assert row.center_ratio >= CENTER_FRACTION


def test_growth_fit_needs_certified_points():
    with pytest.raises(InsufficientDataError):
        growth_fit("case_i", corpus_phase("power_n2"), 1, F(7, 4), FLAT, 2, js=range(6, 9))


@pytest.mark.parametrize("name, case, m, n, k", [
    ("fold_m3", "remark_nonadapted", 3, FLAT, 2),
    ("power_n6", "case_i", FLAT, 6, F(2)),
])
def test_growth_sign_coherence(name, case, m, n, k, profiles):
    rep = growth_fit(case, corpus_phase(name), 1, k, m, n, profile=profiles[name])
    if abs(rep.predicted_exponent) >= F(15, 100):
        assert rep.sign_agrees
    assert rep.fitted_exponent == pytest.approx(float(rep.predicted_exponent), abs=0.1)


def test_growth_outputs(n2_reports):
    text = growth_to_csv(n2_reports[0])
    assert text.splitlines()[0] == "# schema: osclab.growth v1"
    assert growth_to_svg(n2_reports[0]) == growth_to_svg(n2_reports[0])
