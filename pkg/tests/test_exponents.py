from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from osclab.errors import DomainError
from osclab.exponents import (
    ExponentQuery,
    branch_crossover,
    branch_values,
    exponent_table_csv,
    k_sharp,
    rational_p_grid,
    sugimoto_upper,
    threshold_from_linfty_decay,
    threshold_from_lq_decay,
)
from osclab.orders import FLAT

GRID = rational_p_grid(101)


def k_of(p, m, n, r=True):
    return k_sharp(ExponentQuery(F(p), m, n, r_condition=r))


@pytest.mark.parametrize(
    "p, m, n, expected",
    [
        (1, FLAT, 2, F(2)),
        (1, FLAT, 4, F(9, 4)),
        (1, FLAT, FLAT, F(5, 2)),
        (F(3, 2), FLAT, 3, F(13, 18)),
        (1, 3, 5, F(23, 10)),
        (1, 3, FLAT, F(5, 2)),
        (1, 3, 8, F(19, 8)),
        (1, 4, FLAT, F(5, 2)),
        (2, 3, 8, F(0)),
        (2, FLAT, 2, F(0)),
        (2, 4, FLAT, F(0)),
    ],
)
def test_spot_values(p, m, n, expected):
    assert k_of(p, m, n).k_p == expected


def test_second_branch_binds_at_p1_for_flat_residual():
    res = k_of(1, 3, FLAT)
    assert res.binding_branch == "second"
    assert res.branch_values == (F(7, 3), F(5, 2))
    assert res.regime == "case_ii"


def test_exact_types():
    res = k_of(F(8, 7), 3, 8)
    assert isinstance(res.k_p, F)
    assert all(isinstance(v, F) for v in res.branch_values)


@pytest.mark.parametrize("m", [3, 4, 5])
def test_regime_boundary_is_continuous(m):
    # at n = 2m both formulas must agree
    for p in GRID:
        t = 1 / p - F(1, 2)
        first, second = branch_values(t, m, 2 * m)
        assert k_of(p, m, 2 * m).k_p == (5 - F(1, m)) * t
        assert max(first, second) == (5 - F(1, m)) * t


@pytest.mark.parametrize("m, n", [(FLAT, 2), (FLAT, 6), (3, 8), (3, FLAT), (4, 9), (4, FLAT), (5, 20)])
def test_nonincreasing_in_p_and_zero_at_two(m, n):
    values = [k_of(p, m, n).k_p for p in GRID]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[-1] == 0


@pytest.mark.parametrize("m, n", [(3, 7), (3, 8), (3, FLAT), (4, 9), (4, 12), (4, FLAT), (6, 30)])
def test_below_class_bound(m, n):
    for p in GRID:
        res = k_of(p, m, n)
        assert res.k_p <= res.sugimoto_upper


@pytest.mark.parametrize(
    "m, n, expected", [(3, FLAT, F(8, 7)), (3, 8, F(8, 7)), (4, FLAT, F(10, 9)), (3, 7, F(8, 7))]
)
def test_branch_crossover(m, n, expected):
    assert branch_crossover(m, n) == expected


@given(st.integers(3, 20), st.integers(1, 40))
def test_crossover_independent_of_n(m, extra):
    # the tie sits at the L^(m+1) interpolation endpoint p = (2m+2)/(2m+1)
    assert branch_crossover(m, 2 * m + extra) == F(2 * m + 2, 2 * m + 1)
    assert branch_crossover(m, FLAT) == F(2 * m + 2, 2 * m + 1)


def test_crossover_is_a_tie():
    res = k_of(F(8, 7), 3, FLAT)
    assert res.binding_branch == "tie"
    assert res.branch_values[0] == res.branch_values[1]


@pytest.mark.parametrize("n", [2, 3, 4, 6, 10, FLAT])
def test_class_bound_type_i(n):
    q = ExponentQuery(F(1), FLAT, n)
    assert sugimoto_upper(q) == k_sharp(q).k_p


def test_uncovered_cases_report_reason():
    res = k_of(1, 2, 5)
    assert not res.covered and res.k_p is None and "m=2" in res.reason
    res = k_of(1, 3, FLAT, r=False)
    assert not res.covered and "R-condition" in res.reason


@pytest.mark.parametrize("bad", [dict(p=F(1, 2), m=3, n=8), dict(p=3, m=3, n=8), dict(p=1, m=1, n=8)])
def test_query_domain_errors(bad):
    with pytest.raises(DomainError):
        ExponentQuery(**bad)


def test_query_rejects_inconsistent_type():
    with pytest.raises(DomainError):
        ExponentQuery(F(1), 3, 8, surface_type="II")


def test_threshold_from_lq_decay():
    assert threshold_from_lq_decay(1, 4, 3) == (F(7, 4), F(8, 7))
    assert threshold_from_lq_decay(F(1, 2), float("inf"), 3) == (F(5, 2), F(1))
    with pytest.raises(DomainError):
        threshold_from_lq_decay(1, 1)


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_uniform_decay_threshold_matches_type_i_formula(n):
    alpha = F(1, 2) + F(1, n)
    for p in GRID[::10]:
        assert threshold_from_linfty_decay(alpha, 3, p) == k_of(p, FLAT, n).k_p


@given(st.integers(3, 12), st.integers(0, 100))
def test_case_ii_at_least_first_branch(m, i):
    n = 2 * m + 1
    p = GRID[i]
    assert k_of(p, m, n).k_p >= (5 - F(1, m)) * (1 / p - F(1, 2))


def test_exponent_csv_rows():
    text = exponent_table_csv(3, FLAT, [F(1), F(8, 7), F(3, 2), F(2)])
    lines = text.splitlines()
    assert lines[0] == "# schema: osclab.exponent_table v1"
    rows = [ln.split(",") for ln in lines[2:]]
    assert [r[1] for r in rows] == ["5/2", "7/4", "7/9", "0"]
    assert [r[3] for r in rows] == ["second", "tie", "first", "first"]
    assert [r[-1] for r in rows] == ["0", "1", "0", "0"]
