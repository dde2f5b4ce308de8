from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from discqueue.embedded import (
    EmbeddedTable,
    closed_form,
    corollary_d,
    corollary_tables,
    diagonal_law_check,
    discouragement_embedded,
    embedded_recursion,
    normalization_check,
    parity_check,
    tables_agree,
    up_probabilities,
)
from discqueue.errors import ParameterDomainError
from discqueue.model import discouragement_rates, make_params, rates_from_sequences

ALPHAS = [Fraction(1, 3), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(5)]


def irregular_rates(count):
    birth = [Fraction(k % 3 + 1, k % 2 + 1) for k in range(count)]
    death = [0] + [Fraction(k, 2) + k % 4 for k in range(1, count)]
    return rates_from_sequences(birth, death, name="irregular")


def test_hand_values(unit_params):
    table = embedded_recursion(discouragement_rates(unit_params), 3)
    assert table.entry(2, 0) == Fraction(2, 3)
    assert table.entry(3, 1) == Fraction(20, 21)
    assert table.entry(3, 3) == Fraction(1, 21)
    assert table.entry(3, 2) == 0
    assert table.entry(2, 5) == 0
    with pytest.raises(ParameterDomainError):
        table.entry(4, 0)


def test_up_probabilities(unit_params):
    assert up_probabilities(discouragement_rates(unit_params), 4) == (1, Fraction(1, 3), Fraction(1, 7), Fraction(1, 13))
    assert up_probabilities(discouragement_rates(unit_params), 0) == (1,)
    with pytest.raises(ParameterDomainError):
        up_probabilities(discouragement_rates(unit_params), -1)


def test_degenerate_horizons(unit_params):
    rates = discouragement_rates(unit_params)
    assert embedded_recursion(rates, 0).p == ((1,),)
    assert closed_form(rates, 0)[1].p == ((1,),)
    assert closed_form(rates, 1)[1].p == ((1,), (0, 1))


@pytest.mark.parametrize("alpha_sq", ALPHAS)
def test_closed_form_equals_recursion(alpha_sq):
    params = make_params(1, alpha_sq)
    rates = discouragement_rates(params)
    direct = embedded_recursion(rates, 40)
    tables, closed = discouragement_embedded(params, 40)
    assert tables_agree(direct, closed)
    assert tables.d[3] == direct.entry(3, 3)
    assert normalization_check(direct)
    assert parity_check(closed)
    assert diagonal_law_check(closed)


def test_irregular_rates():
    rates = irregular_rates(40)
    direct = embedded_recursion(rates, 40)
    _, closed = closed_form(rates, 40)
    assert tables_agree(direct, closed)
    assert normalization_check(closed)
    assert parity_check(direct)
    assert diagonal_law_check(direct)


def test_rates_must_cover_horizon():
    with pytest.raises(ParameterDomainError):
        embedded_recursion(irregular_rates(5), 8)


@pytest.mark.parametrize("alpha_sq", ALPHAS)
def test_corollary_tables(alpha_sq):
    params = make_params(1, alpha_sq)
    tables, table = discouragement_embedded(params, 20)
    corollary, corollary_table = corollary_tables(params, 20)
    assert corollary.d == tables.d
    assert corollary.T == tables.T
    assert tables_agree(table, corollary_table)


def test_corollary_d(unit_params):
    assert corollary_d(unit_params, 4) == [1, 1, Fraction(1, 3), Fraction(1, 21)]


def test_t_table_shape(unit_params):
    tables, _ = discouragement_embedded(unit_params, 6)
    assert [len(row) for row in tables.T] == [7, 5, 3, 1]
    assert all(v == 1 for v in tables.T[0])


@pytest.mark.parametrize("rates", [irregular_rates(30), discouragement_rates(make_params(1, 1))])
def test_diagonal_is_decreasing(rates):
    table = embedded_recursion(rates, 30)
    diagonal = [table.entry(n, n) for n in range(31)]
    assert diagonal[0] == diagonal[1] == 1
    assert all(a > b for a, b in zip(diagonal[1:], diagonal[2:]))


def test_checks_detect_tampering(unit_params):
    table = embedded_recursion(discouragement_rates(unit_params), 4)
    rows = [list(row) for row in table.p]
    rows[3][0] = Fraction(1, 100)
    rows[4][4] += Fraction(1, 100)
    rows[4][2] -= Fraction(1, 100)
    tampered = EmbeddedTable(4, tuple(tuple(r) for r in rows), table.up)
    assert not parity_check(tampered)
    assert not normalization_check(tampered)
    assert not diagonal_law_check(tampered)
    assert not tables_agree(table, tampered)


def test_to_dict(unit_params):
    data = embedded_recursion(discouragement_rates(unit_params), 2).to_dict()
    assert data == {"n_max": 2, "up": ["1", "1/3"], "p": [["1"], ["0", "1"], ["2/3", "0", "1/3"]]}


rates_lists = st.integers(min_value=1, max_value=10).flatmap(
    lambda n: st.tuples(
        st.lists(st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=50),
                 min_size=n, max_size=n),
        st.lists(st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=50),
                 min_size=n - 1, max_size=n - 1),
    )
)


@settings(max_examples=50, deadline=None)
@given(rates_lists)
def test_random_rates(lists):
    birth, death = lists
    rates = rates_from_sequences(birth, [0] + death)
    n_max = len(birth)
    direct = embedded_recursion(rates, n_max)
    _, closed = closed_form(rates, n_max)
    assert tables_agree(direct, closed)
    assert normalization_check(direct)
    assert parity_check(direct)
