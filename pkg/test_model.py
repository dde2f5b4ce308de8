from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from discqueue.config import SolverConfig
from discqueue.errors import ParameterDomainError, RatesFileError
from discqueue.model import (
    PrecisionMode,
    PrecisionPolicy,
    discouragement_rates,
    format_rational,
    load_rates_file,
    make_params,
    parse_rates,
    parse_rational,
    rates_from_sequences,
    rational_sqrt,
    rescale_time,
    w_to_p,
)

fractions = st.fractions(min_value=0, max_value=1000, max_denominator=10 ** 6)


def test_parse_rational_forms():
    assert parse_rational("1/2") == Fraction(1, 2)
    assert parse_rational(" 0.1 ") == Fraction(1, 10)
    assert parse_rational(0.5) == Fraction(1, 2)
    assert parse_rational(3) == 3
    assert parse_rational(Fraction(2, 7)) == Fraction(2, 7)


@pytest.mark.parametrize("value", ["abc", "1/0", float("inf"), float("nan"), True, None])
def test_parse_rational_rejects(value):
    with pytest.raises(ParameterDomainError):
        parse_rational(value)


@given(fractions)
def test_format_and_parse_agree(value):
    assert parse_rational(format_rational(value)) == value


def test_format_rational():
    assert format_rational(Fraction(3)) == "3"
    assert format_rational(Fraction(20, 21)) == "20/21"


def test_rational_sqrt():
    assert rational_sqrt(Fraction(9, 4)) == Fraction(3, 2)
    assert rational_sqrt(Fraction(2)) is None


def test_params_derived_constants():
    params = make_params(1, 2)
    assert params.alpha_sq == 2
    assert params.gamma == 2

    params = make_params(2, 1)
    assert params.alpha_sq == Fraction(1, 2)
    assert params.gamma == 1


def test_params_b_coefficients(unit_params):
    assert [unit_params.b(k) for k in range(3)] == [1, Fraction(3, 2), Fraction(7, 3)]


@pytest.mark.parametrize("lam, mu", [(0, 1), (1, 0), (-1, 1), ("1/2", "-3")])
def test_params_reject_nonpositive(lam, mu):
    with pytest.raises(ParameterDomainError):
        make_params(lam, mu)


def test_rescale_time():
    params = make_params(2, 1)
    assert rescale_time(params, "0.5") == 1
    with pytest.raises(ParameterDomainError):
        rescale_time(params, -1)


@given(fractions, fractions)
def test_rescale_time_is_linear(t1, t2):
    params = make_params("3/2", 1)
    assert rescale_time(params, t1 + t2) == rescale_time(params, t1) + rescale_time(params, t2)


def test_w_to_p(unit_params):
    assert w_to_p(2, Fraction(4), unit_params) == 2
    value = w_to_p(1, 1.0, make_params(1, 2))
    assert abs(float(value) - 2 ** -0.5) < 1e-15


def test_discouragement_rates(unit_params):
    rates = discouragement_rates(unit_params)
    assert rates.birth(0) == 1
    assert rates.birth(3) == Fraction(1, 4)
    assert rates.death(0) == 0
    assert rates.death(3) == 3
    assert rates.up_probability(0) == 1
    assert rates.up_probability(1) == Fraction(1, 3)
    assert rates.max_state is None


def test_rates_from_sequences_validates():
    rates = rates_from_sequences(["1", "2"], [0, "1/3"])
    assert rates.max_state == 1
    with pytest.raises(ParameterDomainError):
        rates.birth(2)
    with pytest.raises(ParameterDomainError):
        rates_from_sequences([1, 1], [1, 1])
    with pytest.raises(ParameterDomainError):
        rates_from_sequences([1, 0], [0, 1])
    with pytest.raises(ParameterDomainError):
        rates_from_sequences([1, 1], [0])


def test_parse_rates_tables():
    rates = parse_rates('{"birth": [1, 0.5, "2/3"], "death": [0, 1, "7"]}')
    assert rates.birth_table == (1, Fraction(1, 2), Fraction(2, 3))
    assert rates.death_table == (0, 1, 7)


def test_parse_rates_preset():
    rates = parse_rates('{"preset": "discouragement", "lambda": "2", "mu": "1/2"}')
    assert rates.params == make_params(2, "1/2")


def test_parse_rates_reports_bad_value_location():
    text = '{\n  "birth": ["1", "1/2"],\n  "death": ["0", "oops"]\n}'
    with pytest.raises(RatesFileError) as info:
        parse_rates(text, "rates.json")
    assert info.value.line == 3
    assert info.value.column == 19
    assert str(info.value).startswith("rates.json:3:19: ")


def test_parse_rates_reports_syntax_error():
    with pytest.raises(RatesFileError) as info:
        parse_rates('{"birth": [1, 2,]}', "broken.json")
    assert info.value.line == 1
    assert "broken.json:1:" in str(info.value)


@pytest.mark.parametrize("text", [
    '[1, 2]',
    '{"preset": "other"}',
    '{"birth": "1", "death": [0]}',
    '{"birth": [1, 1], "death": [0]}',
    '{"birth": [1, 1], "death": [1, 1]}',
])
def test_parse_rates_rejects(text):
    with pytest.raises(RatesFileError):
        parse_rates(text)


def test_load_rates_file(tmp_path):
    path = tmp_path / "custom.json"
    path.write_text('{"birth": [1, 1], "death": [0, 2]}', encoding="utf-8")
    rates = load_rates_file(str(path))
    assert rates.name == "custom"
    with pytest.raises(RatesFileError):
        load_rates_file(str(tmp_path / "missing.json"))


def test_precision_policy():
    policy = PrecisionPolicy(mode="exact-rational")
    assert policy.mode is PrecisionMode.EXACT_RATIONAL
    with pytest.raises(ParameterDomainError):
        PrecisionPolicy(float_precision_bits=32)
    with pytest.raises(ParameterDomainError):
        PrecisionPolicy(gamma_power=3)
    with pytest.raises(ParameterDomainError):
        PrecisionPolicy(target_tolerance=0)


def test_precision_policy_from_config():
    config = SolverConfig(precision_bits=200, epsilon=1e-12, gamma_power=1)
    policy = PrecisionPolicy.from_config(config)
    assert policy.mode is PrecisionMode.BIG_FLOAT
    assert policy.float_precision_bits == 200
    assert policy.target_tolerance == 1e-12
    assert policy.gamma_power == 1
