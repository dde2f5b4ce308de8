"""
model.py
Queue parameters, state-dependent rate sequences, precision policies and the
time/probability rescalings that connect the q, p and w forms of the queue.
"""
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Any, Optional, Sequence, Tuple, Union

import mpmath

from .errors import ParameterDomainError, RatesFileError

RationalLike = Union[int, str, float, Fraction]

DISCOURAGEMENT = "discouragement"


def parse_rational(value: RationalLike, name: str = "value") -> Fraction:
    """
    Parse an integer, "n/d" string, finite decimal string or float into an exact Fraction.

    Floats are converted exactly (their binary value), strings keep their decimal value.

    Raises:
        ParameterDomainError: if the value is not a finite rational
    """
    if isinstance(value, bool):
        raise ParameterDomainError(f"{name}: booleans are not rates")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ParameterDomainError(f"{name}: {value!r} is not finite")
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ParameterDomainError(f"{name}: {value!r} is not a rational literal") from None
    raise ParameterDomainError(f"{name}: unsupported type {type(value).__name__}")


def format_rational(value: Fraction) -> str:
    """Render a Fraction as "num/den" ("num" when the denominator is 1)."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def rational_sqrt(value: Fraction) -> Optional[Fraction]:
    """Exact square root of a nonnegative Fraction, or None when it is not a perfect square."""
    if value < 0:
        return None
    num_root = math.isqrt(value.numerator)
    den_root = math.isqrt(value.denominator)
    if num_root * num_root == value.numerator and den_root * den_root == value.denominator:
        return Fraction(num_root, den_root)
    return None


@dataclass(frozen=True)
class ModelParams:
    """Rate constants of the discouragement queue (arrival λ/(1+k), service μk)."""

    lam: Fraction
    mu: Fraction
    alpha_sq: Fraction = field(init=False)
    gamma: Fraction = field(init=False)

    def __post_init__(self):
        if self.lam <= 0 or self.mu <= 0:
            raise ParameterDomainError(
                f"lambda and mu must be positive, got lambda={self.lam}, mu={self.mu}"
            )
        alpha_sq = self.mu / self.lam
        object.__setattr__(self, "alpha_sq", alpha_sq)
        object.__setattr__(self, "gamma", max(Fraction(1), alpha_sq))

    def b(self, k: int) -> Fraction:
        """Diagonal coefficient b_k = 1/(k+1) + k·α² of the rescaled system."""
        return Fraction(1, k + 1) + k * self.alpha_sq

    def to_dict(self):
        return {
            "lambda": format_rational(self.lam),
            "mu": format_rational(self.mu),
            "alpha_sq": format_rational(self.alpha_sq),
            "gamma": format_rational(self.gamma),
        }


def make_params(lam: RationalLike, mu: RationalLike) -> ModelParams:
    """
    Build queue parameters from user-facing rates.

    Args:
        lam: Arrival constant λ (integer, "n/d", decimal string or float)
        mu: Service constant μ

    Returns:
        ModelParams with α² = μ/λ and γ = max(1, α²) computed exactly
    """
    return ModelParams(parse_rational(lam, "lambda"), parse_rational(mu, "mu"))


def rescale_time(params: ModelParams, t: RationalLike) -> Fraction:
    """
    Map physical time t to the rescaled time τ = λ·t, so that q(k, t) = p(k, λt).

    Raises:
        ParameterDomainError: if t is negative
    """
    t_value = parse_rational(t, "t")
    if t_value < 0:
        raise ParameterDomainError(f"time must be nonnegative, got {t_value}")
    return params.lam * t_value


def w_to_p(k: int, w_value: Any, params: ModelParams) -> Any:
    """
    Convert a w(k, τ) value to p(k, τ) = w(k, τ)/(α^k k!).

    The result is an exact Fraction when both w_value and α are rational,
    otherwise an mpmath float at the current working precision.
    """
    if k < 0:
        raise ParameterDomainError(f"state index must be nonnegative, got {k}")
    alpha = rational_sqrt(params.alpha_sq)
    if alpha is not None and isinstance(w_value, (int, Fraction)):
        return Fraction(w_value) / (alpha ** k * math.factorial(k))
    alpha_mp = mpmath.sqrt(mpmath.mpf(params.alpha_sq.numerator) / params.alpha_sq.denominator)
    if isinstance(w_value, Fraction):
        w_value = mpmath.mpf(w_value.numerator) / w_value.denominator
    return mpmath.mpf(w_value) / (alpha_mp ** k * math.factorial(k))


class PrecisionMode(Enum):
    """How the final series summation is carried out."""
    EXACT_RATIONAL = "exact-rational"
    BIG_FLOAT = "big-float"


@dataclass(frozen=True)
class PrecisionPolicy:
    """
    Summation policy of the series evaluator.

    float_precision_bits=None lets the evaluator pick the smallest precision
    that absorbs the cancellation of the alternating series.
    """

    mode: PrecisionMode = PrecisionMode.BIG_FLOAT
    float_precision_bits: Optional[int] = None
    target_tolerance: float = 1e-10
    gamma_power: int = 2
    window: int = 5

    def __post_init__(self):
        if not isinstance(self.mode, PrecisionMode):
            object.__setattr__(self, "mode", PrecisionMode(self.mode))
        if not self.target_tolerance > 0:
            raise ParameterDomainError(f"target tolerance must be positive, got {self.target_tolerance}")
        if self.float_precision_bits is not None and self.float_precision_bits < 64:
            raise ParameterDomainError(
                f"big-float precision must be at least 64 bits, got {self.float_precision_bits}"
            )
        if self.gamma_power not in (1, 2):
            raise ParameterDomainError(f"gamma_power must be 1 or 2, got {self.gamma_power}")
        if self.window < 1:
            raise ParameterDomainError(f"window must be positive, got {self.window}")

    @classmethod
    def from_config(cls, config) -> 'PrecisionPolicy':
        """Build a policy from a SolverConfig."""
        return cls(
            mode=PrecisionMode(config.precision_mode),
            float_precision_bits=config.precision_bits,
            target_tolerance=config.epsilon,
            gamma_power=config.gamma_power,
            window=config.window,
        )


@dataclass(frozen=True)
class BirthDeathRates:
    """
    State-dependent birth rates λ_k and death rates μ_k on the nonnegative integers.

    Either the discouragement preset (infinite sequences derived from ModelParams)
    or finite tables read from a rates file, covering states 0..len-1.
    """

    name: str
    params: Optional[ModelParams] = None
    birth_table: Tuple[Fraction, ...] = ()
    death_table: Tuple[Fraction, ...] = ()

    def __post_init__(self):
        if self.params is not None:
            return
        if not self.birth_table or len(self.birth_table) != len(self.death_table):
            raise ParameterDomainError("birth and death tables must be nonempty and of equal length")
        for k, rate in enumerate(self.birth_table):
            if rate <= 0:
                raise ParameterDomainError(f"birth rate λ_{k} must be positive, got {rate}")
        if self.death_table[0] != 0:
            raise ParameterDomainError(f"death rate μ_0 must be 0, got {self.death_table[0]}")
        for k, rate in enumerate(self.death_table[1:], start=1):
            if rate <= 0:
                raise ParameterDomainError(f"death rate μ_{k} must be positive, got {rate}")

    @property
    def max_state(self) -> Optional[int]:
        """Largest state covered by the rates, None for the unbounded preset."""
        if self.params is not None:
            return None
        return len(self.birth_table) - 1

    def _check_state(self, k: int):
        if k < 0:
            raise ParameterDomainError(f"state index must be nonnegative, got {k}")
        if self.max_state is not None and k > self.max_state:
            raise ParameterDomainError(
                f"rates '{self.name}' cover states 0..{self.max_state} only, state {k} requested"
            )

    def birth(self, k: int) -> Fraction:
        self._check_state(k)
        if self.params is not None:
            return self.params.lam / (1 + k)
        return self.birth_table[k]

    def death(self, k: int) -> Fraction:
        self._check_state(k)
        if self.params is not None:
            return self.params.mu * k
        return self.death_table[k]

    def up_probability(self, k: int) -> Fraction:
        """Jump-chain probability α_k = λ_k/(λ_k + μ_k) of moving from k to k+1."""
        lam_k = self.birth(k)
        return lam_k / (lam_k + self.death(k))

    def to_dict(self):
        if self.params is not None:
            data = {"preset": DISCOURAGEMENT}
            data.update(self.params.to_dict())
            return data
        return {
            "birth": [format_rational(v) for v in self.birth_table],
            "death": [format_rational(v) for v in self.death_table],
        }


def discouragement_rates(params: ModelParams) -> BirthDeathRates:
    """The discouragement preset λ_k = λ/(1+k), μ_k = μ·k."""
    return BirthDeathRates(name=DISCOURAGEMENT, params=params)


def rates_from_sequences(birth: Sequence[RationalLike], death: Sequence[RationalLike],
                         name: str = "custom") -> BirthDeathRates:
    """Finite general rates from two equally long sequences."""
    return BirthDeathRates(
        name=name,
        birth_table=tuple(parse_rational(v, f"birth[{i}]") for i, v in enumerate(birth)),
        death_table=tuple(parse_rational(v, f"death[{i}]") for i, v in enumerate(death)),
    )


def _locate(text: str, token: str) -> Tuple[Optional[int], Optional[int]]:
    """Line and column (1-based) of the first occurrence of token in text."""
    index = text.find(token)
    if index < 0:
        return None, None
    line = text.count("\n", 0, index) + 1
    column = index - (text.rfind("\n", 0, index) + 1) + 1
    return line, column


def parse_rates(text: str, path: Optional[str] = None) -> BirthDeathRates:
    """
    Parse the rates-file JSON.

    Accepted shapes:
        {"birth": ["1", "1/2", ...], "death": ["0", "1", ...]}
        {"preset": "discouragement", "lambda": "1", "mu": "2"}

    Raises:
        RatesFileError: with line/column diagnostics
    """
    try:
        data = json.loads(text, parse_float=str, parse_int=str)
    except json.JSONDecodeError as e:
        raise RatesFileError(e.msg, path=path, line=e.lineno, column=e.colno) from None

    if not isinstance(data, dict):
        raise RatesFileError("top-level value must be an object", path=path, line=1, column=1)

    preset = data.get("preset")
    if preset is not None:
        if preset != DISCOURAGEMENT:
            line, column = _locate(text, f'"{preset}"')
            raise RatesFileError(f"unknown preset {preset!r}", path=path, line=line, column=column)
        try:
            params = make_params(data.get("lambda", "1"), data.get("mu", "1"))
        except ParameterDomainError as e:
            raise RatesFileError(str(e), path=path) from None
        return discouragement_rates(params)

    for key in ("birth", "death"):
        if not isinstance(data.get(key), list):
            line, column = _locate(text, f'"{key}"')
            raise RatesFileError(f"'{key}' must be a list of rationals", path=path,
                                 line=line, column=column)

    values = {}
    for key in ("birth", "death"):
        parsed = []
        for i, raw in enumerate(data[key]):
            try:
                parsed.append(parse_rational(str(raw), f"{key}[{i}]"))
            except ParameterDomainError as e:
                line, column = _locate(text, str(raw))
                raise RatesFileError(str(e), path=path, line=line, column=column) from None
        values[key] = parsed

    if len(values["birth"]) != len(values["death"]):
        raise RatesFileError(
            f"birth has {len(values['birth'])} entries but death has {len(values['death'])}",
            path=path,
        )

    name = Path(path).stem if path else "custom"
    try:
        return BirthDeathRates(name=name, birth_table=tuple(values["birth"]),
                               death_table=tuple(values["death"]))
    except ParameterDomainError as e:
        raise RatesFileError(str(e), path=path) from None


def load_rates_file(path: str) -> BirthDeathRates:
    """Read and parse a rates file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise RatesFileError(f"cannot read rates file: {e.strerror}", path=str(path)) from None
    return parse_rates(text, str(path))
