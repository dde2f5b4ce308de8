"""
series.py
The sign-normalized coefficient triangle L^(k)_i, the S^(k)_i and r_i views of
it, and the transient distribution p(k, τ) as a certified truncated
alternating power series.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import mpmath
from tqdm import tqdm

from .bounds import (
    build_m_triangle,
    first_certified_index,
    majorant_terms,
    recommend_depth,
    required_precision_bits,
)
from .errors import (
    InsufficientDepthError,
    InsufficientPrecisionError,
    ParameterDomainError,
    TriangleIndexError,
)
from .model import ModelParams, PrecisionMode, PrecisionPolicy, RationalLike, parse_rational, rescale_time
from .triangle import CoefficientTriangle, TriangleCache, TriangleKind, triangle_from_rows

logger = logging.getLogger(__name__)

Tau = Union[RationalLike, mpmath.mpf]


def _next_l_row(row: Sequence[Fraction], params: ModelParams) -> List[Fraction]:
    i = len(row) - 1
    alpha_sq = params.alpha_sq
    new_row = []
    for k in range(i + 2):
        value = Fraction(0)
        if k >= 1:
            value += row[k - 1]
        if k <= i:
            value += params.b(k) * row[k]
        if k + 1 <= i:
            value += alpha_sq * row[k + 1]
        new_row.append(value)
    return new_row


def extend_l_triangle(triangle: Optional[CoefficientTriangle], params: ModelParams, depth: int,
                      progress: bool = False) -> CoefficientTriangle:
    """
    Continue an L-triangle row by row up to ``depth``.

    Each row i+1 is computed from row i only. Nonnegativity and the unit
    diagonal are asserted on every new row, never imposed.

    Args:
        triangle: Existing triangle for the same α², or None to start from the seed row
        params: Queue parameters
        depth: Target depth
        progress: Show a tqdm progress bar

    Returns:
        L triangle of exactly ``depth`` (truncated when the input is deeper)
    """
    if depth < 0:
        raise ParameterDomainError(f"depth must be nonnegative, got {depth}")
    if triangle is None:
        rows: List[Tuple[Fraction, ...]] = [(Fraction(1),)]
    else:
        if triangle.kind is not TriangleKind.L or triangle.alpha_sq != params.alpha_sq:
            raise ParameterDomainError(
                f"cannot extend a {triangle.kind.value} triangle with alpha_sq={triangle.alpha_sq} "
                f"for alpha_sq={params.alpha_sq}"
            )
        if triangle.depth >= depth:
            return triangle.truncated(depth)
        rows = list(triangle.rows)

    start = len(rows) - 1
    for i in tqdm(range(start, depth), disable=not progress, desc="L triangle", leave=False):
        new_row = _next_l_row(rows[-1], params)
        if new_row[-1] != 1:
            raise AssertionError(f"L diagonal entry ({i + 1}, {i + 1}) is {new_row[-1]}")
        if any(v < 0 for v in new_row):
            raise AssertionError(f"negative L entry in row {i + 1}")
        rows.append(tuple(new_row))

    logger.debug("L triangle for alpha_sq=%s built to depth %d", params.alpha_sq, depth)
    return triangle_from_rows(TriangleKind.L, rows, params.alpha_sq)


def build_l_triangle(params: ModelParams, depth: int, progress: bool = False) -> CoefficientTriangle:
    """L^(k)_{i+1} = L^(k-1)_i + b_k·L^(k)_i + α²·L^(k+1)_i from L^(0)_0 = 1, exactly."""
    return extend_l_triangle(None, params, depth, progress)


def cached_l_triangle(params: ModelParams, depth: int, cache: Optional[TriangleCache] = None,
                      progress: bool = False) -> CoefficientTriangle:
    """Build an L triangle, reusing and extending a cached one when a cache is given."""
    if cache is None:
        return build_l_triangle(params, depth, progress)
    return cache.get_or_build(
        TriangleKind.L, params.alpha_sq, depth,
        lambda cached, d: extend_l_triangle(cached, params, d, progress),
    )


@dataclass(frozen=True)
class SeriesCoefficients:
    """S^(k)_i for i = 0..depth (zero below the diagonal i < k)."""
    k: int
    terms: Tuple[Fraction, ...]

    @property
    def r(self) -> Tuple[Fraction, ...]:
        if self.k != 0:
            raise TriangleIndexError(f"r is the k = 0 row, this is k = {self.k}")
        return self.terms

    def __getitem__(self, i: int) -> Fraction:
        return self.terms[i]

    def __len__(self) -> int:
        return len(self.terms)


def _s_value(triangle: CoefficientTriangle, i: int, k: int) -> Fraction:
    if k < 0 or k > i:
        return Fraction(0)
    sign = 1 if (i - k) % 2 == 0 else -1
    return sign * triangle.alpha_sq ** k * triangle.rows[i][k]


def _check_l_triangle(triangle: CoefficientTriangle, params: ModelParams):
    if triangle.kind is not TriangleKind.L:
        raise ParameterDomainError(f"expected an L triangle, got kind {triangle.kind.value}")
    if triangle.alpha_sq != params.alpha_sq:
        raise ParameterDomainError(
            f"triangle built for alpha_sq={triangle.alpha_sq}, parameters have {params.alpha_sq}"
        )


def s_coefficients(triangle: CoefficientTriangle, params: ModelParams, k: int) -> SeriesCoefficients:
    """
    Recover S^(k)_i = (-1)^(i-k)·(α²)^k·L^(k)_i exactly.

    Raises:
        TriangleIndexError: if k exceeds the triangle depth
    """
    _check_l_triangle(triangle, params)
    if k < 0 or k > triangle.depth:
        raise TriangleIndexError(f"state {k} outside triangle of depth {triangle.depth}")
    return SeriesCoefficients(k, tuple(_s_value(triangle, i, k) for i in range(triangle.depth + 1)))


def s_recursion_table(params: ModelParams, depth: int) -> Tuple[Tuple[Fraction, ...], ...]:
    """
    S^(k)_i straight from S^(k)_{i+1} = α²·S^(k-1)_i - b_k·S^(k)_i + S^(k+1)_i.

    Uses S^(0)_0 = 1, S^(-1) = 0 and S^(k)_i = 0 for k > i; rows[i][k] for k <= i.
    """
    rows: List[Tuple[Fraction, ...]] = [(Fraction(1),)]
    alpha_sq = params.alpha_sq
    for i in range(depth):
        row = rows[-1]
        new_row = []
        for k in range(i + 2):
            lower = row[k - 1] if k >= 1 else 0
            same = row[k] if k <= i else 0
            upper = row[k + 1] if k + 1 <= i else 0
            new_row.append(alpha_sq * lower - params.b(k) * same + upper)
        rows.append(tuple(new_row))
    return tuple(rows)


@dataclass(frozen=True)
class DualRecursionReport:
    """Outcome of the exact dual-recursion verification."""
    passed: bool
    checked: int
    first_discrepancy: Optional[str] = None


def check_dual_recursion(triangle: CoefficientTriangle, params: ModelParams, max_i: int) -> DualRecursionReport:
    """
    Verify the S-recursions against the S-values derived from the L-triangle.

    Every identity whose entries lie in rows 0..max_i is checked exactly:
    the stepwise form, the summed form
    S^(k)_{k+h+1} = Σ_{l=0..k} α^(2(k-l))·(-b_l·S^(l)_{l+h} + S^(l+1)_{l+h}),
    the column form S^(k+1)_i = S^(k)_{i+1} + b_k·S^(k)_i - α²·S^(k-1)_i, and
    equality with the table grown directly from the S-recursion.
    """
    _check_l_triangle(triangle, params)
    if max_i < 0 or max_i > triangle.depth:
        raise TriangleIndexError(f"max_i={max_i} outside triangle of depth {triangle.depth}")

    alpha_sq = params.alpha_sq

    def s(i: int, k: int) -> Fraction:
        return _s_value(triangle, i, k)

    checked = 0
    direct = s_recursion_table(params, max_i)
    for i in range(max_i + 1):
        for k in range(i + 1):
            checked += 1
            if direct[i][k] != s(i, k):
                return DualRecursionReport(False, checked,
                                           f"direct S^({k})_{i} = {direct[i][k]} but L gives {s(i, k)}")

    for i in range(max_i):
        for k in range(i + 2):
            checked += 1
            stepwise = alpha_sq * s(i, k - 1) - params.b(k) * s(i, k) + s(i, k + 1)
            if stepwise != s(i + 1, k):
                return DualRecursionReport(False, checked,
                                           f"stepwise form fails at S^({k})_{i + 1}: {stepwise} != {s(i + 1, k)}")

        for k in range(i + 1):
            checked += 1
            h = i - k
            summed = sum(
                (alpha_sq ** (k - l) * (-params.b(l) * s(l + h, l) + s(l + h, l + 1)) for l in range(k + 1)),
                Fraction(0),
            )
            if summed != s(i + 1, k):
                return DualRecursionReport(False, checked,
                                           f"summed form fails at S^({k})_{i + 1}: {summed} != {s(i + 1, k)}")

            checked += 1
            column = s(i + 1, k) + params.b(k) * s(i, k) - alpha_sq * s(i, k - 1)
            if column != s(i, k + 1):
                return DualRecursionReport(False, checked,
                                           f"column form fails at S^({k + 1})_{i}: {column} != {s(i, k + 1)}")

    return DualRecursionReport(True, checked)


@dataclass(frozen=True)
class TransientResult:
    """p(k, τ) for k = 0..k_max with per-state truncation bounds."""
    tau: Fraction
    probabilities: Tuple[float, ...]
    truncation_order: int
    tail_bounds: Tuple[float, ...]
    precision: PrecisionPolicy
    precision_bits: Optional[int] = None
    exact: Optional[Tuple[Fraction, ...]] = None

    @property
    def tail_bound(self) -> float:
        return max(self.tail_bounds, default=0.0)

    @property
    def k_max(self) -> int:
        return len(self.probabilities) - 1

    def total(self) -> float:
        return math.fsum(self.probabilities)

    def rows(self) -> List[Dict[str, float]]:
        return [
            {"k": k, "p": p, "tail_bound": bound}
            for k, (p, bound) in enumerate(zip(self.probabilities, self.tail_bounds))
        ]


def _parse_tau(tau: Tau) -> Union[Fraction, mpmath.mpf]:
    if isinstance(tau, mpmath.mpf):
        value = tau
    else:
        value = parse_rational(tau, "tau")
    if value < 0:
        raise ParameterDomainError(f"tau must be nonnegative, got {tau}")
    return value


def tail_bound(k: int, tau: Tau, from_index: int, m_triangle: CoefficientTriangle, params: ModelParams,
               gamma_power: int = 2, window: int = 5) -> float:
    """
    (1/k!)·t_N with t_i = τ^i/i!·M^(k)_i·γ^(p(i-k)) and N = from_index.

    Bounds the error of the alternating series for p(k, τ) truncated before N,
    once the majorant is non-increasing over the window starting at N.

    Raises:
        InsufficientDepthError: when the window at N is not non-increasing or
            not inside the M-triangle; carries a truncation order that works
    """
    tau_value = _parse_tau(tau)
    if from_index < k:
        raise ParameterDomainError(f"from_index {from_index} is below the state {k}")
    if tau_value == 0 and from_index > 0:
        return 0.0
    upto = from_index + window - 1
    if upto > m_triangle.depth:
        raise InsufficientDepthError(
            f"M triangle of depth {m_triangle.depth} does not cover the window at {from_index}", upto
        )

    terms = majorant_terms(m_triangle, k, tau_value, params.gamma, gamma_power, upto)
    run = terms[from_index - k:]
    if not all(run[j] >= run[j + 1] for j in range(window - 1)):
        later = first_certified_index(
            majorant_terms(m_triangle, k, tau_value, params.gamma, gamma_power),
            k, mpmath.mpf("inf"), window, start=from_index + 1,
        )
        suggested = later if later is not None else m_triangle.depth + 1
        raise InsufficientDepthError(
            f"majorant for state {k} is not yet non-increasing at index {from_index}", suggested
        )
    return float(terms[from_index - k] / math.factorial(k))


@dataclass(frozen=True)
class _Truncation:
    order: int
    tail_bounds: Tuple[float, ...]
    majorant_sums: Tuple[mpmath.mpf, ...]


def _certify(triangle: CoefficientTriangle, params: ModelParams, tau: Union[Fraction, mpmath.mpf],
             k_max: int, policy: PrecisionPolicy) -> _Truncation:
    """Common truncation order N for states 0..k_max, certified by the majorant."""
    epsilon = policy.target_tolerance
    window = policy.window
    m_triangle = build_m_triangle(triangle.depth + window)

    if k_max > triangle.depth:
        depth = recommend_depth(m_triangle, tau, epsilon, k_max, params.gamma, policy.gamma_power, window)
        raise InsufficientDepthError(
            f"states up to {k_max} need a triangle deeper than {triangle.depth}", max(depth, k_max + 1)
        )

    columns = [majorant_terms(m_triangle, k, tau, params.gamma, policy.gamma_power)
               for k in range(k_max + 1)]
    thresholds = [mpmath.mpf(epsilon) * math.factorial(k) for k in range(k_max + 1)]

    order = 0
    settled = False
    while not settled:
        settled = True
        for k in range(k_max + 1):
            n_k = first_certified_index(columns[k], k, thresholds[k], window, start=max(order, k + 1))
            if n_k is None or n_k > triangle.depth + 1:
                depth = recommend_depth(m_triangle, tau, epsilon, k_max, params.gamma,
                                        policy.gamma_power, window)
                raise InsufficientDepthError(
                    f"depth {triangle.depth} cannot certify tolerance {epsilon:g} "
                    f"at tau={float(tau):g} for states up to {k_max}",
                    max(depth, triangle.depth + 1),
                )
            if n_k > order:
                if order:
                    settled = False
                order = n_k

    tail_bounds = tuple(float(columns[k][order - k] / math.factorial(k)) for k in range(k_max + 1))
    sums = tuple(mpmath.fsum(columns[k][:order - k]) / math.factorial(k) for k in range(k_max + 1))
    return _Truncation(order, tail_bounds, sums)


def _working_bits(truncation: _Truncation, policy: PrecisionPolicy) -> int:
    needed = max(required_precision_bits(s, policy.target_tolerance) for s in truncation.majorant_sums)
    if policy.float_precision_bits is None:
        return needed
    if policy.float_precision_bits < needed:
        raise InsufficientPrecisionError(
            f"{policy.float_precision_bits} bits cannot absorb the cancellation at this tau", needed
        )
    return policy.float_precision_bits


def _exact_sums(triangle: CoefficientTriangle, tau: Fraction, k_max: int, order: int,
                derivative: bool, progress: bool) -> List[Fraction]:
    values = []
    for k in tqdm(range(k_max + 1), disable=not progress, desc="exact sums", leave=False):
        total = Fraction(0)
        for i in range(max(k, 1 if derivative else 0), order):
            power = i - 1 if derivative else i
            term = tau ** power / math.factorial(power) * triangle.rows[i][k]
            total += term if (i - k) % 2 == 0 else -term
        values.append(total / math.factorial(k))
    return values


def _float_sums(triangle: CoefficientTriangle, tau: Union[Fraction, mpmath.mpf], k_max: int, order: int,
                bits: int, derivative: bool, progress: bool) -> List[mpmath.mpf]:
    values = []
    with mpmath.workprec(bits):
        tau_mp = mpmath.mpf(tau.numerator) / tau.denominator if isinstance(tau, Fraction) else mpmath.mpf(tau)
        for k in tqdm(range(k_max + 1), disable=not progress, desc="series sums", leave=False):
            total = mpmath.mpf(0)
            for i in range(max(k, 1 if derivative else 0), order):
                power = i - 1 if derivative else i
                coefficient = triangle.rows[i][k]
                term = (tau_mp ** power / mpmath.factorial(power)
                        * (mpmath.mpf(coefficient.numerator) / coefficient.denominator))
                total += term if (i - k) % 2 == 0 else -term
            values.append(+(total / mpmath.factorial(k)))
    return values


def _evaluate(triangle: CoefficientTriangle, params: ModelParams, tau: Tau, k_max: int,
              policy: Optional[PrecisionPolicy], derivative: bool, progress: bool) -> TransientResult:
    _check_l_triangle(triangle, params)
    if k_max < 0:
        raise ParameterDomainError(f"k_max must be nonnegative, got {k_max}")
    policy = policy or PrecisionPolicy()
    tau_value = _parse_tau(tau)
    exact_tau = tau_value if isinstance(tau_value, Fraction) else None

    if policy.mode is PrecisionMode.EXACT_RATIONAL and exact_tau is None:
        raise ParameterDomainError("exact-rational summation needs a rational tau")

    if tau_value == 0 and not derivative:
        exact = tuple(Fraction(1 if k == 0 else 0) for k in range(k_max + 1))
        return TransientResult(
            tau=Fraction(0), probabilities=tuple(float(v) for v in exact), truncation_order=0,
            tail_bounds=(0.0,) * (k_max + 1), precision=policy, exact=exact,
        )

    truncation = _certify(triangle, params, tau_value, k_max, policy)
    order = truncation.order
    tail_bounds = truncation.tail_bounds
    if derivative:
        # majorant of the differentiated series at N is N·t_N/τ
        scale = order / float(tau_value) if tau_value else 0.0
        tail_bounds = tuple(bound * scale for bound in tail_bounds)
        if tau_value == 0:
            order = max(order, 2)

    logger.info("Series at tau=%s truncated at order %d (max tail bound %.3e)",
                tau_value, order, max(tail_bounds))

    if policy.mode is PrecisionMode.EXACT_RATIONAL:
        exact = tuple(_exact_sums(triangle, exact_tau, k_max, order, derivative, progress))
        return TransientResult(
            tau=exact_tau, probabilities=tuple(float(v) for v in exact), truncation_order=order,
            tail_bounds=tail_bounds, precision=policy, exact=exact,
        )

    bits = _working_bits(truncation, policy)
    logger.debug("Summing with %d bits of working precision", bits)
    values = _float_sums(triangle, tau_value, k_max, order, bits, derivative, progress)
    return TransientResult(
        tau=exact_tau if exact_tau is not None else Fraction(float(tau_value)),
        probabilities=tuple(float(v) for v in values), truncation_order=order,
        tail_bounds=tail_bounds, precision=policy, precision_bits=bits,
    )


def evaluate_transient(triangle: CoefficientTriangle, params: ModelParams, tau: Tau, k_max: int,
                       policy: Optional[PrecisionPolicy] = None, progress: bool = False) -> TransientResult:
    """
    p(k, τ) = (1/k!)·Σ_{i>=k} (-1)^(i-k)·τ^i/i!·L^(k)_i for k = 0..k_max.

    One truncation order N serves all states; it is the smallest order at which
    every state's majorant is below ε·k! and non-increasing over the policy
    window. Big-float summation runs at 64 + ceil(log2(Σ majorant/ε)) bits
    unless the policy fixes the precision.

    Raises:
        ParameterDomainError: negative tau or mismatched triangle
        InsufficientDepthError: the triangle cannot certify the tolerance
        InsufficientPrecisionError: the fixed precision is too low
    """
    return _evaluate(triangle, params, tau, k_max, policy, derivative=False, progress=progress)


def transient_derivative(triangle: CoefficientTriangle, params: ModelParams, tau: Tau, k_max: int,
                         policy: Optional[PrecisionPolicy] = None) -> TransientResult:
    """dp(k, τ)/dτ from the term-wise differentiated series."""
    return _evaluate(triangle, params, tau, k_max, policy, derivative=True, progress=False)


def evaluate_at_time(triangle: CoefficientTriangle, params: ModelParams, t: RationalLike, k_max: int,
                     policy: Optional[PrecisionPolicy] = None, progress: bool = False) -> TransientResult:
    """q(k, t) = p(k, λt) for physical time t."""
    return evaluate_transient(triangle, params, rescale_time(params, t), k_max, policy, progress)


def _mpf(value: Union[Fraction, float]) -> mpmath.mpf:
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    return mpmath.mpf(value)


def w_series(triangle: CoefficientTriangle, params: ModelParams, tau: Tau, k_max: int,
             policy: Optional[PrecisionPolicy] = None) -> Tuple[float, ...]:
    """w(k, τ) = α^k·k!·p(k, τ), with α = sqrt(α²) taken at the working precision of the sum."""
    result = evaluate_transient(triangle, params, tau, k_max, policy)
    values = result.exact if result.exact is not None else result.probabilities
    with mpmath.workprec(max(result.precision_bits or 0, 64)):
        alpha = mpmath.sqrt(_mpf(params.alpha_sq))
        return tuple(
            float(alpha ** k * math.factorial(k) * _mpf(p)) for k, p in enumerate(values)
        )
