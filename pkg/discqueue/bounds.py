"""
bounds.py
The M-triangle that majorizes the series coefficients, the Bessel numbers in
its first column, and the convergence certificates derived from it.
"""
import logging
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Union

import mpmath
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import lambertw
from tqdm import tqdm

from .errors import InsufficientDepthError, ParameterDomainError
from .model import ModelParams
from .triangle import CoefficientTriangle, TriangleKind, triangle_from_rows

logger = logging.getLogger(__name__)

Real = Union[int, float, Fraction]

# Ceiling on how far recommend_depth extrapolates the majorant.
EXTRAPOLATION_LIMIT = 100_000_000
EXTRAPOLATION_CHUNK = 1 << 16

_m_lock = threading.Lock()
_m_deepest: Optional[CoefficientTriangle] = None


def _next_m_row(row: Sequence[int]) -> List[int]:
    i = len(row) - 1
    new_row = []
    for k in range(i + 2):
        left = row[k - 1] if k >= 1 else 0
        centre = row[k] if k <= i else 0
        right = row[k + 1] if k + 1 <= i else 0
        new_row.append(left + (1 + k) * centre + right)
    return new_row


def build_m_triangle(depth: int, progress: bool = False) -> CoefficientTriangle:
    """
    Integer triangle M^(k)_{i+1} = M^(k-1)_i + (1+k)·M^(k)_i + M^(k+1)_i with M^(0)_0 = 1.

    Built triangles are shared: a request at or below the deepest triangle
    built so far is served by truncation.

    Args:
        depth: Largest row index i
        progress: Show a tqdm progress bar while extending

    Returns:
        CoefficientTriangle of kind M
    """
    global _m_deepest
    if depth < 0:
        raise ParameterDomainError(f"depth must be nonnegative, got {depth}")

    with _m_lock:
        if _m_deepest is not None and _m_deepest.depth >= depth:
            return _m_deepest.truncated(depth)

        rows = list(_m_deepest.rows) if _m_deepest is not None else [(1,)]
        start = len(rows) - 1
        for _ in tqdm(range(start, depth), disable=not progress, desc="M triangle", leave=False):
            new_row = _next_m_row(rows[-1])
            if new_row[-1] != 1:
                raise AssertionError(f"M diagonal broke at row {len(rows)}")
            rows.append(tuple(new_row))

        _m_deepest = triangle_from_rows(TriangleKind.M, rows)
        logger.debug("M triangle extended to depth %d", depth)
        return _m_deepest.truncated(depth) if _m_deepest.depth > depth else _m_deepest


def bessel_numbers(depth: int) -> List[int]:
    """B*_0..B*_depth, the k = 0 column of the M-triangle."""
    return build_m_triangle(depth).column(0)


@dataclass(frozen=True)
class BoundReport:
    """Outcome of an entrywise verification over a triangle."""
    passed: bool
    checked: int
    first_violation: Optional[str] = None


def majorant_factor(gamma: Fraction, gamma_power: int) -> Fraction:
    """Per-step growth factor γ^p of the majorant."""
    if gamma_power not in (1, 2):
        raise ParameterDomainError(f"gamma_power must be 1 or 2, got {gamma_power}")
    return gamma ** gamma_power


def verify_bound(l_triangle: CoefficientTriangle, m_triangle: CoefficientTriangle,
                 params: ModelParams, gamma_power: int = 2) -> BoundReport:
    """
    Check L^(k)_i <= M^(k)_i·γ^(p(i-k)) exactly for every stored (i, k).

    With gamma_power=2 this is the published bound, gamma_power=1 its tightened form.

    Raises:
        ParameterDomainError: if the two triangles differ in depth
    """
    if l_triangle.depth != m_triangle.depth:
        raise ParameterDomainError(
            f"depth mismatch: L has {l_triangle.depth}, M has {m_triangle.depth}"
        )
    factor = majorant_factor(params.gamma, gamma_power)
    checked = 0
    for i in range(l_triangle.depth + 1):
        l_row = l_triangle.rows[i]
        m_row = m_triangle.rows[i]
        for k in range(i + 1):
            checked += 1
            if l_row[k] > m_row[k] * factor ** (i - k):
                return BoundReport(False, checked,
                                   f"L^({k})_{i} = {l_row[k]} exceeds M^({k})_{i}·γ^{gamma_power * (i - k)}")
    return BoundReport(True, checked)


@lru_cache(maxsize=None)
def growth_root(i: int) -> float:
    """
    Positive root w of i + 2 = 2·w·ln(w), by bisection on [1, max(i, 3)].

    Bisection runs until the bracket cannot shrink in double precision.
    """
    if i < 0:
        raise ParameterDomainError(f"index must be nonnegative, got {i}")
    target = i + 2.0
    lo, hi = 1.0, float(max(i, 3))
    while 2.0 * hi * math.log(hi) < target:
        hi *= 2.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if 2.0 * mid * math.log(mid) < target:
            lo = mid
        else:
            hi = mid
    return lo if abs(2.0 * lo * math.log(lo) - target) <= abs(2.0 * hi * math.log(hi) - target) else hi


@dataclass(frozen=True)
class AsymptoticEstimate:
    """Bessel-number growth diagnostics at one index."""
    i: int
    w_root: float
    estimate: mpmath.mpf
    crude: mpmath.mpf
    bessel: int
    normalized_ratio: float
    refined_ratio: float

    @property
    def residual(self) -> float:
        return abs(self.i + 2 - 2 * self.w_root * math.log(self.w_root))

    def in_band(self, low: float = 0.5, high: float = 2.5) -> bool:
        return low <= self.normalized_ratio <= high


def asymptotic_check(i_values: Sequence[int], progress: bool = False) -> List[AsymptoticEstimate]:
    """
    Compare exact Bessel numbers with their asymptotic growth law.

    For each i reports the growth root w, the refined estimate
    w^(i+3)/(sqrt(2πi)·Γ(w+1)²), the crude (i/(2e·ln i))^i, the normalized
    i-th root (B*_i)^(1/i)·(2e·ln i)/i and (B*_i/estimate)^(1/i).
    """
    bad = [i for i in i_values if i < 3]
    if bad:
        raise ParameterDomainError(f"asymptotic check needs i >= 3, got {bad}")
    if not i_values:
        return []
    column = build_m_triangle(max(i_values), progress=progress).column(0)

    results = []
    with mpmath.workprec(128):
        for i in i_values:
            w = growth_root(i)
            w_mp = mpmath.mpf(w)
            estimate = w_mp ** (i + 3) / (mpmath.sqrt(2 * mpmath.pi * i) * mpmath.gamma(w_mp + 1) ** 2)
            log_i = mpmath.log(i)
            crude = (i / (2 * mpmath.e * log_i)) ** i
            log_b = mpmath.log(mpmath.mpf(column[i]))
            normalized = mpmath.exp(log_b / i) * 2 * mpmath.e * log_i / i
            refined = mpmath.exp((log_b - mpmath.log(estimate)) / i)
            results.append(AsymptoticEstimate(
                i=i, w_root=w, estimate=estimate, crude=crude, bessel=column[i],
                normalized_ratio=float(normalized), refined_ratio=float(refined),
            ))
    return results


def _to_mpf(value: Real) -> mpmath.mpf:
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    return mpmath.mpf(value)


def majorant_terms(m_triangle: CoefficientTriangle, k: int, tau: Real,
                   gamma: Fraction = Fraction(1), gamma_power: int = 2,
                   upto: Optional[int] = None) -> List[mpmath.mpf]:
    """
    Majorant terms t_i = τ^i/i!·M^(k)_i·γ^(p(i-k)) for i = k..upto.

    Returns:
        List whose element j is t_(k+j)
    """
    upto = m_triangle.depth if upto is None else upto
    if upto > m_triangle.depth:
        raise InsufficientDepthError(f"majorant requested up to {upto}", upto)
    factor = _to_mpf(majorant_factor(gamma, gamma_power))
    tau_mp = _to_mpf(tau)
    terms = []
    with mpmath.workprec(64):
        base = tau_mp ** k / mpmath.factorial(k)
        scale = mpmath.mpf(1)
        for i in range(k, upto + 1):
            if i > k:
                base = base * tau_mp / i
                scale = scale * factor
            terms.append(base * m_triangle.rows[i][k] * scale)
    return terms


def first_certified_index(terms: Sequence[mpmath.mpf], offset: int, threshold: mpmath.mpf,
                          window: int, start: int) -> Optional[int]:
    """
    Smallest N >= start with t_N < threshold and t_N >= t_(N+1) >= ... >= t_(N+window-1).

    Args:
        terms: t_offset, t_(offset+1), ...
        offset: Index of terms[0]
        threshold: Bound the first omitted term must fall below
        window: Number of consecutive non-increasing terms required
        start: Smallest admissible N
    """
    last = offset + len(terms) - 1
    for n in range(max(start, offset), last - window + 2):
        t_n = terms[n - offset]
        if t_n >= threshold:
            continue
        run = terms[n - offset:n - offset + window]
        if all(run[j] >= run[j + 1] for j in range(window - 1)):
            return n
    return None


@dataclass(frozen=True)
class ConvergenceCertificate:
    """Truncation order certified by the majorant."""
    order: int
    majorant: float
    epsilon: float
    window: int


def convergence_certificate(m_triangle: CoefficientTriangle, tau: Real, epsilon: float,
                            gamma: Fraction = Fraction(1), gamma_power: int = 2,
                            window: int = 5) -> ConvergenceCertificate:
    """
    Smallest N with (τ^N/N!)·M^(0)_N·γ^(pN) < ε and a non-increasing majorant over N..N+window-1.

    Raises:
        InsufficientDepthError: when the built depth does not reach such an N,
            carrying an extrapolated depth
    """
    if tau < 0:
        raise ParameterDomainError(f"tau must be nonnegative, got {tau}")
    if not epsilon > 0:
        raise ParameterDomainError(f"epsilon must be positive, got {epsilon}")
    if tau == 0:
        return ConvergenceCertificate(order=1, majorant=0.0, epsilon=epsilon, window=window)

    terms = majorant_terms(m_triangle, 0, tau, gamma, gamma_power)
    order = first_certified_index(terms, 0, mpmath.mpf(epsilon), window, start=1)
    if order is None:
        depth = recommend_depth(m_triangle, tau, epsilon, 0, gamma, gamma_power, window)
        raise InsufficientDepthError(
            f"majorant at tau={float(tau)} not certified within depth {m_triangle.depth}", depth
        )
    return ConvergenceCertificate(order=order, majorant=float(terms[order]), epsilon=epsilon, window=window)


def _growth_roots(indices: np.ndarray) -> np.ndarray:
    """growth_root over an array: w ln w = x with x = (i+2)/2 gives w = x/W(x)."""
    x = (np.asarray(indices, dtype=float) + 2.0) / 2.0
    return x / lambertw(x).real


def _extrapolate_order(m_triangle: CoefficientTriangle, k: int, tau: Real, threshold: float,
                       factor: float, window: int) -> int:
    """Continue the majorant of column k past the built depth until the truncation rule holds."""
    depth = m_triangle.depth
    column = m_triangle.column(k)
    # γ = 1 here; the γ factor is reapplied in log space
    last_terms = majorant_terms(m_triangle, k, tau, Fraction(1), 1, depth)
    log_factor = math.log(factor)
    log_start = float(mpmath.log(last_terms[-1])) + (depth - k) * log_factor
    if len(column) >= 2:
        m_ratio = column[-1] / column[-2]
    else:
        m_ratio = max(1.0, growth_root(depth))
    w_ref = float(_growth_roots(max(depth, 3)))
    log_step = math.log(float(tau)) + log_factor
    log_threshold = math.log(threshold)

    # carry[j] is the log majorant term at index first + j
    carry = np.array([log_start])
    first = depth
    i = depth
    while i < EXTRAPOLATION_LIMIT:
        stop = min(i + EXTRAPOLATION_CHUNK, EXTRAPOLATION_LIMIT)
        steps = np.arange(i, stop, dtype=float)
        ratio = m_ratio * _growth_roots(np.maximum(steps, 3)) / w_ref
        logs = np.concatenate([carry, carry[-1] + np.cumsum(log_step + np.log(ratio) - np.log(steps + 1))])
        if len(logs) >= window:
            windows = sliding_window_view(logs, window)
            certified = (windows[:, 0] < log_threshold) & np.all(np.diff(windows, axis=1) <= 0, axis=1)
            hits = np.flatnonzero(certified)
            if hits.size:
                return first + int(hits[0])
        keep = max(window - 1, 1)
        carry = logs[-keep:]
        first += len(logs) - keep
        i = stop
    logger.warning("Majorant extrapolation for state %d hit the %d-term ceiling", k, EXTRAPOLATION_LIMIT)
    return EXTRAPOLATION_LIMIT


def recommend_depth(m_triangle: CoefficientTriangle, tau: Real, epsilon: float, k_max: int = 0,
                    gamma: Fraction = Fraction(1), gamma_power: int = 2, window: int = 5) -> int:
    """
    Smallest triangle depth whose majorant certifies ε for every state k <= k_max.

    Uses the built M-triangle where it reaches, and beyond it extrapolates the
    last observed M-ratio, scaled by the growth root w(i) of the Bessel asymptotics.
    """
    if tau == 0:
        return k_max + 1
    if m_triangle.depth < k_max + window + 2:
        m_triangle = build_m_triangle(k_max + window + 2)
    factor = float(majorant_factor(gamma, gamma_power))

    needed = 0
    for k in range(k_max + 1):
        threshold = epsilon * math.factorial(k)
        terms = majorant_terms(m_triangle, k, tau, gamma, gamma_power)
        order = first_certified_index(terms, k, mpmath.mpf(threshold), window, start=k + 1)
        if order is None:
            order = _extrapolate_order(m_triangle, k, tau, threshold, factor, window)
        needed = max(needed, order)
    return needed + max(5, needed // 10)


def required_precision_bits(majorant_sum: Real, epsilon: float) -> int:
    """Working precision 64 + ceil(log2(Σ|terms|/ε)) for an alternating sum."""
    with mpmath.workprec(64):
        ratio = _to_mpf(majorant_sum) / mpmath.mpf(epsilon)
        if ratio <= 1:
            return 64
        return 64 + int(mpmath.ceil(mpmath.log(ratio, 2)))
