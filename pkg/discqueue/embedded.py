"""
embedded.py
Transient distribution of the embedded jump chain, by the defining recursion
and by the product/sum closed form, for general rates and the discouragement
preset.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Tuple

from .errors import ParameterDomainError
from .model import BirthDeathRates, ModelParams, discouragement_rates, format_rational

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddedTable:
    """
    Exact p(n, k) = P(X_n = k) for 0 <= k <= n <= n_max, stored as p[n][k].

    ``up`` holds the jump probabilities α_0..α_(m-1) with m = max(1, n_max),
    the ones the horizon actually reaches.
    """

    n_max: int
    p: Tuple[Tuple[Fraction, ...], ...]
    up: Tuple[Fraction, ...]

    def entry(self, n: int, k: int) -> Fraction:
        if n < 0 or n > self.n_max:
            raise ParameterDomainError(f"step {n} outside horizon 0..{self.n_max}")
        if k < 0 or k > n:
            return Fraction(0)
        return self.p[n][k]

    def rows(self) -> Iterator[Tuple[int, int, Fraction]]:
        for n, row in enumerate(self.p):
            for k, value in enumerate(row):
                yield n, k, value

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_max": self.n_max,
            "up": [format_rational(a) for a in self.up],
            "p": [[format_rational(v) for v in row] for row in self.p],
        }


@dataclass(frozen=True)
class ClosedFormTables:
    """d_k for k = 0..n_max and T[h][k] = T_{h,k} for k = 0..n_max-2h."""
    d: Tuple[Fraction, ...]
    T: Tuple[Tuple[Fraction, ...], ...]


def up_probabilities(rates: BirthDeathRates, n_max: int) -> Tuple[Fraction, ...]:
    """α_k = λ_k/(λ_k + μ_k) for the states a chain of n_max steps can leave."""
    if n_max < 0:
        raise ParameterDomainError(f"n_max must be nonnegative, got {n_max}")
    up = tuple(rates.up_probability(k) for k in range(max(1, n_max)))
    if up[0] != 1:
        raise ParameterDomainError(f"state 0 must move up with probability 1, got {up[0]}")
    return up


def embedded_recursion(rates: BirthDeathRates, n_max: int) -> EmbeddedTable:
    """
    p(n+1, k) = α_(k-1)·p(n, k-1) + (1 - α_(k+1))·p(n, k+1) from p(0, 0) = 1.

    Raises:
        ParameterDomainError: if the rates do not cover the states the horizon reaches
    """
    up = up_probabilities(rates, n_max)
    rows: List[Tuple[Fraction, ...]] = [(Fraction(1),)]
    for n in range(n_max):
        prev = rows[-1]
        new_row = []
        for k in range(n + 2):
            value = Fraction(0)
            if 1 <= k <= n + 1:
                value += up[k - 1] * prev[k - 1]
            if k + 1 <= n:
                value += (1 - up[k + 1]) * prev[k + 1]
            new_row.append(value)
        rows.append(tuple(new_row))
    return EmbeddedTable(n_max, tuple(rows), up)


def _assemble(d: Tuple[Fraction, ...], T: Tuple[Tuple[Fraction, ...], ...], n_max: int,
              up: Tuple[Fraction, ...]) -> EmbeddedTable:
    rows = []
    for n in range(n_max + 1):
        rows.append(tuple(
            d[k] * T[(n - k) // 2][k] if (n + k) % 2 == 0 else Fraction(0)
            for k in range(n + 1)
        ))
    return EmbeddedTable(n_max, tuple(rows), up)


def _t_table(weights: List[Fraction], n_max: int) -> Tuple[Tuple[Fraction, ...], ...]:
    """T_{h,k} = Σ_{l<=k} weights[l]·T_{h-1,l+1}, built as running sums over k."""
    rows = [tuple(Fraction(1) for _ in range(n_max + 1))]
    for h in range(1, n_max // 2 + 1):
        previous = rows[-1]
        running = Fraction(0)
        row = []
        for k in range(n_max - 2 * h + 1):
            running += weights[k] * previous[k + 1]
            row.append(running)
        rows.append(tuple(row))
    return tuple(rows)


def closed_form(rates: BirthDeathRates, n_max: int) -> Tuple[ClosedFormTables, EmbeddedTable]:
    """
    p(n, k) = d_k·T_{(n-k)/2, k} for n + k even, 0 otherwise.

    d_k = α_0·...·α_(k-1) (empty product 1) and
    T_{h,k} = Σ_{l=0..k} α_l·(1 - α_(l+1))·T_{h-1,l+1} with T_{0,k} = 1.
    """
    up = up_probabilities(rates, n_max)
    d = [Fraction(1)]
    for k in range(1, n_max + 1):
        d.append(d[-1] * up[k - 1])
    weights = [up[l] * (1 - up[l + 1]) for l in range(max(0, n_max - 1))]
    T = _t_table(weights, n_max)
    tables = ClosedFormTables(tuple(d), T)
    return tables, _assemble(tables.d, T, n_max, up)


def corollary_d(params: ModelParams, count: int) -> List[Fraction]:
    """d_k = Π_{i=0..k} 1/(1 + i(i-1)α²) for k = 0..count-1."""
    d = []
    product = Fraction(1)
    for k in range(count):
        product /= 1 + k * (k - 1) * params.alpha_sq
        d.append(product)
    return d


def corollary_tables(params: ModelParams, n_max: int) -> Tuple[ClosedFormTables, EmbeddedTable]:
    """
    Discouragement tables from the d_k product alone.

    T^(h)_k = Σ_{i=0..k} ((d_(i+1) - d_(i+2))/d_i)·T^(h-1)_(i+1).
    """
    if n_max < 0:
        raise ParameterDomainError(f"n_max must be nonnegative, got {n_max}")
    d = corollary_d(params, n_max + 2)
    weights = [(d[i + 1] - d[i + 2]) / d[i] for i in range(max(0, n_max - 1))]
    T = _t_table(weights, n_max)
    up = tuple(d[k + 1] / d[k] for k in range(max(1, n_max)))
    tables = ClosedFormTables(tuple(d[:n_max + 1]), T)
    return tables, _assemble(tables.d, T, n_max, up)


def discouragement_embedded(params: ModelParams, n_max: int) -> Tuple[ClosedFormTables, EmbeddedTable]:
    """
    Closed form for λ_k = λ/(1+k), μ_k = μk, where α_k = 1/(1 + k(k+1)α²).

    Raises:
        AssertionError: if d_k disagrees with its product formula
    """
    tables, table = closed_form(discouragement_rates(params), n_max)
    for k, (got, expected) in enumerate(zip(tables.d, corollary_d(params, n_max + 1))):
        if got != expected:
            raise AssertionError(f"d_{k} = {got} but the product formula gives {expected}")
    return tables, table


def parity_check(table: EmbeddedTable) -> bool:
    """True iff p(n, k) = 0 whenever n + k is odd."""
    return all(value == 0 for n, k, value in table.rows() if (n + k) % 2 == 1)


def normalization_check(table: EmbeddedTable) -> bool:
    """True iff every row sums to exactly 1."""
    return all(sum(row, Fraction(0)) == 1 for row in table.p)


def diagonal_law_check(table: EmbeddedTable) -> bool:
    """True iff p(n, n) = α_0·...·α_(n-1) for every n."""
    product = Fraction(1)
    for n in range(table.n_max + 1):
        if n > 0:
            product *= table.up[n - 1]
        if table.p[n][n] != product:
            logger.debug("Diagonal law fails at n=%d: %s != %s", n, table.p[n][n], product)
            return False
    return True


def tables_agree(first: EmbeddedTable, second: EmbeddedTable) -> bool:
    """Exact equality of two transient tables over the same horizon."""
    return first.n_max == second.n_max and first.p == second.p
