"""
oracle.py
Independent ground truth for the series and embedded-chain results: a
uniformization solver on a reflecting truncation, the stationary law, and a
seeded Monte Carlo simulator.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix, diags
from scipy.stats import poisson
from tqdm import tqdm

from .errors import ParameterDomainError, TruncationError
from .model import BirthDeathRates, ModelParams, RationalLike, discouragement_rates, parse_rational

logger = logging.getLogger(__name__)

Model = Union[ModelParams, BirthDeathRates]

# Largest truncation choose_truncation will try before giving up.
MAX_TRUNCATION = 1 << 16

STATIONARY_TAIL = 1e-15


def as_rates(model: Model) -> BirthDeathRates:
    """Promote ModelParams to the discouragement preset."""
    if isinstance(model, ModelParams):
        return discouragement_rates(model)
    return model


@dataclass(frozen=True)
class TruncatedGenerator:
    """
    Birth-death generator on states 0..K with the up-rate at K set to 0.

    up_rates[k] = λ_k (0 at K), down_rates[k] = μ_k (0 at 0).
    """

    up_rates: Tuple[float, ...]
    down_rates: Tuple[float, ...]

    def __post_init__(self):
        if len(self.up_rates) != len(self.down_rates) or not self.up_rates:
            raise ParameterDomainError("up and down rates must be nonempty and of equal length")
        if self.up_rates[-1] != 0 or self.down_rates[0] != 0:
            raise ParameterDomainError("truncated generator needs λ_K = 0 and μ_0 = 0")
        if min(self.up_rates) < 0 or min(self.down_rates) < 0:
            raise ParameterDomainError("rates must be nonnegative")

    @property
    def size(self) -> int:
        return len(self.up_rates)

    @property
    def k_max(self) -> int:
        return self.size - 1

    @classmethod
    def from_rates(cls, model: Model, k_max: int) -> 'TruncatedGenerator':
        """Reflecting truncation of a rate model to states 0..k_max."""
        rates = as_rates(model)
        if k_max < 0:
            raise ParameterDomainError(f"truncation must be nonnegative, got {k_max}")
        up = [float(rates.birth(k)) for k in range(k_max)] + [0.0]
        down = [float(rates.death(k)) for k in range(k_max + 1)]
        return cls(tuple(up), tuple(down))

    def rate_bound(self) -> float:
        """Uniformization rate Λ = max_k (λ_k + μ_k)."""
        bound = max(u + d for u, d in zip(self.up_rates, self.down_rates))
        return bound if bound > 0 else 1.0

    def matrix(self) -> np.ndarray:
        """Dense generator Q."""
        up = np.asarray(self.up_rates)
        down = np.asarray(self.down_rates)
        q = np.diag(up[:-1], 1) + np.diag(down[1:], -1)
        q -= np.diag(up + down)
        return q

    def uniformized(self) -> csr_matrix:
        """Sparse tridiagonal P = I + Q/Λ."""
        rate = self.rate_bound()
        up = np.asarray(self.up_rates) / rate
        down = np.asarray(self.down_rates) / rate
        if self.size == 1:
            return csr_matrix(np.ones((1, 1)))
        return diags([down[1:], 1.0 - up - down, up[:-1]], [-1, 0, 1], format="csr")


@dataclass(frozen=True)
class TransientDistribution:
    """Uniformization result with its error diagnostics."""
    probabilities: np.ndarray
    boundary_mass: float
    poisson_terms: int
    error_bound: float
    uniformization_rate: float

    def __getitem__(self, k: int) -> float:
        return float(self.probabilities[k])


def transient_uniformization(gen: TruncatedGenerator, t: RationalLike, epsilon: float,
                             initial_state: int = 0) -> TransientDistribution:
    """
    p(t) = Σ_n Pois(n; Λt)·e_0·P^n, with the Poisson series cut at its (1 - ε) quantile.

    Returns:
        TransientDistribution whose error_bound is the dropped Poisson mass and
        whose boundary_mass is p(K, t)
    """
    t_value = float(parse_rational(t, "t"))
    if t_value < 0:
        raise ParameterDomainError(f"time must be nonnegative, got {t}")
    if not epsilon > 0:
        raise ParameterDomainError(f"epsilon must be positive, got {epsilon}")
    if not 0 <= initial_state < gen.size:
        raise ParameterDomainError(f"initial state {initial_state} outside 0..{gen.k_max}")

    start = np.zeros(gen.size)
    start[initial_state] = 1.0
    rate = gen.rate_bound()
    if t_value == 0:
        return TransientDistribution(start, float(start[-1]), 1, 0.0, rate)

    mean = rate * t_value
    last = int(poisson.isf(epsilon, mean))
    weights = poisson.pmf(np.arange(last + 1), mean)
    error_bound = float(poisson.sf(last, mean))

    transition = gen.uniformized().T.tocsr()
    vector = start
    result = weights[0] * vector
    for n in range(1, last + 1):
        vector = transition @ vector
        result = result + weights[n] * vector

    logger.debug("Uniformization: K=%d, Λt=%.4g, %d Poisson terms, dropped mass %.3e",
                 gen.k_max, mean, last + 1, error_bound)
    return TransientDistribution(result, float(result[-1]), last + 1, error_bound, rate)


def _boundary_mass(rates: BirthDeathRates, k_max: int, t: float, epsilon: float) -> float:
    return transient_uniformization(TruncatedGenerator.from_rates(rates, k_max), t, epsilon).boundary_mass


def choose_truncation(model: Model, t: RationalLike, epsilon: float) -> int:
    """
    Smallest K whose uniformization boundary mass at t is below ε/10.

    K is doubled from 1 until the mass is small enough, then the last
    doubling step is bisected. Finite rates stop at their largest state.
    """
    rates = as_rates(model)
    t_value = float(parse_rational(t, "t"))
    if t_value < 0:
        raise ParameterDomainError(f"time must be nonnegative, got {t}")
    if t_value == 0:
        return 1

    target = epsilon / 10
    low, high = 0, 1
    while True:
        if high > MAX_TRUNCATION:
            raise TruncationError(f"boundary mass at t={t_value} stays above {target:g}", MAX_TRUNCATION)
        if rates.max_state is not None and high >= rates.max_state:
            logger.warning("Rates '%s' end at state %d; using it as the truncation", rates.name, rates.max_state)
            return rates.max_state
        if _boundary_mass(rates, high, t_value, target) < target:
            break
        low, high = high, 2 * high

    # mass(low) >= target > mass(high)
    while high - low > 1:
        mid = (low + high) // 2
        if _boundary_mass(rates, mid, t_value, target) < target:
            high = mid
        else:
            low = mid
    logger.info("Truncation K=%d", high)
    return high


def _stationary_weights(ratio: Fraction, count: int) -> List[Fraction]:
    weights = [Fraction(1)]
    for k in range(1, count):
        weights.append(weights[-1] * ratio / (k * k))
    return weights


def _stationary_tail_ok(ratio: Fraction, weights: Sequence[Fraction]) -> bool:
    # terms past k_max shrink by at most q = ratio/(k_max+2)^2 per step
    k_max = len(weights) - 1
    q = ratio / ((k_max + 2) ** 2)
    if q >= 1:
        return False
    first_dropped = weights[-1] * ratio / ((k_max + 1) ** 2)
    tail = first_dropped / (1 - q)
    return tail / (sum(weights, Fraction(0)) + tail) < STATIONARY_TAIL


def stationary_distribution(params: ModelParams, k_max: int) -> np.ndarray:
    """
    π_k ∝ (λ/μ)^k/(k!)² on 0..k_max, normalized exactly before rounding.

    Raises:
        TruncationError: if the dropped tail exceeds 1e-15 of the mass
    """
    if k_max < 0:
        raise ParameterDomainError(f"k_max must be nonnegative, got {k_max}")
    ratio = params.lam / params.mu
    weights = _stationary_weights(ratio, k_max + 1)
    if not _stationary_tail_ok(ratio, weights):
        needed = k_max + 1
        while not _stationary_tail_ok(ratio, _stationary_weights(ratio, needed + 1)):
            needed += 1
        raise TruncationError(f"stationary tail beyond k_max={k_max} exceeds {STATIONARY_TAIL:g}", needed)
    total = sum(weights, Fraction(0))
    return np.array([float(w / total) for w in weights])


class SimulationMode(Enum):
    """Observation scheme of a simulated path."""
    CONTINUOUS = "continuous"
    EMBEDDED = "embedded"


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings; t_end is used in continuous mode, steps in embedded mode."""
    seed: int
    paths: int
    t_end: float = 0.0
    steps: int = 0
    max_workers: int = 1

    def __post_init__(self):
        if self.paths < 1:
            raise ParameterDomainError(f"paths must be positive, got {self.paths}")
        if self.t_end < 0 or not math.isfinite(self.t_end):
            raise ParameterDomainError(f"t_end must be finite and nonnegative, got {self.t_end}")
        if self.steps < 0:
            raise ParameterDomainError(f"steps must be nonnegative, got {self.steps}")
        if self.max_workers < 1:
            raise ParameterDomainError(f"max_workers must be positive, got {self.max_workers}")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterDomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Final-state counts of simulated paths."""
    counts: np.ndarray
    paths: int
    mode: SimulationMode

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.paths

    @property
    def standard_errors(self) -> np.ndarray:
        p = self.probabilities
        return np.sqrt(p * (1.0 - p) / self.paths)

    def probability(self, k: int) -> float:
        return float(self.counts[k]) / self.paths if k < len(self.counts) else 0.0


class _RateTable:
    """Float rates of a model, grown on demand; the last finite state reflects."""

    def __init__(self, rates: BirthDeathRates):
        self.rates = rates
        self.birth: List[float] = []
        self.death: List[float] = []

    def _grow(self, k: int):
        while len(self.birth) <= k:
            state = len(self.birth)
            last = self.rates.max_state
            self.birth.append(0.0 if last is not None and state >= last else float(self.rates.birth(state)))
            self.death.append(float(self.rates.death(state)))

    def rates_at(self, k: int) -> Tuple[float, float]:
        if k >= len(self.birth):
            self._grow(k)
        return self.birth[k], self.death[k]


def _simulate_chunk(rates: BirthDeathRates, seeds: Sequence[np.random.SeedSequence], mode: SimulationMode,
                    t_end: float, steps: int) -> List[int]:
    table = _RateTable(rates)
    finals = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        k = 0
        if mode is SimulationMode.EMBEDDED:
            for u in rng.random(steps):
                lam, mu = table.rates_at(k)
                if lam + mu == 0:
                    break
                k = k + 1 if u < lam / (lam + mu) else k - 1
        else:
            time = 0.0
            while True:
                lam, mu = table.rates_at(k)
                total = lam + mu
                if total == 0:
                    break
                time += rng.exponential(1.0 / total)
                if time > t_end:
                    break
                k = k + 1 if rng.random() * total < lam else k - 1
        finals.append(k)
    return finals


def simulate_paths(model: Model, cfg: SimConfig, mode: SimulationMode = SimulationMode.CONTINUOUS,
                   progress: bool = False) -> EmpiricalDistribution:
    """
    Simulate cfg.paths independent paths from state 0 and count their final states.

    Path j draws from its own generator seeded by SeedSequence(cfg.seed).spawn(paths)[j],
    so the counts depend only on the seed, never on max_workers.
    """
    rates = as_rates(model)
    mode = SimulationMode(mode)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.paths)
    horizon = cfg.steps if mode is SimulationMode.EMBEDDED else cfg.t_end

    chunk_size = max(1, math.ceil(cfg.paths / (cfg.max_workers * 4)))
    chunks = [seeds[i:i + chunk_size] for i in range(0, cfg.paths, chunk_size)]
    finals: List[int] = []

    if cfg.max_workers == 1:
        for chunk in tqdm(chunks, disable=not progress, desc="paths", leave=False):
            finals.extend(_simulate_chunk(rates, chunk, mode, cfg.t_end, cfg.steps))
    else:
        with ProcessPoolExecutor(max_workers=cfg.max_workers) as executor:
            futures = [executor.submit(_simulate_chunk, rates, chunk, mode, cfg.t_end, cfg.steps)
                       for chunk in chunks]
            for future in tqdm(futures, disable=not progress, desc="paths", leave=False):
                finals.extend(future.result())

    counts = np.bincount(np.asarray(finals, dtype=np.int64), minlength=1)
    logger.info("Simulated %d %s paths to %s; largest state %d",
                cfg.paths, mode.value, horizon, len(counts) - 1)
    return EmpiricalDistribution(counts, cfg.paths, mode)
