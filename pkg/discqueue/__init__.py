"""
discqueue - transient analysis of the discouragement queue.

The package computes the transient distribution of the birth-death queue with
arrival rate λ/(1+k) and service rate μk:
- Exact coefficient triangles and a certified power-series evaluator
- The Bessel-number majorant and its convergence certificates
- The embedded jump chain in exact rationals, by recursion and closed form
- Uniformization, stationary and Monte Carlo oracles for cross-validation
"""

__version__ = "1.0.0"

from .bounds import bessel_numbers, build_m_triangle, convergence_certificate, verify_bound
from .config import ConfigManager, SolverConfig, load_config
from .embedded import closed_form, discouragement_embedded, embedded_recursion
from .model import BirthDeathRates, ModelParams, PrecisionMode, PrecisionPolicy, make_params
from .oracle import (
    SimConfig,
    SimulationMode,
    TruncatedGenerator,
    simulate_paths,
    stationary_distribution,
    transient_uniformization,
)
from .series import build_l_triangle, evaluate_transient, s_coefficients
from .triangle import CoefficientTriangle, TriangleCache

__all__ = [
    'BirthDeathRates',
    'CoefficientTriangle',
    'ConfigManager',
    'ModelParams',
    'PrecisionMode',
    'PrecisionPolicy',
    'SimConfig',
    'SimulationMode',
    'SolverConfig',
    'TriangleCache',
    'TruncatedGenerator',
    'bessel_numbers',
    'build_l_triangle',
    'build_m_triangle',
    'closed_form',
    'convergence_certificate',
    'discouragement_embedded',
    'embedded_recursion',
    'evaluate_transient',
    'load_config',
    'make_params',
    's_coefficients',
    'simulate_paths',
    'stationary_distribution',
    'transient_uniformization',
    'verify_bound',
]
