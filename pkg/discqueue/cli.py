"""
cli.py
Command-line front end: transient, embedded, bessel, validate and simulate.

Exit codes: 0 success, 1 failed validation verdict, 2 usage or input error,
3 the requested tolerance cannot be certified.
"""
import functools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence

import click
from rich.console import Console

from . import __version__
from .bounds import build_m_triangle
from .config import ConfigManager, SolverConfig
from .embedded import (
    closed_form,
    discouragement_embedded,
    embedded_recursion,
    normalization_check,
    parity_check,
    tables_agree,
)
from .errors import CertificationError, ConfigError, DiscQueueError, ParameterDomainError, TriangleCacheError
from .log import configure_logging
from .model import (
    PrecisionMode,
    PrecisionPolicy,
    discouragement_rates,
    format_rational,
    load_rates_file,
    make_params,
    parse_rational,
    rescale_time,
)
from .oracle import SimConfig, SimulationMode, TruncatedGenerator, choose_truncation, simulate_paths, \
    transient_uniformization
from .output import render, write_output
from .report import build_validation_report
from .series import cached_l_triangle, evaluate_transient
from .triangle import TriangleCache

logger = logging.getLogger(__name__)

EXIT_VALIDATION_FAILED = 1
EXIT_USAGE = 2
EXIT_UNCERTIFIED = 3

err_console = Console(stderr=True)


@dataclass
class RunContext:
    """Resolved configuration shared by the subcommands."""
    config: SolverConfig
    output_path: Optional[str] = None

    def cache(self) -> Optional[TriangleCache]:
        if self.config.use_cache and self.config.cache_dir:
            return TriangleCache(self.config.cache_dir)
        return None


def _fail(message: str, code: int):
    err_console.print(f"Error: {message}", style="bold red", markup=False, highlight=False, soft_wrap=True)
    raise click.exceptions.Exit(code)


def handle_errors(func: Callable) -> Callable:
    """Map the package exception families to exit codes."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CertificationError as e:
            _fail(str(e), EXIT_UNCERTIFIED)
        except (ParameterDomainError, ConfigError, TriangleCacheError) as e:
            _fail(str(e), EXIT_USAGE)
        except DiscQueueError as e:
            _fail(str(e), EXIT_USAGE)
    return wrapper


def _emit(run: RunContext, meta: Dict[str, Any], rows: List[Dict[str, Any]], columns: Sequence[str]):
    text = render(meta, rows, columns, run.config.output_format)
    stdout_text = write_output(text, run.output_path)
    if stdout_text is not None:
        click.echo(stdout_text, nl=False)


def _base_meta(command: str) -> Dict[str, Any]:
    return {"version": __version__, "command": command}


def _policy(config: SolverConfig, eps: Optional[float], precision_bits: Optional[int], exact: bool,
            gamma_power: Optional[str]) -> PrecisionPolicy:
    return PrecisionPolicy(
        mode=PrecisionMode.EXACT_RATIONAL if exact else PrecisionMode(config.precision_mode),
        float_precision_bits=precision_bits if precision_bits is not None else config.precision_bits,
        target_tolerance=eps if eps is not None else config.epsilon,
        gamma_power=int(gamma_power) if gamma_power is not None else config.gamma_power,
        window=config.window,
    )


def _depth(config: SolverConfig, depth: Optional[int]) -> int:
    depth = config.depth if depth is None else depth
    if depth > config.max_depth:
        raise ParameterDomainError(f"depth {depth} exceeds max_depth {config.max_depth}")
    return depth


def _one_of(first_name: str, first: Any, second_name: str, second: Any):
    if (first is None) == (second is None):
        raise click.UsageError(f"give exactly one of {first_name} and {second_name}")


def _model(lam: Optional[str], mu: Optional[str], rates_path: Optional[str]):
    if rates_path is not None:
        if lam is not None or mu is not None:
            raise click.UsageError("--rates cannot be combined with --lambda/--mu")
        return load_rates_file(rates_path)
    if lam is None or mu is None:
        raise click.UsageError("give --lambda and --mu, or --rates")
    return discouragement_rates(make_params(lam, mu))


def series_options(func: Callable) -> Callable:
    """Options shared by the series-evaluating commands."""
    options = [
        click.option("--depth", type=click.IntRange(min=0), default=None, help="Coefficient triangle depth"),
        click.option("--precision-bits", type=click.IntRange(min=64), default=None,
                     help="Fixed big-float working precision"),
        click.option("--exact", is_flag=True, default=False, help="Sum the series in exact rationals"),
        click.option("--gamma-power", type=click.Choice(["1", "2"]), default=None,
                     help="Exponent of the majorant factor"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Configuration file (JSON or YAML)")
@click.option("--format", "output_format", type=click.Choice(["csv", "json"]), default=None,
              help="Output format")
@click.option("--output", "output_path", type=click.Path(dir_okay=False), default=None,
              help="Write output to this file instead of standard output")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              default=None, help="Logging level")
@click.option("--progress/--no-progress", default=None, help="Show progress bars")
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None, help="Triangle cache directory")
@click.version_option(__version__, prog_name="discqueue")
@click.pass_context
def cli(ctx, config_path, output_format, output_path, log_level, progress, cache_dir):
    """Transient analysis of the discouragement queue."""
    try:
        manager = ConfigManager(config_path)
    except ConfigError as e:
        raise click.UsageError(str(e))
    manager.update(output_format=output_format, log_level=log_level, progress=progress, cache_dir=cache_dir)
    config = manager.get()
    if cache_dir:
        config.use_cache = True

    errors = config.validate()
    if errors:
        raise click.UsageError("; ".join(errors))

    configure_logging(config.log_level, config.log_file)
    ctx.obj = RunContext(config=config, output_path=output_path)


@cli.command()
@click.option("--lambda", "lam", required=True, help="Arrival constant λ (rational)")
@click.option("--mu", required=True, help="Service constant μ (rational)")
@click.option("--t", "t", default=None, help="Physical time, rescaled to τ = λt")
@click.option("--tau", default=None, help="Rescaled time τ")
@click.option("--kmax", type=click.IntRange(min=0), required=True, help="Largest state reported")
@click.option("--eps", type=float, default=None, help="Target truncation tolerance")
@series_options
@click.pass_obj
@handle_errors
def transient(run: RunContext, lam, mu, t, tau, kmax, eps, depth, precision_bits, exact, gamma_power):
    """Transient distribution p(k, τ) from the power series."""
    _one_of("--t", t, "--tau", tau)
    params = make_params(lam, mu)
    tau_value = rescale_time(params, t) if t is not None else parse_rational(tau, "tau")
    policy = _policy(run.config, eps, precision_bits, exact, gamma_power)
    depth = _depth(run.config, depth)

    triangle = cached_l_triangle(params, depth, run.cache(), run.config.progress)
    result = evaluate_transient(triangle, params, tau_value, kmax, policy, run.config.progress)

    meta = _base_meta("transient")
    meta.update(params.to_dict())
    if t is not None:
        meta["t"] = format_rational(parse_rational(t, "t"))
    meta.update({
        "tau": format_rational(result.tau),
        "k_max": kmax,
        "epsilon": policy.target_tolerance,
        "depth": depth,
        "truncation_order": result.truncation_order,
        "precision_mode": policy.mode.value,
        "precision_bits": result.precision_bits,
        "gamma_power": policy.gamma_power,
        "window": policy.window,
        "max_tail_bound": result.tail_bound,
    })
    _emit(run, meta, result.rows(), ["k", "p", "tail_bound"])


@cli.command()
@click.option("--lambda", "lam", default=None, help="Arrival constant λ (rational)")
@click.option("--mu", default=None, help="Service constant μ (rational)")
@click.option("--rates", "rates_path", type=click.Path(dir_okay=False), default=None, help="Rates file (JSON)")
@click.option("--n", "n_max", type=click.IntRange(min=0), required=True, help="Step horizon")
@click.option("--method", type=click.Choice(["recursion", "closed", "both"]), default="both",
              help="Which construction to emit")
@click.pass_obj
@handle_errors
def embedded(run: RunContext, lam, mu, rates_path, n_max, method):
    """Transient distribution of the embedded jump chain, in exact rationals."""
    rates = _model(lam, mu, rates_path)

    def closed():
        if rates.params is not None:
            return discouragement_embedded(rates.params, n_max)[1]
        return closed_form(rates, n_max)[1]

    table = closed() if method == "closed" else embedded_recursion(rates, n_max)
    verdict = None
    if method == "both":
        verdict = "equal" if tables_agree(table, closed()) else "different"

    meta = _base_meta("embedded")
    meta["rates"] = rates.to_dict()
    meta.update({
        "n_max": n_max,
        "method": method,
        "normalized": normalization_check(table),
        "parity": parity_check(table),
    })
    if verdict is not None:
        meta["verdict"] = verdict

    rows = [
        {"n": n, "k": k, "p": format_rational(value), "p_num": value.numerator,
         "p_den": value.denominator, "p_float": float(value)}
        for n, k, value in table.rows()
    ]
    _emit(run, meta, rows, ["n", "k", "p", "p_num", "p_den", "p_float"])
    if verdict == "different":
        raise click.exceptions.Exit(EXIT_VALIDATION_FAILED)


@cli.command()
@click.option("--depth", type=click.IntRange(min=0), required=True, help="Largest index i")
@click.option("--triangle", "show_triangle", is_flag=True, default=False, help="Emit every M entry")
@click.pass_obj
@handle_errors
def bessel(run: RunContext, depth, show_triangle):
    """Bessel numbers B*_0..B*_depth from the M-triangle."""
    m_triangle = build_m_triangle(depth, progress=run.config.progress)
    meta = _base_meta("bessel")
    meta["depth"] = depth
    if show_triangle:
        rows = [{"i": i, "k": k, "m": value} for i, row in enumerate(m_triangle.rows) for k, value in enumerate(row)]
        _emit(run, meta, rows, ["i", "k", "m"])
    else:
        rows = [{"i": i, "bessel": value} for i, value in enumerate(m_triangle.column(0))]
        _emit(run, meta, rows, ["i", "bessel"])


@cli.command()
@click.option("--lambda", "lam", required=True, help="Arrival constant λ (rational)")
@click.option("--mu", required=True, help="Service constant μ (rational)")
@click.option("--tau", required=True, help="Rescaled time τ")
@click.option("--kmax", type=click.IntRange(min=0), required=True, help="Largest state compared")
@click.option("--tol", type=float, default=1e-8, show_default=True, help="Allowed |series - oracle|")
@click.option("--eps", type=float, default=None, help="Series truncation tolerance")
@click.option("--oracle-eps", type=float, default=None, help="Uniformization Poisson-tail tolerance")
@click.option("--report", "show_report", is_flag=True, default=False, help="Print a text report on stderr")
@series_options
@click.pass_obj
@handle_errors
def validate(run: RunContext, lam, mu, tau, kmax, tol, eps, oracle_eps, show_report,
             depth, precision_bits, exact, gamma_power):
    """Compare the series with the uniformization oracle state by state."""
    params = make_params(lam, mu)
    tau_value = parse_rational(tau, "tau")
    policy = _policy(run.config, eps, precision_bits, exact, gamma_power)
    depth = _depth(run.config, depth)
    oracle_eps = oracle_eps if oracle_eps is not None else run.config.oracle_epsilon

    triangle = cached_l_triangle(params, depth, run.cache(), run.config.progress)
    result = evaluate_transient(triangle, params, tau_value, kmax, policy, run.config.progress)

    t_physical = tau_value / params.lam
    k_trunc = max(choose_truncation(params, t_physical, oracle_eps), kmax + 1)
    oracle = transient_uniformization(TruncatedGenerator.from_rates(params, k_trunc), t_physical, oracle_eps)

    meta = _base_meta("validate")
    meta.update(params.to_dict())
    meta.update({
        "tau": format_rational(tau_value),
        "k_max": kmax,
        "tolerance": tol,
        "epsilon": policy.target_tolerance,
        "oracle_epsilon": oracle_eps,
        "depth": depth,
        "precision_mode": policy.mode.value,
        "precision_bits": result.precision_bits,
        "gamma_power": policy.gamma_power,
        "window": policy.window,
        "oracle_truncation": k_trunc,
    })
    report = build_validation_report(result, oracle, tol, meta)
    meta.update({
        "truncation_order": report.truncation_order,
        "boundary_mass": report.boundary_mass,
        "verdict": "pass" if report.passed else "fail",
    })

    if show_report:
        err_console.print(report.render(), markup=False, highlight=False, soft_wrap=True)

    rows = [row.to_dict() for row in report.rows]
    _emit(run, meta, rows, ["k", "series", "oracle", "abs_diff", "tail_bound", "verdict"])
    if not report.passed:
        raise click.exceptions.Exit(EXIT_VALIDATION_FAILED)


@cli.command()
@click.option("--lambda", "lam", default=None, help="Arrival constant λ (rational)")
@click.option("--mu", default=None, help="Service constant μ (rational)")
@click.option("--rates", "rates_path", type=click.Path(dir_okay=False), default=None, help="Rates file (JSON)")
@click.option("--t", "t", default=None, help="Continuous mode: physical end time")
@click.option("--steps", type=click.IntRange(min=0), default=None, help="Embedded mode: number of jumps")
@click.option("--paths", type=click.IntRange(min=1), default=None, help="Number of simulated paths")
@click.option("--seed", type=click.IntRange(min=0, max=2 ** 64 - 1), default=None, help="Master seed")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Worker processes")
@click.pass_obj
@handle_errors
def simulate(run: RunContext, lam, mu, rates_path, t, steps, paths, seed, workers):
    """Empirical distribution from seeded Monte Carlo paths."""
    _one_of("--t", t, "--steps", steps)
    rates = _model(lam, mu, rates_path)
    config = run.config
    t_end = parse_rational(t, "t") if t is not None else Fraction(0)
    cfg = SimConfig(
        seed=config.seed if seed is None else seed,
        paths=config.paths if paths is None else paths,
        t_end=float(t_end),
        steps=steps or 0,
        max_workers=config.max_workers if workers is None else workers,
    )
    mode = SimulationMode.EMBEDDED if steps is not None else SimulationMode.CONTINUOUS
    empirical = simulate_paths(rates, cfg, mode, progress=config.progress)

    meta = _base_meta("simulate")
    meta["rates"] = rates.to_dict()
    meta.update({"mode": mode.value, "seed": cfg.seed, "paths": cfg.paths})
    if mode is SimulationMode.EMBEDDED:
        meta["steps"] = cfg.steps
    else:
        meta["t"] = format_rational(t_end)

    probabilities = empirical.probabilities
    errors = empirical.standard_errors
    rows = [
        {"k": k, "count": int(count), "p_hat": float(probabilities[k]), "std_error": float(errors[k])}
        for k, count in enumerate(empirical.counts)
    ]
    _emit(run, meta, rows, ["k", "count", "p_hat", "std_error"])


def main():
    cli(prog_name="discqueue")


if __name__ == "__main__":
    main()
