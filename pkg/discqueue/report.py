"""
report.py
Cross-method validation report: series values against the uniformization oracle.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List

from .oracle import TransientDistribution
from .series import TransientResult


@dataclass(frozen=True)
class ValidationRow:
    k: int
    series: float
    oracle: float
    abs_diff: float
    tail_bound: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "series": self.series,
            "oracle": self.oracle,
            "abs_diff": self.abs_diff,
            "tail_bound": self.tail_bound,
            "verdict": "pass" if self.passed else "fail",
        }


@dataclass
class ValidationReport:
    """Per-state agreement of the series with the oracle at one τ."""

    rows: List[ValidationRow]
    tolerance: float
    boundary_mass: float
    oracle_error_bound: float
    truncation_order: int
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    @property
    def failures(self) -> List[ValidationRow]:
        return [row for row in self.rows if not row.passed]

    @property
    def max_abs_diff(self) -> float:
        return max((row.abs_diff for row in self.rows), default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tolerance": self.tolerance,
            "boundary_mass": self.boundary_mass,
            "oracle_error_bound": self.oracle_error_bound,
            "truncation_order": self.truncation_order,
            "verdict": "pass" if self.passed else "fail",
            "rows": [row.to_dict() for row in self.rows],
        }

    def render(self) -> str:
        """
        Create a formatted text report.

        Returns:
            Formatted report string
        """
        report = []
        report.append("=" * 60)
        report.append("VALIDATION REPORT")
        for key in ("lambda", "mu", "tau"):
            if key in self.metadata:
                report.append(f"{key}: {self.metadata[key]}")
        report.append("=" * 60)
        report.append("")

        report.append("SUMMARY")
        report.append("-" * 60)
        report.append(f"States checked: {len(self.rows)}")
        report.append(f"Tolerance: {self.tolerance:.3e}")
        report.append(f"Largest difference: {self.max_abs_diff:.3e}")
        report.append(f"Truncation order: {self.truncation_order}")
        report.append(f"Oracle boundary mass: {self.boundary_mass:.3e}")
        report.append(f"Verdict: {'PASS' if self.passed else 'FAIL'}")
        report.append("")

        report.append("STATES")
        report.append("-" * 60)
        report.append(f"{'k':>4} {'series':>22} {'oracle':>22} {'|diff|':>10}")
        for row in self.rows:
            mark = "" if row.passed else "  <-- fail"
            report.append(f"{row.k:>4} {row.series:>22.15e} {row.oracle:>22.15e} {row.abs_diff:>10.2e}{mark}")
        report.append("")

        if self.failures:
            report.append("SUGGESTIONS")
            report.append("-" * 60)
            report.append("1. Rerun with a larger --depth or a smaller --eps for the series")
            report.append("2. Check the oracle boundary mass; raise the truncation if it is not small")
            report.append("")

        report.append("=" * 60)

        return "\n".join(report)


def build_validation_report(result: TransientResult, oracle: TransientDistribution, tolerance: float,
                            metadata: Dict[str, Any] = None) -> ValidationReport:
    """
    Compare each state 0..k_max of a series result with the oracle.

    A state passes when |series - oracle| <= tolerance.
    """
    rows = []
    for k, (value, bound) in enumerate(zip(result.probabilities, result.tail_bounds)):
        reference = oracle[k] if k < len(oracle.probabilities) else 0.0
        diff = abs(value - reference)
        rows.append(ValidationRow(k, value, reference, diff, bound, diff <= tolerance))
    return ValidationReport(
        rows=rows,
        tolerance=tolerance,
        boundary_mass=oracle.boundary_mass,
        oracle_error_bound=oracle.error_bound,
        truncation_order=result.truncation_order,
        metadata=dict(metadata or {}),
    )
