"""Per-major demographic bias analysis.

For every major and each of the four demographic aspects we build a 2x2
contingency table against the employment label and run a Pearson chi-square
independence test (df = 1, no continuity correction). The per-major p-value
vector, passed through a smooth odd transformation, becomes the major's bias
profile used by the training regularizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import erfc, sqrt

import numpy as np

from .cohort import ASPECTS, Cohort
from .errors import ValidationError

SIGNIFICANCE_THRESHOLD = 0.05


@dataclass(frozen=True)
class ContingencyTable:
    """2x2 counts, rows = aspect value (0/1), columns = label (0/1)."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (2, 2):
            raise ValidationError(f"contingency table must be 2x2, got {c.shape}")
        if np.any(c < 0):
            raise ValidationError("contingency table entries must be non-negative")
        if c.sum() <= 0:
            raise ValidationError("contingency table is empty")
        object.__setattr__(self, "counts", c.astype(float))


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    p_value: float
    degenerate: bool  # a zero row/column marginal made the test undefined


@dataclass(frozen=True)
class BiasProfile:
    """Per-major transformed p-values over the four aspects."""

    major_id: int
    p_values: np.ndarray  # shape (4,), order = ASPECTS
    u: np.ndarray  # shape (4,), p_value_weight applied per the chosen mode
    degenerate: tuple[bool, bool, bool, bool]


def contingency_table(cohort: Cohort, major_id: int, aspect: str) -> ContingencyTable:
    if aspect not in ASPECTS:
        raise ValidationError(f"unknown aspect {aspect!r}; expected one of {ASPECTS}")
    students = cohort.students_in_major(major_id)
    if not students:
        raise ValidationError(f"major {major_id} has no students")
    counts = np.zeros((2, 2))
    for s in students:
        counts[s.aspect_value(aspect), s.label] += 1
    return ContingencyTable(counts)


def chi_square_test(table: ContingencyTable) -> ChiSquareResult:
    """Pearson chi-square independence test on a 2x2 table.

    Returns the upper-tail p-value of the chi-square(1) distribution,
    computed as erfc(sqrt(stat / 2)). A zero row or column marginal leaves
    the test undefined; such tables are flagged and scored p = 1.0 (no
    evidence of dependence).
    """
    c = table.counts
    rows = c.sum(axis=1)
    cols = c.sum(axis=0)
    if np.any(rows == 0) or np.any(cols == 0):
        return ChiSquareResult(statistic=0.0, p_value=1.0, degenerate=True)
    expected = np.outer(rows, cols) / c.sum()
    stat = float(((c - expected) ** 2 / expected).sum())
    return ChiSquareResult(statistic=stat, p_value=erfc(sqrt(stat / 2.0)), degenerate=False)


def chi_square_p(table: ContingencyTable) -> float:
    return chi_square_test(table).p_value


def p_value_weight(u):
    """Smooth odd weighting (e^(1-u) - e^(1+u)) / (e^(1-u) + e^(1+u)).

    Bounded in (-1, 1); algebraically equal to -tanh(u)."""
    u = np.asarray(u, dtype=float)
    a = np.exp(1.0 - u)
    b = np.exp(1.0 + u)
    out = (a - b) / (a + b)
    return float(out) if out.ndim == 0 else out


def bias_profile(cohort: Cohort, major_id: int, weight_mode: str = "as_written") -> BiasProfile:
    """Chi-square p-values for the four aspects of one major, plus their
    transformed weights.

    weight_mode 'as_written' applies the weighting to p directly; 'complement'
    applies it to 1 - p so that small p-values (strong bias evidence) get the
    larger absolute weight.
    """
    if weight_mode not in ("as_written", "complement"):
        raise ValidationError(f"unknown bias weight mode {weight_mode!r}")
    p_values = np.empty(len(ASPECTS))
    degenerate = []
    for j, aspect in enumerate(ASPECTS):
        result = chi_square_test(contingency_table(cohort, major_id, aspect))
        p_values[j] = result.p_value
        degenerate.append(result.degenerate)
    arg = p_values if weight_mode == "as_written" else 1.0 - p_values
    return BiasProfile(
        major_id=major_id,
        p_values=p_values,
        u=p_value_weight(arg),
        degenerate=tuple(degenerate),
    )


def bias_profiles(cohort: Cohort, weight_mode: str = "as_written") -> list[BiasProfile]:
    """Profiles for every major present in the cohort, ordered by major id."""
    return [bias_profile(cohort, m, weight_mode) for m in cohort.major_ids()]


def bias_report(cohort: Cohort, threshold: float = SIGNIFICANCE_THRESHOLD) -> dict:
    """JSON-ready per-major, per-aspect test summary."""
    report = {"threshold": threshold, "majors": {}}
    for major_id in cohort.major_ids():
        per_aspect = {}
        for aspect in ASPECTS:
            result = chi_square_test(contingency_table(cohort, major_id, aspect))
            per_aspect[aspect] = {
                "statistic": result.statistic,
                "p_value": result.p_value,
                "degenerate": result.degenerate,
                "significant": bool(result.p_value < threshold),
            }
        report["majors"][str(major_id)] = per_aspect
    return report


__all__ = [
    "SIGNIFICANCE_THRESHOLD",
    "BiasProfile",
    "ChiSquareResult",
    "ContingencyTable",
    "bias_profile",
    "bias_profiles",
    "bias_report",
    "chi_square_p",
    "chi_square_test",
    "contingency_table",
    "p_value_weight",
]
