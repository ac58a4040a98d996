"""Session-level evaluation: success rate by turn, average turns, paired test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import ContractViolation, MetricsError, UndefinedTestError


@dataclass(frozen=True)
class MetricsReport:
    """Aggregate outcome of one policy run: SR@t for t = 1..T and average turns."""

    policy: str
    seed: int
    n_sessions: int
    sr_at: tuple[float, ...]
    at: float

    def __post_init__(self) -> None:
        prev = 0.0
        for v in self.sr_at:
            if not 0.0 <= v <= 1.0 or v < prev:
                raise MetricsError("SR@t must be non-decreasing within [0, 1]")
            prev = v
        if not 1.0 <= self.at <= len(self.sr_at):
            raise MetricsError("average turns must lie in [1, T]")


@dataclass(frozen=True)
class ComparisonResult:
    policy_a: str
    policy_b: str
    mean_diff_at: float
    p_value: float
    n: int


def compute_metrics(
    results: Sequence,
    T: int,
    policy: str = "",
    seed: int = 0,
) -> MetricsReport:
    """SR@t is the fraction of sessions succeeding by turn t; the average turn
    counts every failure as T."""
    if not results:
        raise MetricsError("no sessions to aggregate")
    n = len(results)
    sr = tuple(
        sum(1 for r in results if r.success and r.end_turn <= t) / n
        for t in range(1, T + 1)
    )
    turns = [r.end_turn if r.success else T for r in results]
    return MetricsReport(policy=policy, seed=seed, n_sessions=n, sr_at=sr, at=float(np.mean(turns)))


def t_sf(t_value: float, df: int) -> float:
    """Upper-tail probability of the t distribution (survival function)."""
    return float(stats.t.sf(t_value, df=df))


def paired_test(
    turns_a: Sequence[float],
    turns_b: Sequence[float],
    policy_a: str = "a",
    policy_b: str = "b",
) -> ComparisonResult:
    """Paired t-test on per-session turn differences (two-sided).

    Zero-variance differences are degenerate for the t statistic; they are
    mapped to p = 1 when the mean difference is zero (identical lists) and to
    p = 0 otherwise (a constant non-zero shift), rather than raised as errors.
    """
    if len(turns_a) != len(turns_b):
        raise ContractViolation("paired lists must have equal length")
    n = len(turns_a)
    if n < 2:
        raise UndefinedTestError("need at least 2 paired sessions")
    diffs = np.asarray(turns_a, dtype=np.float64) - np.asarray(turns_b, dtype=np.float64)
    mean = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    if sd == 0.0:
        p = 1.0 if mean == 0.0 else 0.0
    else:
        t_stat = mean / (sd / math.sqrt(n))
        p = 2.0 * t_sf(abs(t_stat), df=n - 1)
    return ComparisonResult(policy_a, policy_b, mean_diff_at=mean, p_value=p, n=n)
