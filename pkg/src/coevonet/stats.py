"""Nonparametric comparison statistics for per-run metric tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, rankdata


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class FriedmanResult:
    mean_ranks: np.ndarray
    statistic: float
    p_value: float
    rank_matrix: np.ndarray


def friedman_ranks(table, higher_is_better: bool = True) -> FriedmanResult:
    """Friedman two-way analysis by ranks over a runs x methods table.

    Rank 1 is the best method in a run (largest value when
    ``higher_is_better``); ties share averaged ranks. The statistic is
    chi-square approximated with k-1 degrees of freedom.
    """
    x = np.asarray(table, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise StatsError(f"need a runs x methods table with both >= 2, got {x.shape}")
    if not np.isfinite(x).all():
        raise StatsError("table contains non-finite entries")
    n, k = x.shape
    signed = -x if higher_is_better else x
    ranks = np.vstack([rankdata(row, method="average") for row in signed])
    mean_ranks = ranks.mean(axis=0)
    statistic = 12.0 * n / (k * (k + 1)) * float(((mean_ranks - (k + 1) / 2.0) ** 2).sum())
    p_value = float(chi2.sf(statistic, k - 1))
    return FriedmanResult(mean_ranks=mean_ranks, statistic=statistic,
                          p_value=p_value, rank_matrix=ranks)


@dataclass(frozen=True)
class HommelResult:
    adjusted: np.ndarray
    reject: np.ndarray
    alpha: float


def hommel_apv(p_values, alpha: float = 0.05) -> HommelResult:
    """Hommel step-up adjusted p-values for comparisons against a control.

    The control itself must not be in the list. Rejection flags are
    ``adjusted <= alpha``.
    """
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise StatsError("p-values must be a nonempty 1-D sequence")
    if np.any((p < 0) | (p > 1)) or not np.isfinite(p).all():
        raise StatsError("p-values must lie in [0, 1]")
    n = p.size
    order = np.argsort(p, kind="stable")
    ps = p[order]
    if n == 1:
        adjusted = p.copy()
        return HommelResult(adjusted, adjusted <= alpha, alpha)
    idx = np.arange(1, n + 1)
    q = np.full(n, (n * ps / idx).min())
    pa = q.copy()
    for m in range(n - 1, 1, -1):
        i_upper = np.arange(n - m + 1, n)          # 0-based tail indices
        q1 = (m * ps[i_upper] / np.arange(2, m + 1)).min()
        i_lower = np.arange(0, n - m + 1)
        q[i_lower] = np.minimum(m * ps[i_lower], q1)
        q[i_upper] = q[n - m]
        pa = np.maximum(pa, q)
    adjusted_sorted = np.maximum(pa, ps)
    adjusted = np.empty(n)
    adjusted[order] = np.minimum(adjusted_sorted, 1.0)
    return HommelResult(adjusted=adjusted, reject=adjusted <= alpha, alpha=alpha)
