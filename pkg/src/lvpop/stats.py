"""Interval estimates and chi-square tests for absorbing-state frequencies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, norm

MIN_EXPECTED = 5.0


def wilson_interval(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    center = (p + z^2/2n) / (1 + z^2/n),
    half   = z sqrt(p(1-p)/n + z^2/4n^2) / (1 + z^2/n).
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 <= successes <= n:
        raise ValueError("successes must lie in [0, n]")
    z = float(norm.ppf(0.5 + level / 2.0))
    p = successes / n
    z2 = z * z
    den = 1.0 + z2 / n
    center = (p + z2 / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / den
    return max(0.0, center - half), min(1.0, center + half)


def intervals_overlap(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


@dataclass(frozen=True)
class ChiSquare:
    statistic: float
    dof: int
    pvalue: float
    n_cells: int  # categories after pooling


def _pool(expected_weight: np.ndarray, min_expected: float) -> list[np.ndarray]:
    """Group category indices so each group's expected count reaches ``min_expected``.

    Categories are sorted by expectation; the small ones are merged into one
    pooled cell, which is then folded into the smallest adequate cell if it is
    still too small.
    """
    order = np.argsort(expected_weight)
    groups: list[list[int]] = []
    pool: list[int] = []
    acc = 0.0
    for i in order:
        if expected_weight[i] <= 0:
            continue
        if expected_weight[i] >= min_expected:
            groups.append([int(i)])
        else:
            pool.append(int(i))
            acc += expected_weight[i]
    if pool:
        if acc >= min_expected or not groups:
            groups.append(pool)
        else:
            groups[0].extend(pool)
    return [np.array(g) for g in groups]


def chi_square_gof(observed, expected_probs, min_expected: float = MIN_EXPECTED) -> ChiSquare:
    """Goodness of fit of counts against probabilities, pooling sparse cells."""
    obs = np.asarray(observed, dtype=float)
    p = np.asarray(expected_probs, dtype=float)
    if obs.shape != p.shape:
        raise ValueError("observed and expected must have the same shape")
    N = obs.sum()
    exp = p / p.sum() * N
    if np.any(obs[exp <= 0] > 0):
        return ChiSquare(float("inf"), 0, 0.0, 0)
    groups = _pool(exp, min_expected)
    o = np.array([obs[g].sum() for g in groups])
    e = np.array([exp[g].sum() for g in groups])
    dof = len(groups) - 1
    if dof <= 0:
        return ChiSquare(0.0, 0, 1.0, len(groups))
    stat = float(((o - e) ** 2 / e).sum())
    return ChiSquare(stat, dof, float(chi2.sf(stat, dof)), len(groups))


def chi_square_homogeneity(table, min_expected: float = MIN_EXPECTED) -> ChiSquare:
    """Pearson test that the rows of a contingency table share one distribution.

    Columns with small expected counts are pooled (on the column marginals).
    """
    T = np.asarray(table, dtype=float)
    if T.ndim != 2 or T.shape[0] < 2:
        raise ValueError("need a 2-D table with at least two rows")
    T = T[T.sum(axis=1) > 0]
    if T.shape[0] < 2:
        return ChiSquare(0.0, 0, 1.0, 0)
    rows = T.sum(axis=1)
    cols = T.sum(axis=0)
    N = rows.sum()
    min_row_share = rows.min() / N
    groups = _pool(cols * min_row_share, min_expected)
    P = np.stack([T[:, g].sum(axis=1) for g in groups], axis=1)
    if P.shape[1] < 2:
        return ChiSquare(0.0, 0, 1.0, P.shape[1])
    E = np.outer(rows, P.sum(axis=0)) / N
    stat = float(((P - E) ** 2 / E).sum())
    dof = (P.shape[0] - 1) * (P.shape[1] - 1)
    return ChiSquare(stat, dof, float(chi2.sf(stat, dof)), P.shape[1])


def counts_table(samples_a, samples_b) -> np.ndarray:
    """2 x m contingency table of two samples of hashable outcomes."""
    keys = sorted(set(samples_a) | set(samples_b))
    idx = {k: i for i, k in enumerate(keys)}
    T = np.zeros((2, len(keys)))
    for s in samples_a:
        T[0, idx[s]] += 1
    for s in samples_b:
        T[1, idx[s]] += 1
    return T


def rows_table(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Contingency table of two arrays of integer vectors (one vector per row)."""
    a = np.ascontiguousarray(a)
    b = np.ascontiguousarray(b)
    both = np.concatenate([a, b])
    _, inv = np.unique(both, axis=0, return_inverse=True)
    inv = inv.ravel()
    m = inv.max() + 1
    T = np.zeros((2, m))
    np.add.at(T[0], inv[:len(a)], 1)
    np.add.at(T[1], inv[len(a):], 1)
    return T
