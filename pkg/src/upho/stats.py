"""Feature screening and preprocessing.

Spearman rank correlation, variance-inflation-factor multicollinearity
screening, standardization, and reproducible train/test and k-fold splits.

Splits use splitmix64, a tiny portable generator, so a given seed produces
bit-identical partitions on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantColumn,
    ConstantInput,
    InsufficientRows,
    KTooLarge,
    LengthMismatch,
    SingularDesign,
    TooFewRows,
)
from .tabledata import FeatureTable

MASK64 = (1 << 64) - 1


class SplitMix64:
    """splitmix64 PRNG (Steele, Lea, Flood 2014). 64-bit state, 64-bit output."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by next_u64."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class CorrelationReport:
    target: str
    rho: dict[str, float]


@dataclass(frozen=True)
class VifReport:
    vif: dict[str, float]
    threshold: float
    removed: tuple[str, ...]
    trace: tuple[dict[str, float], ...] = ()  # per-round VIFs for the filter


@dataclass(frozen=True)
class StandardizationParams:
    columns: tuple[str, ...]
    mu: tuple[float, ...]
    sigma: tuple[float, ...]  # sample standard deviation, n-1 denominator

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - np.array(self.mu)) / np.array(self.sigma)

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) * np.array(self.sigma) + np.array(self.mu)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.85
    k: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.k < 2:
            raise ValueError("k must be at least 2")


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank span."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=float)
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0.0:
        raise ConstantInput("correlation undefined for constant input")
    r = float(da @ db) / denom
    return max(-1.0, min(1.0, r))


def spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 3:
        raise LengthMismatch("inputs must be equal-length vectors with at least 3 entries")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ConstantInput("spearman undefined for constant input")
    return _pearson(average_ranks(x), average_ranks(y))


def _ols_r2(y: np.ndarray, design: np.ndarray) -> float:
    """R-squared of a least-squares fit of y on design (intercept included)."""
    a = np.column_stack([np.ones(len(y)), design])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0.0:
        raise ConstantInput("target column is constant")
    return 1.0 - float((resid**2).sum()) / sst


def vif(table: FeatureTable, candidates: list[str], threshold: float = 10.0) -> VifReport:
    """Variance inflation factor per candidate column (single pass).

    VIF_j = 1 / (1 - R²_j) where R²_j comes from regressing column j on the
    remaining candidates with an intercept. Columns exceeding the threshold
    are flagged in ``removed``.
    """
    if len(candidates) < 2:
        raise ValueError("need at least 2 candidate columns")
    n = len(table.rows)
    if n <= len(candidates):
        raise InsufficientRows(f"{n} rows cannot support {len(candidates)} columns")
    cols = {c: np.array(table.column(c), dtype=float) for c in candidates}
    out: dict[str, float] = {}
    for j in candidates:
        others = np.column_stack([cols[c] for c in candidates if c != j])
        r2 = _ols_r2(cols[j], others)
        if r2 >= 1.0 - 1e-12:
            raise SingularDesign(f"column {j!r} is an exact combination of the others")
        out[j] = 1.0 / (1.0 - r2)
    removed = tuple(c for c in candidates if out[c] > threshold)
    return VifReport(vif=out, threshold=threshold, removed=removed, trace=(dict(out),))


def vif_filter(table: FeatureTable, candidates: list[str], threshold: float = 10.0) -> VifReport:
    """Iterative multicollinearity filter.

    Removes the single worst column above the threshold, recomputes, and
    repeats until all remaining columns pass. The trace keeps each round's
    VIFs so the screening is auditable.
    """
    remaining = list(candidates)
    removed: list[str] = []
    trace: list[dict[str, float]] = []
    while True:
        report = vif(table, remaining, threshold)
        trace.append(dict(report.vif))
        worst = max(remaining, key=lambda c: report.vif[c])
        if report.vif[worst] <= threshold:
            return VifReport(
                vif=report.vif,
                threshold=threshold,
                removed=tuple(removed),
                trace=tuple(trace),
            )
        removed.append(worst)
        remaining.remove(worst)
        if len(remaining) < 2:
            return VifReport(
                vif={c: 1.0 for c in remaining},
                threshold=threshold,
                removed=tuple(removed),
                trace=tuple(trace),
            )


def standardize(table: FeatureTable) -> tuple[FeatureTable, StandardizationParams]:
    """Center each column to mean 0 and scale to sample sd 1."""
    matrix = np.array([values for _, values in table.rows], dtype=float)
    names = table.column_names
    for i, name in enumerate(names):
        if np.ptp(matrix[:, i]) == 0:
            raise ConstantColumn(f"column {name!r} is constant")
    mu = matrix.mean(axis=0)
    sigma = matrix.std(axis=0, ddof=1)
    scaled = (matrix - mu) / sigma
    rows = tuple(
        (unit, tuple(float(v) for v in scaled[i]))
        for i, (unit, _) in enumerate(table.rows)
    )
    params = StandardizationParams(
        columns=names, mu=tuple(float(m) for m in mu), sigma=tuple(float(s) for s in sigma)
    )
    out = FeatureTable(
        level=table.level, rows=rows, bindings=table.bindings, provenance=table.provenance
    )
    return out, params


def split(table: FeatureTable, spec: SplitSpec) -> tuple[FeatureTable, FeatureTable]:
    """Deterministic train/test split.

    Train size is round(train_fraction * n) with halves rounded away from
    zero. Membership is random under the seed; both parts keep the original
    row order.
    """
    n = len(table.rows)
    if n < 10:
        raise TooFewRows(f"need at least 10 rows to split, have {n}")
    n_train = int(math.floor(spec.train_fraction * n + 0.5))
    indices = list(range(n))
    SplitMix64(spec.seed).shuffle(indices)
    train_idx = sorted(indices[:n_train])
    test_idx = sorted(indices[n_train:])
    return table.select_rows(train_idx), table.select_rows(test_idx)


def kfold(table_or_n, k: int, seed: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Deterministic k-fold assignment: list of (fit_indices, val_indices).

    Validation sets partition the rows; sizes differ by at most one.
    """
    n = table_or_n if isinstance(table_or_n, int) else len(table_or_n.rows)
    if k > n:
        raise KTooLarge(f"k={k} exceeds row count {n}")
    indices = list(range(n))
    SplitMix64(seed).shuffle(indices)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        val = sorted(indices[start : start + size])
        fit = sorted(set(range(n)) - set(val))
        folds.append((tuple(fit), tuple(val)))
        start += size
    return folds
