"""
Analytics over transition matrices: transition paths, matrix powers,
transition trend (L, R, Q), transition entropy per category and per size
group, and the Chapman-Kolmogorov consistency check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import entr

from .errors import NumericError, ValidationError
from .estimator import MarginalDistribution, TransitionMatrix

logger = logging.getLogger(__name__)

DEFAULT_GROUPING: Dict[str, Tuple[int, ...]] = {
    "small": (1, 2, 3),
    "medium": (4, 5, 6),
    "large": (7, 8, 9, 10, 11, 12),
}

TREND_WEIGHTS = ("dest", "origin")


@dataclass(frozen=True)
class TrendPoint:
    end_year: int
    L: float
    R: float
    Q: Optional[float]  # None when R == 0


@dataclass(frozen=True)
class EntropyTable:
    end_year: int
    values: Tuple[Optional[float], ...]  # nats; None for undefined states
    undefined: FrozenSet[int] = frozenset()

    def value(self, state: int) -> Optional[float]:
        return self.values[state]


@dataclass(frozen=True)
class GroupEntropy:
    end_year: int
    small: Optional[float]
    medium: Optional[float]
    large: Optional[float]


@dataclass(frozen=True, eq=False)
class CKReport:
    """Outcome of comparing second·first against a directly estimated two-step matrix."""
    origin_year: int
    dest_year: int
    product: np.ndarray = field(repr=False)
    direct: np.ndarray = field(repr=False)
    deviations: np.ndarray = field(repr=False)  # NaN in excluded columns
    max_deviation: float
    worst_entry: Optional[Tuple[int, int]]  # (row j, column i)
    tolerance: float
    passed: bool
    excluded_columns: Tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "origin_year": self.origin_year,
            "dest_year": self.dest_year,
            "max_deviation": self.max_deviation,
            "worst_entry": None if self.worst_entry is None else
            {"row": self.worst_entry[0], "column": self.worst_entry[1]},
            "tolerance": self.tolerance,
            "passed": self.passed,
            "excluded_columns": list(self.excluded_columns),
            "deviations": [[None if np.isnan(v) else float(v) for v in row] for row in self.deviations],
        }


# ---------------------------------------------------------------------------
# paths and powers
# ---------------------------------------------------------------------------

def propagate_path(
    initial: MarginalDistribution,
    matrices: Sequence[TransitionMatrix],
) -> List[MarginalDistribution]:
    """P(d) = F(d-1, d) P(d-1), applied left to right; returns P(1)..P(D)."""
    if not matrices:
        return []
    if initial.year != matrices[0].origin_year:
        raise ValidationError(
            f"initial marginal is for {initial.year}, first matrix starts at {matrices[0].origin_year}"
        )
    for prev, nxt in zip(matrices, matrices[1:]):
        if prev.dest_year != nxt.origin_year:
            raise ValidationError(f"matrices are not contiguous: {prev.label} then {nxt.label}")

    p = initial.p
    path = []
    for matrix in matrices:
        if p.size != matrix.n_states:
            raise ValidationError(f"marginal has {p.size} states, {matrix.label} has {matrix.n_states}")
        for i in sorted(matrix.undefined_columns):
            if p[i] > 0:
                raise NumericError(
                    f"mass {p[i]:.6g} on undefined column {i} at year {matrix.origin_year} ({matrix.label})"
                )
        p = matrix.filled() @ p
        path.append(MarginalDistribution(matrix.dest_year, p))
    return path


def matrix_power(matrix: TransitionMatrix, d: int) -> np.ndarray:
    """F^d for a homogeneous chain."""
    if d < 1:
        raise ValidationError(f"power must be a positive integer, got {d}")
    if matrix.undefined_columns:
        raise NumericError(f"{matrix.label} has undefined columns {sorted(matrix.undefined_columns)}")
    return np.linalg.matrix_power(matrix.probs, d)


def compose(first: TransitionMatrix, second: TransitionMatrix) -> TransitionMatrix:
    """
    The ordered product second·first spanning (first.origin_year, second.dest_year).

    A column of the product is undefined when it is undefined in `first` or when
    `first` sends mass into a column that is undefined in `second`.
    """
    if first.dest_year != second.origin_year:
        raise ValidationError(f"cannot chain {first.label} with {second.label}")
    if first.n_states != second.n_states:
        raise ValidationError("cannot chain matrices with different state counts")
    # rounded published matrices can overshoot 1 by a few 1e-5
    product = np.clip(second.filled() @ first.filled(), 0.0, 1.0)
    undefined = set(first.undefined_columns)
    if second.undefined_columns:
        leaks = first.filled()[sorted(second.undefined_columns), :].sum(axis=0) > 0
        undefined.update(int(i) for i in np.flatnonzero(leaks))
    return TransitionMatrix(
        first.origin_year, second.dest_year, product, None, frozenset(undefined),
        source=f"product({second.source or second.label}, {first.source or first.label})",
    )


# ---------------------------------------------------------------------------
# trend
# ---------------------------------------------------------------------------

def transition_trend(
    matrix: TransitionMatrix,
    marginal: MarginalDistribution,
    weight: str = "dest",
    exclude_entry_exit: bool = False,
) -> TrendPoint:
    """
    L = sum_{j>i} f_ji w, R = sum_{j<i} f_ji w, Q = L / R.

    With weight='dest' the weight is p_j at dest_year (marginal must be for
    dest_year); with weight='origin' it is p_i at origin_year.
    """
    if weight not in TREND_WEIGHTS:
        raise ValidationError(f"trend weight must be one of {TREND_WEIGHTS}, got {weight!r}")
    expected = matrix.dest_year if weight == "dest" else matrix.origin_year
    if marginal.year != expected:
        raise ValidationError(
            f"{weight} weighting of {matrix.label} needs the {expected} marginal, got {marginal.year}"
        )
    if marginal.n_states != matrix.n_states:
        raise ValidationError("marginal and matrix disagree on the number of states")
    if matrix.undefined_columns:
        logger.warning("%s: trend skips undefined columns %s", matrix.label, sorted(matrix.undefined_columns))

    f = matrix.filled()
    if exclude_entry_exit:
        f[0, :] = 0.0
        f[:, 0] = 0.0
    weighted = f * (marginal.p[:, None] if weight == "dest" else marginal.p[None, :])
    L = float(np.tril(weighted, -1).sum())
    R = float(np.triu(weighted, 1).sum())
    Q = L / R if R > 0 else None
    return TrendPoint(matrix.dest_year, L, R, Q)


# ---------------------------------------------------------------------------
# entropy
# ---------------------------------------------------------------------------

def column_entropy(matrix: TransitionMatrix, state: int) -> float:
    """-sum_j f_ji ln f_ji over positive entries of column `state` (nats)."""
    return float(entr(matrix.column(state)).sum())


def entropy_table(matrix: TransitionMatrix) -> EntropyTable:
    if matrix.undefined_columns:
        logger.warning("%s: entropy skips undefined columns %s", matrix.label, sorted(matrix.undefined_columns))
    values = tuple(
        None if i in matrix.undefined_columns else column_entropy(matrix, i)
        for i in range(matrix.n_states)
    )
    return EntropyTable(matrix.dest_year, values, matrix.undefined_columns)


def _check_grouping(grouping: Mapping[str, Sequence[int]], n_states: int) -> None:
    if set(grouping) != set(DEFAULT_GROUPING):
        raise ValidationError(f"grouping must name exactly {sorted(DEFAULT_GROUPING)}")
    seen: List[int] = []
    for states in grouping.values():
        seen.extend(states)
    if sorted(seen) != list(range(1, n_states)):
        raise ValidationError(f"grouping must cover states 1..{n_states - 1} exactly once")


def group_entropy(
    table: EntropyTable,
    grouping: Optional[Mapping[str, Sequence[int]]] = None,
) -> GroupEntropy:
    """Unweighted mean of the defined entropies in each group; None when a group has none."""
    grouping = grouping or DEFAULT_GROUPING
    _check_grouping(grouping, len(table.values))

    def mean(states: Sequence[int]) -> Optional[float]:
        vals = [table.values[s] for s in states if table.values[s] is not None]
        return float(np.mean(vals)) if vals else None

    return GroupEntropy(
        table.end_year,
        mean(grouping["small"]),
        mean(grouping["medium"]),
        mean(grouping["large"]),
    )


def average_entropy(tables: Sequence[EntropyTable]) -> Tuple[Optional[float], ...]:
    """Per-category mean across years, skipping undefined entries."""
    if not tables:
        raise ValidationError("no entropy tables to average")
    n = len(tables[0].values)
    out = []
    for state in range(n):
        vals = [t.values[state] for t in tables if t.values[state] is not None]
        out.append(float(np.mean(vals)) if vals else None)
    return tuple(out)


def diagonal_dominance(matrix: TransitionMatrix, exclude_state0: bool = True) -> List[int]:
    """Origin states i with f_ii >= f_ji for every j != i."""
    start = 1 if exclude_state0 else 0
    block = matrix.probs[start:, start:]
    out = []
    for k, i in enumerate(range(start, matrix.n_states)):
        if i in matrix.undefined_columns:
            continue
        col = block[:, k]
        if np.all(col[k] >= np.delete(col, k)):
            out.append(i)
    return out


# ---------------------------------------------------------------------------
# Chapman-Kolmogorov
# ---------------------------------------------------------------------------

def chapman_kolmogorov_check(
    first: TransitionMatrix,
    second: TransitionMatrix,
    direct: TransitionMatrix,
    tolerance: float = 2e-3,
) -> CKReport:
    """
    Compare F(y+1, y+2)·F(y, y+1) with the directly estimated F(y, y+2).

    Columns undefined in either side are excluded and listed.
    """
    if tolerance <= 0:
        raise ValidationError(f"tolerance must be positive, got {tolerance}")
    if (first.origin_year, second.dest_year) != (direct.origin_year, direct.dest_year):
        raise ValidationError(
            f"product {first.origin_year}->{second.dest_year} does not match direct {direct.label}"
        )
    if direct.n_states != first.n_states:
        raise ValidationError("direct matrix has a different number of states")
    product = compose(first, second)

    excluded = tuple(sorted(product.undefined_columns | direct.undefined_columns))
    deviations = np.abs(product.probs - direct.probs)
    deviations[:, list(excluded)] = np.nan

    compared = not np.all(np.isnan(deviations))
    if compared:
        flat = int(np.nanargmax(deviations))
        worst = divmod(flat, direct.n_states)
        max_dev = float(deviations[worst])
    else:
        logger.warning("%d->%d: every column is undefined, nothing to compare",
                       first.origin_year, second.dest_year)
        max_dev, worst = 0.0, None
    return CKReport(
        first.origin_year,
        second.dest_year,
        product.probs,
        direct.probs,
        deviations,
        max_dev,
        worst,
        tolerance,
        compared and max_dev <= tolerance,
        excluded,
    )
