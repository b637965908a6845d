"""
Relative-frequency estimation of transition matrices from a state grid.

Matrices are column-stochastic: probs[j, i] is the probability of being in
state j at dest_year given state i at origin_year. Columns with no occupant
at origin_year are undefined: they are flagged and hold NaN.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence

import numpy as np

from .classifier import StateGrid
from .errors import NumericError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """
    Transition matrix for one (origin_year, dest_year) pair.

    Attributes:
        origin_year, dest_year: the pair; step = dest_year - origin_year >= 1
        probs: (n, n) float array, probs[j, i] = f_ji; NaN in undefined columns
        counts: (n, n) int array, counts[j, i] = entities moving i -> j;
                None when the matrix comes from published probabilities
        undefined_columns: origin states with no occupant
        source: free-form label (e.g. a file name or 'estimated')
    """
    origin_year: int
    dest_year: int
    probs: np.ndarray = field(repr=False)
    counts: Optional[np.ndarray] = field(default=None, repr=False)
    undefined_columns: FrozenSet[int] = frozenset()
    source: str = ""

    def __post_init__(self):
        if self.dest_year <= self.origin_year:
            raise ValidationError(
                f"dest_year {self.dest_year} must be after origin_year {self.origin_year}"
            )
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
            raise ValidationError(f"transition matrix must be square, got shape {probs.shape}")
        n = probs.shape[0]
        undefined = frozenset(int(i) for i in self.undefined_columns)
        if any(not 0 <= i < n for i in undefined):
            raise ValidationError(f"undefined column index outside 0..{n - 1}")
        probs[:, sorted(undefined)] = np.nan

        defined = [i for i in range(n) if i not in undefined]
        block = probs[:, defined]
        if np.any(np.isnan(block)):
            raise ValidationError("defined columns must not contain missing values")
        if np.any(block < 0) or np.any(block > 1):
            raise ValidationError("probabilities must lie in [0, 1]")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "undefined_columns", undefined)

        if self.counts is not None:
            counts = np.array(self.counts, dtype=np.int64)
            if counts.shape != probs.shape:
                raise ValidationError(f"counts shape {counts.shape} differs from probs shape {probs.shape}")
            if np.any(counts < 0):
                raise ValidationError("counts must be non-negative")
            counts.setflags(write=False)
            object.__setattr__(self, "counts", counts)

    # --- construction --------------------------------------------------------

    @classmethod
    def from_counts(cls, counts: np.ndarray, origin_year: int, dest_year: int, source: str = "estimated"):
        counts = np.asarray(counts, dtype=np.int64)
        totals = counts.sum(axis=0)
        probs = np.full(counts.shape, np.nan)
        np.divide(counts, totals, out=probs, where=totals > 0)
        undefined = frozenset(int(i) for i in np.flatnonzero(totals == 0))
        return cls(origin_year, dest_year, probs, counts, undefined, source)

    @classmethod
    def from_probabilities(cls, probs: np.ndarray, origin_year: int, dest_year: int, source: str = ""):
        """Columns that are entirely missing (NaN) or entirely zero become undefined."""
        probs = np.asarray(probs, dtype=np.float64)
        blank = np.all(np.isnan(probs), axis=0) | (np.nansum(probs, axis=0) == 0)
        undefined = frozenset(int(i) for i in np.flatnonzero(blank))
        return cls(origin_year, dest_year, probs, None, undefined, source)

    # --- queries -------------------------------------------------------------

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def step(self) -> int:
        return self.dest_year - self.origin_year

    @property
    def label(self) -> str:
        return f"{self.origin_year}->{self.dest_year}"

    @property
    def defined_columns(self) -> List[int]:
        return [i for i in range(self.n_states) if i not in self.undefined_columns]

    @property
    def total_count(self) -> Optional[int]:
        return None if self.counts is None else int(self.counts.sum())

    def column(self, state: int) -> np.ndarray:
        if not 0 <= state < self.n_states:
            raise ValidationError(f"state {state} outside 0..{self.n_states - 1}")
        if state in self.undefined_columns:
            raise NumericError(f"column {state} of {self.label} is undefined (no occupants at {self.origin_year})")
        return self.probs[:, state]

    def filled(self) -> np.ndarray:
        """Probabilities with undefined columns zeroed, for matrix algebra."""
        return np.nan_to_num(self.probs, nan=0.0)

    def column_sums(self) -> np.ndarray:
        """Column sums; NaN for undefined columns."""
        return self.probs.sum(axis=0)


@dataclass(frozen=True, eq=False)
class MarginalDistribution:
    """p[j] = share of entities in state j at `year` (state 0 included)."""
    year: int
    p: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64)
        if p.ndim != 1:
            raise ValidationError("a marginal distribution is a vector")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValidationError("marginal probabilities must be finite and non-negative")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n_states(self) -> int:
        return self.p.size

    @property
    def total(self) -> float:
        return float(self.p.sum())

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.total - 1.0) <= tol


# ---------------------------------------------------------------------------
# counting
# ---------------------------------------------------------------------------

def _pair_indices(states: StateGrid, origin_year: int, dest_year: int):
    if dest_year <= origin_year:
        raise ValidationError(f"dest_year {dest_year} must be after origin_year {origin_year}")
    return states.year_index(origin_year), states.year_index(dest_year)


def _present_in(states: StateGrid, lo: int, hi: int) -> np.ndarray:
    return np.any(states.states[:, lo:hi + 1] > 0, axis=1)


def _tally(origin: np.ndarray, dest: np.ndarray, n: int) -> np.ndarray:
    flat = np.bincount(dest.astype(np.int64) * n + origin.astype(np.int64), minlength=n * n)
    return flat.reshape(n, n)


def count_transitions(states: StateGrid, origin_year: int, dest_year: int) -> TransitionMatrix:
    """
    Estimate F(origin_year, dest_year) from the two endpoint cross sections.

    Entities absent throughout [origin_year, dest_year] are left out, so f_00 is
    always 0 for consecutive years. Over a gap, an entity present only in
    between counts as 0 -> 0.
    """
    lo, hi = _pair_indices(states, origin_year, dest_year)
    keep = _present_in(states, lo, hi)
    counts = _tally(states.states[keep, lo], states.states[keep, hi], states.n_states)
    matrix = TransitionMatrix.from_counts(counts, origin_year, dest_year)
    if matrix.undefined_columns:
        logger.debug("%s: undefined columns %s", matrix.label, sorted(matrix.undefined_columns))
    return matrix


def count_transitions_window(states: StateGrid, origin_year: int, dest_year: int) -> TransitionMatrix:
    """
    Estimate a multi-year matrix over a strongly balanced window.

    An entity present in any year of [origin_year, dest_year] is counted; one that
    is absent at both endpoints but present in between contributes a 0 -> 0 count.
    """
    lo, hi = _pair_indices(states, origin_year, dest_year)
    if hi - lo < 2:
        raise ValidationError(
            f"window {origin_year}:{dest_year} spans fewer than 2 steps; use count_transitions"
        )
    keep = _present_in(states, lo, hi)
    counts = _tally(states.states[keep, lo], states.states[keep, hi], states.n_states)
    return TransitionMatrix.from_counts(counts, origin_year, dest_year, source="estimated-window")


def estimate_first_order_chain(states: StateGrid) -> List[TransitionMatrix]:
    """One matrix per consecutive year pair, in chronological order."""
    years = states.years
    if len(years) < 2:
        raise ValidationError(f"need at least 2 years to estimate transitions, grid spans {len(years)}")
    return [count_transitions(states, y, y + 1) for y in years[:-1]]


def merge_counts(parts: Sequence[TransitionMatrix]) -> TransitionMatrix:
    """Pool matrices counted on disjoint entity partitions of the same year pair."""
    if not parts:
        raise ValidationError("nothing to merge")
    first = parts[0]
    for part in parts:
        if part.counts is None:
            raise ValidationError(f"matrix {part.label} ({part.source}) carries no counts")
        if (part.origin_year, part.dest_year) != (first.origin_year, first.dest_year):
            raise ValidationError(f"cannot merge {part.label} into {first.label}")
        if part.n_states != first.n_states:
            raise ValidationError("cannot merge matrices with different state counts")
    total = np.sum([p.counts for p in parts], axis=0)
    return TransitionMatrix.from_counts(total, first.origin_year, first.dest_year, first.source)


def empirical_marginal(states: StateGrid, year: int) -> MarginalDistribution:
    """Share of all grid entities in each state at `year`."""
    col = states.column(year)
    if states.n_entities == 0:
        raise NumericError("cannot compute a marginal over an empty grid")
    p = np.bincount(col.astype(np.int64), minlength=states.n_states) / states.n_entities
    return MarginalDistribution(year, p)
