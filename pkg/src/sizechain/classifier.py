"""
Size categories.

A CategoryScheme holds boundaries b_0 = 0 < b_1 < ... < b_{K-1} and yields
K + 1 states. State 0 is non-existence (size 0). A positive size s falls in
state k when b_{k-1} <= s < b_k (half-open, lower bound inclusive); sizes at
or above b_{K-1} fall in the top state K.
"""

from __future__ import annotations

import bisect
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence, Tuple

import numpy as np

from .errors import InputError, ValidationError
from .panel import RectangularPanel

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


DEFAULT_BOUNDARIES = (0, 20, 50, 100, 250, 500, 1000, 2500, 5000, 10000, 25000, 50000)


@dataclass(frozen=True)
class CategoryScheme:
    boundaries: Tuple[float, ...]

    def __post_init__(self):
        b = tuple(float(x) for x in self.boundaries)
        if not b:
            raise ValidationError("a category scheme needs at least one boundary")
        if b[0] != 0:
            raise ValidationError(f"first boundary must be 0, got {b[0]}")
        if not all(math.isfinite(x) for x in b):
            raise ValidationError("boundaries must be finite")
        for prev, cur in zip(b, b[1:]):
            if cur <= prev:
                raise ValidationError(f"boundaries must be strictly increasing ({prev} then {cur})")
        object.__setattr__(self, "boundaries", b)

    @property
    def n_states(self) -> int:
        return len(self.boundaries) + 1

    @property
    def top_state(self) -> int:
        return len(self.boundaries)

    def interval(self, state: int) -> Tuple[float, float]:
        """[lo, hi) of sizes mapping to `state`; hi is inf for the top state, (0, 0) for state 0."""
        if not 0 <= state <= self.top_state:
            raise ValidationError(f"state {state} outside 0..{self.top_state}")
        if state == 0:
            return (0.0, 0.0)
        lo = self.boundaries[state - 1]
        hi = self.boundaries[state] if state < self.top_state else math.inf
        return (lo, hi)


def default_scheme() -> CategoryScheme:
    """The 13-state scheme (states 0..12)."""
    return CategoryScheme(DEFAULT_BOUNDARIES)


def load_scheme(path: Any) -> CategoryScheme:
    """Read a TOML file with a `boundaries = [...]` key."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except FileNotFoundError:
        raise InputError(f"scheme file '{path}' not found")
    except tomllib.TOMLDecodeError as e:
        raise InputError(f"scheme file '{path}' is not valid TOML: {e}") from e

    if "boundaries" not in doc:
        raise ValidationError(f"scheme file '{path}' has no 'boundaries' key")
    bounds = doc["boundaries"]
    if not isinstance(bounds, list) or not all(isinstance(x, (int, float)) for x in bounds):
        raise ValidationError(f"'boundaries' in '{path}' must be a list of numbers")
    return CategoryScheme(tuple(bounds))


def classify(size: float, scheme: CategoryScheme) -> int:
    if math.isnan(size) or size < 0:
        raise ValidationError(f"cannot classify size {size}: sizes must be >= 0")
    if size == 0:
        return 0
    return bisect.bisect_right(scheme.boundaries, size)


def classify_sizes(sizes: np.ndarray, scheme: CategoryScheme) -> np.ndarray:
    """Vectorized `classify` over an array of any shape."""
    sizes = np.asarray(sizes, dtype=np.float64)
    if np.any(np.isnan(sizes)) or np.any(sizes < 0):
        raise ValidationError("cannot classify negative or NaN sizes")
    states = np.searchsorted(np.asarray(scheme.boundaries), sizes, side="right")
    states[sizes == 0] = 0
    return states.astype(np.int16)


@dataclass(frozen=True, eq=False)
class StateGrid:
    """Entity x year grid of states, row order matching the panel it came from."""
    entities: Tuple[str, ...]
    start_year: int
    end_year: int
    states: np.ndarray = field(repr=False)
    n_states: int = 13

    def __post_init__(self):
        states = np.array(self.states, dtype=np.int16)
        object.__setattr__(self, "entities", tuple(self.entities))
        expected = (len(self.entities), self.end_year - self.start_year + 1)
        if states.shape != expected:
            raise ValidationError(f"states have shape {states.shape}, expected {expected}")
        if states.size and (states.min() < 0 or states.max() >= self.n_states):
            raise ValidationError(f"states must lie in 0..{self.n_states - 1}")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def years(self) -> range:
        return range(self.start_year, self.end_year + 1)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    def year_index(self, year: int) -> int:
        if not self.start_year <= year <= self.end_year:
            raise ValidationError(f"year {year} outside grid range {self.start_year}:{self.end_year}")
        return year - self.start_year

    def column(self, year: int) -> np.ndarray:
        return self.states[:, self.year_index(year)]

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, StateGrid):
            return NotImplemented
        return (
            self.entities == other.entities
            and self.start_year == other.start_year
            and self.end_year == other.end_year
            and self.n_states == other.n_states
            and np.array_equal(self.states, other.states)
        )

    __hash__ = None


def classify_panel(panel: RectangularPanel, scheme: CategoryScheme) -> StateGrid:
    return StateGrid(
        panel.entities,
        panel.start_year,
        panel.end_year,
        classify_sizes(panel.cells, scheme),
        scheme.n_states,
    )
