"""
Panel model: raw entity-year-size observations and the balanced panel.

Raw observations come in as a delimited table (header row, one row per
entity-year). Rectangularization turns the unbalanced set into a strongly
balanced grid over a contiguous year range, filling every absent entity-year
with size 0, which downstream code reads as "entity does not exist that year".

Usage:
    from sizechain.panel import ingest_panel, rectangularize, summarize

    records = ingest_panel("firms.csv")
    panel = rectangularize(records, years=(1998, 2013))
    print(summarize(panel))
"""

from __future__ import annotations

import logging
import os
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import InputError, NumericError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PanelRecord:
    """One observation: `size` employees at `entity_id` in `year` (size > 0 for raw input)."""
    entity_id: str
    year: int
    size: float


@dataclass(frozen=True)
class ColumnMapping:
    """Which header names carry the entity, year and size fields."""
    entity: str = "entity_id"
    year: str = "year"
    size: str = "size"

    @property
    def columns(self) -> Tuple[str, str, str]:
        return (self.entity, self.year, self.size)


@dataclass(frozen=True, eq=False)
class RectangularPanel:
    """
    Strongly balanced panel: one cell per (entity, year) over [start_year, end_year].

    Attributes:
        entities: ordered entity ids (row order of `cells`)
        start_year, end_year: inclusive year range
        cells: float array, shape (len(entities), n_years); 0 marks absence
    """
    entities: Tuple[str, ...]
    start_year: int
    end_year: int
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.float64)
        object.__setattr__(self, "entities", tuple(self.entities))
        if self.end_year < self.start_year:
            raise ValidationError(f"empty year range {self.start_year}:{self.end_year}")
        expected = (len(self.entities), self.end_year - self.start_year + 1)
        if cells.shape != expected:
            raise ValidationError(f"cells have shape {cells.shape}, expected {expected}")
        if len(set(self.entities)) != len(self.entities):
            raise ValidationError("entity ids must be unique within a panel")
        if not np.all(np.isfinite(cells)) or np.any(cells < 0):
            raise ValidationError("panel cells must be finite and non-negative")
        empty = np.flatnonzero(~np.any(cells > 0, axis=1))
        if empty.size:
            raise ValidationError(
                f"entity {self.entities[empty[0]]!r} has no nonzero cell in "
                f"{self.start_year}:{self.end_year}"
            )
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def years(self) -> range:
        return range(self.start_year, self.end_year + 1)

    @property
    def n_cells(self) -> int:
        return self.cells.size

    def year_index(self, year: int) -> int:
        if not self.start_year <= year <= self.end_year:
            raise ValidationError(f"year {year} outside panel range {self.start_year}:{self.end_year}")
        return year - self.start_year

    def to_records(self) -> List[PanelRecord]:
        """Nonzero cells as records, entity-major order."""
        rows, cols = np.nonzero(self.cells)
        return [
            PanelRecord(self.entities[r], self.start_year + int(c), float(self.cells[r, c]))
            for r, c in zip(rows, cols)
        ]

    def window(self, start: int, end: int) -> "RectangularPanel":
        """Sub-panel over [start, end]; entities absent from the whole window are dropped."""
        lo, hi = self.year_index(start), self.year_index(end)
        if hi < lo:
            raise ValidationError(f"empty window {start}:{end}")
        sub = self.cells[:, lo:hi + 1]
        keep = np.flatnonzero(np.any(sub > 0, axis=1))
        if keep.size == 0:
            raise ValidationError(f"no entity is present in window {start}:{end}")
        return RectangularPanel(tuple(self.entities[k] for k in keep), start, end, sub[keep])

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, RectangularPanel):
            return NotImplemented
        return (
            self.entities == other.entities
            and self.start_year == other.start_year
            and self.end_year == other.end_year
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None


@dataclass(frozen=True)
class PanelSummary:
    """Descriptive statistics over nonzero cells (zero fills are not observations)."""
    observations: int
    mean: float
    min: float
    max: float
    std_dev: float

    def to_dict(self) -> dict:
        return {
            "observations": self.observations,
            "mean": self.mean,
            "min": self.min,
            "max": self.max,
            "std_dev": self.std_dev,
        }


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def _read_frame(source: Any, mapping: ColumnMapping, delimiter: str) -> pd.DataFrame:
    if isinstance(source, pd.DataFrame):
        return source.reset_index(drop=True)

    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        if not path.is_file():
            raise InputError(f"panel file '{path}' not found")
        source = path

    if isinstance(source, Path) or hasattr(source, "read"):
        try:
            return pd.read_csv(source, sep=delimiter, dtype=str, keep_default_na=False, encoding="utf-8")
        except pd.errors.EmptyDataError as e:
            raise InputError(f"panel input is empty: {e}") from e
        except (pd.errors.ParserError, UnicodeDecodeError) as e:
            raise InputError(f"panel input is not valid delimited UTF-8 text: {e}") from e

    rows = list(source)
    if rows and isinstance(rows[0], Mapping):
        return pd.DataFrame(rows)
    return pd.DataFrame(rows, columns=list(mapping.columns))


def _first(mask: pd.Series) -> Optional[int]:
    hits = np.flatnonzero(mask.to_numpy())
    return int(hits[0]) if hits.size else None


def ingest_panel(
    source: Any,
    mapping: Optional[ColumnMapping] = None,
    delimiter: str = ",",
) -> List[PanelRecord]:
    """
    Read and validate raw panel rows.

    `source` may be a path, an open text stream, a DataFrame, or an iterable of
    rows (mappings keyed by the column names, or (entity, year, size) tuples).

    Raises:
        InputError: unreadable source or missing columns
        ValidationError: bad year/size values (with row index) or a duplicate (entity, year)
    """
    mapping = mapping or ColumnMapping()
    frame = _read_frame(source, mapping, delimiter)

    missing = [c for c in mapping.columns if c not in frame.columns]
    if missing:
        raise InputError(f"missing column(s) {missing}; found {list(frame.columns)}")

    ids = frame[mapping.entity].astype(str).str.strip()
    years = pd.to_numeric(frame[mapping.year], errors="coerce")
    sizes = pd.to_numeric(frame[mapping.size], errors="coerce").astype(float)

    row = _first(ids == "")
    if row is not None:
        raise ValidationError(f"row {row}: empty entity id")

    row = _first(years.isna() | (years != np.floor(years)))
    if row is not None:
        raise ValidationError(f"row {row}: year {frame[mapping.year].iloc[row]!r} is not an integer")

    row = _first(sizes.isna() | ~np.isfinite(sizes))
    if row is not None:
        raise ValidationError(f"row {row}: size {frame[mapping.size].iloc[row]!r} is not numeric")

    row = _first(sizes < 0)
    if row is not None:
        raise ValidationError(f"row {row}: negative size {sizes.iloc[row]}")

    row = _first(sizes == 0)
    if row is not None:
        raise ValidationError(f"row {row}: size 0 is reserved for non-existence and cannot appear in raw input")

    years = years.astype(np.int64)
    keys = pd.DataFrame({"entity": ids, "year": years})
    row = _first(keys.duplicated(keep="first"))
    if row is not None:
        raise ValidationError(
            f"row {row}: duplicate (entity, year) pair ({ids.iloc[row]!r}, {int(years.iloc[row])})"
        )

    records = [PanelRecord(e, int(y), float(s)) for e, y, s in zip(ids, years, sizes)]
    logger.info("ingested %d panel records", len(records))
    return records


# ---------------------------------------------------------------------------
# rectangularization and summary
# ---------------------------------------------------------------------------

def rectangularize(
    records: Sequence[PanelRecord],
    years: Optional[Tuple[int, int]] = None,
) -> RectangularPanel:
    """
    Balance `records` over an inclusive year range, filling absent entity-years with 0.

    The range defaults to [min year, max year] of the records.
    """
    if not records:
        raise ValidationError("cannot rectangularize an empty record list")

    frame = pd.DataFrame(
        [(r.entity_id, r.year, r.size) for r in records],
        columns=["entity_id", "year", "size"],
    )
    lo, hi = years if years is not None else (int(frame["year"].min()), int(frame["year"].max()))
    if hi < lo:
        raise ValidationError(f"empty year range {lo}:{hi}")

    outside = frame[(frame["year"] < lo) | (frame["year"] > hi)]
    if not outside.empty:
        first = outside.iloc[0]
        raise ValidationError(
            f"record ({first['entity_id']!r}, {first['year']}) lies outside year range {lo}:{hi}"
        )

    try:
        grid = frame.pivot(index="entity_id", columns="year", values="size")
    except ValueError as e:
        raise ValidationError(f"duplicate (entity, year) pairs in records: {e}") from e
    grid = grid.reindex(columns=range(lo, hi + 1)).fillna(0.0)

    panel = RectangularPanel(tuple(grid.index), lo, hi, grid.to_numpy(dtype=np.float64))
    fills = panel.n_cells - len(records)
    logger.info("rectangularized %d entities over %d:%d (%d zero fills)", len(panel.entities), lo, hi, fills)
    return panel


def summarize(panel: RectangularPanel) -> PanelSummary:
    """Statistics over nonzero cells only; std_dev is the sample standard deviation."""
    values = panel.cells[panel.cells > 0]
    if values.size == 0:
        raise NumericError("panel has no nonzero cell to summarize")
    lo, hi = float(values.min()), float(values.max())
    mean = min(max(float(values.mean()), lo), hi)
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return PanelSummary(int(values.size), mean, lo, hi, std)
