# reports.py
"""
File formats for everything the pipeline reads or writes.

Matrix CSV: header `Size,0,1,...,n-1`; one row per destination state j; cell
(j, i) = f_ji with 4 decimals; undefined columns are blank. JSON carries full
precision, counts and the undefined-column list; NaN is written as null.
All writers use "\n" line endings and fixed key order so reruns are
byte-identical.
"""
from __future__ import annotations

import json
import math
from io import StringIO
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .analytics import EntropyTable, GroupEntropy, TrendPoint
from .errors import InputError
from .estimator import MarginalDistribution, TransitionMatrix
from .panel import RectangularPanel

FLOAT_FORMAT = "%.4f"
_CSV = dict(index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")


def _read_csv(path: Any, **kwargs) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file '{path}' not found")
    try:
        return pd.read_csv(path, **kwargs)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"'{path}' is not a valid CSV table: {e}") from e


def _clean(value: Any) -> Any:
    """Recursively turn numpy scalars/arrays into JSON types, NaN into None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return None if math.isnan(value) else float(value)
    return value


def dumps_json(obj: Any) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj: Any, path: Any) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj), encoding="utf-8", newline="\n")
    return path


def read_json(path: Any) -> Any:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file '{path}' not found")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise InputError(f"'{path}' is not valid JSON: {e}") from e


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------

def matrix_frame(matrix: TransitionMatrix) -> pd.DataFrame:
    n = matrix.n_states
    frame = pd.DataFrame(matrix.probs, columns=[str(i) for i in range(n)])
    frame.insert(0, "Size", range(n))
    return frame


def write_matrix_csv(matrix: TransitionMatrix, path: Any) -> Path:
    path = Path(path)
    matrix_frame(matrix).to_csv(path, **_CSV)
    return path


def read_matrix_csv(path: Any, origin_year: int, dest_year: int, source: str = "") -> TransitionMatrix:
    """Inverse of `write_matrix_csv`; blank columns come back as undefined."""
    frame = _read_csv(path)
    n = len(frame)
    expected = ["Size"] + [str(i) for i in range(n)]
    if list(frame.columns) != expected or list(frame["Size"]) != list(range(n)):
        raise InputError(f"'{path}' is not a matrix table: expected header {','.join(expected)} and rows 0..{n - 1}")
    try:
        probs = frame.drop(columns="Size").to_numpy(dtype=np.float64)
    except ValueError as e:
        raise InputError(f"'{path}' has non-numeric cells: {e}") from e
    return TransitionMatrix.from_probabilities(probs, origin_year, dest_year, source or Path(path).name)


def matrix_to_dict(matrix: TransitionMatrix) -> dict:
    return {
        "origin_year": matrix.origin_year,
        "dest_year": matrix.dest_year,
        "source": matrix.source,
        "n_states": matrix.n_states,
        "undefined_columns": sorted(matrix.undefined_columns),
        "probs": matrix.probs,
        "counts": matrix.counts,
    }


def matrix_from_dict(doc: dict) -> TransitionMatrix:
    try:
        probs = np.array([[np.nan if v is None else v for v in row] for row in doc["probs"]], dtype=np.float64)
        return TransitionMatrix(
            int(doc["origin_year"]),
            int(doc["dest_year"]),
            probs,
            doc.get("counts"),
            frozenset(doc.get("undefined_columns", ())),
            doc.get("source", ""),
        )
    except (KeyError, TypeError) as e:
        raise InputError(f"matrix document is missing or has a malformed field: {e}") from e


def write_matrix_json(matrix: TransitionMatrix, path: Any) -> Path:
    return write_json(matrix_to_dict(matrix), path)


def read_matrix_json(path: Any) -> TransitionMatrix:
    return matrix_from_dict(read_json(path))


def matrix_to_str(matrix: TransitionMatrix, digits: int = 4) -> str:
    """Aligned text table, destination states down, origin states across."""
    n = matrix.n_states
    width = digits + 3
    buf = StringIO()
    buf.write(f"{matrix.label}  ({matrix.source or 'unlabelled'})\n")
    buf.write("j\\i".rjust(4) + "".join(str(i).rjust(width) for i in range(n)) + "\n")
    for j in range(n):
        cells = []
        for i in range(n):
            v = matrix.probs[j, i]
            cells.append(("-" if math.isnan(v) else f"{v:.{digits}f}").rjust(width))
        buf.write(str(j).rjust(4) + "".join(cells) + "\n")
    if matrix.undefined_columns:
        buf.write(f"undefined columns: {sorted(matrix.undefined_columns)}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# series
# ---------------------------------------------------------------------------

def write_trend_csv(points: Sequence[TrendPoint], path: Any) -> Path:
    frame = pd.DataFrame(
        [(p.end_year, p.L, p.R, np.nan if p.Q is None else p.Q) for p in points],
        columns=["end_year", "L", "R", "Q"],
    )
    frame.to_csv(path, **_CSV)
    return Path(path)


def read_trend_csv(path: Any) -> List[TrendPoint]:
    frame = _read_csv(path)
    if list(frame.columns) != ["end_year", "L", "R", "Q"]:
        raise InputError(f"'{path}' is not a trend table (expected end_year,L,R,Q)")
    return [
        TrendPoint(int(r.end_year), float(r.L), float(r.R), None if pd.isna(r.Q) else float(r.Q))
        for r in frame.itertuples(index=False)
    ]


def entropy_frame(tables: Sequence[EntropyTable], average: Optional[Sequence[Optional[float]]] = None) -> pd.DataFrame:
    """Wide layout: one row per category, one column per end year (+ AVG)."""
    n = len(tables[0].values) if tables else 0
    frame = pd.DataFrame({"category": range(n)})
    for t in tables:
        frame[str(t.end_year)] = [np.nan if v is None else v for v in t.values]
    if average is not None:
        frame["AVG"] = [np.nan if v is None else v for v in average]
    return frame


def write_entropy_csv(tables: Sequence[EntropyTable], path: Any,
                      average: Optional[Sequence[Optional[float]]] = None) -> Path:
    entropy_frame(tables, average).to_csv(path, **_CSV)
    return Path(path)


def read_entropy_csv(path: Any) -> Tuple[List[EntropyTable], Optional[Tuple[Optional[float], ...]]]:
    """Returns the per-year tables and the AVG column when present."""
    frame = _read_csv(path)
    if not len(frame.columns) or frame.columns[0] != "category":
        raise InputError(f"'{path}' is not an entropy table (first column must be 'category')")
    if list(frame["category"]) != list(range(len(frame))):
        raise InputError(f"'{path}': categories must be 0..{len(frame) - 1} in order")

    def column(name: str) -> Tuple[Optional[float], ...]:
        return tuple(None if pd.isna(v) else float(v) for v in frame[name])

    tables = []
    for name in frame.columns[1:]:
        if name == "AVG":
            continue
        try:
            year = int(name)
        except ValueError:
            raise InputError(f"'{path}': column {name!r} is not a year")
        values = column(name)
        tables.append(EntropyTable(year, values, frozenset(i for i, v in enumerate(values) if v is None)))
    average = column("AVG") if "AVG" in frame.columns else None
    return tables, average


def write_entropy_long_csv(tables: Sequence[EntropyTable], path: Any) -> Path:
    """Plot-ready layout: end_year,category,entropy."""
    rows = [(t.end_year, s, np.nan if v is None else v) for t in tables for s, v in enumerate(t.values)]
    pd.DataFrame(rows, columns=["end_year", "category", "entropy"]).to_csv(path, **_CSV)
    return Path(path)


def write_group_csv(groups: Sequence[GroupEntropy], path: Any) -> Path:
    frame = pd.DataFrame(
        [(g.end_year, g.small, g.medium, g.large) for g in groups],
        columns=["end_year", "small", "medium", "large"],
    )
    frame.to_csv(path, **_CSV)
    return Path(path)


def write_path_csv(
    propagated: Sequence[MarginalDistribution],
    empirical: Sequence[MarginalDistribution],
    path: Any,
) -> Path:
    """end_year,state,propagated,empirical; the two sequences are matched by year."""
    by_year = {m.year: m for m in empirical}
    rows = []
    for m in propagated:
        emp = by_year.get(m.year)
        for s in range(m.n_states):
            rows.append((m.year, s, m.p[s], np.nan if emp is None else emp.p[s]))
    frame = pd.DataFrame(rows, columns=["end_year", "state", "propagated", "empirical"])
    frame.to_csv(path, index=False, float_format="%.6f", na_rep="", lineterminator="\n")
    return Path(path)


def write_panel_csv(panel: RectangularPanel, path: Any) -> Path:
    """Nonzero cells as entity_id,year,size rows (the ingestion format)."""
    records = panel.to_records()
    frame = pd.DataFrame(
        [(r.entity_id, r.year, r.size) for r in records],
        columns=["entity_id", "year", "size"],
    )
    frame.to_csv(path, index=False, lineterminator="\n")
    return Path(path)


def write_states_csv(entities: Iterable[str], years: range, states: np.ndarray, path: Any) -> Path:
    """Ground-truth state grid, one row per entity, one column per year."""
    frame = pd.DataFrame(np.asarray(states), columns=[str(y) for y in years])
    frame.insert(0, "entity_id", list(entities))
    frame.to_csv(path, index=False, lineterminator="\n")
    return Path(path)
