"""
Published appendix tables shipped with the package (data/appendix/).

manifest.json records a sha256 per file; loading refuses files whose bytes
drifted from the recorded transcription.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .analytics import EntropyTable, TrendPoint
from .errors import InputError
from .estimator import TransitionMatrix
from . import reports

logger = logging.getLogger(__name__)

APPENDIX_DIR = Path(__file__).parent / "data" / "appendix"
MANIFEST = "manifest.json"


@dataclass(frozen=True, eq=False)
class FixtureSet:
    first_order: Tuple[TransitionMatrix, ...]
    second_order_product: TransitionMatrix
    second_order_direct: TransitionMatrix
    trend: Tuple[TrendPoint, ...]
    entropy: Tuple[EntropyTable, ...]
    entropy_average: Tuple[Optional[float], ...]
    entropy_excluded_years: Tuple[int, ...] = ()
    diagonal_dominant: Dict[str, Tuple[int, ...]] = field(default_factory=dict, repr=False)
    by_name: Dict[str, TransitionMatrix] = field(default_factory=dict, repr=False)  # keyed by file stem
    decimals: int = 4

    def first_order_for(self, origin_year: int) -> TransitionMatrix:
        for m in self.first_order:
            if m.origin_year == origin_year:
                return m
        raise InputError(f"no first-order fixture starts at {origin_year}")

    def entropy_for(self, end_year: int) -> EntropyTable:
        for t in self.entropy:
            if t.end_year == end_year:
                return t
        raise InputError(f"no entropy fixture for end year {end_year}")

    @property
    def matrices(self) -> List[TransitionMatrix]:
        return [*self.first_order, self.second_order_product, self.second_order_direct]


def sha256_of(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _check_files(directory: Path, files: Dict[str, Any], check_checksums: bool) -> None:
    for name, entry in sorted(files.items()):
        path = directory / name
        if not path.is_file():
            raise InputError(f"fixture file '{path}' is missing")
        if check_checksums:
            actual = sha256_of(path)
            if actual != entry.get("sha256"):
                raise InputError(f"fixture '{name}' does not match its manifest checksum (got {actual[:12]}...)")


def load_fixtures(directory: Any = None, check_manifest: bool = True) -> FixtureSet:
    """
    Load every appendix table listed in the manifest.

    Raises InputError for a missing manifest, a missing file, a checksum
    mismatch, or a malformed table.
    """
    directory = Path(directory) if directory is not None else APPENDIX_DIR
    doc = reports.read_json(directory / MANIFEST)
    try:
        files: Dict[str, Dict[str, Any]] = doc["files"]
    except (KeyError, TypeError):
        raise InputError(f"'{directory / MANIFEST}' has no 'files' table")
    _check_files(directory, files, check_manifest)

    first_order, product, direct, trend, entropy, average = [], None, None, None, None, None
    named: Dict[str, TransitionMatrix] = {}
    for name, entry in sorted(files.items()):
        path = directory / name
        kind = entry.get("kind")
        if kind in ("first_order", "second_order_product", "second_order_direct"):
            m = reports.read_matrix_csv(path, int(entry["origin_year"]), int(entry["dest_year"]), entry.get("label", name))
            named[path.stem] = m
            if kind == "first_order":
                first_order.append(m)
            elif kind == "second_order_product":
                product = m
            else:
                direct = m
        elif kind == "trend":
            trend = tuple(reports.read_trend_csv(path))
        elif kind == "entropy":
            tables, average = reports.read_entropy_csv(path)
            entropy = tuple(tables)
        else:
            raise InputError(f"fixture '{name}' has unknown kind {kind!r}")

    missing = [k for k, v in (("second_order_product", product), ("second_order_direct", direct),
                              ("trend", trend), ("entropy", entropy)) if v is None]
    if missing or not first_order:
        raise InputError(f"fixture set is incomplete: missing {missing or ['first_order']}")
    if average is None:
        raise InputError("entropy fixture has no AVG column")

    first_order.sort(key=lambda m: m.origin_year)
    logger.info("loaded %d appendix fixtures from %s", len(files), directory)
    return FixtureSet(
        tuple(first_order),
        product,
        direct,
        trend,
        entropy,
        average,
        tuple(int(y) for y in doc.get("entropy_excluded_years", ())),
        {k: tuple(v) for k, v in doc.get("diagonal_dominant_columns", {}).items()},
        named,
        int(doc.get("decimals", 4)),
    )
