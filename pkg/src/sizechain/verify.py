"""
Verification suite over the shipped appendix fixtures.

Every check recomputes something from the published matrices and compares it
with a published number: column stochasticity, per-category entropy and its
across-year average, the two-step product against the published product and
the directly estimated two-step matrix, Q = L / R, and diagonal dominance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from .analytics import average_entropy, chapman_kolmogorov_check, diagonal_dominance, entropy_table
from .errors import ValidationError
from .estimator import TransitionMatrix
from .fixtures import FixtureSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Tolerances:
    stochasticity: float = 2e-3
    entropy: float = 5e-4
    ck_product: float = 2e-3
    ck_direct: float = 1.5e-3
    trend: float = 5e-4

    def __post_init__(self):
        for name in ("stochasticity", "entropy", "ck_product", "ck_direct", "trend"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"tolerance '{name}' must be positive, got {getattr(self, name)}")

    def with_ck(self, tolerance: Optional[float]) -> "Tolerances":
        if tolerance is None:
            return self
        return replace(self, ck_product=tolerance, ck_direct=tolerance)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    deviation: float
    tolerance: float
    location: Optional[str] = None  # where the worst deviation sits

    def __str__(self) -> str:
        status = "ok  " if self.passed else "FAIL"
        where = f" at {self.location}" if self.location else ""
        return f"{status} {self.name}: max deviation {self.deviation:.6f} (tol {self.tolerance:g}){where}"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "deviation": self.deviation,
            "tolerance": self.tolerance,
            "location": self.location,
        }


@dataclass(frozen=True)
class VerificationReport:
    checks: Tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _worst(deviations: np.ndarray) -> Tuple[float, Optional[Tuple[int, ...]]]:
    if deviations.size == 0 or np.all(np.isnan(deviations)):
        return 0.0, None
    idx = np.unravel_index(int(np.nanargmax(deviations)), deviations.shape)
    return float(deviations[idx]), tuple(int(k) for k in idx)


def _stochasticity(matrix: TransitionMatrix, tol: float) -> CheckResult:
    dev, worst = _worst(np.abs(matrix.column_sums() - 1.0))
    loc = None if worst is None else f"{matrix.source} column {worst[0]}"
    return CheckResult(f"stochasticity {matrix.source}", dev <= tol, dev, tol, loc)


def _entropy(fixtures: FixtureSet, tol: float) -> List[CheckResult]:
    out = []
    for m in fixtures.first_order:
        if m.dest_year in fixtures.entropy_excluded_years:
            logger.debug("entropy check skips end year %d", m.dest_year)
            continue
        recomputed = entropy_table(m).values
        published = fixtures.entropy_for(m.dest_year).values
        dev = np.array([
            np.nan if a is None or b is None else abs(a - b) for a, b in zip(recomputed, published)
        ])
        d, worst = _worst(dev)
        loc = None if worst is None else f"end year {m.dest_year} category {worst[0]}"
        out.append(CheckResult(f"entropy {m.dest_year}", d <= tol, d, tol, loc))
    return out


def _entropy_average(fixtures: FixtureSet, tol: float) -> CheckResult:
    recomputed = average_entropy([entropy_table(m) for m in fixtures.first_order])
    dev = np.array([
        np.nan if a is None or b is None else abs(a - b)
        for a, b in zip(recomputed, fixtures.entropy_average)
    ])
    d, worst = _worst(dev)
    loc = None if worst is None else f"category {worst[0]}"
    return CheckResult("entropy average", d <= tol, d, tol, loc)


def _ck_product(fixtures: FixtureSet, tol: float) -> CheckResult:
    target = fixtures.second_order_product
    report = chapman_kolmogorov_check(
        fixtures.first_order_for(target.origin_year),
        fixtures.first_order_for(target.origin_year + 1),
        target,
        tol,
    )
    loc = None if report.worst_entry is None else "row {}, column {}".format(*report.worst_entry)
    return CheckResult(f"two-step product {target.label}", report.passed, report.max_deviation, tol, loc)


def _ck_direct(fixtures: FixtureSet, tol: float) -> CheckResult:
    product, direct = fixtures.second_order_product, fixtures.second_order_direct
    d, worst = _worst(np.abs(product.probs - direct.probs))
    loc = None if worst is None else "row {}, column {}".format(*worst)
    return CheckResult(f"two-step product vs data {direct.label}", d <= tol, d, tol, loc)


def _ratio_gap(L: float, R: float, Q: float, half_unit: float) -> float:
    """Distance from Q to the range of L/R over the rounding box of L and R."""
    lo = max(L - half_unit, 0.0) / (R + half_unit)
    hi = (L + half_unit) / (R - half_unit) if R > half_unit else np.inf
    return max(lo - Q, Q - hi, 0.0)


def _trend(fixtures: FixtureSet, tol: float) -> CheckResult:
    half_unit = 0.5 * 10.0 ** -fixtures.decimals
    dev = np.array([
        np.nan if p.Q is None or p.R == 0 else _ratio_gap(p.L, p.R, p.Q, half_unit) for p in fixtures.trend
    ])
    d, worst = _worst(dev)
    loc = None if worst is None else f"end year {fixtures.trend[worst[0]].end_year}"
    return CheckResult("trend Q = L/R", d <= tol, d, tol, loc)


def _diagonal(fixtures: FixtureSet) -> List[CheckResult]:
    out = []
    for key, expected in sorted(fixtures.diagonal_dominant.items()):
        matrix = fixtures.by_name.get(key)
        if matrix is None:
            out.append(CheckResult(f"diagonal dominance {key}", False, float(len(expected)), 0.0, "missing matrix"))
            continue
        missing = sorted(set(expected) - set(diagonal_dominance(matrix)))
        loc = f"{matrix.source} column {missing[0]}" if missing else None
        out.append(CheckResult(f"diagonal dominance {matrix.source}", not missing, float(len(missing)), 0.0, loc))
    return out


def run_verify(fixtures: FixtureSet, tolerances: Optional[Tolerances] = None) -> VerificationReport:
    tol = tolerances or Tolerances()
    checks: List[CheckResult] = [_stochasticity(m, tol.stochasticity) for m in fixtures.matrices]
    checks += _entropy(fixtures, tol.entropy)
    checks.append(_entropy_average(fixtures, tol.entropy))
    checks.append(_ck_product(fixtures, tol.ck_product))
    checks.append(_ck_direct(fixtures, tol.ck_direct))
    checks.append(_trend(fixtures, tol.trend))
    checks += _diagonal(fixtures)

    report = VerificationReport(tuple(checks))
    for c in report.failures:
        logger.warning("%s", c)
    return report
