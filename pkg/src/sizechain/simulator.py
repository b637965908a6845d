"""
Synthetic panels drawn from a known chain, used as the ground truth that the
estimator and analytics are checked against.

Randomness comes from numpy's PCG64 seeded with a 64-bit integer. Entity e
consumes exactly 2 * n_years doubles from the stream, starting at offset
e * 2 * n_years: the first n_years drive its states (inverse CDF), the rest
render sizes inside each state's interval. Chunks jump ahead with
PCG64.advance, so a split or parallel run reproduces the sequential one.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .classifier import CategoryScheme, StateGrid, default_scheme
from .errors import ValidationError
from .panel import RectangularPanel

logger = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12
DEFAULT_CHUNK = 50_000


@dataclass(frozen=True, eq=False)
class GroundTruthChain:
    """
    Attributes:
        matrices: one column-stochastic matrix (homogeneous) or one per step
        initial: marginal over states at the first year, state 0 included
        seed: 64-bit seed for PCG64
    """
    matrices: Tuple[np.ndarray, ...] = field(repr=False)
    initial: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        mats = tuple(np.array(m, dtype=np.float64) for m in self.matrices)
        if not mats:
            raise ValidationError("a chain needs at least one transition matrix")
        n = mats[0].shape[0]
        for k, m in enumerate(mats):
            if m.shape != (n, n):
                raise ValidationError(f"step matrix {k} has shape {m.shape}, expected {(n, n)}")
            if np.any(m < 0):
                raise ValidationError(f"step matrix {k} has negative entries")
            bad = np.flatnonzero(np.abs(m.sum(axis=0) - 1.0) > STOCHASTIC_TOL)
            if bad.size:
                raise ValidationError(f"step matrix {k}: column {bad[0]} sums to {m[:, bad[0]].sum()!r}, not 1")
            m.setflags(write=False)
        initial = np.array(self.initial, dtype=np.float64)
        if initial.shape != (n,) or np.any(initial < 0):
            raise ValidationError(f"initial marginal must be a non-negative vector of {n} entries")
        if abs(initial.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValidationError(f"initial marginal sums to {initial.sum()!r}, not 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        initial.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_states(self) -> int:
        return self.initial.size

    @property
    def homogeneous(self) -> bool:
        return len(self.matrices) == 1

    def step_matrix(self, step: int) -> np.ndarray:
        """Matrix driving the move from year index `step` to `step + 1`."""
        if self.homogeneous:
            return self.matrices[0]
        if not 0 <= step < len(self.matrices):
            raise ValidationError(f"chain has {len(self.matrices)} step matrices, step {step} requested")
        return self.matrices[step]


def ladder_chain(n_states: int = 13, stay: float = 0.97, seed: int = 0) -> GroundTruthChain:
    """
    Homogeneous chain: absent entities enter in state 1; an entity in state k
    stays with probability `stay`, otherwise drops to k - 1 (state 1 exits to 0).
    Initial marginal is uniform.
    """
    if n_states < 2:
        raise ValidationError("a ladder chain needs at least 2 states")
    if not 0 <= stay <= 1:
        raise ValidationError(f"stay probability must lie in [0, 1], got {stay}")
    f = np.zeros((n_states, n_states))
    f[1, 0] = 1.0
    for k in range(1, n_states):
        f[k, k] = stay
        f[k - 1, k] = 1.0 - stay
    return GroundTruthChain((f,), np.full(n_states, 1.0 / n_states), seed)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _uniforms(seed: int, start: int, stop: int, n_years: int) -> np.ndarray:
    draws = 2 * n_years
    bitgen = np.random.PCG64(seed)
    if start:
        bitgen.advance(start * draws)
    return np.random.Generator(bitgen).random((stop - start, draws))


def _last_positive(probs: np.ndarray) -> np.ndarray:
    # per column, the highest state with positive probability
    n = probs.shape[0]
    return n - 1 - np.argmax(probs[::-1] > 0, axis=0)


def _inverse_cdf(cum: np.ndarray, u: np.ndarray, last: np.ndarray) -> np.ndarray:
    # cum: (n, m) cumulative thresholds per entity; u, last: (m,)
    # a float cumsum can end just below 1; never land on a zero-probability tail
    return np.minimum((u[None, :] >= cum).sum(axis=0), last)


def _walk(chain: GroundTruthChain, u: np.ndarray) -> np.ndarray:
    m, n_years = u.shape
    states = np.empty((m, n_years), dtype=np.int16)
    initial = chain.initial[:, None]
    states[:, 0] = _inverse_cdf(np.cumsum(initial, axis=0), u[:, 0], _last_positive(initial)[0])
    for t in range(1, n_years):
        f = chain.step_matrix(t - 1)
        prev = states[:, t - 1]
        states[:, t] = _inverse_cdf(np.cumsum(f, axis=0)[:, prev], u[:, t], _last_positive(f)[prev])
    return states


def _render_sizes(states: np.ndarray, u: np.ndarray, scheme: CategoryScheme) -> np.ndarray:
    b = np.asarray(scheme.boundaries)
    top = scheme.top_state
    lo = np.zeros(top + 1)
    hi = np.zeros(top + 1)
    lo[1:] = b
    hi[1:top] = b[1:]
    hi[top] = 2 * b[-1] if b[-1] > 0 else 1.0
    # never render a size of exactly 0 for a present entity
    lo[1:] = np.where(lo[1:] > 0, lo[1:], np.minimum(1.0, hi[1:] / 2))

    s = states.astype(np.int64)
    sizes = lo[s] + u * (hi[s] - lo[s])
    sizes = np.minimum(sizes, np.nextafter(hi[s], 0.0))
    sizes[s == 0] = 0.0
    return sizes


def sample_trajectory(chain: GroundTruthChain, n_years: int) -> np.ndarray:
    """States of entity 0 of the chain's stream over `n_years` years."""
    if n_years < 1:
        raise ValidationError(f"n_years must be at least 1, got {n_years}")
    u = _uniforms(chain.seed, 0, 1, n_years)
    return _walk(chain, u[:, :n_years])[0]


def _simulate_chunk(chain, scheme, start, stop, n_years):
    u = _uniforms(chain.seed, start, stop, n_years)
    states = _walk(chain, u[:, :n_years])
    return states, _render_sizes(states, u[:, n_years:], scheme)


def simulate_panel(
    chain: GroundTruthChain,
    n_entities: int,
    years: Tuple[int, int],
    scheme: Optional[CategoryScheme] = None,
    chunk_size: int = DEFAULT_CHUNK,
    jobs: int = 1,
) -> Tuple[RectangularPanel, StateGrid]:
    """
    Draw `n_entities` independent trajectories over the inclusive `years` range.

    Returns the rendered panel and the ground-truth grid. Entities that are in
    state 0 for every year cannot appear in a panel and are dropped from both.
    """
    scheme = scheme or default_scheme()
    if n_entities < 1:
        raise ValidationError(f"n_entities must be at least 1, got {n_entities}")
    if chunk_size < 1:
        raise ValidationError(f"chunk_size must be positive, got {chunk_size}")
    start_year, end_year = years
    n_years = end_year - start_year + 1
    if n_years < 1:
        raise ValidationError(f"empty year range {start_year}:{end_year}")
    if scheme.n_states != chain.n_states:
        raise ValidationError(f"scheme has {scheme.n_states} states, chain has {chain.n_states}")
    if not chain.homogeneous and len(chain.matrices) < n_years - 1:
        raise ValidationError(f"chain has {len(chain.matrices)} step matrices, {n_years - 1} needed")

    bounds = [(lo, min(lo + chunk_size, n_entities)) for lo in range(0, n_entities, chunk_size)]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        parts = list(pool.map(lambda b: _simulate_chunk(chain, scheme, b[0], b[1], n_years), bounds))
    states = np.concatenate([p[0] for p in parts])
    sizes = np.concatenate([p[1] for p in parts])

    width = len(str(n_entities - 1))
    ids = np.array([f"E{i:0{width}d}" for i in range(n_entities)])
    present = np.any(states > 0, axis=1)
    if not present.any():
        raise ValidationError("every simulated entity is absent in every year")
    dropped = n_entities - int(present.sum())
    if dropped:
        logger.info("dropped %d simulated entities absent in every year", dropped)

    ids = tuple(ids[present])
    panel = RectangularPanel(ids, start_year, end_year, sizes[present])
    grid = StateGrid(ids, start_year, end_year, states[present], chain.n_states)
    return panel, grid
