"""
Basis growth until every vertex is covered by some mode support:
fixed mu with growing N, or fixed N with growing mu
"""

import logging
import math
import time
from typing import List, Optional, Tuple

import numpy as np

from .admm import solve
from .errors import ConfigError
from .models import AdmmState, BasisResult, CoverageReport, ModeSet, RoundRecord, SolverConfig
from .operators import MeshOperators

logger = logging.getLogger(__name__)

# entries below this fraction of their column's max |value| are outside the support
SUPPORT_FLOOR = 1e-6

N_START = 2
N_MAX = 64
MU_START = 2.0
MU_FACTOR = 4.0
MU_MAX = 2.0 * 4.0 ** 10


def support_mask(modes: ModeSet, rel_floor: float = SUPPORT_FLOOR) -> np.ndarray:
    """Boolean n x N support of each mode"""
    values = np.abs(modes.support_values())
    col_max = values.max(axis=0) if values.size else np.zeros(values.shape[1])
    return (values > rel_floor * col_max[None, :]) & (col_max[None, :] > 0)


def support_sizes(modes: ModeSet, rel_floor: float = SUPPORT_FLOOR) -> np.ndarray:
    return support_mask(modes, rel_floor).sum(axis=0)


def coverage(modes: ModeSet, rel_floor: float = SUPPORT_FLOOR) -> CoverageReport:
    """Vertices outside every mode support"""
    covered = support_mask(modes, rel_floor).any(axis=1)
    uncovered = np.nonzero(~covered)[0]
    n = len(covered)
    return CoverageReport(
        uncovered_vertices=uncovered.tolist(),
        covered_fraction=float(np.sum(covered) / n) if n else 1.0,
    )


def build_grow_N(ops: MeshOperators, mu: float, cfg: SolverConfig, N_start: int = N_START,
                 N_max: int = N_MAX, keep_history: bool = False) -> BasisResult:
    """
    Fixed mu; solve with N = N_start, N_start + 1, ... (fresh start each
    round) until the supports cover the mesh or N_max is reached.
    """
    if not mu > 0:
        raise ConfigError(f"mu must be positive, got {mu}")
    if N_start < 1 or N_max < N_start:
        raise ConfigError(f"Invalid N range [{N_start}, {N_max}]")

    round_cfg = cfg.with_mu(mu)
    result: Optional[BasisResult] = None
    rounds: List[RoundRecord] = []
    history: List[ModeSet] = []

    for i, N in enumerate(range(N_start, min(N_max, ops.n) + 1), start=1):
        modes, state, cov, record = _round(ops, N, round_cfg, i)
        rounds.append(record)
        if keep_history:
            history.append(modes)
        result = BasisResult(modes=modes, N=N, mu=mu, covered=cov.covered,
                             rounds=rounds, mode_history=history, state=state)
        if cov.covered:
            logger.info("Full coverage at N=%d (mu=%g) after %d rounds", N, mu, i)
            return result

    if result is None:
        raise ConfigError(f"N_start={N_start} exceeds the vertex count {ops.n}")
    logger.warning("Coverage incomplete at N_max=%d (mu=%g): %.1f%% covered",
                   result.N, mu, 100.0 * rounds[-1].covered_fraction)
    return result


def build_grow_mu(ops: MeshOperators, N: int, cfg: SolverConfig, mu_start: float = MU_START,
                  mu_factor: float = MU_FACTOR, mu_max: float = MU_MAX,
                  keep_history: bool = False) -> BasisResult:
    """
    Fixed N; mu is multiplied by mu_factor before each solve, so the first
    solved value is mu_start * mu_factor. Stops at full coverage or once the
    next mu would exceed mu_max.
    """
    if N < 1:
        raise ConfigError(f"N must be at least 1, got {N}")
    if not (mu_start > 0 and mu_factor > 1 and mu_max > 0):
        raise ConfigError("mu_start and mu_max must be positive and mu_factor greater than 1")

    mu = mu_start
    result: Optional[BasisResult] = None
    rounds: List[RoundRecord] = []
    history: List[ModeSet] = []

    i = 0
    while True:
        mu = mu * mu_factor
        if mu > mu_max:
            break
        i += 1
        modes, state, cov, record = _round(ops, N, cfg.with_mu(mu), i)
        rounds.append(record)
        if keep_history:
            history.append(modes)
        result = BasisResult(modes=modes, N=N, mu=mu, covered=cov.covered,
                             rounds=rounds, mode_history=history, state=state)
        if cov.covered:
            logger.info("Full coverage at mu=%g (N=%d) after %d rounds", mu, N, i)
            return result

    if result is None:
        raise ConfigError(f"mu_max={mu_max} is below the first scheduled mu {mu_start * mu_factor}")
    logger.warning("Coverage incomplete at mu_max=%g (N=%d): %.1f%% covered",
                   mu_max, N, 100.0 * rounds[-1].covered_fraction)
    return result


def _round(ops: MeshOperators, N: int, cfg: SolverConfig,
           index: int) -> Tuple[ModeSet, AdmmState, CoverageReport, RoundRecord]:
    started = time.perf_counter()
    modes, state = solve(ops, N, cfg)
    cov = coverage(modes)
    record = RoundRecord(round=index, N=N, mu=cfg.mu, covered_fraction=cov.covered_fraction,
                         iters=modes.iters, converged=modes.converged,
                         wall_time=time.perf_counter() - started)
    logger.info("Round %d: N=%d mu=%g covered=%.4f iters=%d",
                index, N, cfg.mu, cov.covered_fraction, modes.iters)
    return modes, state, cov, record


def match_modes(prev: ModeSet, nxt: ModeSet,
                rel_floor: float = SUPPORT_FLOOR) -> List[Tuple[int, int]]:
    """Greedy pairing of modes by largest support overlap; pairs with no overlap are skipped"""
    a = support_mask(prev, rel_floor).astype(np.int64)
    b = support_mask(nxt, rel_floor).astype(np.int64)
    overlap = a.T @ b
    pairs = []
    used_rows, used_cols = set(), set()
    # stable order: larger overlap first, then lower indices
    order = sorted(
        ((-int(overlap[i, j]), i, j) for i in range(overlap.shape[0]) for j in range(overlap.shape[1])),
    )
    for neg, i, j in order:
        if neg == 0:
            break
        if i in used_rows or j in used_cols:
            continue
        pairs.append((i, j))
        used_rows.add(i)
        used_cols.add(j)
    return pairs


def support_growth_fraction(mode_sequence: List[ModeSet],
                            rel_floor: float = SUPPORT_FLOOR) -> float:
    """
    Share of matched mode pairs between consecutive mode sets whose support
    did not shrink. NaN when nothing could be matched.
    """
    grew = total = 0
    for prev, nxt in zip(mode_sequence, mode_sequence[1:]):
        sizes_prev = support_sizes(prev, rel_floor)
        sizes_next = support_sizes(nxt, rel_floor)
        for i, j in match_modes(prev, nxt, rel_floor):
            total += 1
            grew += int(sizes_next[j] >= sizes_prev[i])
    if total == 0:
        return math.nan
    return grew / total
