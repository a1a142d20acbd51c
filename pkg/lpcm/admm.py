"""
ADMM solver for Lp compressed modes.

Minimizes (1/mu) sum_ij d_i |Psi_ij|^p + Tr(Psi^T L Psi) subject to
Psi^T D Psi = I by splitting Psi = S (sparsity) and Psi = E (energy).
Each iteration runs the Psi, S and E updates followed by the two dual steps.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Tuple, Union

import numpy as np
from scipy import sparse

from .errors import RankDeficiencyError, SolverError
from .models import AdmmState, IterationRecord, ModeSet, SolverConfig
from .operators import ESystem, MassDiag, MeshOperators, weighted_lp_norm_p

logger = logging.getLogger(__name__)

RANK_RATIO = 1e-12
ORTHO_TOL = 1e-6
NONZERO_FLOOR = 1e-10
NEWTON_POLISH_STEPS = 50
BISECTION_STEPS = 200
LOG_EVERY = 100


def _weights(D: Union[MassDiag, np.ndarray]) -> np.ndarray:
    return D.d if isinstance(D, MassDiag) else np.asarray(D, dtype=np.float64)


def d_orthonormalize(Y: np.ndarray, D: Union[MassDiag, np.ndarray]) -> np.ndarray:
    """
    Closest D-orthonormal matrix to Y: Y V Sigma^{-1/2} V^T with
    Y^T D Y = V Sigma V^T. Only the N x N matrix is decomposed.
    """
    d = _weights(D)
    M = Y.T @ (d[:, None] * Y)
    M = 0.5 * (M + M.T)
    sigma, V = np.linalg.eigh(M)
    top = sigma[-1]
    if not (top > 0) or sigma[0] < RANK_RATIO * top:
        ratio = float(sigma[0] / top) if top > 0 else 0.0
        raise RankDeficiencyError(
            f"Y^T D Y is rank deficient (min/max eigenvalue ratio {ratio:.3e}); reperturb and retry",
            ratio,
        )
    return Y @ ((V / np.sqrt(sigma)) @ V.T)


def psi_update(S: np.ndarray, E: np.ndarray, U_S: np.ndarray, U_E: np.ndarray,
               rho: float, D: Union[MassDiag, np.ndarray]) -> np.ndarray:
    """Psi-step: D-orthonormal projection of Y = (S + U_S/rho + E + U_E/rho) / 2"""
    Y = 0.5 * (S + U_S / rho + E + U_E / rho)
    return d_orthonormalize(Y, D)


def prox_lp(q: np.ndarray, w: Union[float, np.ndarray], p: float,
            newton_iters: int = 8) -> np.ndarray:
    """
    Elementwise argmin_s w|s|^p + (s - q)^2 / 2.

    Zero when |q| <= t + w p t^(p-1) with t = (2w(1-p))^(1/(2-p)); otherwise
    the larger root of s + w p s^(p-1) = |q|, found by the fixed point
    s <- |q| - w p s^(p-1) started at |q| and polished with Newton steps.
    """
    q = np.asarray(q, dtype=np.float64)
    w = np.broadcast_to(np.asarray(w, dtype=np.float64), q.shape)
    a = np.abs(q)

    if p == 1.0:
        return np.sign(q) * np.maximum(a - w, 0.0)

    out = np.where(w == 0, q, 0.0)
    active = w > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = (2.0 * w * (1.0 - p)) ** (1.0 / (2.0 - p))
        s_hat = t + w * p * t ** (p - 1.0)
    active &= a > s_hat
    if not np.any(active):
        return out

    aa, ww, tt = a[active], w[active], t[active]
    wp = ww * p

    s = aa.copy()
    for _ in range(newton_iters):
        s = aa - wp * s ** (p - 1.0)

    # phi(s) = s + wp s^(p-1) - a is convex and increasing on [t, inf)
    for _ in range(NEWTON_POLISH_STEPS):
        phi = s + wp * s ** (p - 1.0) - aa
        dphi = 1.0 + wp * (p - 1.0) * s ** (p - 2.0)
        step = phi / dphi
        s = s - step
        if np.all(np.abs(step) <= 1e-15 * np.maximum(s, 1.0)):
            break

    bad = ~np.isfinite(s) | (s < tt) | (s > aa)
    if np.any(bad):
        lo, hi = tt[bad].copy(), aa[bad].copy()
        wpb = wp[bad]
        ab = aa[bad]
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            below = mid + wpb * mid ** (p - 1.0) - ab < 0
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        s[bad] = 0.5 * (lo + hi)

    # keep zero when it is at least as good
    f_s = ww * s ** p + 0.5 * (s - aa) ** 2
    s = np.where(f_s <= 0.5 * aa ** 2, s, 0.0)

    out[active] = np.sign(q[active]) * s
    return out


def prox_lp_scalar(q: float, w: float, p: float, newton_iters: int = 8) -> float:
    """Scalar form of prox_lp"""
    return float(prox_lp(np.array([q]), w, p, newton_iters)[0])


def s_update(Psi: np.ndarray, U_S: np.ndarray, cfg: SolverConfig,
             D: Union[MassDiag, np.ndarray]) -> np.ndarray:
    """S-step: prox of the weighted Lp penalty at Psi - U_S/rho with weight d_i/(rho mu)"""
    d = _weights(D)
    q = Psi - U_S / cfg.rho
    w = (d / (cfg.rho * cfg.mu))[:, None]
    if cfg.jobs > 1 and q.shape[0] >= 2 * cfg.jobs:
        blocks = np.array_split(np.arange(q.shape[0]), cfg.jobs)
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            parts = pool.map(lambda rows: prox_lp(q[rows], w[rows], cfg.p, cfg.newton_iters), blocks)
            return np.vstack(list(parts))
    return prox_lp(q, w, cfg.p, cfg.newton_iters)


def e_update(Psi: np.ndarray, U_E: np.ndarray, rho: float,
             system: Union[ESystem, sparse.spmatrix], jobs: int = 1) -> np.ndarray:
    """E-step: solve (rho I + 2 L_pd) E = rho Psi - U_E"""
    if not isinstance(system, ESystem):
        system = ESystem(sparse.csr_matrix(system), rho)
    elif system.rho != rho:
        raise SolverError(f"E-system was factorized for rho={system.rho}, not {rho}")
    return system.solve(rho * Psi - U_E, jobs=jobs)


def objective(Psi: np.ndarray, L_pd: sparse.spmatrix, D: Union[MassDiag, np.ndarray],
              mu: float, p: float) -> float:
    """(1/mu) ||Psi||_p^p + Tr(Psi^T L_pd Psi)"""
    energy = float(np.sum(Psi * (L_pd @ Psi)))
    if math.isinf(mu):
        return energy
    return weighted_lp_norm_p(Psi, _weights(D), p) / mu + energy


def ortho_error(Psi: np.ndarray, D: Union[MassDiag, np.ndarray]) -> float:
    """max |Psi^T D Psi - I|"""
    d = _weights(D)
    G = Psi.T @ (d[:, None] * Psi)
    return float(np.max(np.abs(G - np.eye(G.shape[0])))) if G.size else 0.0


def stationarity_residual(modes: Union[ModeSet, np.ndarray], L_pd: sparse.spmatrix,
                          D: Union[MassDiag, np.ndarray], mu: float, p: float) -> float:
    """
    Norm of the gradient (1/mu) d_i p sign(Psi)|Psi|^(p-1) + 2 L_pd Psi projected
    onto the tangent space of Psi^T D Psi = I, over the nonzero entries only.
    """
    Psi = modes.Psi if isinstance(modes, ModeSet) else np.asarray(modes)
    d = _weights(D)
    nonzero = np.abs(Psi) > NONZERO_FLOOR

    G = 2.0 * (L_pd @ Psi)
    if not math.isinf(mu):
        sub = np.zeros_like(Psi)
        sub[nonzero] = p * np.sign(Psi[nonzero]) * np.abs(Psi[nonzero]) ** (p - 1.0)
        G = G + (d[:, None] * sub) / mu

    sym = Psi.T @ G
    sym = 0.5 * (sym + sym.T)
    R = G - (d[:, None] * Psi) @ sym
    R[~nonzero] = 0.0
    return float(np.linalg.norm(R))


def initial_psi(n: int, N: int, seed: int, D: Union[MassDiag, np.ndarray]) -> np.ndarray:
    """Seeded uniform[-1, 1] entries, D-orthonormalized"""
    rng = np.random.default_rng(seed)
    return d_orthonormalize(rng.uniform(-1.0, 1.0, size=(n, N)), D)


def _iterate(ops: MeshOperators, N: int, cfg: SolverConfig, seed: int) -> Tuple[ModeSet, AdmmState]:
    D = ops.D
    L_pd = ops.L_pd
    rho = cfg.rho
    system = ops.e_system(rho)

    Psi = initial_psi(ops.n, N, seed, D)
    state = AdmmState(Psi=Psi, S=Psi.copy(), E=Psi.copy(),
                      U_S=np.zeros_like(Psi), U_E=np.zeros_like(Psi))
    converged = False
    best = None

    for k in range(1, cfg.max_iter + 1):
        Psi_new = psi_update(state.S, state.E, state.U_S, state.U_E, rho, D)
        S = s_update(Psi_new, state.U_S, cfg, D)
        E = e_update(Psi_new, state.U_E, rho, system, jobs=cfg.jobs)
        state.U_S = state.U_S - rho * (Psi_new - S)
        state.U_E = state.U_E - rho * (Psi_new - E)

        err = float(np.linalg.norm(Psi_new - state.Psi) / np.linalg.norm(state.Psi))
        state.Psi, state.S, state.E, state.iter = Psi_new, S, E, k
        state.record(IterationRecord(
            iter=k,
            err_psi=err,
            primal_residual_sq=state.primal_residual_sq(),
            energy=objective(Psi_new, L_pd, D, cfg.mu, cfg.p),
            ortho_error=ortho_error(Psi_new, D),
        ))
        if k % LOG_EVERY == 0:
            rec = state.history[-1]
            logger.debug("iter %d: err_psi=%.3e residual=%.3e energy=%.6g",
                         k, rec.err_psi, rec.primal_residual_sq, rec.energy)
        # the first Psi-step reproduces Psi0 (S = E = Psi0, zero duals)
        if k > 1 and err < cfg.tol_rel_change:
            converged = True
            break
        if k > 1 and (best is None or err < best[0]):
            best = (err, k, Psi_new, S)

    Psi, S = state.Psi, state.S
    if not converged and best is not None:
        # a cycling run keeps the iterate that moved least
        logger.debug("Keeping iterate %d (err_psi=%.3e) of %d", best[1], best[0], state.iter)
        Psi, S = best[2], best[3]
    if np.linalg.norm(Psi.T @ (D[:, None] * Psi) - np.eye(N)) > ORTHO_TOL:
        Psi = d_orthonormalize(Psi, D)

    modes = ModeSet(Psi=Psi.copy(), mu=cfg.mu, p=cfg.p, converged=converged,
                    iters=state.iter, S=S.copy())
    return modes, state


def solve(ops: MeshOperators, N: int, cfg: SolverConfig) -> Tuple[ModeSet, AdmmState]:
    """
    Compute N compressed modes for fixed (mu, p).

    Args:
        ops: stiffness, mass and factorization cache of the mesh
        N: number of modes
        cfg: solver parameters

    Returns:
        (ModeSet, AdmmState); a run that hits max_iter returns the iterate
        with the smallest relative change, flagged converged=False.
    """
    if N < 1:
        raise SolverError(f"Number of modes must be at least 1, got {N}")
    if N > ops.n:
        raise SolverError(f"Cannot compute {N} D-orthonormal modes on {ops.n} vertices")

    logger.info("ADMM solve: n=%d, N=%d, mu=%g, p=%g, rho=%g", ops.n, N, cfg.mu, cfg.p, cfg.rho)
    try:
        modes, state = _iterate(ops, N, cfg, cfg.seed)
    except RankDeficiencyError as e:
        logger.warning("Rank deficiency (%s); restarting with seed %d", e, cfg.seed + 1)
        modes, state = _iterate(ops, N, cfg, cfg.seed + 1)

    if modes.converged:
        logger.info("ADMM converged after %d iterations", modes.iters)
    else:
        logger.warning("ADMM did not converge within %d iterations (err_psi=%.3e)",
                       cfg.max_iter, state.history[-1].err_psi)
    return modes, state
