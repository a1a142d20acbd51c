"""
Reference manifold harmonics (generalized eigenproblem L_pd phi = lambda D phi)
and reconstruction of vertex signals in a D-orthonormal basis
"""

import csv
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse import linalg as spla

from .admm import solve
from .errors import ConfigError, SpectralError
from .models import SolverConfig
from .operators import MassDiag, MeshOperators

logger = logging.getLogger(__name__)

DENSE_LIMIT = 3000
SHIFT = -1e-8
BASIS_TYPES = ("mhb", "lpcm", "both")
RECONSTRUCTION_COLUMNS = ["basis", "N", "rel_error"]


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """D-orthonormal eigenvectors with non-decreasing eigenvalues"""
    Phi: np.ndarray
    lambdas: np.ndarray

    @property
    def N(self) -> int:
        return self.Phi.shape[1]

    def scalar_fields(self, prefix: str = "phi") -> Dict[str, np.ndarray]:
        width = len(str(max(self.N - 1, 0)))
        return {f"{prefix}_{k:0{width}d}": self.Phi[:, k] for k in range(self.N)}

    def export_csv(self, filename: str) -> None:
        """Eigenvalues, one per row"""
        with open(filename, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["index", "lambda"])
            for k, lam in enumerate(self.lambdas):
                writer.writerow([k, repr(float(lam))])


def _weights(D: Union[MassDiag, np.ndarray]) -> np.ndarray:
    return D.d if isinstance(D, MassDiag) else np.asarray(D, dtype=np.float64)


def _normalize_signs(Phi: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(Phi), axis=0)
    signs = np.sign(Phi[idx, np.arange(Phi.shape[1])])
    signs[signs == 0] = 1.0
    return Phi * signs


def mhb(ops: MeshOperators, N: int) -> EigenBasis:
    """
    Smallest N eigenpairs of L_pd phi = lambda D phi. Dense solver up to
    DENSE_LIMIT vertices, shift-invert Lanczos above.
    """
    n = ops.n
    if not 1 <= N <= n:
        raise ConfigError(f"Number of eigenpairs must lie in [1, {n}], got {N}")
    d = ops.D

    if n <= DENSE_LIMIT:
        lambdas, Phi = scipy.linalg.eigh(ops.L_pd.toarray(), np.diag(d), subset_by_index=[0, N - 1])
    else:
        if N >= n - 1:
            raise SpectralError(f"Iterative eigensolver needs N < n - 1 (N={N}, n={n})", achieved=0)
        try:
            lambdas, Phi = spla.eigsh(ops.L_pd.tocsc(), k=N, M=sparse.diags(d).tocsc(), sigma=SHIFT,
                                      which="LM")
        except spla.ArpackNoConvergence as e:
            raise SpectralError(
                f"Eigensolver did not converge: {len(e.eigenvalues)} of {N} eigenpairs",
                achieved=len(e.eigenvalues),
            ) from e
        order = np.argsort(lambdas)
        lambdas, Phi = lambdas[order], Phi[:, order]
        Phi = Phi / np.sqrt(np.sum(d[:, None] * Phi ** 2, axis=0))

    logger.info("Computed %d eigenpairs (lambda_max=%.6g)", N, lambdas[-1])
    return EigenBasis(Phi=_normalize_signs(Phi), lambdas=np.asarray(lambdas))


def reconstruct(basis: np.ndarray, signal: np.ndarray, D: Union[MassDiag, np.ndarray]) -> np.ndarray:
    """D-orthogonal projection B (B^T D X) of the signal onto span(B)"""
    d = _weights(D)
    X = np.asarray(signal, dtype=np.float64)
    B = np.asarray(basis, dtype=np.float64)
    if B.shape[1] == 0:
        return np.zeros_like(X)
    return B @ (B.T @ (d[:, None] * X if X.ndim == 2 else d * X))


def relative_error(X: np.ndarray, X_hat: np.ndarray, D: Union[MassDiag, np.ndarray]) -> float:
    """D-weighted relative L2 error"""
    d = _weights(D)
    diff = np.asarray(X) - np.asarray(X_hat)
    w = d[:, None] if diff.ndim == 2 else d
    denom = np.sqrt(np.sum(w * np.asarray(X) ** 2))
    return float(np.sqrt(np.sum(w * diff ** 2)) / denom) if denom > 0 else 0.0


def principal_angles(A: np.ndarray, B: np.ndarray, D: Union[MassDiag, np.ndarray]) -> np.ndarray:
    """Principal angles between span(A) and span(B) in the D inner product, ascending"""
    root = np.sqrt(_weights(D))[:, None]
    return np.sort(scipy.linalg.subspace_angles(root * A, root * B))


def region_mass_fraction(Phi: np.ndarray, D: Union[MassDiag, np.ndarray],
                         mask: np.ndarray) -> np.ndarray:
    """Share of each column's D-weighted squared mass on the masked vertices"""
    d = _weights(D)
    mass = d[:, None] * Phi ** 2
    total = mass.sum(axis=0)
    return mass[np.asarray(mask, dtype=bool)].sum(axis=0) / total


def reconstruction_table(ops: MeshOperators, signal: np.ndarray, Ns: Sequence[int],
                         basis: str = "both", cfg: Optional[SolverConfig] = None,
                         keep_reconstructions: bool = False) -> List[Dict]:
    """
    Rows (basis, N, rel_error) for each requested basis type and N. The
    LpCM basis is solved at the fixed mu of `cfg`.
    """
    if basis not in BASIS_TYPES:
        raise ConfigError(f"Unknown basis '{basis}' (expected one of {BASIS_TYPES})")
    for N in Ns:
        if N < 0 or N > ops.n:
            raise ConfigError(f"N={N} is outside [0, {ops.n}]")
    if basis in ("lpcm", "both") and cfg is None:
        raise ConfigError("An LpCM reconstruction needs a solver configuration")

    rows = []
    if basis in ("mhb", "both"):
        N_top = max(Ns) if Ns else 0
        full = mhb(ops, N_top) if N_top > 0 else None
        for N in Ns:
            B = full.Phi[:, :N] if full is not None else np.zeros((ops.n, 0))
            rows.append(_row("mhb", N, B, signal, ops.D, keep_reconstructions))
    if basis in ("lpcm", "both"):
        for N in Ns:
            if N == 0:
                B = np.zeros((ops.n, 0))
            else:
                modes, _ = solve(ops, N, cfg)
                B = modes.Psi
            rows.append(_row("lpcm", N, B, signal, ops.D, keep_reconstructions))
    return rows


def _row(kind: str, N: int, B: np.ndarray, signal: np.ndarray, d: np.ndarray, keep: bool) -> Dict:
    approx = reconstruct(B, signal, d)
    row = {"basis": kind, "N": N, "rel_error": relative_error(signal, approx, d)}
    logger.info("%s N=%d: relative error %.6g", kind, N, row["rel_error"])
    if keep:
        row["reconstruction"] = approx
    return row


def export_reconstruction_csv(rows: List[Dict], filename: str) -> None:
    """Reconstruction error table"""
    with open(filename, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(RECONSTRUCTION_COLUMNS)
        for row in rows:
            writer.writerow([row["basis"], row["N"], repr(row["rel_error"])])
