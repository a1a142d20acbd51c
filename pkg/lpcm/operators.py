"""
Discrete Laplace-Beltrami operator: cotangent stiffness, lumped mass,
weighted Lp norm and the factorized E-system used by the ADMM solver
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Union

import numpy as np
import scipy.io
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import FactorizationError, OperatorError
from .mesh import TriMesh

logger = logging.getLogger(__name__)

MASS_LUMPING = ("full", "third")

# |cot| above this means the triangle is numerically degenerate
COT_LIMIT = 1e12

E_RESIDUAL_TOL = 1e-10
REFINEMENT_STEPS = 3


@dataclass(frozen=True)
class SparseSymMatrix:
    """
    Symmetric sparse operator.

    `matrix` holds the cotangent matrix with positive off-diagonal weights
    and diagonal minus the row sum (negative semidefinite). The solver works
    with `psd = -matrix`.
    """
    matrix: sparse.csr_matrix
    psd_sign: int = -1

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def psd(self) -> sparse.csr_matrix:
        return (self.psd_sign * self.matrix).tocsr()

    def entries(self):
        """(row, col, value) triplets"""
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data

    def weight(self, i: int, j: int) -> float:
        return float(self.matrix[i, j])

    def asymmetry(self) -> float:
        """max |A - A^T| relative to max |A|"""
        diff = abs(self.matrix - self.matrix.T)
        scale = abs(self.matrix).max()
        return float(diff.max() / scale) if scale > 0 else 0.0


@dataclass(frozen=True)
class MassDiag:
    """Diagonal lumped mass matrix D"""
    d: np.ndarray
    lumping: str = "full"

    @property
    def n(self) -> int:
        return len(self.d)

    @property
    def matrix(self) -> sparse.dia_matrix:
        return sparse.diags(self.d)


def cotan_stiffness(mesh: TriMesh) -> SparseSymMatrix:
    """
    Cotangent weight matrix: w_ij = (cot a + cot b) / 2 over the triangles
    sharing edge (i, j), one term on boundary edges; diagonal -sum_k w_ik.
    """
    v = mesh.vertices
    tri = mesh.triangles
    n = mesh.n_vertices

    cots = np.empty((mesh.n_triangles, 3))
    for k in range(3):
        a = v[tri[:, k]]
        u = v[tri[:, (k + 1) % 3]] - a
        w = v[tri[:, (k + 2) % 3]] - a
        cross = np.linalg.norm(np.cross(u, w), axis=1)
        dot = np.einsum("ij,ij->i", u, w)
        with np.errstate(divide="ignore", invalid="ignore"):
            cots[:, k] = dot / cross

    bad = ~np.isfinite(cots) | (np.abs(cots) > COT_LIMIT)
    if np.any(bad):
        t = int(np.nonzero(bad.any(axis=1))[0][0])
        raise OperatorError(f"Cotangent overflow in triangle {t} {tri[t].tolist()} (near-degenerate)")

    # corner k is opposite edge (k+1, k+2)
    rows = np.concatenate([tri[:, (k + 1) % 3] for k in range(3)])
    cols = np.concatenate([tri[:, (k + 2) % 3] for k in range(3)])
    vals = 0.5 * np.concatenate([cots[:, k] for k in range(3)])

    W = sparse.coo_matrix(
        (np.concatenate([vals, vals]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(n, n),
    ).tocsr()
    diag = -np.asarray(W.sum(axis=1)).ravel()
    L = (W + sparse.diags(diag)).tocsr()
    L.sort_indices()
    logger.debug("Assembled cotangent matrix: n=%d, nnz=%d", n, L.nnz)
    return SparseSymMatrix(matrix=L)


def lumped_mass(mesh: TriMesh, lumping: str = "full") -> MassDiag:
    """
    d_i = sum of the areas of the triangles around vertex i ("full"), or a
    third of it ("third").
    """
    if lumping not in MASS_LUMPING:
        raise OperatorError(f"Unknown mass lumping '{lumping}' (expected one of {MASS_LUMPING})")
    d = np.asarray(mesh.vertex_triangles @ mesh.areas).ravel()
    if lumping == "third":
        d = d / 3.0
    isolated = np.nonzero(d <= 0)[0]
    if len(isolated):
        raise OperatorError(
            f"Isolated vertex {int(isolated[0])} has zero lumped mass ({len(isolated)} in total)"
        )
    return MassDiag(d=d, lumping=lumping)


def weighted_lp_norm_p(S: np.ndarray, d: Union[MassDiag, np.ndarray], p: float) -> float:
    """sum_ij d_i |S_ij|^p"""
    weights = d.d if isinstance(d, MassDiag) else np.asarray(d)
    S = np.asarray(S, dtype=np.float64)
    if S.ndim == 1:
        S = S[:, None]
    return float(np.sum(weights[:, None] * np.abs(S) ** p))


class ESystem:
    """SuperLU factorization of rho*I + 2*L_pd with residual-checked solves"""

    def __init__(self, L_pd: sparse.spmatrix, rho: float):
        if rho <= 0:
            raise FactorizationError(f"rho must be positive, got {rho}")
        n = L_pd.shape[0]
        self.rho = rho
        self.matrix = (rho * sparse.identity(n, format="csc") + 2.0 * L_pd).tocsc()
        try:
            self.lu = spla.splu(self.matrix, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as e:
            raise FactorizationError(
                f"Factorization of the E-system failed (n={n}, rho={rho}): {e}"
            ) from e
        logger.debug("Factorized E-system: n=%d, rho=%g, nnz(L+U)=%d",
                     n, rho, self.lu.L.nnz + self.lu.U.nnz)

    def solve(self, rhs: np.ndarray, jobs: int = 1) -> np.ndarray:
        """Solve for every column of rhs; relative residual <= 1e-10"""
        B = np.asarray(rhs, dtype=np.float64)
        squeeze = B.ndim == 1
        if squeeze:
            B = B[:, None]
        if jobs > 1 and B.shape[1] > 1:
            blocks = np.array_split(np.arange(B.shape[1]), min(jobs, B.shape[1]))
            with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
                parts = list(pool.map(lambda cols: self._solve_block(B[:, cols]), blocks))
            X = np.hstack(parts)
        else:
            X = self._solve_block(B)
        return X[:, 0] if squeeze else X

    def _solve_block(self, B: np.ndarray) -> np.ndarray:
        norm_b = np.linalg.norm(B)
        if norm_b == 0:
            return np.zeros_like(B)
        X = self.lu.solve(np.ascontiguousarray(B))
        for _ in range(REFINEMENT_STEPS):
            R = B - self.matrix @ X
            rel = np.linalg.norm(R) / norm_b
            if rel <= E_RESIDUAL_TOL:
                return X
            X = X + self.lu.solve(np.ascontiguousarray(R))
        rel = np.linalg.norm(B - self.matrix @ X) / norm_b
        if rel > E_RESIDUAL_TOL:
            raise FactorizationError(
                f"E-system residual {rel:.3e} exceeds {E_RESIDUAL_TOL:g} after refinement "
                f"(n={self.matrix.shape[0]}, rho={self.rho})"
            )
        return X


@dataclass(eq=False)
class MeshOperators:
    """Stiffness and mass of one mesh plus the per-rho E-system factorizations"""
    mesh: TriMesh
    stiffness: SparseSymMatrix
    mass: MassDiag
    _factors: Dict[float, ESystem] = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)
    _L_pd: Optional[sparse.csr_matrix] = field(default=None, init=False, repr=False)

    @classmethod
    def from_mesh(cls, mesh: TriMesh, lumping: str = "full") -> "MeshOperators":
        return cls(mesh=mesh, stiffness=cotan_stiffness(mesh), mass=lumped_mass(mesh, lumping))

    @property
    def n(self) -> int:
        return self.mass.n

    @property
    def L_pd(self) -> sparse.csr_matrix:
        if self._L_pd is None:
            self._L_pd = self.stiffness.psd
        return self._L_pd

    @property
    def D(self) -> np.ndarray:
        return self.mass.d

    def e_system(self, rho: float) -> ESystem:
        """Factorization of rho*I + 2*L_pd, built once per rho"""
        with self._lock:
            system = self._factors.get(rho)
            if system is None:
                system = ESystem(self.L_pd, rho)
                self._factors[rho] = system
            return system


def dump_matrix_market(path: str, matrix: Union[SparseSymMatrix, MassDiag, sparse.spmatrix]):
    """Write a matrix in MatrixMarket coordinate format"""
    if isinstance(matrix, SparseSymMatrix):
        matrix = matrix.matrix
    elif isinstance(matrix, MassDiag):
        matrix = matrix.matrix
    scipy.io.mmwrite(path, sparse.coo_matrix(matrix), symmetry="symmetric")
