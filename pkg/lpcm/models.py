"""
lpcm Models - solver configuration, mode sets, solver state and partitions
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import ConfigError
from .mesh import TopologySummary
from .validator import UNASSIGNED


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of one ADMM solve"""
    mu: float
    p: float = 0.8
    rho: float = 1.0
    tol_rel_change: float = 1e-3
    max_iter: int = 5000
    newton_iters: int = 8
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not (self.mu > 0):
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if not (0 < self.p <= 1):
            raise ConfigError(f"p must lie in (0, 1], got {self.p}")
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if not (self.tol_rel_change > 0):
            raise ConfigError(f"tol_rel_change must be positive, got {self.tol_rel_change}")
        if self.max_iter < 1 or self.newton_iters < 1:
            raise ConfigError("max_iter and newton_iters must be at least 1")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {self.jobs}")

    def with_mu(self, mu: float) -> "SolverConfig":
        data = asdict(self)
        data["mu"] = mu
        return SolverConfig(**data)

    def to_dict(self) -> Dict:
        data = asdict(self)
        if math.isinf(self.mu):
            data["mu"] = "inf"
        return data


@dataclass(frozen=True)
class IterationRecord:
    """One row of the convergence history"""
    iter: int
    err_psi: float
    primal_residual_sq: float
    energy: float
    ortho_error: float


HISTORY_COLUMNS = ["iter", "err_psi", "primal_residual_sq", "energy", "ortho_error"]


@dataclass(eq=False)
class AdmmState:
    """Primal, split and dual variables of one solve plus its convergence history"""
    Psi: np.ndarray
    S: np.ndarray
    E: np.ndarray
    U_S: np.ndarray
    U_E: np.ndarray
    iter: int = 0
    history: List[IterationRecord] = field(default_factory=list)

    def __post_init__(self):
        shape = self.Psi.shape
        for name in ("S", "E", "U_S", "U_E"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    def record(self, rec: IterationRecord):
        if self.history and rec.iter <= self.history[-1].iter:
            raise ValueError("History records must increase in iteration count")
        self.history.append(rec)

    def primal_residual_sq(self) -> float:
        return float(np.sum((self.Psi - self.S) ** 2) + np.sum((self.Psi - self.E) ** 2))

    def export_csv(self, filename: str) -> None:
        """Export the convergence history to CSV"""
        with open(filename, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(HISTORY_COLUMNS)
            for rec in self.history:
                writer.writerow([rec.iter, repr(rec.err_psi), repr(rec.primal_residual_sq),
                                 repr(rec.energy), repr(rec.ortho_error)])


@dataclass(frozen=True, eq=False)
class ModeSet:
    """
    D-orthonormal modes Psi (n x N) with their (mu, p) provenance.

    `S` is the sparse split variable of the final iterate; supports are read
    from it when present since the prox produces exact zeros there.
    """
    Psi: np.ndarray
    mu: float
    p: float
    converged: bool
    iters: int
    S: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.Psi.shape[0]

    @property
    def N(self) -> int:
        return self.Psi.shape[1]

    def support_values(self) -> np.ndarray:
        return self.S if self.S is not None else self.Psi

    def column(self, k: int) -> np.ndarray:
        return self.Psi[:, k]

    def scalar_fields(self, prefix: str = "mode") -> Dict[str, np.ndarray]:
        """One named vertex field per mode, for the mesh writers"""
        width = len(str(max(self.N - 1, 0)))
        return {f"{prefix}_{k:0{width}d}": self.Psi[:, k] for k in range(self.N)}

    def to_dict(self) -> Dict:
        return {
            "n": self.n,
            "N": self.N,
            "mu": "inf" if math.isinf(self.mu) else self.mu,
            "p": self.p,
            "converged": self.converged,
            "iters": self.iters,
        }


@dataclass(frozen=True)
class CoverageReport:
    """Vertices not covered by any mode support"""
    uncovered_vertices: List[int]
    covered_fraction: float

    @property
    def covered(self) -> bool:
        return not self.uncovered_vertices


@dataclass(frozen=True)
class RoundRecord:
    """One round of basis growth"""
    round: int
    N: int
    mu: float
    covered_fraction: float
    iters: int
    converged: bool
    wall_time: float = 0.0


ROUND_COLUMNS = ["round", "N", "mu", "covered_fraction", "iters", "converged"]


@dataclass(eq=False)
class BasisResult:
    """Outcome of growing N at fixed mu, or mu at fixed N, until full coverage"""
    modes: ModeSet
    N: int
    mu: float
    covered: bool
    rounds: List[RoundRecord] = field(default_factory=list)
    mode_history: List[ModeSet] = field(default_factory=list)
    state: Optional[AdmmState] = None

    @property
    def mu_sequence(self) -> List[float]:
        return [r.mu for r in self.rounds]

    def export_csv(self, filename: str) -> None:
        """Round log; wall times are kept out so reruns produce identical files"""
        with open(filename, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(ROUND_COLUMNS)
            for r in self.rounds:
                writer.writerow([r.round, r.N, repr(r.mu), repr(r.covered_fraction),
                                 r.iters, int(r.converged)])

    def to_dict(self) -> Dict:
        return {
            "N": self.N,
            "mu": self.mu,
            "covered": self.covered,
            "rounds": len(self.rounds),
            "modes": self.modes.to_dict(),
        }


@dataclass
class PartSummary:
    """Per-part topology and size"""
    label: int
    seed: int
    triangle_count: int
    topology: TopologySummary
    boundary_loops: List[List[int]] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "label": self.label,
            "seed": self.seed,
            "triangle_count": self.triangle_count,
            "genus": self.topology.genus,
            "boundary_loops": self.topology.boundary_loop_count,
            "euler_characteristic": self.topology.euler_characteristic,
        }


@dataclass(eq=False)
class Partition:
    """Per-triangle part labels with seeds and per-part summaries"""
    labels: np.ndarray
    seeds: List[int]
    parts: List[PartSummary]
    epsilon: float

    @property
    def part_count(self) -> int:
        return len(self.parts)

    def unassigned_count(self) -> int:
        return int(np.sum(self.labels == UNASSIGNED))

    def sizes(self) -> Dict[int, int]:
        return {part.label: part.triangle_count for part in self.parts}

    def to_dict(self, include_boundaries: bool = False) -> Dict:
        data = {
            "epsilon": self.epsilon,
            "triangles": int(len(self.labels)),
            "parts": [part.to_dict() for part in self.parts],
        }
        if include_boundaries:
            data["boundaries"] = {str(p.label): p.boundary_loops for p in self.parts}
        return data

    def export_json(self, filename: str, include_boundaries: bool = False) -> None:
        """Per-part summary JSON (label, seed, triangle count, genus, boundary loops)"""
        with open(filename, "w") as f:
            json.dump(self.to_dict(include_boundaries), f, indent=2)

    def display_summary(self) -> str:
        output = f"\nPartition: {self.part_count} parts, {len(self.labels)} triangles\n"
        output += "-" * 60 + "\n"
        output += f"{'Label':<8} {'Seed':<10} {'Triangles':<12} {'Genus':<8} {'Boundaries':<10}\n"
        output += "-" * 60 + "\n"
        for p in self.parts:
            output += (f"{p.label:<8} {p.seed:<10} {p.triangle_count:<12} "
                       f"{p.topology.genus:<8} {p.topology.boundary_loop_count:<10}\n")
        output += "-" * 60 + "\n"
        return output


@dataclass(frozen=True)
class PatchStatus:
    """Genus-0 and boundary-count verdict for one final part"""
    label: int
    genus: int
    boundary_loop_count: int
    passes_P4: bool
    passes_P5: bool
    depth: int = 0

    @property
    def passes(self) -> bool:
        return self.passes_P4 and self.passes_P5

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class PatchReport:
    """Patch verdicts after refinement"""
    patches: List[PatchStatus]
    unresolved: List[int] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return all(p.passes for p in self.patches)

    def to_dict(self) -> Dict:
        return {
            "all_pass": self.all_pass,
            "unresolved": list(self.unresolved),
            "patches": [p.to_dict() for p in self.patches],
        }

    def export_json(self, filename: str) -> None:
        with open(filename, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    def display_summary(self) -> str:
        passed = sum(1 for p in self.patches if p.passes)
        output = f"\nPatch report: {passed}/{len(self.patches)} parts genus-0 with <= 2 boundaries\n"
        for p in self.patches:
            if not p.passes:
                output += (f"  part {p.label}: genus {p.genus}, "
                           f"{p.boundary_loop_count} boundaries (depth {p.depth})\n")
        return output
