"""
Tests for support coverage, basis growth over N and mu, and support-growth matching
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

import lpcm.basis
from lpcm import shapes
from lpcm.basis import (
    build_grow_mu,
    build_grow_N,
    coverage,
    match_modes,
    support_growth_fraction,
    support_mask,
    support_sizes,
)
from lpcm.errors import ConfigError
from lpcm.models import ModeSet, SolverConfig
from lpcm.operators import MeshOperators


def make_modes(Psi, S=None, mu=1.0):
    return ModeSet(Psi=np.asarray(Psi, dtype=float), mu=mu, p=0.8, converged=True, iters=1, S=S)


class FakeSolve:
    """Stand-in for the ADMM solve recording each (N, mu) it was asked for"""

    def __init__(self, covered_from_N=None):
        self.covered_from_N = covered_from_N
        self.calls = []

    def __call__(self, ops, N, cfg):
        self.calls.append((N, cfg.mu))
        Psi = np.ones((ops.n, N))
        if self.covered_from_N is None or N < self.covered_from_N:
            Psi[0] = 0.0
        return make_modes(Psi, mu=cfg.mu), None


class TestCoverage:

    def test_zero_row_uncovered(self):
        Psi = np.array([[1.0, 0.5], [0.0, 0.0], [0.2, 1.0]])
        report = coverage(make_modes(Psi))
        assert report.uncovered_vertices == [1]
        assert report.covered_fraction == pytest.approx(2 / 3)
        assert not report.covered

    def test_positive_modes_cover(self):
        report = coverage(make_modes(np.full((5, 2), 0.3)))
        assert report.covered
        assert report.covered_fraction == 1.0

    def test_half_support(self):
        Psi = np.zeros((8, 1))
        Psi[:4, 0] = 1.0
        assert coverage(make_modes(Psi)).covered_fraction == 0.5

    def test_relative_floor(self):
        Psi = np.array([[1.0], [1e-9], [1e-3]])
        assert support_mask(make_modes(Psi))[:, 0].tolist() == [True, False, True]

    def test_split_variable_wins(self):
        Psi = np.ones((3, 1))
        S = np.array([[1.0], [0.0], [1.0]])
        assert coverage(make_modes(Psi, S=S)).uncovered_vertices == [1]

    def test_zero_column_has_empty_support(self):
        Psi = np.zeros((4, 2))
        Psi[:, 0] = 1.0
        assert support_sizes(make_modes(Psi)).tolist() == [4, 0]


class TestGrowN:

    def test_stops_at_full_coverage(self, octahedron_ops, monkeypatch):
        fake = FakeSolve(covered_from_N=4)
        monkeypatch.setattr(lpcm.basis, "solve", fake)
        result = build_grow_N(octahedron_ops, 10.0, SolverConfig(mu=1.0))
        assert [r.N for r in result.rounds] == [2, 3, 4]
        assert result.covered
        assert result.N == 4
        assert all(mu == 10.0 for _, mu in fake.calls)

    def test_never_covered_stops_at_n_max(self, octahedron_ops, monkeypatch):
        monkeypatch.setattr(lpcm.basis, "solve", FakeSolve())
        result = build_grow_N(octahedron_ops, 10.0, SolverConfig(mu=1.0), N_max=5)
        assert not result.covered
        assert result.N == 5
        assert result.rounds[-1].covered_fraction == pytest.approx(5 / 6)

    def test_n_max_capped_by_vertex_count(self, octahedron_ops, monkeypatch):
        monkeypatch.setattr(lpcm.basis, "solve", FakeSolve())
        result = build_grow_N(octahedron_ops, 10.0, SolverConfig(mu=1.0), N_max=64)
        assert result.N == 6

    def test_history_kept(self, octahedron_ops, monkeypatch):
        monkeypatch.setattr(lpcm.basis, "solve", FakeSolve(covered_from_N=3))
        result = build_grow_N(octahedron_ops, 10.0, SolverConfig(mu=1.0), keep_history=True)
        assert [m.N for m in result.mode_history] == [2, 3]

    def test_invalid_range(self, octahedron_ops):
        with pytest.raises(ConfigError):
            build_grow_N(octahedron_ops, 10.0, SolverConfig(mu=1.0), N_start=4, N_max=3)
        with pytest.raises(ConfigError):
            build_grow_N(octahedron_ops, 10.0, SolverConfig(mu=1.0), N_start=7, N_max=8)
        with pytest.raises(ConfigError):
            build_grow_N(octahedron_ops, -1.0, SolverConfig(mu=1.0))

    def test_smooth_modes_cover_immediately(self, sphere_ops):
        result = build_grow_N(sphere_ops, 1e8, SolverConfig(mu=1.0, max_iter=300))
        assert result.covered
        assert len(result.rounds) == 1
        assert result.N == 2

    def test_strong_sparsity_leaves_vertices_uncovered(self):
        ops = MeshOperators.from_mesh(shapes.star(arms=6, subdivisions=2))
        result = build_grow_N(ops, 1e-3, SolverConfig(mu=1.0, max_iter=20), N_max=3)
        assert not result.covered
        assert result.N == 3
        assert result.rounds[-1].covered_fraction < 1.0


class TestGrowMu:

    def test_schedule_without_coverage(self, octahedron_ops, monkeypatch):
        fake = FakeSolve()
        monkeypatch.setattr(lpcm.basis, "solve", fake)
        result = build_grow_mu(octahedron_ops, 3, SolverConfig(mu=1.0), mu_max=512.0)
        assert result.mu_sequence == [8.0, 32.0, 128.0, 512.0]
        assert not result.covered
        assert [N for N, _ in fake.calls] == [3, 3, 3, 3]

    def test_stops_when_covered(self, octahedron_ops, monkeypatch):
        monkeypatch.setattr(lpcm.basis, "solve", FakeSolve(covered_from_N=2))
        result = build_grow_mu(octahedron_ops, 2, SolverConfig(mu=1.0))
        assert result.mu_sequence == [8.0]
        assert result.covered
        assert result.mu == 8.0

    def test_mu_max_below_first_step(self, octahedron_ops):
        with pytest.raises(ConfigError):
            build_grow_mu(octahedron_ops, 2, SolverConfig(mu=1.0), mu_max=4.0)

    def test_invalid_factor(self, octahedron_ops):
        with pytest.raises(ConfigError):
            build_grow_mu(octahedron_ops, 2, SolverConfig(mu=1.0), mu_factor=1.0)

    def test_round_csv(self, tmp_path, octahedron_ops, monkeypatch):
        monkeypatch.setattr(lpcm.basis, "solve", FakeSolve())
        result = build_grow_mu(octahedron_ops, 2, SolverConfig(mu=1.0), mu_max=32.0)
        path = tmp_path / "rounds.csv"
        result.export_csv(str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "round,N,mu,covered_fraction,iters,converged"
        assert lines[1].startswith("1,2,8.0,")
        assert len(lines) == 3


class TestSupportGrowth:

    def test_match_by_overlap(self):
        prev = make_modes([[1, 0], [1, 0], [0, 1], [0, 1]])
        nxt = make_modes([[0, 1], [0, 1], [1, 0], [1, 1]])
        assert sorted(match_modes(prev, nxt)) == [(0, 1), (1, 0)]

    def test_disjoint_supports_unmatched(self):
        prev = make_modes([[1.0], [0.0]])
        nxt = make_modes([[0.0], [1.0]])
        assert match_modes(prev, nxt) == []
        assert math.isnan(support_growth_fraction([prev, nxt]))

    def test_growth_fraction(self):
        small = make_modes([[1, 0], [0, 1], [0, 0], [0, 0]])
        mixed = make_modes([[1, 0], [1, 1], [1, 0], [0, 0]])
        # mode 0 grows from 1 to 3 vertices, mode 1 stays at 1
        assert support_growth_fraction([small, mixed]) == 1.0
        shrunk = make_modes([[1, 0], [0, 1], [0, 0], [0, 1]])
        # mode 0 shrinks 3 -> 1, mode 1 grows 1 -> 2
        assert support_growth_fraction([mixed, shrunk]) == 0.5

    def test_single_set_is_nan(self):
        assert math.isnan(support_growth_fraction([make_modes(np.ones((3, 1)))]))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
