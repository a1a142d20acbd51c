"""
Tests for the cotangent stiffness, lumped mass, weighted Lp norm and E-system
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.io
from scipy import sparse

sys.path.insert(0, str(Path(__file__).parent.parent))

from conftest import hexagon_fan, two_equilateral
from lpcm import shapes
from lpcm.errors import FactorizationError, OperatorError
from lpcm.mesh import TriMesh
from lpcm.operators import (
    ESystem,
    MeshOperators,
    cotan_stiffness,
    dump_matrix_market,
    lumped_mass,
    weighted_lp_norm_p,
)


class TestCotanStiffness:

    def test_shared_equilateral_edge(self):
        L = cotan_stiffness(two_equilateral())
        assert L.weight(0, 1) == pytest.approx(1 / np.sqrt(3.0), rel=1e-12)

    def test_boundary_edge_single_term(self):
        L = cotan_stiffness(two_equilateral())
        assert L.weight(0, 2) == pytest.approx(0.5 / np.sqrt(3.0), rel=1e-12)

    def test_right_angle_boundary_edge(self):
        L = cotan_stiffness(shapes.single_triangle())
        assert abs(L.weight(1, 2)) < 1e-15
        assert L.weight(0, 1) == pytest.approx(0.5)

    def test_rows_sum_to_zero(self, small_sphere):
        L = cotan_stiffness(small_sphere)
        row_sums = np.asarray(L.matrix.sum(axis=1)).ravel()
        assert np.max(np.abs(row_sums)) <= 1e-10 * np.max(np.abs(L.matrix.data))

    def test_symmetric(self, small_sphere):
        assert cotan_stiffness(small_sphere).asymmetry() <= 1e-12

    def test_psd_form_is_positive_semidefinite(self, small_sphere, rng):
        L_pd = cotan_stiffness(small_sphere).psd
        for _ in range(200):
            v = rng.standard_normal(small_sphere.n_vertices)
            assert v @ (L_pd @ v) >= -1e-10 * (v @ v)

    def test_pattern_matches_adjacency(self, octahedron):
        L = cotan_stiffness(octahedron)
        pattern = (L.matrix != 0).astype(int) - sparse.identity(6, dtype=int)
        assert (pattern != octahedron.vertex_neighbors.astype(int)).nnz == 0

    def test_grid_five_point_stencil(self):
        mesh = shapes.grid(5, 5)
        L = cotan_stiffness(mesh).matrix.toarray()
        center = 2 * 5 + 2
        assert L[center, center] == pytest.approx(-4.0, abs=1e-10)
        for nb in (center - 5, center + 5, center - 1, center + 1):
            assert L[center, nb] == pytest.approx(1.0, abs=1e-10)
        for diag in (center - 6, center + 6, center - 4, center + 4):
            assert abs(L[center, diag]) < 1e-10

    def test_degenerate_triangle_overflow(self):
        vertices = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 1e-14, 0]])
        mesh = TriMesh(vertices, np.array([[0, 1, 2]]), validate=False)
        with pytest.raises(OperatorError, match="triangle 0"):
            cotan_stiffness(mesh)

    def test_entries(self, octahedron):
        rows, cols, vals = cotan_stiffness(octahedron).entries()
        assert len(rows) == len(cols) == len(vals) == 6 + 2 * 12


class TestLumpedMass:

    def test_fan_center(self):
        d = lumped_mass(hexagon_fan())
        assert d.d[0] == pytest.approx(3 * np.sqrt(3.0) / 2, rel=1e-12)

    def test_single_triangle(self):
        d = lumped_mass(shapes.single_triangle())
        assert np.allclose(d.d, 0.5)

    def test_octahedron_uniform(self, octahedron):
        d = lumped_mass(octahedron).d
        assert np.allclose(d, d[0])
        assert np.sum(d) == pytest.approx(3 * octahedron.total_area())

    def test_third_lumping(self, small_sphere):
        full = lumped_mass(small_sphere, "full").d
        third = lumped_mass(small_sphere, "third").d
        assert np.allclose(third, full / 3)
        assert np.sum(third) == pytest.approx(small_sphere.total_area())

    def test_isolated_vertex(self):
        vertices = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0], [5.0, 5, 5]])
        mesh = TriMesh(vertices, np.array([[0, 1, 2]]))
        with pytest.raises(OperatorError, match="Isolated vertex 3"):
            lumped_mass(mesh)

    def test_unknown_lumping(self, octahedron):
        with pytest.raises(OperatorError):
            lumped_mass(octahedron, "half")


class TestWeightedNorm:

    def test_zero(self):
        assert weighted_lp_norm_p(np.zeros((4, 2)), np.ones(4), 0.8) == 0.0

    def test_scalar(self):
        assert weighted_lp_norm_p(np.array([[3.0]]), np.array([2.0]), 1.0) == pytest.approx(6.0)

    def test_random_against_loop(self, rng):
        S = rng.standard_normal((3, 2))
        d = rng.uniform(0.5, 2.0, 3)
        expected = sum(d[i] * abs(S[i, j]) ** 0.8 for i in range(3) for j in range(2))
        assert weighted_lp_norm_p(S, d, 0.8) == pytest.approx(expected, rel=1e-12)


class TestESystem:

    def test_matches_dense_solve(self, octahedron_ops, rng):
        system = octahedron_ops.e_system(1.0)
        B = rng.standard_normal((6, 3))
        dense = np.linalg.solve(np.eye(6) + 2 * octahedron_ops.L_pd.toarray(), B)
        X = system.solve(B)
        assert np.allclose(X, dense, atol=1e-9)
        assert np.linalg.norm(B - system.matrix @ X) <= 1e-10 * np.linalg.norm(B)

    def test_vector_rhs(self, octahedron_ops, rng):
        b = rng.standard_normal(6)
        x = octahedron_ops.e_system(2.0).solve(b)
        assert x.shape == (6,)
        assert np.allclose((2.0 * np.eye(6) + 2 * octahedron_ops.L_pd.toarray()) @ x, b)

    def test_zero_rhs(self, octahedron_ops):
        assert np.all(octahedron_ops.e_system(1.0).solve(np.zeros((6, 2))) == 0)

    def test_threaded_columns(self, sphere_ops, rng):
        system = sphere_ops.e_system(1.0)
        B = rng.standard_normal((sphere_ops.n, 5))
        assert np.allclose(system.solve(B, jobs=3), system.solve(B), atol=1e-10)

    def test_factorization_cached_per_rho(self, octahedron_ops):
        assert octahedron_ops.e_system(1.0) is octahedron_ops.e_system(1.0)
        assert octahedron_ops.e_system(1.0) is not octahedron_ops.e_system(2.0)

    def test_rejects_non_positive_rho(self, octahedron_ops):
        with pytest.raises(FactorizationError):
            ESystem(octahedron_ops.L_pd, 0.0)


class TestMeshOperators:

    def test_from_mesh(self, octahedron):
        ops = MeshOperators.from_mesh(octahedron, "third")
        assert ops.n == 6
        assert ops.mass.lumping == "third"
        assert np.allclose(ops.L_pd.toarray(), -ops.stiffness.matrix.toarray())

    def test_matrix_market_dump(self, tmp_path, octahedron_ops):
        path = tmp_path / "L.mtx"
        dump_matrix_market(str(path), octahedron_ops.stiffness)
        loaded = scipy.io.mmread(str(path)).toarray()
        assert np.allclose(loaded, octahedron_ops.stiffness.matrix.toarray())


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
