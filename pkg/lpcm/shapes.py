"""
Synthetic test shapes: octahedron, icosphere, torus, disk, grid, open
cylinder, star with protrusions and ellipsoid with a bump
"""

from typing import Sequence, Tuple

import numpy as np
import trimesh

from .mesh import TriMesh


def octahedron(edge: float = 1.0) -> TriMesh:
    """Regular octahedron with the given edge length (6 vertices, 8 triangles)"""
    a = edge / np.sqrt(2.0)
    vertices = np.array([
        [a, 0, 0], [-a, 0, 0], [0, a, 0], [0, -a, 0], [0, 0, a], [0, 0, -a],
    ], dtype=np.float64)
    triangles = np.array([
        [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
        [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
    ])
    return TriMesh(vertices, triangles)


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriMesh:
    """Subdivided icosahedron projected to the sphere (642 vertices at 3 subdivisions)"""
    sphere = trimesh.creation.icosphere(subdivisions=subdivisions, radius=radius)
    return TriMesh(np.asarray(sphere.vertices, dtype=np.float64), np.asarray(sphere.faces))


def _grid_triangles(rows: int, cols: int, wrap_rows: bool, wrap_cols: bool) -> np.ndarray:
    """Two triangles per cell of a rows x cols vertex grid, optionally periodic"""
    def idx(i, j):
        return (i % rows) * cols + (j % cols)

    tris = []
    for i in range(rows if wrap_rows else rows - 1):
        for j in range(cols if wrap_cols else cols - 1):
            a, b, c, d = idx(i, j), idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j)
            tris.append([a, b, c])
            tris.append([a, c, d])
    return np.array(tris)


def torus(major: float = 2.0, minor: float = 0.7, n_major: int = 32, n_minor: int = 16) -> TriMesh:
    """Closed torus around the z axis (genus 1)"""
    u = 2 * np.pi * np.arange(n_major) / n_major
    v = 2 * np.pi * np.arange(n_minor) / n_minor
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = major + minor * np.cos(vv)
    vertices = np.column_stack([
        (ring * np.cos(uu)).ravel(), (ring * np.sin(uu)).ravel(), (minor * np.sin(vv)).ravel(),
    ])
    return TriMesh(vertices, _grid_triangles(n_major, n_minor, True, True))


def grid(nx: int = 5, ny: int = 5, spacing: float = 1.0) -> TriMesh:
    """Flat nx x ny vertex grid, every cell cut along the same diagonal"""
    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing, indexing="ij")
    vertices = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)])
    return TriMesh(vertices, _grid_triangles(nx, ny, False, False))


def disk(radius: float = 1.0, rings: int = 6, sectors: int = 12) -> TriMesh:
    """Flat triangulated disk: a centre vertex and concentric rings"""
    vertices = [[0.0, 0.0, 0.0]]
    for r in range(1, rings + 1):
        theta = 2 * np.pi * np.arange(sectors) / sectors
        rad = radius * r / rings
        vertices.extend(np.column_stack([rad * np.cos(theta), rad * np.sin(theta),
                                         np.zeros(sectors)]).tolist())

    def ring_idx(r, j):
        return 1 + (r - 1) * sectors + (j % sectors)

    tris = [[0, ring_idx(1, j), ring_idx(1, j + 1)] for j in range(sectors)]
    for r in range(1, rings):
        for j in range(sectors):
            a, b = ring_idx(r, j), ring_idx(r, j + 1)
            c, d = ring_idx(r + 1, j + 1), ring_idx(r + 1, j)
            tris.append([a, d, c])
            tris.append([a, c, b])
    return TriMesh(np.array(vertices), np.array(tris))


def open_cylinder(radius: float = 1.0, height: float = 2.0, n_around: int = 24,
                  n_height: int = 9) -> TriMesh:
    """Uncapped cylinder along z from -height/2 to height/2 (two boundary loops)"""
    theta = 2 * np.pi * np.arange(n_around) / n_around
    z = np.linspace(-height / 2, height / 2, n_height)
    zz, tt = np.meshgrid(z, theta, indexing="ij")
    vertices = np.column_stack([radius * np.cos(tt).ravel(), radius * np.sin(tt).ravel(), zz.ravel()])
    return TriMesh(vertices, _grid_triangles(n_height, n_around, False, True))


def star(arms: int = 5, subdivisions: int = 3, length: float = 1.2, sharpness: float = 12.0) -> TriMesh:
    """Sphere with `arms` smooth protrusions evenly spaced around the equator"""
    sphere = trimesh.creation.icosphere(subdivisions=subdivisions)
    unit = np.asarray(sphere.vertices, dtype=np.float64)
    angles = 2 * np.pi * np.arange(arms) / arms
    directions = np.column_stack([np.cos(angles), np.sin(angles), np.zeros(arms)])
    cosines = np.clip(unit @ directions.T, 0.0, 1.0)
    radial = 1.0 + length * np.max(cosines ** sharpness, axis=1)
    return TriMesh(unit * radial[:, None], np.asarray(sphere.faces))


def ellipsoid_with_bump(axes: Sequence[float] = (2.5, 1.5, 1.5), subdivisions: int = 4,
                        height: float = 0.6, width: float = 0.25,
                        direction: Sequence[float] = (0.0, 0.0, 1.0)) -> Tuple[TriMesh, np.ndarray]:
    """
    Ellipsoid with a Gaussian bump; returns the mesh and a boolean mask of
    the bump-region vertices (angular distance below two bump widths).
    """
    sphere = trimesh.creation.icosphere(subdivisions=subdivisions)
    unit = np.asarray(sphere.vertices, dtype=np.float64)
    c = np.asarray(direction, dtype=np.float64)
    c = c / np.linalg.norm(c)
    angle = np.arccos(np.clip(unit @ c, -1.0, 1.0))
    radial = 1.0 + height * np.exp(-0.5 * (angle / width) ** 2)
    vertices = unit * radial[:, None] * np.asarray(axes, dtype=np.float64)[None, :]
    return TriMesh(vertices, np.asarray(sphere.faces)), angle < 2 * width


def single_triangle() -> TriMesh:
    return TriMesh(np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0]]), np.array([[0, 1, 2]]))
