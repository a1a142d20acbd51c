"""
Validation module for triangle meshes and mesh partitions
"""

from typing import TYPE_CHECKING, Dict, List, Tuple

import numpy as np

if TYPE_CHECKING:
    from .mesh import TriMesh
    from .models import Partition

# Relative area floor below which a triangle counts as degenerate
DEGENERATE_AREA_RATIO = 1e-12

UNASSIGNED = -1


class MeshValidator:
    """Validates raw vertex/triangle arrays before a TriMesh is built"""

    @staticmethod
    def validate_mesh(vertices: np.ndarray, triangles: np.ndarray) -> Tuple[bool, List[str]]:
        """
        Validate a triangle mesh given as arrays
        Returns: (is_valid, list_of_errors)
        """
        errors = []

        if vertices.ndim != 2 or vertices.shape[1] != 3:
            errors.append(f"Vertices must be an (n, 3) array, got shape {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            errors.append(f"Triangles must be an (m, 3) array, got shape {triangles.shape}")
        if errors:
            return False, errors
        if len(triangles) == 0:
            return False, ["Mesh has no triangles"]
        if not np.all(np.isfinite(vertices)):
            errors.append("Vertex coordinates must be finite")

        n = len(vertices)
        bad = np.nonzero((triangles < 0) | (triangles >= n))
        if len(bad[0]):
            for t in np.unique(bad[0])[:10]:
                errors.append(
                    f"Triangle {t} {triangles[t].tolist()}: vertex index out of range (n={n})"
                )
            return False, errors

        repeated = (
            (triangles[:, 0] == triangles[:, 1])
            | (triangles[:, 1] == triangles[:, 2])
            | (triangles[:, 2] == triangles[:, 0])
        )
        for t in np.nonzero(repeated)[0][:10]:
            errors.append(f"Triangle {t} {triangles[t].tolist()}: repeated vertex index (degenerate)")

        areas = MeshValidator.triangle_areas(vertices, triangles)
        p = vertices[triangles]
        longest = np.max(
            np.stack([
                np.sum((p[:, 1] - p[:, 0]) ** 2, axis=1),
                np.sum((p[:, 2] - p[:, 1]) ** 2, axis=1),
                np.sum((p[:, 0] - p[:, 2]) ** 2, axis=1),
            ]),
            axis=0,
        )
        flat = (areas <= DEGENERATE_AREA_RATIO * longest) & ~repeated
        for t in np.nonzero(flat)[0][:10]:
            errors.append(f"Triangle {t}: zero area (degenerate), area={areas[t]:.3e}")

        edges = np.sort(triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        unique_edges, counts = np.unique(edges, axis=0, return_counts=True)
        for e in np.nonzero(counts > 2)[0][:10]:
            a, b = unique_edges[e]
            errors.append(f"Edge ({a}, {b}) shared by {counts[e]} triangles: non-manifold edge")

        return len(errors) == 0, errors

    @staticmethod
    def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
        """Half cross-product magnitude per triangle"""
        p = vertices[triangles]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)


class PartitionValidator:
    """Checks cover, connectivity, interfaces and patch shape of a labelled mesh"""

    @staticmethod
    def validate_partition(mesh: "TriMesh", partition: "Partition") -> Tuple[bool, List[str]]:
        """
        Check full cover, label conservation, edge-connected parts
        and simple interfaces.
        Returns: (is_valid, list_of_errors)
        """
        errors = []
        labels = np.asarray(partition.labels)

        if labels.shape != (mesh.n_triangles,):
            return False, [f"Expected {mesh.n_triangles} labels, got {labels.shape}"]

        unassigned = int(np.sum(labels == UNASSIGNED))
        if unassigned:
            errors.append(f"{unassigned} triangles are unassigned")

        sizes = PartitionValidator.part_sizes(labels)
        if sum(sizes.values()) + unassigned != mesh.n_triangles:
            errors.append("Part sizes do not add up to the triangle count")

        for label in sorted(sizes):
            pieces = PartitionValidator.connected_pieces(mesh, labels, label)
            if pieces != 1:
                errors.append(f"Part {label} is split into {pieces} edge-connected pieces")

        errors.extend(PartitionValidator.interface_errors(mesh, labels))
        return len(errors) == 0, errors

    @staticmethod
    def part_sizes(labels: np.ndarray) -> Dict[int, int]:
        """Triangle count per assigned label"""
        assigned = labels[labels != UNASSIGNED]
        values, counts = np.unique(assigned, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    @staticmethod
    def connected_pieces(mesh: "TriMesh", labels: np.ndarray, label: int) -> int:
        """Number of edge-connected pieces of one part (flood fill over shared edges)"""
        ids = np.nonzero(labels == label)[0]
        if len(ids) == 0:
            return 0
        return mesh.submesh(ids).mesh.edge_connected_components()[0]

    @staticmethod
    def interface_errors(mesh: "TriMesh", labels: np.ndarray) -> List[str]:
        """
        Every interface between two parts is made of simple edge paths.
        A vertex may carry at most two interface edges of one part pair,
        unless it is a junction shared by three or more parts.
        """
        errors = []
        et = mesh.edge_triangles
        interior = et[:, 1] >= 0
        la = labels[et[interior, 0]]
        lb = labels[et[interior, 1]]
        cut = (la != lb) & (la != UNASSIGNED) & (lb != UNASSIGNED)
        if not np.any(cut):
            return errors

        cut_edges = mesh.edges[interior][cut]
        pairs = np.sort(np.column_stack([la[cut], lb[cut]]), axis=1)

        # parts touching each vertex
        tri_labels = np.repeat(labels, 3)
        tri_verts = mesh.triangles.reshape(-1)
        vertex_parts: Dict[int, set] = {}
        for v, lab in zip(tri_verts.tolist(), tri_labels.tolist()):
            vertex_parts.setdefault(v, set()).add(lab)

        degree: Dict[Tuple[int, int, int], int] = {}
        for (a, b), (u, v) in zip(pairs.tolist(), cut_edges.tolist()):
            for w in (u, v):
                key = (a, b, w)
                degree[key] = degree.get(key, 0) + 1

        for (a, b, w), count in sorted(degree.items()):
            if count > 2 and len(vertex_parts.get(w, ())) < 3:
                errors.append(
                    f"Interface between parts {a} and {b} branches at vertex {w} ({count} edges)"
                )
        return errors

    @staticmethod
    def patch_flags(genus: int, boundary_loop_count: int) -> Tuple[bool, bool]:
        """(genus is 0, at most two boundary loops)"""
        return genus == 0, boundary_loop_count <= 2
