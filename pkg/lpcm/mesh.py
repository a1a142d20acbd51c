"""
Triangle mesh model: connectivity, areas, boundary loops and topology
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, List, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import MeshError, TopologyError
from .validator import MeshValidator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TopologySummary:
    """Euler characteristic, boundary loops, genus and component count of a mesh"""
    euler_characteristic: int
    boundary_loop_count: int
    genus: int
    connected_component_count: int
    pinched_vertex_count: int = 0

    def to_dict(self) -> dict:
        return {
            "euler_characteristic": self.euler_characteristic,
            "boundary_loop_count": self.boundary_loop_count,
            "genus": self.genus,
            "connected_component_count": self.connected_component_count,
            "pinched_vertex_count": self.pinched_vertex_count,
        }


@dataclass(eq=False)
class TriMesh:
    """
    Validated, consistently oriented triangle mesh.

    Derived connectivity (edges, vertex adjacency, vertex stars, triangle
    adjacency, half-edge twins) is built once at construction; all arrays
    are read-only afterwards.
    """
    vertices: np.ndarray
    triangles: np.ndarray
    validate: bool = field(default=True, repr=False)

    edges: np.ndarray = field(init=False, repr=False)
    edge_triangles: np.ndarray = field(init=False, repr=False)
    vertex_neighbors: sparse.csr_matrix = field(init=False, repr=False)
    vertex_triangles: sparse.csr_matrix = field(init=False, repr=False)
    triangle_adjacency: sparse.csr_matrix = field(init=False, repr=False)
    halfedge_twin: np.ndarray = field(init=False, repr=False)
    areas: np.ndarray = field(init=False, repr=False)
    flipped: int = field(init=False, default=0)

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=np.float64)
        triangles = np.array(self.triangles, dtype=np.int64)
        if triangles.ndim == 1 and triangles.size == 0:
            triangles = triangles.reshape(0, 3)

        if self.validate:
            is_valid, errors = MeshValidator.validate_mesh(vertices, triangles)
            if not is_valid:
                raise MeshError("Invalid mesh: " + "; ".join(errors))

        self.vertices = vertices
        self.triangles = triangles
        self._build_connectivity()

        if self.validate:
            flipped = self._orient()
            if flipped:
                logger.warning("Flipped %d triangles to obtain a consistent orientation", flipped)
                self._build_connectivity()
            self.flipped = flipped

        unused = self.n_vertices - len(np.unique(self.triangles))
        if unused:
            logger.warning("Mesh has %d isolated vertices", unused)

        self.areas = MeshValidator.triangle_areas(self.vertices, self.triangles)
        for arr in (self.vertices, self.triangles, self.edges, self.edge_triangles,
                    self.halfedge_twin, self.areas):
            arr.flags.writeable = False

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    # ------------------------------------------------------------------ #
    #  Connectivity                                                      #
    # ------------------------------------------------------------------ #

    def _build_connectivity(self):
        n, m = self.n_vertices, self.n_triangles
        tri = self.triangles

        # half-edge h = 3*t + k runs tri[t, k] -> tri[t, (k+1) % 3]
        he_from = tri.reshape(-1)
        he_to = tri[:, [1, 2, 0]].reshape(-1)
        lo = np.minimum(he_from, he_to)
        hi = np.maximum(he_from, he_to)
        keys = lo * n + hi
        unique_keys, he_edge = np.unique(keys, return_inverse=True)
        self.edges = np.column_stack([unique_keys // n, unique_keys % n])
        self._halfedge_edge = he_edge

        order = np.argsort(he_edge, kind="stable")
        sorted_edges = he_edge[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_edges[1:] != sorted_edges[:-1]
        starts = np.nonzero(first)[0]
        counts = np.diff(np.append(starts, len(order)))

        edge_triangles = np.full((len(unique_keys), 2), -1, dtype=np.int64)
        edge_triangles[:, 0] = order[starts] // 3
        twin = np.full(3 * m, -1, dtype=np.int64)
        paired = starts[counts >= 2]
        h0, h1 = order[paired], order[paired + 1]
        edge_triangles[sorted_edges[paired], 1] = h1 // 3
        twin[h0] = h1
        twin[h1] = h0
        self.edge_triangles = edge_triangles
        self.halfedge_twin = twin

        e = self.edges
        ones = np.ones(len(e))
        adj = sparse.coo_matrix((ones, (e[:, 0], e[:, 1])), shape=(n, n))
        self.vertex_neighbors = (adj + adj.T).tocsr()
        self.vertex_neighbors.sort_indices()

        rows = tri.reshape(-1)
        cols = np.repeat(np.arange(m), 3)
        self.vertex_triangles = sparse.coo_matrix(
            (np.ones(3 * m), (rows, cols)), shape=(n, m)
        ).tocsr()

        inner = edge_triangles[:, 1] >= 0
        t0, t1 = edge_triangles[inner, 0], edge_triangles[inner, 1]
        tadj = sparse.coo_matrix(
            (np.ones(len(t0)), (t0, t1)), shape=(m, m)
        )
        self.triangle_adjacency = (tadj + tadj.T).tocsr()
        self.triangle_adjacency.sort_indices()

    def _orient(self) -> int:
        """
        Make triangle orientation consistent by a BFS over shared edges.
        Returns the number of flipped triangles; raises MeshError when the
        surface is not orientable.
        """
        m = self.n_triangles
        tri = self.triangles
        he_from = tri.reshape(-1)
        he_to = tri[:, [1, 2, 0]].reshape(-1)
        forward = he_from < he_to
        twin = self.halfedge_twin

        # interior edges whose two half-edges point the same way are inconsistent
        has_twin = twin >= 0
        if not np.any(forward[has_twin] == forward[twin[has_twin]]):
            return 0

        flip = np.full(m, -1, dtype=np.int8)
        for root in range(m):
            if flip[root] >= 0:
                continue
            flip[root] = 0
            queue = deque([root])
            while queue:
                t = queue.popleft()
                for k in range(3):
                    h = 3 * t + k
                    g = twin[h]
                    if g < 0:
                        continue
                    s = g // 3
                    need = flip[t] ^ (forward[h] == forward[g])
                    if flip[s] < 0:
                        flip[s] = need
                        queue.append(s)
                    elif flip[s] != need:
                        raise MeshError(
                            f"Mesh is not orientable (conflict between triangles {t} and {s})"
                        )

        to_flip = flip == 1
        if not np.any(to_flip):
            return 0
        triangles = tri.copy()
        triangles[to_flip] = triangles[to_flip][:, [0, 2, 1]]
        self.triangles = triangles
        return int(np.sum(to_flip))

    def neighbors(self, i: int) -> np.ndarray:
        """Vertex one-ring N(X_i)"""
        adj = self.vertex_neighbors
        return adj.indices[adj.indptr[i]:adj.indptr[i + 1]]

    def vertex_star(self, i: int) -> np.ndarray:
        """Triangles incident to vertex i, sorted"""
        inc = self.vertex_triangles
        return np.sort(inc.indices[inc.indptr[i]:inc.indptr[i + 1]])

    def triangle_neighbors(self, t: int) -> np.ndarray:
        """Edge-adjacent triangles of t, sorted"""
        adj = self.triangle_adjacency
        return np.sort(adj.indices[adj.indptr[t]:adj.indptr[t + 1]])

    # ------------------------------------------------------------------ #
    #  Geometry                                                          #
    # ------------------------------------------------------------------ #

    def triangle_area(self, t: int) -> float:
        """Area of triangle t (half the cross-product magnitude)"""
        if not 0 <= t < self.n_triangles:
            raise MeshError(f"Triangle index {t} out of range (m={self.n_triangles})")
        return float(self.areas[t])

    def total_area(self) -> float:
        return float(np.sum(self.areas))

    # ------------------------------------------------------------------ #
    #  Topology                                                          #
    # ------------------------------------------------------------------ #

    def edge_connected_components(self) -> Tuple[int, np.ndarray]:
        """Components of triangles under shared-edge adjacency: (count, per-triangle label)"""
        count, labels = connected_components(self.triangle_adjacency, directed=False)
        return int(count), labels

    def boundary_halfedges(self) -> np.ndarray:
        return np.nonzero(self.halfedge_twin < 0)[0]

    def _trace_boundary(self) -> List[Tuple[int, List[int]]]:
        """(start half-edge, ordered vertices) per boundary loop"""
        tri = self.triangles
        twin = self.halfedge_twin
        visited = np.zeros(3 * self.n_triangles, dtype=bool)
        traced = []
        limit = len(twin) + 1

        for start in self.boundary_halfedges():
            if visited[start]:
                continue
            loop = []
            h = int(start)
            for _ in range(limit):
                visited[h] = True
                t, k = divmod(h, 3)
                loop.append(int(tri[t, k]))
                nxt = 3 * t + (k + 1) % 3
                # rotate through the fan at the head vertex until the next boundary half-edge
                while twin[nxt] >= 0:
                    s, j = divmod(int(twin[nxt]), 3)
                    nxt = 3 * s + (j + 1) % 3
                h = nxt
                if h == start:
                    break
            else:
                raise TopologyError("Boundary walk did not close; mesh is not a manifold surface")
            traced.append((int(start), loop))
        return traced

    def boundary_loops(self) -> List[List[int]]:
        """
        Ordered vertex loops along the boundary.

        The walk turns through the triangle fan at each vertex, so a vertex
        where two loops pinch is passed once per loop.
        """
        return [loop for _, loop in self._trace_boundary()]

    def topology(self) -> TopologySummary:
        """
        Euler characteristic, boundary loops and genus.

        Genus is computed per edge-connected component as (2 - chi - b) / 2.
        Boundary vertices shared by several boundary fans are counted once
        per fan for the genus; the reported characteristic is the exact
        V - E + F.
        """
        used = np.unique(self.triangles)
        chi = len(used) - self.n_edges + self.n_triangles

        n_comp, comp = self.edge_connected_components()
        boundary = self.boundary_halfedges()
        traced = self._trace_boundary()

        faces = np.bincount(comp, minlength=n_comp)
        edge_count = np.bincount(comp[self.edge_triangles[:, 0]], minlength=n_comp)
        # one boundary fan per outgoing boundary half-edge
        fans = np.bincount(comp[boundary // 3], minlength=n_comp)

        he_from = self.triangles.reshape(-1)
        out_degree = np.bincount(he_from[boundary], minlength=self.n_vertices)
        pinched = int(np.sum(out_degree > 1))

        # vertices of each component that carry no boundary half-edge there
        all_keys = np.unique(he_from * n_comp + np.repeat(comp, 3))
        boundary_keys = np.unique(he_from[boundary] * n_comp + comp[boundary // 3])
        interior_keys = np.setdiff1d(all_keys, boundary_keys, assume_unique=True)
        interior_verts = np.bincount(interior_keys % n_comp, minlength=n_comp)

        loop_count = np.zeros(n_comp, dtype=np.int64)
        for start, _ in traced:
            loop_count[comp[start // 3]] += 1

        genus_total = 0
        for c in range(n_comp):
            chi_c = int(interior_verts[c] + fans[c] - edge_count[c] + faces[c])
            twice_genus = 2 - chi_c - int(loop_count[c])
            if twice_genus < 0 or twice_genus % 2:
                raise TopologyError(
                    f"Component {c}: genus (2 - {chi_c} - {loop_count[c]})/2 is not a "
                    "non-negative integer; surface is non-orientable or broken"
                )
            genus_total += twice_genus // 2

        return TopologySummary(
            euler_characteristic=int(chi),
            boundary_loop_count=len(traced),
            genus=int(genus_total),
            connected_component_count=n_comp,
            pinched_vertex_count=pinched,
        )

    # ------------------------------------------------------------------ #
    #  Submesh extraction                                                #
    # ------------------------------------------------------------------ #

    def submesh(self, triangle_ids: Iterable[int]) -> "SubMesh":
        """Induced mesh on a triangle subset, with maps back to the parent"""
        ids = np.unique(np.fromiter(triangle_ids, dtype=np.int64))
        if len(ids) == 0:
            raise MeshError("Empty triangle selection")
        if ids[0] < 0 or ids[-1] >= self.n_triangles:
            raise MeshError("Triangle selection index out of range")
        tris = self.triangles[ids]
        verts = np.unique(tris)
        remap = np.full(self.n_vertices, -1, dtype=np.int64)
        remap[verts] = np.arange(len(verts))
        child = TriMesh(self.vertices[verts], remap[tris], validate=False)
        return SubMesh(mesh=child, vertex_map=verts, triangle_map=ids)


@dataclass(frozen=True)
class SubMesh:
    """Induced submesh plus the vertex and triangle index maps into its parent"""
    mesh: TriMesh
    vertex_map: np.ndarray
    triangle_map: np.ndarray


def topology(mesh: TriMesh) -> TopologySummary:
    return mesh.topology()


def submesh(mesh: TriMesh, triangle_ids: Iterable[int]) -> SubMesh:
    return mesh.submesh(triangle_ids)


def triangle_area(mesh: TriMesh, t: int) -> float:
    return mesh.triangle_area(t)


def boundary_loops(mesh: TriMesh) -> List[List[int]]:
    return mesh.boundary_loops()


def edge_connected_components(mesh: TriMesh) -> Tuple[int, np.ndarray]:
    return mesh.edge_connected_components()


def orient(vertices: np.ndarray, triangles: np.ndarray) -> Tuple[np.ndarray, int]:
    """Consistently oriented copy of a triangle array and the number of flipped triangles"""
    mesh = TriMesh(vertices, triangles)
    return np.array(mesh.triangles), mesh.flipped
