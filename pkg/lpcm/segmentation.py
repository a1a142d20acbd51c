"""
Segmentation from compressed modes: seed selection, region growing with
the overlap-band rule, and recursive refinement into genus-0 patches
"""

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .basis import MU_FACTOR, MU_MAX, MU_START, build_grow_mu, coverage
from .errors import CoverageError, LpcmError, SegmentationError
from .hierarchical import PatchNode, PatchTree
from .mesh import TriMesh
from .models import ModeSet, Partition, PartSummary, PatchReport, PatchStatus, SolverConfig
from .operators import MeshOperators
from .validator import UNASSIGNED, PartitionValidator

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.01
MAX_DEPTH = 8

# Maps a submesh to a partition of its triangles
Splitter = Callable[[TriMesh], Partition]


def select_seeds(modes: ModeSet) -> List[int]:
    """argmax_i |psi_k(X_i)| per mode; ties go to the lowest vertex index"""
    values = np.abs(modes.Psi)
    seeds = []
    for k in range(modes.N):
        col = values[:, k]
        if not np.any(col > 0):
            raise SegmentationError(f"Mode {k} is identically zero; no seed can be selected")
        seeds.append(int(np.argmax(col)))
    return seeds


def triangle_values(mesh: TriMesh, modes: ModeSet) -> np.ndarray:
    """m x N mode values on triangles (mean of the three vertex values)"""
    return modes.Psi[mesh.triangles].mean(axis=1)


def mode_on_triangle(mesh: TriMesh, modes: ModeSet, k: int, t: int) -> float:
    return float(np.mean(modes.Psi[mesh.triangles[t], k]))


def argmax_labels(mesh: TriMesh, modes: ModeSet) -> np.ndarray:
    """Label of the largest |psi_k| on each triangle"""
    return np.argmax(np.abs(triangle_values(mesh, modes)), axis=1)


def region_grow(mesh: TriMesh, modes: ModeSet, epsilon: float = DEFAULT_EPSILON) -> Partition:
    """
    Grow one part per mode from its seed.

    Buffers start with the triangles around each seed and are served
    round-robin, one triangle per turn. An unassigned triangle joins part k
    when | |psi_k(t)| - max_i |psi_i(t)| | <= epsilon, and its edge
    neighbours are queued for k. Leftover triangles are swept into the
    neighbouring part with the longest shared boundary.
    """
    if modes.n != mesh.n_vertices:
        raise SegmentationError(f"ModeSet has {modes.n} rows, mesh has {mesh.n_vertices} vertices")
    if epsilon < 0:
        raise SegmentationError(f"epsilon must be non-negative, got {epsilon}")
    cov = coverage(modes)
    if not cov.covered:
        raise CoverageError(
            f"{len(cov.uncovered_vertices)} vertices are not covered by any mode",
            uncovered_count=len(cov.uncovered_vertices),
        )

    seeds = select_seeds(modes)
    mag = np.abs(triangle_values(mesh, modes))
    best = mag.max(axis=1)
    N = modes.N
    m = mesh.n_triangles

    labels = np.full(m, UNASSIGNED, dtype=np.int64)
    seen = np.zeros((N, m), dtype=bool)
    buffers: List[deque] = []
    for k, s in enumerate(seeds):
        star = mesh.vertex_star(s)
        seen[k, star] = True
        buffers.append(deque(star.tolist()))

    adj = mesh.triangle_adjacency
    while any(buffers):
        for k in range(N):
            if not buffers[k]:
                continue
            t = buffers[k].popleft()
            if labels[t] != UNASSIGNED:
                continue
            if abs(mag[t, k] - best[t]) <= epsilon:
                labels[t] = k
                nbrs = adj.indices[adj.indptr[t]:adj.indptr[t + 1]]
                fresh = nbrs[~seen[k, nbrs]]
                seen[k, fresh] = True
                buffers[k].extend(fresh.tolist())

    grown = int(np.sum(labels != UNASSIGNED))
    logger.debug("Region growing assigned %d of %d triangles", grown, m)

    labels = _keep_largest_pieces(mesh, labels, N)
    labels = _sweep_orphans(mesh, labels, mag)
    labels, seeds = _drop_empty_parts(labels, seeds)
    return summarize_partition(mesh, labels, seeds, epsilon)


def _keep_largest_pieces(mesh: TriMesh, labels: np.ndarray, N: int) -> np.ndarray:
    """Release every edge-connected piece of a part but its largest"""
    labels = labels.copy()
    for k in range(N):
        ids = np.nonzero(labels == k)[0]
        if len(ids) == 0:
            continue
        sub = mesh.submesh(ids)
        count, comp = sub.mesh.edge_connected_components()
        if count == 1:
            continue
        sizes = np.bincount(comp)
        keep = int(np.argmax(sizes))
        released = sub.triangle_map[comp != keep]
        labels[released] = UNASSIGNED
        logger.debug("Part %d: released %d triangles in %d detached pieces",
                     k, len(released), count - 1)
    return labels


def _sweep_orphans(mesh: TriMesh, labels: np.ndarray, mag: np.ndarray) -> np.ndarray:
    """
    Assign unassigned triangles, in waves, to the adjacent part sharing the
    longest boundary with them; ties go to the lowest label.
    """
    labels = labels.copy()
    N = mag.shape[1]
    et = mesh.edge_triangles
    interior = et[:, 1] >= 0
    t0, t1 = et[interior, 0], et[interior, 1]
    e = mesh.edges[interior]
    lengths = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)

    swept = 0
    while True:
        orphan = labels == UNASSIGNED
        if not np.any(orphan):
            break
        l0, l1 = labels[t0], labels[t1]
        a = orphan[t0] & (l1 != UNASSIGNED)
        b = orphan[t1] & (l0 != UNASSIGNED)
        tri = np.concatenate([t0[a], t1[b]])
        lab = np.concatenate([l1[a], l0[b]])
        if len(tri) == 0:
            break
        rows, row_of = np.unique(tri, return_inverse=True)
        scores = np.zeros((len(rows), N))
        np.add.at(scores, (row_of, lab), np.concatenate([lengths[a], lengths[b]]))
        labels[rows] = np.argmax(scores, axis=1)
        swept += len(rows)

    leftover = np.nonzero(labels == UNASSIGNED)[0]
    if len(leftover):
        logger.warning("%d triangles have no labelled neighbour; assigning by largest mode value",
                       len(leftover))
        labels[leftover] = np.argmax(mag[leftover], axis=1)
    if swept:
        logger.debug("Orphan sweep assigned %d triangles", swept)
    return labels


def _drop_empty_parts(labels: np.ndarray, seeds: List[int]) -> Tuple[np.ndarray, List[int]]:
    present = np.unique(labels)
    if len(present) == len(seeds):
        return labels, seeds
    dropped = sorted(set(range(len(seeds))) - set(present.tolist()))
    logger.warning("Dropping %d empty parts: %s", len(dropped), dropped)
    remap = np.full(len(seeds), UNASSIGNED, dtype=np.int64)
    remap[present] = np.arange(len(present))
    return remap[labels], [seeds[k] for k in present.tolist()]


def summarize_partition(mesh: TriMesh, labels: np.ndarray, seeds: List[int],
                        epsilon: float) -> Partition:
    """Per-part topology, sizes and boundary loops (in parent vertex indices)"""
    parts = []
    for k, seed in enumerate(seeds):
        ids = np.nonzero(labels == k)[0]
        if len(ids) == 0:
            raise SegmentationError(f"Part {k} is empty")
        sub = mesh.submesh(ids)
        loops = [sub.vertex_map[loop].tolist() for loop in sub.mesh.boundary_loops()]
        parts.append(PartSummary(label=k, seed=int(seed), triangle_count=len(ids),
                                 topology=sub.mesh.topology(), boundary_loops=loops))
    partition = Partition(labels=labels, seeds=[int(s) for s in seeds], parts=parts,
                          epsilon=epsilon)
    is_valid, errors = PartitionValidator.validate_partition(mesh, partition)
    if not is_valid:
        logger.warning("Partition checks failed: %s", "; ".join(errors))
    return partition


class TwoWaySplitter:
    """
    Split a submesh in two: grow mu at N=2 until coverage, then region-grow.
    Used by refine_patches; any callable TriMesh -> Partition can stand in.
    """

    def __init__(self, cfg: SolverConfig, epsilon: float = DEFAULT_EPSILON,
                 lumping: str = "full", mu_start: float = MU_START,
                 mu_factor: float = MU_FACTOR, mu_max: float = MU_MAX):
        self.cfg = cfg
        self.epsilon = epsilon
        self.lumping = lumping
        self.mu_start = mu_start
        self.mu_factor = mu_factor
        self.mu_max = mu_max

    def __call__(self, mesh: TriMesh) -> Partition:
        ops = MeshOperators.from_mesh(mesh, self.lumping)
        basis = build_grow_mu(ops, 2, self.cfg, self.mu_start, self.mu_factor, self.mu_max)
        if not basis.covered:
            raise CoverageError("Two-way split could not cover the patch",
                                uncovered_count=len(coverage(basis.modes).uncovered_vertices))
        return region_grow(mesh, basis.modes, self.epsilon)


def patch_report(partition: Partition, depths: Optional[Dict[int, int]] = None,
                 unresolved: Optional[List[int]] = None) -> PatchReport:
    patches = []
    for part in partition.parts:
        p4, p5 = PartitionValidator.patch_flags(part.topology.genus, part.topology.boundary_loop_count)
        patches.append(PatchStatus(label=part.label, genus=part.topology.genus,
                                   boundary_loop_count=part.topology.boundary_loop_count,
                                   passes_P4=p4, passes_P5=p5,
                                   depth=(depths or {}).get(part.label, 0)))
    return PatchReport(patches=patches, unresolved=sorted(unresolved or []))


def refine_patches(mesh: TriMesh, partition: Partition, splitter: Splitter,
                   max_depth: int = MAX_DEPTH,
                   jobs: int = 1) -> Tuple[Partition, PatchReport, PatchTree]:
    """
    Split every part that is not genus 0 with at most two boundaries, and
    repeat on the children until all pass or max_depth is reached.

    Child parts get fresh labels after all existing ones; labels are then
    compacted preserving that order.
    """
    labels = partition.labels.copy()
    seeds: Dict[int, int] = {p.label: p.seed for p in partition.parts}
    tree = PatchTree()
    for p in partition.parts:
        tree.add_root(PatchNode(p.label, p.triangle_count, p.topology.genus,
                                p.topology.boundary_loop_count))

    next_label = max(seeds) + 1 if seeds else 0
    unresolved: List[int] = []
    failing = [p.label for p in partition.parts
               if not all(PartitionValidator.patch_flags(p.topology.genus,
                                                         p.topology.boundary_loop_count))]

    while failing:
        todo = []
        for label in failing:
            if tree.get(label).depth >= max_depth:
                logger.warning("Part %d still fails patch checks at depth %d", label, max_depth)
                tree.get(label).unresolved = True
                unresolved.append(label)
            else:
                todo.append(label)
        if not todo:
            break

        subs = {label: mesh.submesh(np.nonzero(labels == label)[0]) for label in todo}

        def split(label: int):
            try:
                return splitter(subs[label].mesh)
            except LpcmError as e:
                logger.warning("Split of part %d failed: %s", label, e)
                return None

        if jobs > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(split, todo))
        else:
            results = [split(label) for label in todo]

        failing = []
        for label, child in zip(todo, results):
            if child is None or child.part_count < 2:
                tree.get(label).unresolved = True
                unresolved.append(label)
                continue
            sub = subs[label]
            del seeds[label]
            for part in child.parts:
                new_label = next_label
                next_label += 1
                labels[sub.triangle_map[child.labels == part.label]] = new_label
                seeds[new_label] = int(sub.vertex_map[part.seed])
                tree.add_child(label, PatchNode(new_label, part.triangle_count, part.topology.genus,
                                                part.topology.boundary_loop_count))
                if not all(PartitionValidator.patch_flags(part.topology.genus,
                                                          part.topology.boundary_loop_count)):
                    failing.append(new_label)
            logger.info("Part %d split into %d parts", label, child.part_count)

    order = sorted(seeds)
    mapping = {old: new for new, old in enumerate(order)}
    remap = np.full(next_label, UNASSIGNED, dtype=np.int64)
    for old, new in mapping.items():
        remap[old] = new
    labels = remap[labels]
    tree.relabel(mapping)

    refined = summarize_partition(mesh, labels, [seeds[old] for old in order], partition.epsilon)
    depths = {mapping[leaf.label]: leaf.depth for leaf in tree.leaves() if leaf.label in mapping}
    report = patch_report(refined, depths, [mapping[u] for u in unresolved if u in mapping])
    if report.all_pass:
        logger.info("All %d patches are genus 0 with at most two boundaries", refined.part_count)
    else:
        logger.warning("%d of %d patches fail the patch checks",
                       sum(1 for p in report.patches if not p.passes), len(report.patches))
    return refined, report, tree
