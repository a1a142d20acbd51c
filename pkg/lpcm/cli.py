"""
Command-line front end: modes, segment, patch, reconstruct and eigs
"""

import argparse
import logging
import os
import sys
from typing import List, Optional, Tuple

from . import __version__
from .admm import solve
from .basis import build_grow_mu, build_grow_N, coverage
from .config import DEFAULTS, OUTPUT_FORMATS, RunConfig, resolve_config
from .errors import ConfigError, CoverageError, MeshError, OperatorError, SolverError
from .manifest import RunManifest
from .mesh import TriMesh
from .mesh_io import SUPPORTED_FORMATS, load_mesh, write_fields
from .models import BasisResult, RoundRecord
from .operators import MASS_LUMPING, MeshOperators
from .segmentation import TwoWaySplitter, refine_patches, region_grow
from .spectral import BASIS_TYPES, export_reconstruction_csv, mhb, reconstruction_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_TOPOLOGY = 4

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """Root log level from --log-level, else LPCM_LOG, else WARNING"""
    name = (level or os.environ.get("LPCM_LOG") or "WARNING").upper()
    numeric = getattr(logging, name, None)
    if not isinstance(numeric, int):
        numeric = logging.WARNING
    logging.basicConfig(format=LOG_FORMAT)
    logging.getLogger().setLevel(numeric)


def _add_common(p: argparse.ArgumentParser, solver: bool = True) -> None:
    p.add_argument("mesh", help="Input mesh (OFF, OBJ or PLY)")
    p.add_argument("--mesh-format", choices=SUPPORTED_FORMATS, help="Override format sniffing")
    p.add_argument("--config", help="JSON config file (top level, 'settings' or 'config' block)")
    p.add_argument("--out-dir", default=".", help="Directory for output files")
    p.add_argument("--format", choices=OUTPUT_FORMATS, help="Mesh output format")
    p.add_argument("--mass-lumping", choices=MASS_LUMPING, help="Lumped mass rule")
    p.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    if solver:
        p.add_argument("--mu", type=float, help="Sparsity weight (grow N at this mu)")
        p.add_argument("--num-modes", type=int, help="Number of modes (grow mu at this N)")
        p.add_argument("--p", type=float, help="Sparsity exponent in (0, 1]")
        p.add_argument("--rho", type=float, help="ADMM penalty")
        p.add_argument("--tol", type=float, help="Relative-change stopping tolerance")
        p.add_argument("--max-iter", type=int, help="ADMM iteration cap")
        p.add_argument("--seed", type=int, help="Seed of the random initial modes")
        p.add_argument("--jobs", type=int, help="Worker threads for S/E updates and refinement")
        p.add_argument("--n-max", type=int, help="Cap on N when growing N")
        p.add_argument("--mu-max", type=float, help="Cap on mu when growing mu")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpcm",
        description="Lp compressed modes on triangle meshes: modes, segmentation and patching",
    )
    parser.add_argument("--version", action="version", version=f"lpcm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modes", help="Compute compressed modes")
    _add_common(p)

    p = sub.add_parser("segment", help="Segment the mesh by region growing from mode extrema")
    _add_common(p)
    p.add_argument("--epsilon", type=float, help="Overlap-band tolerance (default 0.01)")

    p = sub.add_parser("patch", help="Segment, then refine parts into genus-0 patches")
    _add_common(p)
    p.add_argument("--epsilon", type=float, help="Overlap-band tolerance (default 0.01)")
    p.add_argument("--max-depth", type=int, help="Refinement recursion cap")

    p = sub.add_parser("reconstruct", help="Reconstruct vertex coordinates in MHB/LpCM bases")
    _add_common(p)
    p.add_argument("--N", dest="Ns", required=True, help="Comma-separated basis sizes, e.g. 8,15,30")
    p.add_argument("--basis", choices=BASIS_TYPES, default="both")
    p.add_argument("--write-geometry", action="store_true", help="Write each reconstructed mesh")

    p = sub.add_parser("eigs", help="Manifold harmonics eigenpairs")
    _add_common(p, solver=False)
    p.add_argument("--num-modes", type=int, required=True, help="Number of eigenpairs")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {key: getattr(args, key, None) for key in DEFAULTS}


def _stem(args: argparse.Namespace) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    base = os.path.splitext(os.path.basename(args.mesh))[0]
    return os.path.join(args.out_dir, base)


def compute_modes(ops: MeshOperators, cfg: RunConfig) -> BasisResult:
    """Fixed solve (mu and N), grow N (mu only) or grow mu (N only)"""
    if cfg.mu is not None and cfg.num_modes is not None:
        modes, state = solve(ops, cfg.num_modes, cfg.solver_config())
        cov = coverage(modes)
        record = RoundRecord(round=1, N=cfg.num_modes, mu=cfg.mu,
                             covered_fraction=cov.covered_fraction,
                             iters=modes.iters, converged=modes.converged)
        return BasisResult(modes=modes, N=cfg.num_modes, mu=cfg.mu, covered=cov.covered,
                           rounds=[record], state=state)
    if cfg.mu is not None:
        return build_grow_N(ops, cfg.mu, cfg.solver_config(), N_max=cfg.n_max)
    if cfg.num_modes is not None:
        return build_grow_mu(ops, cfg.num_modes, cfg.solver_config(mu=cfg.mu_start),
                             cfg.mu_start, cfg.mu_factor, cfg.mu_max)
    raise ConfigError("Give --mu, --num-modes, or both")


def _prepare(args: argparse.Namespace) -> Tuple[RunConfig, TriMesh, MeshOperators, RunManifest]:
    cfg = resolve_config(_overrides(args), args.config)
    mesh = load_mesh(args.mesh, args.mesh_format)
    manifest = RunManifest.create(args.command, args.mesh, cfg.to_dict())
    with manifest.stage("operators"):
        ops = MeshOperators.from_mesh(mesh, cfg.mass_lumping)
    return cfg, mesh, ops, manifest


def _modes_stage(cfg, ops, manifest, stem) -> BasisResult:
    with manifest.stage("modes"):
        result = compute_modes(ops, cfg)
    rounds_csv = f"{stem}_rounds.csv"
    result.export_csv(rounds_csv)
    manifest.add_output(rounds_csv)
    if result.state is not None:
        history_csv = f"{stem}_convergence.csv"
        result.state.export_csv(history_csv)
        manifest.add_output(history_csv)
    manifest.summary["modes"] = result.to_dict()
    return result


def _finish(manifest: RunManifest, stem: str) -> None:
    manifest.write(f"{stem}_manifest.json")


def cmd_modes(args: argparse.Namespace) -> int:
    cfg, mesh, ops, manifest = _prepare(args)
    stem = _stem(args)
    result = _modes_stage(cfg, ops, manifest, stem)

    out = f"{stem}_modes.{cfg.format}"
    write_fields(out, mesh, cfg.format, vertex_scalars=result.modes.scalar_fields())
    manifest.add_output(out)
    _finish(manifest, stem)

    print(f"Computed {result.N} modes at mu={result.mu:g} "
          f"({len(result.rounds)} rounds, covered={result.covered})")
    if not result.covered:
        print(f"Coverage incomplete: {len(coverage(result.modes).uncovered_vertices)} vertices uncovered",
              file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_segment(args: argparse.Namespace) -> int:
    cfg, mesh, ops, manifest = _prepare(args)
    stem = _stem(args)
    result = _modes_stage(cfg, ops, manifest, stem)

    with manifest.stage("segment"):
        partition = region_grow(mesh, result.modes, cfg.epsilon)

    out = f"{stem}_segments.{cfg.format}"
    write_fields(out, mesh, cfg.format, face_labels=partition.labels)
    parts_json = f"{stem}_parts.json"
    partition.export_json(parts_json, include_boundaries=True)
    for path in (out, parts_json):
        manifest.add_output(path)
    manifest.summary["parts"] = partition.part_count
    _finish(manifest, stem)

    print(partition.display_summary())
    return EXIT_OK


def cmd_patch(args: argparse.Namespace) -> int:
    cfg, mesh, ops, manifest = _prepare(args)
    stem = _stem(args)
    result = _modes_stage(cfg, ops, manifest, stem)

    with manifest.stage("segment"):
        partition = region_grow(mesh, result.modes, cfg.epsilon)
    splitter = TwoWaySplitter(cfg.solver_config(mu=cfg.mu_start), cfg.epsilon, cfg.mass_lumping,
                              cfg.mu_start, cfg.mu_factor, cfg.mu_max)
    with manifest.stage("refine"):
        refined, report, tree = refine_patches(mesh, partition, splitter, cfg.max_depth, cfg.jobs)

    out = f"{stem}_patches.{cfg.format}"
    write_fields(out, mesh, cfg.format, face_labels=refined.labels)
    parts_json = f"{stem}_parts.json"
    refined.export_json(parts_json, include_boundaries=True)
    report_json = f"{stem}_patch_report.json"
    report.export_json(report_json)
    tree_json = f"{stem}_patch_tree.json"
    tree.export_hierarchy_json(tree_json)
    for path in (out, parts_json, report_json, tree_json):
        manifest.add_output(path)
    manifest.summary["patches"] = refined.part_count
    manifest.summary["all_pass"] = report.all_pass
    _finish(manifest, stem)

    print(refined.display_summary())
    print(report.display_summary())
    if not report.all_pass:
        return EXIT_TOPOLOGY
    return EXIT_OK


def _parse_Ns(text: str) -> List[int]:
    try:
        Ns = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise ConfigError(f"--N expects comma-separated integers, got '{text}'") from e
    if not Ns:
        raise ConfigError("--N needs at least one value")
    return Ns


def cmd_reconstruct(args: argparse.Namespace) -> int:
    Ns = _parse_Ns(args.Ns)
    cfg, mesh, ops, manifest = _prepare(args)
    manifest.config.update({"basis": args.basis, "N": Ns})
    stem = _stem(args)

    too_big = [N for N in Ns if N > mesh.n_vertices]
    if too_big:
        raise ConfigError(f"N={too_big[0]} exceeds the vertex count {mesh.n_vertices}")

    with manifest.stage("reconstruct"):
        rows = reconstruction_table(ops, mesh.vertices, Ns, args.basis,
                                    cfg.solver_config(mu=cfg.reconstruct_mu),
                                    keep_reconstructions=args.write_geometry)
    table = f"{stem}_reconstruction.csv"
    export_reconstruction_csv(rows, table)
    manifest.add_output(table)
    if args.write_geometry:
        for row in rows:
            geometry = TriMesh(row["reconstruction"], mesh.triangles, validate=False)
            out = f"{stem}_{row['basis']}_N{row['N']}.{cfg.format}"
            write_fields(out, geometry, cfg.format)
            manifest.add_output(out)
    _finish(manifest, stem)

    for row in rows:
        print(f"{row['basis']:<6} N={row['N']:<6} rel_error={row['rel_error']:.6g}")
    return EXIT_OK


def cmd_eigs(args: argparse.Namespace) -> int:
    cfg, mesh, ops, manifest = _prepare(args)
    stem = _stem(args)
    with manifest.stage("eigs"):
        basis = mhb(ops, cfg.num_modes)
    values = f"{stem}_eigenvalues.csv"
    basis.export_csv(values)
    out = f"{stem}_eigenvectors.{cfg.format}"
    write_fields(out, mesh, cfg.format, vertex_scalars=basis.scalar_fields())
    for path in (values, out):
        manifest.add_output(path)
    _finish(manifest, stem)

    print(f"First {basis.N} eigenvalues: " + ", ".join(f"{x:.6g}" for x in basis.lambdas))
    return EXIT_OK


COMMANDS = {
    "modes": cmd_modes,
    "segment": cmd_segment,
    "patch": cmd_patch,
    "reconstruct": cmd_reconstruct,
    "eigs": cmd_eigs,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    if args.command in ("modes", "segment", "patch") and args.mu is None and args.num_modes is None:
        if not args.config:
            parser.error("give --mu, --num-modes, or both")

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, CoverageError) as e:
        print(f"Solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (MeshError, OperatorError) as e:
        print(f"Mesh error: {e}", file=sys.stderr)
        return EXIT_TOPOLOGY
