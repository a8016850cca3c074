"""Command-line entry point: ``scan2sim {flavor,insert,simprep,validate}``.

Exit codes: 0 on success, 1 when a script or generated edit is rejected by
the guard, 2 on any other failure (including bad usage). Every output file
is written atomically.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any

from . import __version__
from .errors import Scan2SimError, StageError
from .fileio import atomic_write_text
from .geometry.decompose import DecompositionParams
from .insertion import InsertionConfig, InsertionJob, InsertionRun, run_insertion
from .llm.backend import Transcript, make_backend
from .scene.mesh import read_mesh
from .scene.model import AnnotatedScene, load_scene
from .script_guard import DEFAULT_ALLOWLIST, SANCTIONED_MODULE, check_script
from .simprep import STRUCTURAL_LABELS, DecimationPolicy, build_sim_bundle, write_bundle
from .usd.flavors import build_flavor, build_geometry_focused, scene_from_geometry_usd
from .usd.usda import emit_usda, parse_usda

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("scan2sim")

EXIT_OK, EXIT_REJECTED, EXIT_ERROR = 0, 1, 2
MESH_SUFFIXES = (".obj", ".ply")


class CliError(Exception):
    """A user-facing failure; ``code`` is the process exit code."""

    def __init__(self, message: str, code: int = EXIT_ERROR, kind: str = "error"):
        super().__init__(message)
        self.code = code
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 2 with the usage text, as argparse does, but never
    leave the process through ``sys.exit`` from deep inside parsing."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise CliError(message, EXIT_ERROR, "usage")


# -- configuration -------------------------------------------------------------


def load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"config {path}: {exc}") from exc


def _section(config: dict, name: str) -> dict:
    value = config.get(name, {})
    if not isinstance(value, dict):
        raise CliError(f"config key {name!r} must be a table")
    return value


def _guard_settings(config: dict, allowlist_path: str | None = None) -> tuple[frozenset[str], str]:
    guard = _section(config, "guard")
    allowlist = frozenset(guard.get("allowlist", DEFAULT_ALLOWLIST))
    if allowlist_path is not None:
        allowlist = read_allowlist(allowlist_path)
    return allowlist, str(guard.get("sanctioned_module", SANCTIONED_MODULE))


def read_allowlist(path: str) -> frozenset[str]:
    """A JSON list of names, or one name per line (``#`` starts a comment)."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("["):
        names = json.loads(text)
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise CliError(f"{path}: allowlist must be a list of strings")
        return frozenset(names)
    return frozenset(s for line in text.splitlines() if (s := line.split("#", 1)[0].strip()))


# -- helpers -------------------------------------------------------------------


def _require_files(*paths: str | None) -> None:
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise CliError(f"input file not found: {p}")


def _sibling_mesh(annotations: str) -> str:
    stem = Path(annotations).with_suffix("")
    for suffix in MESH_SUFFIXES:
        candidate = stem.with_suffix(suffix)
        if candidate.is_file():
            return str(candidate)
    raise CliError(f"no --mesh given and no {stem.name}.obj or {stem.name}.ply next to {annotations}")


def _scene_from_inputs(scene_path: str, annotations: str | None) -> AnnotatedScene:
    """A mesh with annotations, or a geometry-focused USDA on its own."""
    if Path(scene_path).suffix.lower() == ".usda":
        if annotations is not None:
            raise CliError("--annotations is only used with a mesh --scene, not a .usda one")
        return scene_from_geometry_usd(parse_usda(Path(scene_path).read_text(encoding="utf-8")))
    if annotations is None:
        raise CliError("a mesh --scene needs --annotations")
    return load_scene(scene_path, annotations)


def _print_json(data: Any) -> None:
    sys.stdout.write(json.dumps(data, indent=2, sort_keys=True) + "\n")


# -- subcommands ---------------------------------------------------------------


def cmd_flavor(args, config) -> int:
    _require_files(args.scene, args.annotations)
    scene = load_scene(args.scene, args.annotations)
    if args.root_prim is not None and args.kind != "geometry_focused":
        raise CliError("--root-prim applies to the geometry_focused flavor only")
    doc = build_geometry_focused(scene, args.root_prim) if args.root_prim else build_flavor(scene, args.kind)
    atomic_write_text(args.out, emit_usda(doc))
    log.info("wrote %s flavor to %s", args.kind, args.out)
    return EXIT_OK


def cmd_insert(args, config) -> int:
    _require_files(args.scene, args.annotations, args.object, args.mesh)
    mesh_path = args.mesh or _sibling_mesh(args.annotations)
    scene = load_scene(mesh_path, args.annotations)
    backend_cfg = dict(config)
    if args.backend is not None:
        backend_cfg["backend"] = args.backend
    backend = make_backend(backend_cfg, Transcript(args.transcript))
    allowlist, module = _guard_settings(config)
    ins = _section(config, "insertion")
    insert_cfg = InsertionConfig(allowlist=allowlist, sanctioned_module=module)
    if "max_attempts" in ins:
        insert_cfg = replace(insert_cfg, max_attempts=int(ins["max_attempts"]))
    job = InsertionJob(
        scene=scene,
        scene_usd_path=args.scene,
        object_mesh=read_mesh(args.object),
        object_label=args.label,
        seed=args.seed,
        object_path=args.object_path,
    )
    run = InsertionRun()
    try:
        doc, placement = run_insertion(job, backend, insert_cfg, run)
    finally:
        if args.trace is not None:
            atomic_write_text(args.trace, json.dumps(run.to_dict(backend), indent=2, sort_keys=True) + "\n")
    atomic_write_text(args.out, emit_usda(doc))
    _print_json(placement.to_dict())
    return EXIT_OK


def cmd_simprep(args, config) -> int:
    _require_files(args.scene, args.annotations)
    scene = _scene_from_inputs(args.scene, args.annotations)
    sp = _section(config, "simprep")
    dp = _section(config, "decomposition")
    policy = DecimationPolicy(
        args.structural_ratio if args.structural_ratio is not None else float(sp.get("structural_ratio", 0.10)),
        args.static_ratio if args.static_ratio is not None else float(sp.get("static_ratio", 0.30)),
    )
    params = DecompositionParams(**{k: dp[k] for k in ("concavity_thresh", "max_pieces", "max_depth") if k in dp})
    labels = frozenset(s.lower() for s in sp.get("structural_labels", STRUCTURAL_LABELS))
    bundle = build_sim_bundle(
        scene, args.target, policy, params, structural_labels=labels, support_id=args.support, seed=args.seed
    )
    paths = write_bundle(bundle, args.out_dir)
    _print_json({name: str(p) for name, p in paths.items()})
    return EXIT_OK


def cmd_validate(args, config) -> int:
    _require_files(args.script, args.allowlist)
    allowlist, module = _guard_settings(config, args.allowlist)
    report = check_script(Path(args.script).read_text(encoding="utf-8"), allowlist=allowlist, sanctioned_module=module)
    _print_json(report.to_dict())
    return EXIT_OK if report.allowed else EXIT_REJECTED


# -- argument parsing ----------------------------------------------------------


def _add_globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # accepted before or after the subcommand; the subcommand copy only
    # overrides when actually given
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="TOML configuration file")
    parser.add_argument("--seed", type=int, default=d(0), help="seed for every random choice (default 0)")
    parser.add_argument("--log", default=d("WARNING"), choices=["DEBUG", "INFO", "WARNING", "ERROR"], type=str.upper)
    parser.add_argument("--json-errors", action="store_true", default=d(False), help="report errors as JSON on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scan2sim", description="Annotated scans to USD, object insertion and simulation bundles.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("flavor", help="build the descriptive or geometry-focused USD")
    _add_globals(p, suppress=True)
    p.add_argument("--kind", required=True, choices=["descriptive", "geometry_focused"])
    p.add_argument("--scene", required=True, help="scene mesh (.obj or .ply)")
    p.add_argument("--annotations", required=True, help="annotation JSON")
    p.add_argument("--root-prim", help="geometry_focused only: nest the bodies under this Xform (the defaultPrim)")
    p.add_argument("--out", required=True, help="output .usda")
    p.set_defaults(func=cmd_flavor)

    p = sub.add_parser("insert", help="insert an object with model guidance")
    _add_globals(p, suppress=True)
    p.add_argument("--scene", required=True, help="scene .usda to edit")
    p.add_argument("--annotations", required=True, help="annotation JSON for the scene")
    p.add_argument("--mesh", help="scene mesh; default: <annotations stem>.obj or .ply beside the annotations")
    p.add_argument("--object", required=True, help="object mesh to insert")
    p.add_argument("--object-path", help="asset path written into the reference (default <label>.obj)")
    p.add_argument("--label", required=True)
    p.add_argument("--backend", choices=["mock", "http"], help="overrides the config's backend")
    p.add_argument("--out", required=True, help="output .usda")
    p.add_argument("--trace", help="JSON file for the attempt trace and model transcript")
    p.add_argument("--transcript", help="append model requests and responses to this JSON-lines file")
    p.set_defaults(func=cmd_insert)

    p = sub.add_parser("simprep", help="compile a simulation bundle")
    _add_globals(p, suppress=True)
    p.add_argument("--scene", required=True, help="geometry-focused .usda, or a mesh with --annotations")
    p.add_argument("--annotations", help="annotation JSON when --scene is a mesh")
    p.add_argument("--target", required=True, help="articulated part id, e.g. drawer_7")
    p.add_argument("--support", help="node to snap the target object onto")
    p.add_argument("--structural-ratio", type=float)
    p.add_argument("--static-ratio", type=float)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simprep)

    p = sub.add_parser("validate", help="check an insertion script against the allowlist")
    _add_globals(p, suppress=True)
    p.add_argument("--script", required=True)
    p.add_argument("--allowlist", help="JSON list or one name per line")
    p.set_defaults(func=cmd_validate)
    return parser


def _report_error(exc: Exception, code: int, kind: str, json_errors: bool) -> int:
    if json_errors:
        payload = {"error": kind, "message": str(exc), "exit_code": code}
        if isinstance(exc, StageError):
            payload["stage"] = exc.stage
        sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    else:
        sys.stderr.write(f"scan2sim: {kind}: {exc}\n")
    return code


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    json_errors = "--json-errors" in argv
    try:
        args = build_parser().parse_args(argv)
    except CliError as exc:
        return _report_error(exc, exc.code, exc.kind, json_errors)
    json_errors = args.json_errors
    logging.basicConfig(level=args.log, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except CliError as exc:
        return _report_error(exc, exc.code, exc.kind, json_errors)
    except StageError as exc:
        rejected = exc.stage == "script_guard"
        return _report_error(exc, EXIT_REJECTED if rejected else EXIT_ERROR, "rejected" if rejected else "pipeline", json_errors)
    except (Scan2SimError, ValueError, KeyError, OSError) as exc:
        return _report_error(exc, EXIT_ERROR, type(exc).__name__, json_errors)


if __name__ == "__main__":
    sys.exit(main())
