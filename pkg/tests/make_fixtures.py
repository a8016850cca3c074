"""Regenerate the committed test fixtures.

    python tests/make_fixtures.py

Writes the scene corpus, the USD documents the insertion tests edit, the
canonical insertion script with its applied output, and the simulation
bundle goldens. The hand-written USDA inputs under fixtures/usda/inputs are
not touched; their canonical forms are rewritten into fixtures/usda/golden.
Review the diff before committing: these files are the oracles.
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

from scan2sim.fixtures import SCENES, write_corpus
from scan2sim.llm import MockBackend, query_script
from scan2sim.script_guard import apply_script, check_script
from scan2sim.simprep import build_sim_bundle, fix_to_ground
from scan2sim.usd import build_geometry_focused, canonical_usda, emit_usda, parse_usda

FIXTURES = Path(__file__).parent / "fixtures"

# the context the canonical insertion script is rendered from
CANONICAL_CONTEXT = {
    "scene_usd_path": "bedroom_scene.usda",
    "object_label": "pillow",
    "object_path": "objects/pillow.obj",
    "prim_path": "/scene/pillow_new",
    "position": [1.2, 1.1, 0.5],
    "scale": 1.0,
}


def main() -> None:
    corpus = FIXTURES / "scenes"
    if corpus.exists():
        shutil.rmtree(corpus)
    write_corpus(corpus)

    usd_dir = FIXTURES / "usd"
    usd_dir.mkdir(exist_ok=True)
    for name, build in SCENES.items():
        (usd_dir / f"{name}_scene.usda").write_text(emit_usda(build_geometry_focused(build(), "scene")))

    golden = FIXTURES / "usda" / "golden"
    golden.mkdir(parents=True, exist_ok=True)
    for src in sorted((FIXTURES / "usda" / "inputs").glob("*.usda")):
        (golden / src.name).write_text(canonical_usda(src.read_text(encoding="utf-8")))

    scripts = FIXTURES / "scripts"
    scripts.mkdir(exist_ok=True)
    script = query_script(MockBackend(), CANONICAL_CONTEXT)
    (scripts / "canonical_insert.txt").write_text(script)
    report = check_script(script, scope=CANONICAL_CONTEXT["prim_path"])
    assert report.allowed, report.violations
    bedroom = parse_usda((usd_dir / "bedroom_scene.usda").read_text())
    (scripts / "canonical_insert_applied.usda").write_text(emit_usda(apply_script(bedroom, report.program)))

    sim = FIXTURES / "simprep"
    sim.mkdir(exist_ok=True)
    cabinet = build_geometry_focused(SCENES["cabinet"]())
    (sim / "cabinet_fixed.usda").write_text(emit_usda(fix_to_ground(cabinet, "/cabinet_1")))
    bundle = build_sim_bundle(SCENES["office"](), "drawer_7")
    (sim / "office_drawer_7_task_config.json").write_text(json.dumps(bundle.task.to_dict(), indent=2, sort_keys=True) + "\n")
    (sim / "office_drawer_7_report.json").write_text(json.dumps(bundle.report, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
