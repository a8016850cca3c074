from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from scan2sim.fixtures import OBJECTS, SCENES
from scan2sim.scene import load_scene

FIXTURES = Path(__file__).parent / "fixtures"
SCENE_DIR = FIXTURES / "scenes"
USD_DIR = FIXTURES / "usd"

# one PASS/FAIL line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def fixture_scene(name: str):
    return load_scene(SCENE_DIR / f"{name}.obj", SCENE_DIR / f"{name}.json")


@pytest.fixture(scope="session")
def scenes():
    """The five corpus scenes, loaded from the committed files."""
    return {name: fixture_scene(name) for name in SCENES}


@pytest.fixture(scope="session")
def objects():
    return {name: build() for name, build in OBJECTS.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def insertion_job(scene_name: str, label: str, seed: int = 0):
    """Job inserting the corpus object ``label`` into the committed scene ``scene_name``."""
    from scan2sim.insertion import InsertionJob
    from scan2sim.scene import read_obj

    return InsertionJob(
        scene=fixture_scene(scene_name),
        scene_usd_path=str(USD_DIR / f"{scene_name}_scene.usda"),
        object_mesh=read_obj(SCENE_DIR / "objects" / f"{label}.obj"),
        object_label=label,
        seed=seed,
        object_path=f"objects/{label}.obj",
    )


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
