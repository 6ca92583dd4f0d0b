import functools
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

sys.path.insert(0, str(Path(__file__).parent))

from geoxray.scenario import builtin_path, load_builtin, parse_scenario  # noqa: E402

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def scenario(name):
    """Shipped scenarios are parsed once per session."""
    return load_builtin(name)


def scaled_disk_text(R: float) -> str:
    """The 12-tile disk scenario scaled to radius ``R`` (foliation rescaled to keep max 1)."""
    raw = yaml.safe_load(builtin_path("euclidean_disk12").read_text())
    raw["name"] = f"euclidean_disk12_R{R:g}"
    raw["metric"]["chart"] = [-2 * R, 2 * R, -2 * R, 2 * R]
    raw["domain"]["boundary"]["radius"] = R
    raw["domain"]["foliation"] = f"(x**2 + y**2)/{R * R!r}"
    raw["tiling"]["vertices"] = {k: [R * c for c in v] for k, v in raw["tiling"]["vertices"].items()}
    return yaml.safe_dump(raw, sort_keys=False)


@functools.lru_cache(maxsize=None)
def scaled_disk(R: float):
    return parse_scenario(scaled_disk_text(R))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
