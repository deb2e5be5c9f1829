from pathlib import Path

import numpy as np
import pytest

from app.physics.algebra import SpinRep, spin_matrices
from app.physics.sphere_path import DirectionPath, make_precession_path

CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"

THIRD_PI = np.pi / 3.0


@pytest.fixture(params=["1/2", "1", "3/2"], ids=["j=1/2", "j=1", "j=3/2"])
def rep(request: pytest.FixtureRequest) -> SpinRep:
    return spin_matrices(request.param)


@pytest.fixture
def half() -> SpinRep:
    return spin_matrices("1/2")


@pytest.fixture
def spin_one() -> SpinRep:
    return spin_matrices(1)


@pytest.fixture
def precession() -> DirectionPath:
    """Cone of half-angle pi/3 traversed at unit rate."""
    return make_precession_path(THIRD_PI, 1.0)


@pytest.fixture
def configs_dir() -> Path:
    return CONFIGS_DIR


@pytest.fixture
def write_config(tmp_path: Path):
    """Write a scenario file into a scratch directory and return its path."""

    def write(text: str, name: str = "scenario.yaml") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
