"""
Tests for scenario file validation.
"""

import pytest

from app.core.exceptions import ScenarioConfigError
from app.physics.grid import Stepper
from app.schemas.scenario import (
    ClassIISpiralFieldSpec,
    ResonanceScanSpec,
    load_scenario,
)

from tests.conftest import CONFIGS_DIR

SHIPPED = sorted(CONFIGS_DIR.glob("*.yaml"))


@pytest.mark.parametrize("path", SHIPPED, ids=[p.stem for p in SHIPPED])
def test_shipped_configs_validate(path) -> None:
    config = load_scenario(path)
    assert config.name == path.stem


def test_spin_is_normalized(write_config) -> None:
    config = load_scenario(write_config("name: a\nspin_j: 1.5\n"))
    assert config.spin_j == "3/2"
    assert config.family == "algebra"
    assert config.stepper is Stepper.EXP_MIDPOINT


def test_default_tolerance_follows_stepper(write_config) -> None:
    text = (
        "name: p\nspin_j: 1/2\nstepper: magnus4\n"
        "field: {family: precession, theta: 1.0, omega: 1.0, kb: 2.0}\n"
        "grid: {t_end: 1.0}\n"
    )
    config = load_scenario(write_config(text))
    assert config.effective_tolerance == 1e-9
    assert config.grid is not None and config.grid.steps == 4096


def test_unknown_key_reports_line(write_config) -> None:
    text = "name: a\nspin_j: 1\ncolour: blue\n"
    with pytest.raises(ScenarioConfigError) as info:
        load_scenario(write_config(text))
    assert info.value.key == "colour"
    assert info.value.line == 3


def test_invalid_spin_reports_key(write_config) -> None:
    with pytest.raises(ScenarioConfigError) as info:
        load_scenario(write_config("name: a\nspin_j: 1/3\n"))
    assert info.value.key == "spin_j"
    assert info.value.line == 2


def test_unknown_family(write_config) -> None:
    text = "name: a\nspin_j: 1\nfield:\n  family: helix\ngrid: {t_end: 1.0}\n"
    with pytest.raises(ScenarioConfigError) as info:
        load_scenario(write_config(text))
    assert info.value.key == "field.family"
    assert info.value.line == 4


def test_nested_value_error(write_config) -> None:
    text = (
        "name: a\nspin_j: 1\nfield:\n  family: precession\n  theta: 4.0\n"
        "  omega: 1.0\n  kb: 1.0\ngrid: {t_end: 1.0}\n"
    )
    with pytest.raises(ScenarioConfigError) as info:
        load_scenario(write_config(text))
    assert info.value.key == "field.theta"
    assert info.value.line == 5
    assert "field.theta (line 5)" in str(info.value)


def test_spiral_domain_bound(write_config) -> None:
    text = (
        "name: s\nspin_j: 1\n"
        "field: {family: class_ii_spiral, lambda: 1.0, c1: 2.0, c2: 0.5}\n"
        "grid:\n  t_end: 1.6\n  steps: 64\n"
    )
    with pytest.raises(ScenarioConfigError, match="spiral domain bound") as info:
        load_scenario(write_config(text))
    assert info.value.key == "grid.t_end"
    assert info.value.line == 5


def test_spiral_alias(write_config) -> None:
    text = (
        "name: s\nspin_j: 1\n"
        "field: {family: class_ii_spiral, lambda: 0.5, c1: 1.0, c2: 0.5}\n"
        "grid: {t_end: 1.0, steps: 64}\n"
    )
    field = load_scenario(write_config(text)).field
    assert isinstance(field, ClassIISpiralFieldSpec)
    assert field.lam == 0.5


def test_field_needs_grid(write_config) -> None:
    text = "name: a\nspin_j: 1\nfield: {family: static}\n"
    with pytest.raises(ScenarioConfigError) as info:
        load_scenario(write_config(text))
    assert info.value.key == "grid"


def test_berry_needs_closed_path(write_config) -> None:
    text = (
        "name: a\nspin_j: 1\nfield: {family: static}\n"
        "grid: {t_end: 1.0, steps: 16}\noutputs: [berry]\n"
    )
    with pytest.raises(ScenarioConfigError, match="closed path") as info:
        load_scenario(write_config(text))
    assert info.value.key == "outputs"
    assert info.value.line == 5


def test_resonance_needs_precession(write_config) -> None:
    text = (
        "name: a\nspin_j: 1/2\nfield: {family: static}\n"
        "grid: {t_end: 1.0, steps: 16}\noutputs: [resonance_scan]\n"
    )
    with pytest.raises(ScenarioConfigError, match="precession"):
        load_scenario(write_config(text))


def test_invalid_yaml(write_config) -> None:
    with pytest.raises(ScenarioConfigError, match="invalid YAML") as info:
        load_scenario(write_config("name: a\nspin_j: [1\n"))
    assert info.value.line is not None


def test_epsilons_must_decrease(write_config) -> None:
    text = (
        "name: a\nspin_j: 1/2\n"
        "field: {family: precession, theta: 1.0, omega: 1.0, kb: 2.0}\n"
        "grid: {t_end: 1.0}\noutputs: [adiabatic]\n"
        "adiabatic:\n  epsilons: [1.0, 0.5, 0.5]\n"
    )
    with pytest.raises(ScenarioConfigError) as info:
        load_scenario(write_config(text))
    assert info.value.key == "adiabatic.epsilons"


def test_overrides_revalidate() -> None:
    config = load_scenario(CONFIGS_DIR / "precession_generic.yaml")
    changed = config.with_overrides(stepper="magnus4", steps=128)
    assert changed.stepper is Stepper.MAGNUS4
    assert changed.grid is not None and changed.grid.steps == 128
    assert changed.effective_tolerance == 1e-9
    with pytest.raises(ScenarioConfigError, match="override"):
        config.with_overrides(steps=1)


def test_resonance_grid_cells() -> None:
    scan = ResonanceScanSpec(kb_range=(0.25, 3.0), count=12)
    assert scan.cell == pytest.approx(0.25)
    assert scan.kb_values()[7] == pytest.approx(2.0)
