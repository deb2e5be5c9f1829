"""
Tests for the run and verify commands and the scenario service.
"""

import io
from pathlib import Path

import numpy as np
import pytest
import yaml

from app.cli.commands import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    RunOptions,
    run_command,
    verify_command,
)
from app.core.exceptions import FieldError, PoleSelectionError
from app.schemas.scenario import load_scenario
from app.services.scenario import ScenarioService
from main import main

from tests.conftest import CONFIGS_DIR


def result_files(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.suffix != ".log"}


@pytest.mark.asyncio
async def test_run_static_writes_outputs(tmp_path: Path) -> None:
    out = io.StringIO()
    code = await run_command(str(CONFIGS_DIR / "static.yaml"), RunOptions(out=str(tmp_path)), out)
    assert code == EXIT_OK
    assert set(result_files(tmp_path)) == {
        "static_traces.csv",
        "static_angles.csv",
        "static_transitions.csv",
        "static_summary.yaml",
    }
    assert (tmp_path / "run.log").exists()
    assert "factorization.residual" in out.getvalue()

    header = (tmp_path / "static_traces.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["t", "U_re_0_0", "U_im_0_0"]
    assert len(header) == 1 + 4 * 2 * 9
    traces = np.loadtxt(tmp_path / "static_traces.csv", delimiter=",", skiprows=1)
    assert traces.shape == (257, len(header))

    summary = yaml.safe_load((tmp_path / "static_summary.yaml").read_text())
    assert summary["passed"] is True
    assert summary["family"] == "static"
    assert summary["maxima"]["residual"] <= 1e-12
    assert summary["files"] == ["static_traces.csv", "static_angles.csv", "static_transitions.csv"]


@pytest.mark.asyncio
async def test_runs_are_byte_identical(tmp_path: Path) -> None:
    first, second = tmp_path / "first", tmp_path / "second"
    config = str(CONFIGS_DIR / "static.yaml")
    assert await run_command(config, RunOptions(out=str(first)), io.StringIO()) == EXIT_OK
    assert await run_command(config, RunOptions(out=str(second), jobs=3), io.StringIO()) == EXIT_OK
    assert result_files(first) == result_files(second)


@pytest.mark.asyncio
async def test_coarse_grid_fails_checks(tmp_path: Path) -> None:
    out = io.StringIO()
    options = RunOptions(steps=8, out=str(tmp_path))
    code = await run_command(str(CONFIGS_DIR / "precession_generic.yaml"), options, out)
    assert code == EXIT_CHECK_FAILED
    assert "FAIL" in out.getvalue()
    summary = yaml.safe_load((tmp_path / "precession_generic_summary.yaml").read_text())
    assert summary["passed"] is False
    assert summary["steps"] == 8


@pytest.mark.asyncio
async def test_bad_config_is_a_config_error(write_config, tmp_path: Path, capsys) -> None:
    path = write_config("name: a\nspin_j: 1\nfield: {family: helix}\n")
    code = await run_command(str(path), RunOptions(out=str(tmp_path / "out")), io.StringIO())
    assert code == EXIT_CONFIG_ERROR
    assert "field.family (line 3)" in capsys.readouterr().err
    assert not (tmp_path / "out" / "a_summary.yaml").exists()


@pytest.mark.asyncio
async def test_missing_path_samples_is_a_config_error(write_config, capsys) -> None:
    text = (
        "name: t\nspin_j: 1\n"
        "field: {family: tabulated, csv: nowhere.csv, magnitude: {law: constant, value: 1.0}}\n"
        "grid: {t_end: 1.0, steps: 16}\n"
    )
    code = await verify_command(str(write_config(text)), RunOptions(), io.StringIO())
    assert code == EXIT_CONFIG_ERROR
    assert "error: field" in capsys.readouterr().err


@pytest.mark.asyncio
async def test_missing_file_is_a_config_error(tmp_path: Path) -> None:
    code = await verify_command(str(tmp_path / "absent.yaml"), RunOptions(), io.StringIO())
    assert code == EXIT_CONFIG_ERROR


@pytest.mark.asyncio
async def test_verify_algebra_only(tmp_path: Path) -> None:
    out = io.StringIO()
    code = await verify_command(str(CONFIGS_DIR / "algebra_j7_2.yaml"), RunOptions(), out)
    assert code == EXIT_OK
    table = out.getvalue()
    assert "algebra.full_turn" in table
    assert "FAIL" not in table
    assert not any(tmp_path.iterdir())


@pytest.mark.asyncio
async def test_service_runs_class_i_with_berry(write_config) -> None:
    text = (
        "name: ci\nspin_j: 1/2\nstepper: magnus4\n"
        "field:\n  family: class_i\n  path: {kind: precession, theta: 1.0471975511965976, omega: 1.0}\n"
        "grid: {t_end: 6.283185307179586, steps: 1024}\n"
        "outputs: [residuals, berry]\n"
    )
    path = write_config(text)
    outcome = await ScenarioService(jobs=2).execute(load_scenario(path), path.parent)
    names = {check.name for check in outcome.checks}
    assert {"class_i.beta_minus_phi", "class_i.closed_form_N", "berry.phase_error"} <= names
    assert outcome.passed
    assert outcome.berry is not None
    assert outcome.berry.solid_angle == pytest.approx(np.pi, abs=1e-9)


@pytest.mark.asyncio
async def test_service_convergence_order() -> None:
    config = load_scenario(CONFIGS_DIR / "convergence.yaml")
    outcome = await ScenarioService(jobs=3).execute(config, CONFIGS_DIR)
    assert outcome.convergence is not None and len(outcome.convergence) == 3
    order = next(c for c in outcome.checks if c.name == "factorization.residual_order")
    assert order.passed


def test_main_verify_exit_code(capsys) -> None:
    assert main(["verify", str(CONFIGS_DIR / "static.yaml")]) == EXIT_OK
    assert "scenario static" in capsys.readouterr().out


def test_main_rejects_unknown_stepper() -> None:
    with pytest.raises(SystemExit):
        main(["verify", str(CONFIGS_DIR / "static.yaml"), "--stepper", "rk4"])


def write_samples(directory: Path, times: np.ndarray, name: str = "samples.csv") -> Path:
    """Cone of half-angle pi/3 at unit rate, sampled at ``times``."""
    theta = np.pi / 3.0
    vectors = np.stack(
        [
            np.sin(theta) * np.cos(times),
            np.sin(theta) * np.sin(times),
            np.full_like(times, np.cos(theta)),
        ],
        axis=1,
    )
    path = directory / name
    np.savetxt(
        path,
        np.column_stack([times, vectors]),
        delimiter=",",
        header="t,nx,ny,nz",
        comments="",
        fmt="%.16e",
    )
    return path


@pytest.mark.asyncio
async def test_late_starting_samples_are_a_config_error(
    write_config, tmp_path: Path, capsys
) -> None:
    write_samples(tmp_path, np.linspace(1.0, 3.0, 201))
    text = (
        "name: late\nspin_j: 1/2\n"
        "field: {family: tabulated, csv: samples.csv, magnitude: {law: constant, value: 1.0}}\n"
        "grid: {t_end: 2.0, steps: 64}\n"
    )
    code = await verify_command(str(write_config(text)), RunOptions(), io.StringIO())
    assert code == EXIT_CONFIG_ERROR
    assert "error: field.csv: path samples start at t=1" in capsys.readouterr().err


@pytest.mark.asyncio
async def test_open_sampled_loop_cannot_give_berry_phase(
    write_config, tmp_path: Path, capsys
) -> None:
    write_samples(tmp_path, np.linspace(0.0, 2.0, 201))
    text = (
        "name: open\nspin_j: 1/2\n"
        "field: {family: tabulated, csv: samples.csv, magnitude: {law: constant, value: 1.0}}\n"
        "grid: {t_end: 2.0, steps: 64}\n"
        "outputs: [berry]\n"
    )
    code = await verify_command(str(write_config(text)), RunOptions(), io.StringIO())
    assert code == EXIT_CONFIG_ERROR
    assert "error: outputs: path is not closed" in capsys.readouterr().err


@pytest.mark.asyncio
async def test_pole_failure_is_a_config_error(monkeypatch: pytest.MonkeyPatch, capsys) -> None:
    def no_pole(*args: object) -> None:
        raise PoleSelectionError("path passes through every candidate coordinate pole")

    monkeypatch.setattr("app.services.scenario.berry_phase_check", no_pole)
    code = await verify_command(str(CONFIGS_DIR / "berry.yaml"), RunOptions(), io.StringIO())
    assert code == EXIT_CONFIG_ERROR
    assert "error: outputs: path passes through every" in capsys.readouterr().err


@pytest.mark.asyncio
async def test_kernel_errors_map_to_exit_code(
    monkeypatch: pytest.MonkeyPatch, tmp_path: Path, capsys
) -> None:
    def failing_prepare(*args: object) -> None:
        raise FieldError("magnitude law is not finite")

    monkeypatch.setattr("app.services.scenario.prepare", failing_prepare)
    options = RunOptions(out=str(tmp_path))
    code = await run_command(str(CONFIGS_DIR / "static.yaml"), options, io.StringIO())
    assert code == EXIT_CONFIG_ERROR
    assert "error: magnitude law is not finite" in capsys.readouterr().err


@pytest.mark.asyncio
@pytest.mark.parametrize("config", sorted(CONFIGS_DIR.glob("*.yaml")), ids=lambda p: p.stem)
async def test_shipped_configs_pass_verify(config: Path) -> None:
    out = io.StringIO()
    assert await verify_command(str(config), RunOptions(), out) == EXIT_OK, out.getvalue()
