"""
Command handlers for `run` and `verify`.

Errors map to exit codes: 0 when every check passes, 2 when a check fails,
1 for configuration or I/O errors.
"""

import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, TextIO

import numpy as np

from app.core.config import settings
from app.core.exceptions import SpinEvolutionError
from app.core.log import configure_logging
from app.schemas.scenario import ScenarioConfig, load_scenario
from app.schemas.summary import AdiabaticSummary, BerrySummary, ScenarioSummary
from app.services import verification
from app.services.scenario import (
    ScenarioOutcome,
    ScenarioService,
    angle_columns,
    transition_columns,
)
from app.utils.file_handler import FileHandler, matrix_columns

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_CHECK_FAILED = 2


@dataclass(frozen=True)
class RunOptions:
    """Command-line overrides shared by both commands."""

    jobs: Optional[int] = None
    stepper: Optional[str] = None
    steps: Optional[int] = None
    out: Optional[str] = None


def load_with_overrides(config_path: Path, options: RunOptions) -> ScenarioConfig:
    config = load_scenario(config_path)
    if options.stepper is None and options.steps is None:
        return config
    return config.with_overrides(stepper=options.stepper, steps=options.steps)


def build_summary(outcome: ScenarioOutcome, files: list[str]) -> ScenarioSummary:
    config = outcome.config
    maxima: dict[str, float] = {}
    anchor_time = None
    if outcome.result is not None:
        if outcome.result.anchor_index:
            anchor_time = float(outcome.result.times[outcome.result.anchor_index])
        maxima["residual"] = outcome.result.max_residual
        for name, trace in outcome.result.traces().items():
            maxima[f"unitarity_{name}"] = trace.max_drift
    if outcome.transitions is not None:
        maxima["transition_off_initial"] = outcome.transitions.peak

    berry = None
    if outcome.berry is not None:
        berry = BerrySummary(
            solid_angle=outcome.berry.solid_angle,
            max_phase_error=outcome.berry.discrepancy,
            off_diagonal=outcome.berry.off_diagonal,
        )
    adiabatic = None
    if outcome.adiabatic is not None:
        adiabatic = AdiabaticSummary(epsilons=outcome.adiabatic[0], peaks=outcome.adiabatic[1])

    return ScenarioSummary(
        name=config.name,
        spin_j=config.spin_j,
        family=config.family,
        stepper=config.stepper.value,
        steps=config.grid.steps if config.grid is not None else None,
        t_end=config.grid.t_end if config.grid is not None else None,
        tolerance=config.effective_tolerance,
        frame_anchor_time=anchor_time,
        passed=outcome.passed,
        checks=outcome.checks,
        maxima=maxima,
        berry=berry,
        adiabatic=adiabatic,
        files=files,
    )


def write_outputs(outcome: ScenarioOutcome, handler: FileHandler) -> ScenarioSummary:
    """Serialize requested outputs, then the summary; writes happen in a fixed order."""
    config = outcome.config
    result = outcome.result
    written: list[Path] = []

    if result is not None and config.wants("traces"):
        header = ["t"]
        blocks = [result.times[:, None]]
        for name, trace in result.traces().items():
            names, values = matrix_columns(name, trace.unitaries)
            header += names
            blocks.append(values)
        written.append(handler.write_matrix(config.name, "traces.csv", header, np.hstack(blocks)))

    if result is not None and config.wants("residuals"):
        written.append(handler.write_table(config.name, "angles.csv", angle_columns(result)))

    if outcome.transitions is not None and config.wants("transitions"):
        names, data = transition_columns(outcome.transitions)
        written.append(handler.write_matrix(config.name, "transitions.csv", names, data))

    if outcome.resonance is not None:
        scan = outcome.resonance
        written.append(
            handler.write_table(
                config.name,
                "resonance.csv",
                {"kb": scan.kb, "fixed_peak": scan.fixed_peaks, "moving_peak": scan.moving_peaks},
            )
        )

    summary = build_summary(outcome, [p.name for p in written])
    handler.write_summary(summary)
    return summary


def report_error(error: Exception, stream: TextIO) -> int:
    print(f"error: {error}", file=stream)
    logger.error("%s", error)
    return EXIT_CONFIG_ERROR


async def run_command(
    config_path: str, options: RunOptions, stream: Optional[TextIO] = None
) -> int:
    """
    Execute a scenario and write its result files.

    Args:
        config_path: Scenario YAML file
        options: Command-line overrides
        stream: Where the check table is printed

    Returns:
        Process exit code
    """
    stream = stream or sys.stdout
    path = Path(config_path)
    handler = FileHandler(options.out)
    try:
        config = load_with_overrides(path, options)
        handler.ensure_output_dir()
        configure_logging(settings.LOG_LEVEL, handler.output_dir / settings.LOG_FILE)
        logger.info(
            "run %s: stepper=%s steps=%s jobs=%s out=%s",
            path,
            options.stepper or "config",
            options.steps or "config",
            options.jobs or settings.JOBS,
            handler.output_dir,
        )
        outcome = await ScenarioService(options.jobs).execute(config, path.parent)
        summary = write_outputs(outcome, handler)
    except (SpinEvolutionError, OSError) as e:
        return report_error(e, sys.stderr)

    print(verification.format_table(outcome.checks, title=f"scenario {config.name}"), file=stream)
    files = summary.files + [f"{config.name}_summary.yaml"]
    print(f"results in {handler.output_dir}: {', '.join(files)}", file=stream)
    return EXIT_OK if outcome.passed else EXIT_CHECK_FAILED


async def verify_command(
    config_path: str, options: RunOptions, stream: Optional[TextIO] = None
) -> int:
    """
    Run only the invariant suite of a scenario and print the pass/fail table.

    Returns:
        Process exit code
    """
    stream = stream or sys.stdout
    path = Path(config_path)
    try:
        config = load_with_overrides(path, options)
        outcome = await ScenarioService(options.jobs).execute(config, path.parent)
    except (SpinEvolutionError, OSError) as e:
        return report_error(e, sys.stderr)

    print(verification.format_table(outcome.checks, title=f"scenario {config.name}"), file=stream)
    return EXIT_OK if outcome.passed else EXIT_CHECK_FAILED
