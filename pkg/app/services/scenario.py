"""
Scenario service: builds fields from validated configs, runs the numerical
kernels on a worker pool and collects the check verdicts.
"""

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar

import numpy as np

from app.core.config import settings
from app.core.exceptions import (
    PathError,
    ScenarioConfigError,
    SpinEvolutionError,
)
from app.physics.algebra import SpinRep, spin_matrices
from app.physics.analysis import (
    BerryPhaseCheck,
    ResonancePoint,
    ResonanceScan,
    SuddenCheck,
    TransitionTable,
    adiabatic_sweep,
    berry_phase_check,
    resonance_point,
    sudden_check,
    transition_probabilities,
)
from app.physics.factorization import (
    FactorizationResult,
    FieldSpec,
    MagnitudeLaw,
    assemble,
    constant_law,
    factorize,
    polynomial_law,
    prepare,
    sinusoid_law,
)
from app.physics.grid import TimeGrid
from app.physics.solutions import (
    class_i_field,
    class_ii_field,
    class_ii_precession_field,
    class_ii_spiral_path,
)
from app.physics.sphere_path import (
    DirectionPath,
    load_tabulated_path,
    make_precession_path,
    make_static_path,
)
from app.schemas.scenario import (
    ClassIFieldSpec,
    ClassIIPrecessionFieldSpec,
    ClassIISpiralFieldSpec,
    ConstantLawSpec,
    MagnitudeSpec,
    PathSpec,
    PolynomialLawSpec,
    PrecessionFieldSpec,
    PrecessionPathSpec,
    ScenarioConfig,
    SpiralPathSpec,
    StaticFieldSpec,
    SuddenFieldSpec,
    TabulatedFieldSpec,
    TabulatedPathSpec,
    closed_period,
)
from app.schemas.summary import CheckResult
from app.services import verification

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass
class ScenarioOutcome:
    """Everything one scenario produced, ready for verdicts and serialization."""

    config: ScenarioConfig
    rep: SpinRep
    checks: list[CheckResult] = field(default_factory=list)
    field_spec: Optional[FieldSpec] = None
    result: Optional[FactorizationResult] = None
    transitions: Optional[TransitionTable] = None
    berry: Optional[BerryPhaseCheck] = None
    resonance: Optional[ResonanceScan] = None
    adiabatic: Optional[tuple[list[float], list[float]]] = None
    convergence: Optional[list[float]] = None

    @property
    def passed(self) -> bool:
        return verification.all_passed(self.checks)


def build_path(spec: PathSpec, source_dir: Path) -> DirectionPath:
    if isinstance(spec, PrecessionPathSpec):
        return make_precession_path(spec.theta, spec.omega)
    if isinstance(spec, SpiralPathSpec):
        return class_ii_spiral_path(spec.lam, spec.c1, spec.sign)
    return load_tabulated_path(str(source_dir / spec.csv))


def build_magnitude(spec: MagnitudeSpec) -> MagnitudeLaw:
    if isinstance(spec, ConstantLawSpec):
        return constant_law(spec.value)
    if isinstance(spec, PolynomialLawSpec):
        return polynomial_law(spec.coefficients)
    return sinusoid_law(spec.amplitude, spec.frequency, spec.phase, spec.offset)


def build_field(config: ScenarioConfig, source_dir: Path) -> FieldSpec:
    """
    Turn the field section of a config into a FieldSpec.

    Raises:
        ScenarioConfigError: If the field cannot be built for the configured grid
    """
    spec = config.field
    assert spec is not None and config.grid is not None
    t_end = config.grid.t_end
    try:
        if isinstance(spec, StaticFieldSpec):
            return FieldSpec(
                path=make_static_path(spec.direction),
                magnitude=constant_law(spec.kb),
                label="static",
            )
        if isinstance(spec, PrecessionFieldSpec):
            return FieldSpec(
                path=make_precession_path(spec.theta, spec.omega),
                magnitude=constant_law(spec.kb),
                label="precession",
            )
        if isinstance(spec, ClassIFieldSpec):
            return class_i_field(build_path(spec.path, source_dir), t_end=t_end)
        if isinstance(spec, ClassIISpiralFieldSpec):
            path = class_ii_spiral_path(spec.lam, spec.c1, spec.sign)
            return class_ii_field(path, spec.c2, c1=spec.c1, t_end=t_end)
        if isinstance(spec, ClassIIPrecessionFieldSpec):
            return class_ii_precession_field(spec.theta, spec.omega, spec.c2)
        if isinstance(spec, SuddenFieldSpec):
            return FieldSpec(
                path=build_path(spec.path, source_dir), magnitude=constant_law(0.0), label="sudden"
            )
        assert isinstance(spec, TabulatedFieldSpec)
        path = load_tabulated_path(str(source_dir / spec.csv))
        return FieldSpec(path=path, magnitude=build_magnitude(spec.magnitude), label="tabulated")
    except OSError as e:
        raise ScenarioConfigError(f"cannot read path samples: {e}", key="field") from e
    except SpinEvolutionError as e:
        raise ScenarioConfigError(str(e), key="field") from e


def path_source_key(config: ScenarioConfig) -> str:
    """Dotted key of the config entry the field's direction path comes from."""
    spec = config.field
    if isinstance(spec, TabulatedFieldSpec):
        return "field.csv"
    if isinstance(spec, (ClassIFieldSpec, SuddenFieldSpec)):
        return "field.path.csv" if isinstance(spec.path, TabulatedPathSpec) else "field.path"
    return "field"


def check_path_domain(path: DirectionPath, config: ScenarioConfig) -> None:
    assert config.grid is not None
    if path.t_start > 0.0:
        raise ScenarioConfigError(
            f"path samples start at t={path.t_start:.16g}; the time grid starts at 0",
            key=path_source_key(config),
        )
    end = config.grid.t_end
    if end > path.t_end or (path.open_end and end >= path.t_end):
        raise ScenarioConfigError(
            f"t_end={end} lies outside the path domain, which ends at {path.t_end:.16g}",
            key="grid.t_end",
        )


class ScenarioService:
    """Service running one scenario's kernels concurrently."""

    def __init__(self, jobs: Optional[int] = None):
        """
        Initialize the scenario service.

        Args:
            jobs: Worker threads for independent sub-tasks (defaults to settings.JOBS)
        """
        self.jobs = max(1, jobs or settings.JOBS)

    async def execute(self, config: ScenarioConfig, source_dir: Path) -> ScenarioOutcome:
        """
        Run the algebra suite and, if the scenario has a field, the factorization
        and every requested output.

        Args:
            config: Validated scenario
            source_dir: Directory relative paths in the config refer to

        Returns:
            The computed data together with the check verdicts

        Raises:
            ScenarioConfigError: If the field cannot be built or a closed path is open
        """
        rep = spin_matrices(config.spin_j)
        outcome = ScenarioOutcome(config=config, rep=rep)
        outcome.checks.extend(verification.algebra_checks(rep))
        if config.field is None:
            logger.info("scenario %s: algebra-only, spin %s", config.name, config.spin_j)
            return outcome

        field_spec = build_field(config, source_dir)
        check_path_domain(field_spec.path, config)
        outcome.field_spec = field_spec
        assert config.grid is not None
        grid = TimeGrid(t_end=config.grid.t_end, steps=config.grid.steps)
        logger.info(
            "scenario %s: family %s, spin %s, %d %s steps to t=%g, jobs=%d",
            config.name,
            config.family,
            config.spin_j,
            grid.steps,
            config.stepper.value,
            grid.t_end,
            self.jobs,
        )

        with ThreadPoolExecutor(max_workers=self.jobs) as executor:
            loop = asyncio.get_running_loop()

            def submit(fn: Callable[..., T], *args: Any) -> "asyncio.Future[T]":
                return loop.run_in_executor(executor, fn, *args)

            # shared angle pass, then U, A and N independently
            plan = await submit(prepare, field_spec, rep, grid, config.stepper)
            u, a, n = await asyncio.gather(
                submit(plan.oracle_trace),
                submit(plan.geometric_trace),
                submit(plan.nonadiabatic_trace),
            )
            outcome.result = assemble(plan, u, a, n)
            outcome.transitions = transition_probabilities(outcome.result.N, rep)

            extras = []
            if config.family == "sudden":
                extras.append(self._sudden(submit, outcome, grid))
            if config.wants("berry"):
                extras.append(self._berry(submit, outcome))
            if config.wants("resonance_scan"):
                extras.append(self._resonance(submit, outcome))
            if config.wants("adiabatic"):
                extras.append(self._adiabatic(submit, outcome))
            if config.wants("convergence"):
                extras.append(self._convergence(submit, outcome, grid))
            await asyncio.gather(*extras)

        self._collect_checks(outcome)
        logger.info(
            "scenario %s: max residual %.3e, %s",
            config.name,
            outcome.result.max_residual,
            "all checks passed" if outcome.passed else "checks FAILED",
        )
        return outcome

    async def _sudden(self, submit: Callable, outcome: ScenarioOutcome, grid: TimeGrid) -> None:
        assert outcome.field_spec is not None
        check: SuddenCheck = await submit(
            sudden_check, outcome.field_spec.path, outcome.rep, grid, outcome.config.stepper
        )
        outcome.checks.extend(
            verification.sudden_checks(check, outcome.config.effective_tolerance)
        )

    async def _berry(self, submit: Callable, outcome: ScenarioOutcome) -> None:
        config = outcome.config
        assert outcome.field_spec is not None and config.grid is not None
        path = outcome.field_spec.path
        period = closed_period(config)
        if period is None:
            period = path.t_end - path.t_start
        try:
            outcome.berry = await submit(
                berry_phase_check, path, outcome.rep, period, config.grid.steps, config.stepper
            )
        except PathError as e:
            raise ScenarioConfigError(str(e), key="outputs") from e

    async def _resonance(self, submit: Callable, outcome: ScenarioOutcome) -> None:
        config = outcome.config
        spec = config.field
        scan = config.resonance_scan
        assert isinstance(spec, PrecessionFieldSpec)
        assert scan is not None and config.grid is not None
        grid = TimeGrid(
            t_end=scan.t_end or config.grid.t_end, steps=scan.steps or config.grid.steps
        )
        points: list[ResonancePoint] = await asyncio.gather(
            *(
                submit(
                    resonance_point, spec.theta, spec.omega, kb, outcome.rep, grid, config.stepper
                )
                for kb in scan.kb_values()
            )
        )
        outcome.resonance = ResonanceScan(theta=spec.theta, omega=spec.omega, points=tuple(points))

    async def _adiabatic(self, submit: Callable, outcome: ScenarioOutcome) -> None:
        config = outcome.config
        spec = config.field
        assert isinstance(spec, PrecessionFieldSpec) and config.grid is not None
        sweep = config.adiabatic
        epsilons = sweep.epsilons if sweep is not None else [1.0, 0.5, 0.25, 0.125]
        steps = (sweep.steps if sweep is not None else None) or config.grid.steps
        peaks = await asyncio.gather(
            *(
                submit(
                    adiabatic_sweep,
                    spec.theta,
                    spec.omega,
                    spec.kb,
                    [eps],
                    outcome.rep,
                    steps,
                    config.stepper,
                )
                for eps in epsilons
            )
        )
        outcome.adiabatic = (list(epsilons), [float(p[0]) for p in peaks])

    async def _convergence(
        self, submit: Callable, outcome: ScenarioOutcome, grid: TimeGrid
    ) -> None:
        assert outcome.field_spec is not None
        grids = [TimeGrid(t_end=grid.t_end, steps=max(2, grid.steps // f)) for f in (4, 2)]
        results = await asyncio.gather(
            *(
                submit(factorize, outcome.field_spec, outcome.rep, g, outcome.config.stepper)
                for g in grids
            )
        )
        assert outcome.result is not None
        outcome.convergence = [r.max_residual for r in results] + [outcome.result.max_residual]

    def _collect_checks(self, outcome: ScenarioOutcome) -> None:
        config = outcome.config
        result = outcome.result
        assert result is not None and outcome.transitions is not None
        tolerance = config.effective_tolerance
        rep = outcome.rep

        checks = verification.factorization_checks(result, outcome.transitions, tolerance)
        if isinstance(config.field, ClassIFieldSpec):
            checks += verification.class_i_checks(result, rep, tolerance)
        if isinstance(config.field, (ClassIISpiralFieldSpec, ClassIIPrecessionFieldSpec)):
            assert outcome.field_spec is not None
            checks += verification.class_ii_checks(result, outcome.field_spec, rep, tolerance)
        if outcome.berry is not None:
            checks += verification.berry_checks(outcome.berry)
        if outcome.resonance is not None:
            assert config.resonance_scan is not None
            checks += verification.resonance_checks(
                outcome.resonance, config.resonance_scan.cell * (1.0 + 1e-9), rep
            )
        if outcome.adiabatic is not None:
            checks += verification.adiabatic_checks(outcome.adiabatic[1])
        if outcome.convergence is not None:
            checks += verification.convergence_checks(outcome.convergence, config.stepper)
        outcome.checks.extend(checks)

        for check in checks:
            if not check.passed:
                logger.warning(
                    "check %s failed: %.4e %s %.4e",
                    check.name,
                    check.value,
                    check.relation,
                    check.threshold,
                )


def angle_columns(result: FactorizationResult) -> dict[str, np.ndarray]:
    """Columns of the angles file: t, beta, phi, arclen, speed, residual."""
    return {
        "t": result.times,
        "beta": result.angles.beta,
        "phi": result.phi,
        "arclen": result.angles.arclen,
        "speed": result.angles.speed,
        "residual": result.residual,
    }


def transition_columns(table: TransitionTable) -> tuple[list[str], np.ndarray]:
    """t, then P_{m'm} row-major with m descending."""
    dim = table.probabilities.shape[-1]
    names = ["t"] + [f"P_{a}_{b}" for a in range(dim) for b in range(dim)]
    return names, np.column_stack([table.times, table.flattened()])
