"""
Invariant checks turned into pass/fail verdicts.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from app.core.config import settings
from app.physics.algebra import SpinRep, algebra_defects, axis_dot, exp_generator
from app.physics.analysis import (
    BerryPhaseCheck,
    ResonanceScan,
    SuddenCheck,
    TransitionTable,
    convergence_order,
)
from app.physics.factorization import FactorizationResult, FieldSpec
from app.physics.grid import Stepper
from app.physics.solutions import class_i_closed_N, class_ii_closed_N, class_ii_constants
from app.schemas.summary import CheckResult

logger = logging.getLogger(__name__)

ALGEBRA_TOLERANCE = 1e-12
HERMITICITY_TOLERANCE = 1e-14
SPECTRUM_TOLERANCE = 1e-10
STOCHASTIC_TOLERANCE = 1e-10
CLASS_I_ANGLE_TOLERANCE = 1e-6
SUDDEN_TOLERANCE = 1e-8
BERRY_TOLERANCE = 1e-6
RABI_TOLERANCE = 1e-6
MIN_ORDER = {Stepper.EXP_MIDPOINT: 1.8, Stepper.MAGNUS4: 3.7}

# fixed, well spread unit axes for the rotation checks
CHECK_AXES = np.array(
    [
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 1.0],
        [-0.3, 0.8, 0.2],
        [0.6, -0.1, -0.9],
    ]
)
CHECK_AXES = CHECK_AXES / np.linalg.norm(CHECK_AXES, axis=1, keepdims=True)


def algebra_checks(rep: SpinRep) -> list[CheckResult]:
    """su(2) relations, spectrum of n·S, and exp(2 pi n·S) = (-1)^(2j)."""
    defects = algebra_defects(rep)
    checks = [
        CheckResult.compare("algebra.commutator", defects["commutator"], ALGEBRA_TOLERANCE),
        CheckResult.compare("algebra.hermiticity", defects["hermiticity"], HERMITICITY_TOLERANCE),
        CheckResult.compare("algebra.casimir", defects["casimir"], ALGEBRA_TOLERANCE),
        CheckResult.compare("algebra.spectrum", defects["spectrum"], ALGEBRA_TOLERANCE),
    ]

    spectra = np.linalg.eigvalsh(axis_dot(CHECK_AXES, rep))[:, ::-1]
    checks.append(
        CheckResult.compare(
            "algebra.axis_spectrum",
            np.max(np.abs(spectra - rep.m_values)),
            SPECTRUM_TOLERANCE,
        )
    )

    sign = -1.0 if rep.dim % 2 == 0 else 1.0
    full_turns = exp_generator(2.0 * np.pi * CHECK_AXES, rep)
    checks.append(
        CheckResult.compare(
            "algebra.full_turn",
            np.max(np.linalg.norm(full_turns - sign * rep.identity, axis=(-2, -1))),
            SPECTRUM_TOLERANCE,
        )
    )
    return checks


def factorization_checks(
    result: FactorizationResult, transitions: TransitionTable, tolerance: float
) -> list[CheckResult]:
    checks = [
        CheckResult.compare("factorization.residual", result.max_residual, tolerance),
        CheckResult.compare(
            "factorization.unitarity", result.max_unitarity_drift, settings.UNITARITY_TOLERANCE
        ),
        CheckResult.compare(
            "transitions.doubly_stochastic", transitions.stochastic_defect(), STOCHASTIC_TOLERANCE
        ),
    ]
    return checks


def class_i_checks(result: FactorizationResult, rep: SpinRep, tolerance: float) -> list[CheckResult]:
    """beta = phi and N = exp(i l S2)."""
    drift = float(np.max(np.abs(result.angles.beta - result.phi)))
    closed = class_i_closed_N(result.angles.arclen, rep)
    error = np.max(np.linalg.norm(result.N.unitaries - closed, axis=(-2, -1)))
    return [
        CheckResult.compare("class_i.beta_minus_phi", drift, CLASS_I_ANGLE_TOLERANCE),
        CheckResult.compare("class_i.closed_form_N", error, tolerance),
    ]


def class_ii_checks(
    result: FactorizationResult, field: FieldSpec, rep: SpinRep, tolerance: float
) -> list[CheckResult]:
    """beta - phi = c2 t and N = exp(i c2 t S3) exp((i c1 S2 - i c2 S3) t)."""
    c1, c2 = class_ii_constants(field)
    t = result.times - result.times[0]
    drift = float(np.max(np.abs(result.angles.beta - result.phi - c2 * t)))
    closed = class_ii_closed_N(c1, c2, t, rep)
    error = np.max(np.linalg.norm(result.N.unitaries - closed, axis=(-2, -1)))
    return [
        CheckResult.compare("class_ii.beta_minus_phi", drift, CLASS_I_ANGLE_TOLERANCE),
        CheckResult.compare("class_ii.closed_form_N", error, tolerance),
    ]


def sudden_checks(check: SuddenCheck, tolerance: float) -> list[CheckResult]:
    threshold = max(tolerance, SUDDEN_TOLERANCE)
    return [
        CheckResult.compare("sudden.N_equals_A_inverse", check.inverse_defect, threshold),
        CheckResult.compare("sudden.U_equals_identity", check.identity_defect, threshold),
    ]


def berry_checks(check: BerryPhaseCheck) -> list[CheckResult]:
    return [
        CheckResult.compare("berry.phase_error", check.discrepancy, BERRY_TOLERANCE),
        CheckResult.compare("berry.off_diagonal", check.off_diagonal, BERRY_TOLERANCE),
    ]


def adiabatic_checks(peaks: Sequence[float]) -> list[CheckResult]:
    """Peaks must fall strictly as the sweep slows; value is the largest successive ratio."""
    p = np.asarray(peaks, dtype=float)
    ratio = float(np.max(p[1:] / p[:-1])) if np.all(p[:-1] > 0) else float("inf")
    return [CheckResult.compare("adiabatic.monotone_decrease", ratio, 1.0, "<")]


def resonance_checks(scan: ResonanceScan, cell: float, rep: SpinRep) -> list[CheckResult]:
    """
    Fixed-axis peak at kB cos(theta) = omega, moving-axis peak at kB = omega cos(theta),
    both within one scan cell; spin 1/2 also compares U against the Rabi formula.
    """
    cos_t = np.cos(scan.theta)
    checks = []
    if cos_t != 0.0:
        fixed_target = scan.omega / cos_t
        checks.append(
            CheckResult.compare(
                "resonance.fixed_axis_locus", abs(scan.fixed_locus() - fixed_target), cell
            )
        )
    moving_target = scan.omega * cos_t
    checks.append(
        CheckResult.compare(
            "resonance.moving_axis_locus", abs(scan.moving_locus() - moving_target), cell
        )
    )
    deviations = [p.rabi_deviation for p in scan.points if p.rabi_deviation is not None]
    if rep.dim == 2 and deviations:
        checks.append(CheckResult.compare("resonance.rabi_closed_form", max(deviations), RABI_TOLERANCE))
    return checks


def convergence_checks(residuals: Sequence[float], stepper: Stepper) -> list[CheckResult]:
    """Observed order of the residual under step halving."""
    orders = convergence_order(residuals)
    return [CheckResult.compare("factorization.residual_order", float(np.min(orders)), MIN_ORDER[stepper], ">=")]


def all_passed(checks: Sequence[CheckResult]) -> bool:
    return all(check.passed for check in checks)


def format_table(checks: Sequence[CheckResult], title: Optional[str] = None) -> str:
    """Fixed-width pass/fail table."""
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'check':<32} {'value':>13} {'':>2} {'threshold':<11} verdict")
    lines.append("-" * 68)
    lines.extend(check.row() for check in checks)
    return "\n".join(lines)
