"""
Derived physical quantities: transition tables, Berry phases, resonance and
adiabatic sweeps, and the executable identities of the factorization.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.physics.algebra import SpinRep, axis_dot, axis_eigenbasis
from app.physics.factorization import (
    FactorizationResult,
    FieldSpec,
    constant_law,
    factorize,
    frame_basis,
    geometric_operator,
)
from app.physics.grid import Stepper, TimeGrid
from app.physics.propagator import PropagatorTrace
from app.physics.sphere_path import (
    DirectionPath,
    Frame,
    check_closed,
    make_precession_path,
    slow_down,
    solid_angle,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class TransitionTable:
    """P[k, a, b] = |<m_a| X(t_k) |m_b>|^2, basis ordered m = j, ..., -j."""

    j: float
    times: FloatArray
    probabilities: FloatArray

    @property
    def off_initial(self) -> FloatArray:
        """Probability of leaving the m = j state, per node."""
        return 1.0 - self.probabilities[:, 0, 0]

    @property
    def peak(self) -> float:
        return float(np.max(self.off_initial))

    def stochastic_defect(self) -> float:
        """Largest deviation of any row or column sum from 1."""
        rows = np.abs(self.probabilities.sum(axis=-1) - 1.0)
        cols = np.abs(self.probabilities.sum(axis=-2) - 1.0)
        return float(max(rows.max(), cols.max()))

    def flattened(self) -> FloatArray:
        """Row-major P_{m'm} per node, shape (nodes, dim * dim)."""
        return self.probabilities.reshape(self.times.size, -1)


def transition_probabilities(trace: PropagatorTrace, rep: SpinRep) -> TransitionTable:
    """Squared moduli of the entries; S3 is diagonal so no basis change is needed."""
    return TransitionTable(
        j=float(rep.j), times=trace.times, probabilities=np.abs(trace.unitaries) ** 2
    )


def axis_transition_probabilities(
    trace: PropagatorTrace, axis: ArrayLike, rep: SpinRep
) -> TransitionTable:
    """
    Transition table in the eigenbasis of axis·S.

    ``axis`` must be written in the same basis as the trace matrices.
    """
    v = axis_eigenbasis(axis, rep)
    rotated = v.conj().T @ trace.unitaries @ v
    return TransitionTable(j=float(rep.j), times=trace.times, probabilities=np.abs(rotated) ** 2)


def circle_distance(a: ArrayLike, b: ArrayLike) -> FloatArray:
    """Distance between angles on the unit circle, in [0, pi]."""
    d = np.mod(np.asarray(a) - np.asarray(b) + np.pi, 2.0 * np.pi) - np.pi
    return np.abs(d)


@dataclass(frozen=True)
class BerryPhaseCheck:
    solid_angle: float
    m_values: FloatArray
    phases: FloatArray
    expected: FloatArray
    off_diagonal: float

    @property
    def discrepancy(self) -> float:
        """Largest per-m phase error on the circle."""
        return float(np.max(circle_distance(self.phases, self.expected)))


def berry_phase_check(
    path: DirectionPath,
    rep: SpinRep,
    period: float,
    steps: int,
    stepper: Union[Stepper, str, None] = None,
) -> BerryPhaseCheck:
    """
    Compare A(T) over a closed loop with exp(-i Omega n(0)·S).

    In the initial frame exp(-i Omega S3) is diagonal, so the phase of each
    diagonal entry is compared with -m Omega and the off-diagonal mass is reported.

    Raises:
        OpenPathError: If the path does not close over ``period``
    """
    check_closed(path, period)
    omega = solid_angle(path, period)
    grid = TimeGrid(t_end=path.t_start + period, steps=steps, t_start=path.t_start)
    basis, _ = frame_basis(path, grid)
    final = geometric_operator(path, rep, grid, stepper, basis).final

    diag = np.diag(final)
    off = final - np.diag(diag)
    return BerryPhaseCheck(
        solid_angle=omega,
        m_values=rep.m_values,
        phases=np.angle(diag),
        expected=-rep.m_values * omega,
        off_diagonal=float(np.linalg.norm(off)),
    )


def frame_covariance_residual(
    a_trace: PropagatorTrace, frame: Frame, rep: SpinRep, basis: Optional[FloatArray] = None
) -> FloatArray:
    """
    max_i ||A^-1 (e_i(t)·S) A - S_i||_F at every node.

    ``basis`` maps lab vectors to the frame the trace is written in; it defaults
    to the frame's own initial triad.
    """
    basis = frame.basis if basis is None else basis
    a = a_trace.unitaries
    a_inv = np.swapaxes(a.conj(), -1, -2)
    worst = np.zeros(a.shape[0])
    for vectors, s_i in zip((frame.e1, frame.e2, frame.e3), rep.stack):
        transported = axis_dot(vectors @ basis.T, rep)
        diff = a_inv @ transported @ a - s_i
        worst = np.maximum(worst, np.linalg.norm(diff, axis=(-2, -1)))
    return worst


@dataclass(frozen=True)
class SuddenCheck:
    inverse_defect: float
    identity_defect: float


def sudden_check(
    path: DirectionPath,
    rep: SpinRep,
    grid: TimeGrid,
    stepper: Union[Stepper, str, None] = None,
) -> SuddenCheck:
    """With B = 0 the state does not move: N = A^-1 and U = I."""
    field = FieldSpec(path=path, magnitude=constant_law(0.0), label="sudden")
    result = factorize(field, rep, grid, stepper)
    inverse = np.linalg.norm(result.N.unitaries - result.A.inverse().unitaries, axis=(-2, -1))
    identity = np.linalg.norm(result.U.unitaries - rep.identity, axis=(-2, -1))
    return SuddenCheck(float(np.max(inverse)), float(np.max(identity)))


def precession_field(theta: float, omega: float, kb: float) -> FieldSpec:
    """Constant magnitude along the precession path."""
    return FieldSpec(
        path=make_precession_path(theta, omega),
        magnitude=constant_law(kb),
        label=f"precession(theta={theta:g}, omega={omega:g}, kB={kb:g})",
    )


def fixed_axis_table(result: FactorizationResult, rep: SpinRep) -> TransitionTable:
    """Transitions of U between eigenstates of the lab z·S."""
    lab_z = result.basis @ np.array([0.0, 0.0, 1.0])
    return axis_transition_probabilities(result.U, lab_z, rep)


def rabi_probability(theta: float, omega: float, kb: float, t: ArrayLike) -> FloatArray:
    """
    Spin-1/2 flip probability out of the lab +z state for the precessing field.

    In the frame rotating with the field the Hamiltonian is constant, with
    transverse part kB sin(theta) and detuning kB cos(theta) - omega.
    """
    t = np.asarray(t, dtype=float)
    rabi = kb * np.sin(theta)
    detuning = kb * np.cos(theta) - omega
    total_sq = rabi * rabi + detuning * detuning
    if total_sq == 0.0:
        return np.zeros_like(t)
    return rabi * rabi / total_sq * np.sin(0.5 * np.sqrt(total_sq) * t) ** 2


@dataclass(frozen=True)
class ResonancePoint:
    kb: float
    fixed_peak: float
    moving_peak: float
    rabi_deviation: Optional[float] = None


@dataclass(frozen=True)
class ResonanceScan:
    theta: float
    omega: float
    points: tuple[ResonancePoint, ...]

    @property
    def kb(self) -> FloatArray:
        return np.array([p.kb for p in self.points])

    @property
    def fixed_peaks(self) -> FloatArray:
        return np.array([p.fixed_peak for p in self.points])

    @property
    def moving_peaks(self) -> FloatArray:
        return np.array([p.moving_peak for p in self.points])

    def fixed_locus(self) -> float:
        """kB with the largest fixed-axis transition peak."""
        return float(self.kb[int(np.argmax(self.fixed_peaks))])

    def moving_locus(self) -> float:
        """kB with the largest moving-axis (N) transition peak."""
        return float(self.kb[int(np.argmax(self.moving_peaks))])


def resonance_point(
    theta: float,
    omega: float,
    kb: float,
    rep: SpinRep,
    grid: TimeGrid,
    stepper: Union[Stepper, str, None] = None,
) -> ResonancePoint:
    """
    Peak transition probabilities from U (fixed axis) and from N (moving axis).

    For spin 1/2 the fixed-axis curve is also compared with the Rabi formula.
    """
    result = factorize(precession_field(theta, omega, kb), rep, grid, stepper)
    fixed = fixed_axis_table(result, rep)
    moving = transition_probabilities(result.N, rep).peak
    deviation = None
    if rep.dim == 2:
        exact = rabi_probability(theta, omega, kb, result.times - result.times[0])
        deviation = float(np.max(np.abs(fixed.off_initial - exact)))
    return ResonancePoint(
        kb=float(kb), fixed_peak=fixed.peak, moving_peak=moving, rabi_deviation=deviation
    )


def resonance_scan(
    theta: float,
    omega: float,
    kb_values: Iterable[float],
    rep: SpinRep,
    t_end: float,
    steps: int,
    stepper: Union[Stepper, str, None] = None,
) -> ResonanceScan:
    """
    Sweep constant kB along the precession path.

    The fixed-axis curve peaks at kB cos(theta) = omega, the moving-axis curve
    at kB = omega cos(theta); the two meet as theta -> 0.
    """
    grid = TimeGrid(t_end=t_end, steps=steps)
    points = tuple(resonance_point(theta, omega, kb, rep, grid, stepper) for kb in kb_values)
    return ResonanceScan(theta=theta, omega=omega, points=points)


def adiabatic_sweep(
    theta: float,
    omega: float,
    kb: float,
    epsilons: Sequence[float],
    rep: SpinRep,
    steps: int,
    stepper: Union[Stepper, str, None] = None,
) -> FloatArray:
    """
    Peak probability of leaving the initial instantaneous eigenstate as one
    precession loop is traversed ever more slowly, over [0, 2 pi / (omega eps)].
    """
    path = make_precession_path(theta, omega)
    period = 2.0 * np.pi / abs(omega)
    peaks = []
    for eps in epsilons:
        field = FieldSpec(path=slow_down(path, eps), magnitude=constant_law(kb))
        grid = TimeGrid(t_end=period / eps, steps=steps)
        result = factorize(field, rep, grid, stepper)
        peaks.append(transition_probabilities(result.N, rep).peak)
        logger.debug("adiabatic sweep eps=%g: peak %.6e", eps, peaks[-1])
    return np.array(peaks)


def convergence_order(errors: Sequence[float], refinement: float = 2.0) -> FloatArray:
    """Observed orders log(e_k / e_{k+1}) / log(refinement)."""
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(refinement)
