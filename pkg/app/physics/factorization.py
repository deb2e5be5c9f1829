"""
The factorization U(t) = A(t) D(t) N(t) of spin evolution in a field kB(t) n(t).

A is the geometric operator generated by n x n', D = exp(i phi S3) carries the
dynamical angle phi = -int kB, and N is the non-adiabatic remainder whose
generator lies in the e1/e2 plane with amplitude |n'| and phase beta - phi.

Every matrix is written in the initial transported frame: S1, S2, S3 stand for
e1(0)·S, e2(0)·S, e3(0)·S, and lab 3-vectors are rotated into that basis before
generators are built.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from app.core.config import settings
from app.physics.algebra import SpinRep, exp_generator, unitarity_defect
from app.physics.grid import Stepper, TimeGrid
from app.physics.propagator import (
    GeneratorFunction,
    PropagatorTrace,
    as_stepper,
    schrodinger_oracle,
    time_ordered_exp,
)
from app.physics.sphere_path import (
    DirectionPath,
    GeometricAngles,
    beta_angle,
    first_moving_index,
    initial_basis,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]


# Magnitude laws


@dataclass(frozen=True)
class MagnitudeLaw:
    """
    Scalar field magnitude B(t); may vanish and change sign.

    ``antiderivative`` (when known) gives int_0^t B exactly, used for off-node
    values of phi.
    """

    value: Callable[[FloatArray], FloatArray] = field(repr=False)
    antiderivative: Optional[Callable[[FloatArray], FloatArray]] = field(
        default=None, repr=False
    )
    label: str = ""

    def __call__(self, t: ArrayLike) -> FloatArray:
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(np.asarray(self.value(t), dtype=float), t.shape)


def constant_law(value: float) -> MagnitudeLaw:
    return MagnitudeLaw(
        value=lambda t: np.full_like(t, value),
        antiderivative=lambda t: value * t,
        label=f"constant({value:g})",
    )


def polynomial_law(coefficients: Sequence[float]) -> MagnitudeLaw:
    """B(t) = c0 + c1 t + c2 t^2 + ...; coefficients in increasing degree."""
    poly = np.polynomial.Polynomial(list(coefficients))
    integral = poly.integ(lbnd=0.0)
    return MagnitudeLaw(value=poly, antiderivative=integral, label=f"polynomial{tuple(coefficients)}")


def sinusoid_law(
    amplitude: float, frequency: float, phase: float = 0.0, offset: float = 0.0
) -> MagnitudeLaw:
    """B(t) = offset + amplitude sin(frequency t + phase)."""

    def value(t: FloatArray) -> FloatArray:
        return offset + amplitude * np.sin(frequency * t + phase)

    def antiderivative(t: FloatArray) -> FloatArray:
        if frequency == 0.0:
            return (offset + amplitude * np.sin(phase)) * t
        return offset * t - amplitude / frequency * (
            np.cos(frequency * t + phase) - np.cos(phase)
        )

    return MagnitudeLaw(
        value=value,
        antiderivative=antiderivative,
        label=f"sinusoid({amplitude:g}, {frequency:g}, {phase:g}, {offset:g})",
    )


@dataclass(frozen=True)
class FieldSpec:
    """H(t) = k B(t) n(t)·S."""

    path: DirectionPath
    magnitude: MagnitudeLaw
    k: float = 1.0
    label: str = ""
    constants: Mapping[str, float] = field(default_factory=dict)

    def kb(self, t: ArrayLike) -> FloatArray:
        return self.k * self.magnitude(t)

    def kb_integral(self) -> Optional[Callable[[FloatArray], FloatArray]]:
        anti = self.magnitude.antiderivative
        if anti is None:
            return None
        return lambda t: self.k * np.asarray(anti(t), dtype=float)


# Results


@dataclass(frozen=True)
class FactorizationResult:
    times: FloatArray
    U: PropagatorTrace
    A: PropagatorTrace
    D: PropagatorTrace
    N: PropagatorTrace
    phi: FloatArray
    angles: GeometricAngles
    residual: FloatArray
    basis: FloatArray
    anchor_index: Optional[int] = 0

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual))

    @property
    def max_unitarity_drift(self) -> float:
        return max(trace.max_drift for trace in (self.U, self.A, self.D, self.N))

    def product(self) -> NDArray[np.complex128]:
        """A(t) D(t) N(t) at every node."""
        return self.A.unitaries @ self.D.unitaries @ self.N.unitaries

    def traces(self) -> dict[str, PropagatorTrace]:
        return {"U": self.U, "A": self.A, "D": self.D, "N": self.N}


# Operators


def dynamical_operator(
    field: FieldSpec, rep: SpinRep, grid: TimeGrid, stepper: Union[Stepper, str, None] = None
) -> tuple[PropagatorTrace, FloatArray]:
    """
    D(t) = exp(i phi(t) S3) with phi(t) = -int_0^t kB, by cumulative Simpson.

    No time ordering is involved since the axis is fixed.
    """
    times = grid.times
    phi = -cumulative_simpson(field.kb(times), x=times, initial=0.0)
    zeros = np.zeros_like(phi)
    unitaries = exp_generator(np.stack([zeros, zeros, -phi], axis=-1), rep)
    trace = PropagatorTrace(
        times=times,
        unitaries=unitaries,
        stepper=as_stepper(stepper),
        drift=unitarity_defect(unitaries),
    )
    return trace, phi


def geometric_generator(path: DirectionPath, basis: Optional[FloatArray] = None) -> GeneratorFunction:
    """omega(t) = n x n' in initial-frame components."""

    def evaluate(t: FloatArray) -> FloatArray:
        n, nd, _ = path.evaluate(t)
        omega = np.cross(n, nd)
        return omega if basis is None else omega @ basis.T

    return GeneratorFunction(evaluate, label="n x dn/dt")


def geometric_operator(
    path: DirectionPath,
    rep: SpinRep,
    grid: TimeGrid,
    stepper: Union[Stepper, str, None] = None,
    basis: Optional[FloatArray] = None,
) -> PropagatorTrace:
    """
    A(t) = T exp(-i int (n x n')·S).

    ``basis`` holds e1(0), e2(0), e3(0) as rows; it defaults to the triad built
    from the path at the first moving node.
    """
    if basis is None:
        basis = frame_basis(path, grid)[0]
    return time_ordered_exp(geometric_generator(path, basis), rep, grid, stepper)


def nonadiabatic_generator(
    angles: GeometricAngles,
    phi: FloatArray,
    speed: Optional[Callable[[FloatArray], FloatArray]] = None,
    phi_exact: Optional[Callable[[FloatArray], FloatArray]] = None,
) -> GeneratorFunction:
    """
    omega = (-|n'| sin(beta - phi), -|n'| cos(beta - phi), 0).

    Off-node values use ``speed`` and ``phi_exact`` when given; otherwise node
    values are interpolated with cubic splines. beta is always interpolated.
    """
    times = angles.times
    beta_of = CubicSpline(times, angles.beta)
    phi_of = phi_exact or CubicSpline(times, phi)
    speed_of = speed or CubicSpline(times, angles.speed)

    def evaluate(t: FloatArray) -> FloatArray:
        delta = beta_of(t) - phi_of(t)
        s = speed_of(t)
        return np.stack([-s * np.sin(delta), -s * np.cos(delta), np.zeros_like(s)], axis=-1)

    return GeneratorFunction(evaluate, label="non-adiabatic")


def frame_basis(
    path: DirectionPath, grid: TimeGrid, eps: Optional[float] = None
) -> tuple[FloatArray, Optional[int]]:
    """
    Rows e1(0), e2(0), e3(0) and the anchor node they were built at.

    A path that starts at rest is anchored at its first moving node; the
    direction is constant before it, so e3 still equals n(0). A path that never
    moves gets an orthonormal completion of n(0) and anchor None.
    """
    n, nd, _ = path.evaluate(grid.times)
    anchor = first_moving_index(np.linalg.norm(nd, axis=-1), eps)
    if anchor is None:
        return initial_basis(n[0], np.zeros(3), eps), None
    return initial_basis(n[anchor], nd[anchor], eps), anchor


@dataclass(frozen=True)
class FactorizationPlan:
    """
    Inputs shared by the U, A and N propagations of one factorization.

    The three ``*_trace`` methods are independent and may run concurrently.
    """

    field: FieldSpec
    rep: SpinRep
    grid: TimeGrid
    stepper: Stepper
    basis: FloatArray
    anchor_index: Optional[int]
    angles: GeometricAngles
    phi: FloatArray
    D: PropagatorTrace

    def oracle_trace(self) -> PropagatorTrace:
        return schrodinger_oracle(self.field, self.rep, self.grid, self.stepper, self.basis)

    def geometric_trace(self) -> PropagatorTrace:
        return geometric_operator(self.field.path, self.rep, self.grid, self.stepper, self.basis)

    def nonadiabatic_trace(self) -> PropagatorTrace:
        gen = nonadiabatic_generator(
            self.angles, self.phi, speed=self.field.path.speed, phi_exact=self._phi_exact()
        )
        return time_ordered_exp(gen, self.rep, self.grid, self.stepper)

    def _phi_exact(self) -> Optional[Callable[[FloatArray], FloatArray]]:
        integral = self.field.kb_integral()
        if integral is None:
            return None
        t0 = self.grid.t_start
        return lambda t: -(integral(t) - integral(np.asarray(t0)))


def prepare(
    field: FieldSpec,
    rep: SpinRep,
    grid: TimeGrid,
    stepper: Union[Stepper, str, None] = None,
    eps: Optional[float] = None,
) -> FactorizationPlan:
    """Angle pass: frame anchor, beta, arc length, speed, phi and D."""
    stepper = as_stepper(stepper)
    basis, anchor = frame_basis(field.path, grid, eps)
    if anchor is not None and anchor > 0:
        logger.warning(
            "path is stationary at t=%g; frame anchored at node %d (t=%g)",
            grid.t_start,
            anchor,
            grid.times[anchor],
        )

    angles = beta_angle(field.path, grid, eps)
    if anchor is None:
        angles = GeometricAngles(
            times=angles.times,
            beta=np.zeros_like(angles.beta),
            arclen=angles.arclen,
            speed=angles.speed,
        )
    elif anchor > 0:
        beta = angles.beta.copy()
        beta[:anchor] = 0.0
        beta[anchor:] -= angles.beta[anchor]
        angles = GeometricAngles(angles.times, beta, angles.arclen, angles.speed)

    d_trace, phi = dynamical_operator(field, rep, grid, stepper)
    return FactorizationPlan(
        field=field,
        rep=rep,
        grid=grid,
        stepper=stepper,
        basis=basis,
        anchor_index=anchor,
        angles=angles,
        phi=phi,
        D=d_trace,
    )


def assemble(
    plan: FactorizationPlan, u: PropagatorTrace, a: PropagatorTrace, n: PropagatorTrace
) -> FactorizationResult:
    """Combine the traces and measure ||U - A D N||_F at every node."""
    product = a.unitaries @ plan.D.unitaries @ n.unitaries
    residual = np.linalg.norm(u.unitaries - product, axis=(-2, -1))
    logger.debug(
        "factorization %s: max residual %.3e", plan.field.label, float(np.max(residual))
    )
    return FactorizationResult(
        times=plan.grid.times,
        U=u,
        A=a,
        D=plan.D,
        N=n,
        phi=plan.phi,
        angles=plan.angles,
        residual=residual,
        basis=plan.basis,
        anchor_index=plan.anchor_index,
    )


def factorize(
    field: FieldSpec,
    rep: SpinRep,
    grid: TimeGrid,
    stepper: Union[Stepper, str, None] = None,
    eps: Optional[float] = None,
) -> FactorizationResult:
    """
    Compute A, D and N for ``field`` and check them against the full evolution.

    Args:
        field: Magnitude law, coupling and direction path
        rep: Spin representation
        grid: Uniform time grid
        stepper: Stepper for U, A and N (defaults to settings.DEFAULT_STEPPER)
        eps: Speed below which the path counts as stationary

    Returns:
        Traces of U (oracle), A, D, N, the angles and the residual per node
    """
    plan = prepare(field, rep, grid, stepper, eps)
    return assemble(plan, plan.oracle_trace(), plan.geometric_trace(), plan.nonadiabatic_trace())


def default_tolerance(stepper: Union[Stepper, str, None]) -> float:
    return settings.default_tolerance(as_stepper(stepper).value)
