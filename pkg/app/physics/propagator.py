"""
Time-ordered exponentials on the unitary group.

Both steppers apply one exact exponential per step, so every node of a trace
is unitary up to round-off; drift is recorded, never corrected.
"""

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.core.config import settings
from app.core.exceptions import GridError
from app.physics.algebra import ComplexArray, SpinRep, exp_generator, unitarity_defect
from app.physics.grid import Stepper, TimeGrid

if TYPE_CHECKING:
    from app.physics.factorization import FieldSpec

logger = logging.getLogger(__name__)

MAGNUS4_COMMUTATOR = np.sqrt(3.0) / 12.0


@dataclass(frozen=True)
class GeneratorFunction:
    """t -> omega(t), the generator being -i omega(t)·S. Vectorised over t."""

    evaluator: Callable[[NDArray[np.float64]], NDArray[np.float64]] = field(repr=False)
    label: str = ""

    def __call__(self, t: ArrayLike) -> NDArray[np.float64]:
        t = np.asarray(t, dtype=float)
        return np.asarray(self.evaluator(t), dtype=float)


@dataclass(frozen=True)
class PropagatorTrace:
    times: NDArray[np.float64]
    unitaries: ComplexArray
    stepper: Stepper
    drift: NDArray[np.float64]

    @property
    def final(self) -> ComplexArray:
        return self.unitaries[-1]

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift))

    def inverse(self) -> "PropagatorTrace":
        """Node-wise inverses U(t)^dagger."""
        inv = np.swapaxes(self.unitaries.conj(), -1, -2)
        return PropagatorTrace(self.times, inv, self.stepper, self.drift)

    def __len__(self) -> int:
        return self.times.size


def as_stepper(stepper: Union[Stepper, str, None]) -> Stepper:
    return Stepper(stepper or settings.DEFAULT_STEPPER)


def step_generators(gen: GeneratorFunction, grid: TimeGrid, stepper: Stepper) -> NDArray[np.float64]:
    """Per-step su(2) vectors v_k with step propagator exp(-i v_k·S)."""
    h = grid.step
    if stepper is Stepper.EXP_MIDPOINT:
        return h * gen(grid.midpoints)
    c1, c2 = grid.gauss_points
    w1, w2 = gen(c1), gen(c2)
    # [w1·S, w2·S] = i (w1 x w2)·S
    return 0.5 * h * (w1 + w2) + MAGNUS4_COMMUTATOR * h * h * np.cross(w2, w1)


def time_ordered_exp(
    gen: GeneratorFunction,
    rep: SpinRep,
    grid: TimeGrid,
    stepper: Union[Stepper, str, None] = None,
    initial: Optional[ComplexArray] = None,
) -> PropagatorTrace:
    """
    Solve dU/dt = -i omega(t)·S U on ``grid``.

    Args:
        gen: Generator vectors omega(t)
        rep: Spin representation the matrices act in
        grid: Uniform time grid
        stepper: exp-midpoint (order 2) or magnus4 (order 4)
        initial: U at the first node, identity by default

    Returns:
        The propagator at every grid node
    """
    stepper = as_stepper(stepper)
    if not isinstance(grid, TimeGrid):
        raise GridError("time_ordered_exp needs a uniform TimeGrid")

    # all step exponentials in one batched eigendecomposition
    steps = exp_generator(step_generators(gen, grid, stepper), rep)

    unitaries = np.empty((grid.steps + 1, rep.dim, rep.dim), dtype=complex)
    unitaries[0] = rep.identity if initial is None else initial
    for k in range(grid.steps):
        unitaries[k + 1] = steps[k] @ unitaries[k]

    drift = unitarity_defect(unitaries)
    logger.debug(
        "propagated %s over %d %s steps, max drift %.2e",
        gen.label or "generator",
        grid.steps,
        stepper.value,
        float(np.max(drift)),
    )
    return PropagatorTrace(times=grid.times, unitaries=unitaries, stepper=stepper, drift=drift)


def field_generator(field: "FieldSpec", basis: Optional[NDArray[np.float64]] = None) -> GeneratorFunction:
    """omega(t) = kB(t) n(t), optionally expressed in the rows of ``basis``."""

    def evaluate(t: NDArray[np.float64]) -> NDArray[np.float64]:
        vec = field.kb(t)[..., None] * field.path.direction(t)
        return vec if basis is None else vec @ basis.T

    return GeneratorFunction(evaluate, label=f"field {field.label}".strip())


def schrodinger_oracle(
    field: "FieldSpec",
    rep: SpinRep,
    grid: TimeGrid,
    stepper: Union[Stepper, str, None] = None,
    basis: Optional[NDArray[np.float64]] = None,
) -> PropagatorTrace:
    """
    Full evolution i dU/dt = kB(t) n(t)·S U.

    With ``basis`` (rows e1(0), e2(0), e3(0)) the lab field is rotated into the
    initial-frame components before building generators.
    """
    return time_ordered_exp(field_generator(field, basis), rep, grid, stepper)
