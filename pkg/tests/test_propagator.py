import numpy as np
import pytest

from app.physics.algebra import SpinRep, exp_generator
from app.physics.analysis import convergence_order
from app.physics.factorization import FieldSpec, constant_law
from app.physics.grid import Stepper, TimeGrid
from app.physics.propagator import GeneratorFunction, schrodinger_oracle, time_ordered_exp
from app.physics.sphere_path import make_static_path


def rotating(t: np.ndarray) -> np.ndarray:
    return np.stack([np.sin(2.0 * t), np.cos(2.0 * t), 0.5 + 0.0 * t], axis=-1)


ROTATING = GeneratorFunction(rotating, label="rotating")


@pytest.mark.parametrize("stepper", list(Stepper))
def test_zero_generator_gives_identity(rep: SpinRep, stepper: Stepper) -> None:
    gen = GeneratorFunction(lambda t: np.zeros(t.shape + (3,)))
    trace = time_ordered_exp(gen, rep, TimeGrid(t_end=1.0, steps=10), stepper)
    identity = np.broadcast_to(rep.identity, trace.unitaries.shape)
    np.testing.assert_allclose(trace.unitaries, identity, atol=1e-15)


@pytest.mark.parametrize("stepper", list(Stepper))
def test_constant_axis_is_exact(rep: SpinRep, stepper: Stepper) -> None:
    c = 1.7
    gen = GeneratorFunction(lambda t: np.broadcast_to([0.0, 0.0, c], t.shape + (3,)))
    grid = TimeGrid(t_end=2.0, steps=16)
    trace = time_ordered_exp(gen, rep, grid, stepper)
    expected = np.exp(-1j * c * grid.times[:, None] * rep.m_values)
    np.testing.assert_allclose(
        np.diagonal(trace.unitaries, axis1=-2, axis2=-1), expected, atol=1e-13
    )


@pytest.mark.parametrize("stepper, coarse, min_order", [("exp-midpoint", 16, 1.8), ("magnus4", 16, 3.5)])
def test_observed_order(half: SpinRep, stepper: str, coarse: int, min_order: float) -> None:
    reference = time_ordered_exp(ROTATING, half, TimeGrid(t_end=2.0, steps=4096), "magnus4").final
    errors = [
        np.linalg.norm(
            time_ordered_exp(ROTATING, half, TimeGrid(t_end=2.0, steps=coarse * f), stepper).final
            - reference
        )
        for f in (1, 2, 4)
    ]
    assert np.all(convergence_order(errors) >= min_order)


def test_composition_over_split_grid(spin_one: SpinRep) -> None:
    grid = TimeGrid(t_end=2.0, steps=200)
    first, second = grid.split(73)
    full = time_ordered_exp(ROTATING, spin_one, grid, "magnus4")
    head = time_ordered_exp(ROTATING, spin_one, first, "magnus4")
    tail = time_ordered_exp(ROTATING, spin_one, second, "magnus4", initial=head.final)
    np.testing.assert_allclose(tail.final, full.final, atol=1e-12)


def test_unitarity_is_preserved(rep: SpinRep) -> None:
    trace = time_ordered_exp(ROTATING, rep, TimeGrid(t_end=20.0, steps=2000), "magnus4")
    # each step is an exact exponential; only round-off accumulates
    assert np.max(np.abs(np.diff(trace.drift))) <= 1e-12
    assert trace.max_drift <= 1e-10
    inverse = trace.inverse()
    np.testing.assert_allclose(
        inverse.unitaries @ trace.unitaries,
        np.broadcast_to(rep.identity, trace.unitaries.shape),
        atol=1e-10,
    )


def test_static_field_oracle(spin_one: SpinRep) -> None:
    direction = np.array([0.0, 0.6, 0.8])
    field = FieldSpec(path=make_static_path(direction), magnitude=constant_law(2.0))
    grid = TimeGrid(t_end=1.5, steps=30)
    trace = schrodinger_oracle(field, spin_one, grid, "exp-midpoint")
    np.testing.assert_allclose(trace.final, exp_generator(2.0 * 1.5 * direction, spin_one), atol=1e-13)
    assert len(trace) == 31
