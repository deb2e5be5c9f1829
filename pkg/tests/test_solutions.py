"""
Tests for the class i and class ii fields and the closed forms of N.
"""

import numpy as np
import pytest

from app.core.exceptions import FieldError, PathError
from app.physics.algebra import SpinRep, exp_generator
from app.physics.analysis import transition_probabilities
from app.physics.factorization import factorize
from app.physics.grid import TimeGrid
from app.physics.propagator import GeneratorFunction, time_ordered_exp
from app.physics.solutions import (
    class_i_closed_N,
    class_i_field,
    class_ii_closed_N,
    class_ii_constants,
    class_ii_field,
    class_ii_precession_field,
    class_ii_spiral_path,
)
from app.physics.sphere_path import make_precession_path, make_static_path, reparameterize

from tests.conftest import THIRD_PI


def test_class_i_on_precession_is_resonant_strength(precession) -> None:
    field = class_i_field(precession, t_end=2.0)
    t = np.linspace(0.0, 2.0, 9)
    np.testing.assert_allclose(field.kb(t), np.cos(THIRD_PI), atol=1e-14)


def test_class_i_rejects_static_path() -> None:
    with pytest.raises(FieldError):
        class_i_field(make_static_path([0, 0, 1]), t_end=1.0)


def test_class_i_needs_finite_end(precession) -> None:
    with pytest.raises(FieldError, match="finite end"):
        class_i_field(precession)


def test_class_i_closed_form_solves_its_equation(rep: SpinRep) -> None:
    # N = exp(i l S2) with l = c t solves dN/dt = -i (0, -c, 0)·S N
    c = 0.8
    gen = GeneratorFunction(lambda t: np.broadcast_to([0.0, -c, 0.0], t.shape + (3,)))
    grid = TimeGrid(t_end=2.0, steps=50)
    trace = time_ordered_exp(gen, rep, grid, "magnus4")
    np.testing.assert_allclose(trace.unitaries, class_i_closed_N(c * grid.times, rep), atol=1e-12)


def test_class_ii_closed_form_solves_its_equation(rep: SpinRep) -> None:
    c1, c2 = 0.9, 0.7

    def omega(t):
        # (-c1 sin(c2 t), -c1 cos(c2 t), 0): the moving-frame generator with beta - phi = c2 t
        return np.stack([-c1 * np.sin(c2 * t), -c1 * np.cos(c2 * t), np.zeros_like(t)], axis=-1)

    grid = TimeGrid(t_end=3.0, steps=3000)
    trace = time_ordered_exp(GeneratorFunction(omega), rep, grid, "magnus4")
    np.testing.assert_allclose(trace.unitaries, class_ii_closed_N(c1, c2, grid.times, rep), atol=1e-9)


def test_class_i_spin_half_full_transfer(half: SpinRep) -> None:
    closed = class_i_closed_N(np.array([np.pi]), half)[0]
    assert abs(closed[1, 0]) ** 2 == pytest.approx(1.0, abs=1e-14)


def test_class_i_field_gives_closed_form_N(spin_one: SpinRep) -> None:
    path = class_ii_spiral_path(1.0, 2.0, sign=-1)
    field = class_i_field(path, t_end=1.4)
    result = factorize(field, spin_one, TimeGrid(t_end=1.4, steps=4096), "magnus4")
    assert result.max_residual <= 1e-9
    np.testing.assert_allclose(result.angles.beta, result.phi, atol=1e-6)
    closed = class_i_closed_N(result.angles.arclen, spin_one)
    np.testing.assert_allclose(result.N.unitaries, closed, atol=1e-8)


def test_spiral_has_constant_speed() -> None:
    path = class_ii_spiral_path(1.0, 2.0)
    np.testing.assert_allclose(path.speed(np.array([0.0, np.pi / 4.0, 1.5])), 2.0)
    n = path.direction(np.linspace(0.0, 1.5, 7))
    np.testing.assert_allclose(np.linalg.norm(n, axis=-1), 1.0)


def test_spiral_second_derivative_matches_finite_difference() -> None:
    path = class_ii_spiral_path(0.5, 1.0, sign=-1)
    t, h = 1.3, 1e-5
    _, nd_minus, _ = path.evaluate(np.array(t - h))
    _, nd_plus, _ = path.evaluate(np.array(t + h))
    _, _, ndd = path.evaluate(np.array(t))
    np.testing.assert_allclose(ndd, (nd_plus - nd_minus) / (2.0 * h), atol=1e-7)


@pytest.mark.parametrize("lam, c1, sign", [(1.0, 1.0, 1), (0.0, 2.0, 1), (1.0, 2.0, 0)])
def test_spiral_rejects_parameters(lam: float, c1: float, sign: int) -> None:
    with pytest.raises(PathError):
        class_ii_spiral_path(lam, c1, sign)


def test_class_ii_spiral_field(spin_one: SpinRep) -> None:
    path = class_ii_spiral_path(0.5, 1.0)
    t_end = 0.9 * np.pi
    field = class_ii_field(path, 0.7, c1=1.0, t_end=t_end)
    assert class_ii_constants(field) == (1.0, 0.7)
    result = factorize(field, spin_one, TimeGrid(t_end=t_end, steps=4096), "magnus4")
    assert result.max_residual <= 1e-9
    t = result.times
    np.testing.assert_allclose(result.angles.beta - result.phi, 0.7 * t, atol=1e-6)
    np.testing.assert_allclose(
        result.N.unitaries, class_ii_closed_N(1.0, 0.7, t, spin_one), atol=1e-8
    )


def test_class_ii_rejects_varying_speed() -> None:
    path = make_precession_path(THIRD_PI, 1.0)
    with pytest.raises(FieldError):
        class_ii_field(path, 0.3, c1=2.0, t_end=1.0)


def test_class_ii_precession_constants(half: SpinRep) -> None:
    field = class_ii_precession_field(THIRD_PI, 1.0, 0.7)
    c1, c2 = class_ii_constants(field)
    assert c1 == pytest.approx(np.sin(THIRD_PI))
    assert c2 == 0.7
    assert field.kb(0.0) == pytest.approx(0.5 + 0.7)
    result = factorize(field, half, TimeGrid(t_end=2.0 * np.pi, steps=4096), "magnus4")
    np.testing.assert_allclose(
        result.N.unitaries, class_ii_closed_N(c1, c2, result.times, half), atol=1e-8
    )


def test_class_ii_with_zero_c2_reduces_to_class_i(half: SpinRep) -> None:
    t = np.linspace(0.0, 3.0, 13)
    np.testing.assert_allclose(
        class_ii_closed_N(0.8, 0.0, t, half), class_i_closed_N(0.8 * t, half), atol=1e-14
    )


def test_moving_axis_transition_peaks_at_class_i(half: SpinRep) -> None:
    # kB = omega cos(theta) is class i: the moving-axis flip is complete once l = pi
    field = class_ii_precession_field(THIRD_PI, 1.0, 0.0)
    t_end = np.pi / np.sin(THIRD_PI)
    result = factorize(field, half, TimeGrid(t_end=t_end, steps=2048), "magnus4")
    table = transition_probabilities(result.N, half)
    assert table.off_initial[-1] == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(result.N.final, exp_generator([0.0, -np.pi, 0.0], half), atol=1e-8)


def test_class_i_N_depends_only_on_arc_length(spin_one: SpinRep) -> None:
    spiral = class_ii_spiral_path(1.0, 2.0, sign=-1)
    # tau(t) = t + t^2 / 4 reaches the spiral's t = 1 at t = 2 (sqrt(2) - 1)
    t_end = 2.0 * (np.sqrt(2.0) - 1.0)
    accelerated = reparameterize(
        spiral,
        tau=lambda t: t + 0.25 * t * t,
        tau_dot=lambda t: 1.0 + 0.5 * t,
        tau_ddot=lambda t: np.full_like(t, 0.5),
        t_end=t_end,
    )
    steady = factorize(
        class_i_field(spiral, t_end=1.0), spin_one, TimeGrid(t_end=1.0, steps=2048), "magnus4"
    )
    varying = factorize(
        class_i_field(accelerated, t_end=t_end),
        spin_one,
        TimeGrid(t_end=t_end, steps=2048),
        "magnus4",
    )
    assert varying.angles.arclen[-1] == pytest.approx(steady.angles.arclen[-1], abs=1e-10)
    assert steady.angles.arclen[-1] == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(varying.N.final, steady.N.final, atol=1e-8)
    assert np.ptp(varying.angles.speed) > 0.5
