import numpy as np
import pytest

from app.core.exceptions import GridError
from app.physics.grid import GAUSS_C1, GAUSS_C2, Stepper, TimeGrid


def test_nodes_and_step() -> None:
    grid = TimeGrid(t_end=2.0, steps=8)
    assert grid.step == 0.25
    assert grid.times.size == 9
    assert grid.times[0] == 0.0 and grid.times[-1] == 2.0
    np.testing.assert_allclose(grid.midpoints, np.arange(8) * 0.25 + 0.125)


def test_gauss_points_are_symmetric() -> None:
    grid = TimeGrid(t_end=1.0, steps=4)
    c1, c2 = grid.gauss_points
    np.testing.assert_allclose(c1 + c2, 2.0 * grid.midpoints)
    assert GAUSS_C1 + GAUSS_C2 == pytest.approx(1.0)


@pytest.mark.parametrize("steps, t_end", [(0, 1.0), (4, 0.0), (4, -1.0)])
def test_invalid_grid(steps: int, t_end: float) -> None:
    with pytest.raises(GridError):
        TimeGrid(t_end=t_end, steps=steps)


def test_from_times_rejects_non_uniform() -> None:
    with pytest.raises(GridError, match="uniform"):
        TimeGrid.from_times(np.array([0.0, 0.1, 0.3, 0.4]))
    grid = TimeGrid.from_times(np.linspace(1.0, 3.0, 11))
    assert (grid.t_start, grid.t_end, grid.steps) == (1.0, 3.0, 10)


def test_split_covers_grid() -> None:
    grid = TimeGrid(t_end=1.0, steps=10)
    first, second = grid.split(4)
    np.testing.assert_allclose(np.concatenate([first.times, second.times[1:]]), grid.times)
    with pytest.raises(GridError):
        grid.split(10)


def test_stepper_orders() -> None:
    assert Stepper("exp-midpoint").order == 2
    assert Stepper("magnus4").order == 4
    with pytest.raises(ValueError):
        Stepper("rk4")
