"""
Uniform time grids and stepper selection shared by the propagators.
"""

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from app.core.exceptions import GridError

# Gauss-Legendre nodes on [0, 1]
GAUSS_C1 = 0.5 - np.sqrt(3.0) / 6.0
GAUSS_C2 = 0.5 + np.sqrt(3.0) / 6.0


class Stepper(str, Enum):
    """Exponential integrators for time-ordered exponentials."""

    EXP_MIDPOINT = "exp-midpoint"
    MAGNUS4 = "magnus4"

    @property
    def order(self) -> int:
        return 2 if self is Stepper.EXP_MIDPOINT else 4


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_start = t_0 < t_1 < ... < t_steps = t_end."""

    t_end: float
    steps: int
    t_start: float = 0.0

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise GridError(f"a grid needs at least 2 nodes, got steps={self.steps}")
        if not self.t_end > self.t_start:
            raise GridError(
                f"t_end must exceed t_start, got t_start={self.t_start}, t_end={self.t_end}"
            )

    @classmethod
    def from_times(cls, times: NDArray[np.float64], rtol: float = 1e-9) -> "TimeGrid":
        """Rebuild a grid from node times, rejecting non-uniform spacing."""
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise GridError("a grid needs at least 2 nodes")
        spacing = np.diff(times)
        if np.any(spacing <= 0):
            raise GridError("grid times must be strictly increasing")
        h = (times[-1] - times[0]) / (times.size - 1)
        if np.max(np.abs(spacing - h)) > rtol * max(abs(h), 1.0):
            raise GridError("grid is not uniform")
        return cls(t_end=float(times[-1]), steps=times.size - 1, t_start=float(times[0]))

    @property
    def step(self) -> float:
        return (self.t_end - self.t_start) / self.steps

    @cached_property
    def times(self) -> NDArray[np.float64]:
        return np.linspace(self.t_start, self.t_end, self.steps + 1)

    @property
    def midpoints(self) -> NDArray[np.float64]:
        return self.times[:-1] + 0.5 * self.step

    @property
    def gauss_points(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        left = self.times[:-1]
        return left + GAUSS_C1 * self.step, left + GAUSS_C2 * self.step

    def split(self, index: int) -> tuple["TimeGrid", "TimeGrid"]:
        """Two grids meeting at node ``index``; together they cover this one."""
        if not 0 < index < self.steps:
            raise GridError(f"split index must be interior, got {index}")
        t_split = float(self.times[index])
        first = TimeGrid(t_end=t_split, steps=index, t_start=self.t_start)
        second = TimeGrid(t_end=self.t_end, steps=self.steps - index, t_start=t_split)
        return first, second
