"""
Exception hierarchy shared by the numerical kernels and the scenario runner.
"""

from typing import Optional


class SpinEvolutionError(Exception):
    """Base class for every error raised by this package."""


class RepresentationError(SpinEvolutionError, ValueError):
    """Invalid spin magnitude or representation dimension."""


class GridError(SpinEvolutionError, ValueError):
    """Time grid is not uniform, too short, or mismatched."""


class PathError(SpinEvolutionError, ValueError):
    """Invalid direction path description."""


class StationaryPathError(PathError):
    """The path does not move where a moving path is required."""


class OpenPathError(PathError):
    """A closed path was required but n(T) != n(0)."""


class PoleSelectionError(PathError):
    """No coordinate pole keeps clear of the path."""


class PathDomainError(PathError):
    """Evaluation outside the domain on which the path is defined."""


class FieldError(SpinEvolutionError, ValueError):
    """The magnetic field cannot be built for the requested path."""


class ScenarioConfigError(SpinEvolutionError):
    """Scenario file failed to parse or validate."""

    def __init__(self, message: str, key: str = "", line: Optional[int] = None):
        self.key = key
        self.line = line
        location = key or "<root>"
        if line is not None:
            location = f"{location} (line {line})"
        super().__init__(f"{location}: {message}")
