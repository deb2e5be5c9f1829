"""
File handling utilities for scenario inputs and result files.
"""

import logging
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np
import yaml
from numpy.typing import NDArray

from app.core.config import settings
from app.core.exceptions import PathError
from app.schemas.summary import ScenarioSummary

logger = logging.getLogger(__name__)

PATH_COLUMNS = ("t", "nx", "ny", "nz")


class SummaryDumper(yaml.SafeDumper):
    """YAML dumper writing every float in scientific notation."""


def _represent_float(dumper: yaml.SafeDumper, value: float) -> yaml.ScalarNode:
    if np.isnan(value):
        text = ".nan"
    elif np.isinf(value):
        text = ".inf" if value > 0 else "-.inf"
    else:
        text = settings.FLOAT_FORMAT % value
    return dumper.represent_scalar("tag:yaml.org,2002:float", text)


SummaryDumper.add_representer(float, _represent_float)
SummaryDumper.add_multi_representer(float, _represent_float)


def read_path_samples(csv_path: Union[str, Path]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Read a tabulated direction path.

    Args:
        csv_path: CSV file with header row ``t,nx,ny,nz``

    Returns:
        Tuple of (times, vectors) with shapes (M,) and (M, 3)

    Raises:
        PathError: If the header is missing or the table is not four columns wide
    """
    path = Path(csv_path)
    with path.open("r", encoding="utf-8") as f:
        header = [name.strip() for name in f.readline().split(",")]
        if tuple(header) != PATH_COLUMNS:
            raise PathError(
                f"{path}: header must be {','.join(PATH_COLUMNS)}, got {','.join(header)}"
            )
        data = np.loadtxt(f, delimiter=",", ndmin=2)
    if data.shape[1] != 4:
        raise PathError(f"{path}: expected 4 columns, got {data.shape[1]}")
    return data[:, 0], data[:, 1:]


def matrix_columns(label: str, unitaries: NDArray[np.complex128]) -> tuple[list[str], NDArray[np.float64]]:
    """Interleaved Re/Im of each entry in row-major order, e.g. U_re_0_1, U_im_0_1."""
    nodes, dim, _ = unitaries.shape
    names = []
    for a in range(dim):
        for b in range(dim):
            names += [f"{label}_re_{a}_{b}", f"{label}_im_{a}_{b}"]
    flat = unitaries.reshape(nodes, dim * dim)
    values = np.stack([flat.real, flat.imag], axis=-1).reshape(nodes, 2 * dim * dim)
    return names, values


class FileHandler:
    """Handler for the result files of one run."""

    def __init__(self, output_dir: Union[str, Path, None] = None):
        """
        Initialize the file handler.

        Args:
            output_dir: Directory receiving results (defaults to settings.OUTPUT_DIR)
        """
        self.output_dir = Path(output_dir or settings.OUTPUT_DIR)

    def ensure_output_dir(self) -> Path:
        """Ensure the output directory exists."""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir

    def result_path(self, scenario: str, suffix: str) -> Path:
        """
        Path for one result file of a scenario.

        Args:
            scenario: Scenario name
            suffix: File kind, e.g. "traces.csv" or "summary.yaml"
        """
        return self.output_dir / f"{scenario}_{suffix}"

    def write_table(
        self,
        scenario: str,
        suffix: str,
        columns: Mapping[str, NDArray[np.float64]],
    ) -> Path:
        """
        Write equal-length columns as CSV with a header row.

        Returns:
            Path of the written file
        """
        names = list(columns)
        data = np.column_stack([np.asarray(columns[name], dtype=float) for name in names])
        return self.write_matrix(scenario, suffix, names, data)

    def write_matrix(
        self, scenario: str, suffix: str, header: Sequence[str], data: NDArray[np.float64]
    ) -> Path:
        path = self.result_path(scenario, suffix)
        self.ensure_output_dir()
        np.savetxt(
            path,
            data,
            delimiter=",",
            header=",".join(header),
            comments="",
            fmt=settings.FLOAT_FORMAT,
        )
        logger.info("wrote %s (%d rows)", path, data.shape[0])
        return path

    def write_summary(self, summary: ScenarioSummary) -> Path:
        """Write the scenario summary as YAML."""
        path = self.result_path(summary.name, "summary.yaml")
        self.ensure_output_dir()
        text = yaml.dump(
            summary.model_dump(mode="python"),
            Dumper=SummaryDumper,
            sort_keys=False,
            default_flow_style=False,
        )
        path.write_text(text, encoding="utf-8")
        logger.info("wrote %s", path)
        return path
