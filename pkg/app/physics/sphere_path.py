"""
Direction curves n(t) on the unit sphere and the geometry attached to them.

A path is an evaluator returning n, its first and second time derivatives at
an array of times. On top of it this module builds the parallel-transported
triad e1, e2, e3 (e_i' = (n x n') x e_i, started from n'(0), n x n'(0), n(0)),
the relative rotation angle beta between that triad and (n', n x n'), the arc
length, and the oriented solid angle of closed paths.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import cumulative_simpson, simpson
from scipy.interpolate import CubicSpline
from scipy.spatial.transform import Rotation

from app.core.config import settings
from app.core.exceptions import (
    OpenPathError,
    PathDomainError,
    PathError,
    PoleSelectionError,
    StationaryPathError,
)
from app.physics.grid import TimeGrid

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
PathEvaluator = Callable[[FloatArray], tuple[FloatArray, FloatArray, FloatArray]]

TWO_PI = 2.0 * np.pi

# off-centre 4th-order stencils (times 12 h, resp. 12 h^2) for nodes 0 and 1
_EDGE_D1 = np.array([[-25.0, 48.0, -36.0, 16.0, -3.0], [-3.0, -10.0, 18.0, -6.0, 1.0]])
_EDGE_D2_6 = np.array(
    [[45.0, -154.0, 214.0, -156.0, 61.0, -10.0], [10.0, -15.0, -4.0, 14.0, -6.0, 1.0]]
)
# 3rd order, for five samples
_EDGE_D2_5 = np.array([[35.0, -104.0, 114.0, -56.0, 11.0], [11.0, -20.0, 6.0, 4.0, -1.0]])


class PathKind(str, Enum):
    ANALYTIC = "analytic-family"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class DirectionPath:
    """
    Unit-vector curve with derivatives on [t_start, t_end].

    ``open_end`` marks families whose formula breaks down at t_end itself.
    """

    evaluator: PathEvaluator = field(repr=False)
    kind: PathKind
    t_end: float = np.inf
    t_start: float = 0.0
    open_end: bool = False
    label: str = ""

    def evaluate(self, t: ArrayLike) -> tuple[FloatArray, FloatArray, FloatArray]:
        """n(t), dn/dt, d2n/dt2, each of shape t.shape + (3,)."""
        t = np.asarray(t, dtype=float)
        self._check_domain(t)
        return self.evaluator(t)

    def direction(self, t: ArrayLike) -> FloatArray:
        return self.evaluate(t)[0]

    def speed(self, t: ArrayLike) -> FloatArray:
        return np.linalg.norm(self.evaluate(t)[1], axis=-1)

    def _check_domain(self, t: FloatArray) -> None:
        if t.size == 0:
            return
        slack = 1e-12 * max(1.0, abs(self.t_end) if np.isfinite(self.t_end) else 1.0)
        lo, hi = float(np.min(t)), float(np.max(t))
        past_end = hi >= self.t_end if self.open_end else hi > self.t_end + slack
        if lo < self.t_start - slack or past_end:
            bound = f"[{self.t_start}, {self.t_end}{')' if self.open_end else ']'}"
            raise PathDomainError(
                f"path '{self.label or self.kind.value}' is defined on {bound}, "
                f"asked for t in [{lo}, {hi}]"
            )


@dataclass(frozen=True)
class Frame:
    """Parallel-transported triad sampled on a grid."""

    times: FloatArray
    e1: FloatArray
    e2: FloatArray
    e3: FloatArray
    anchor_index: int = 0

    @property
    def basis(self) -> FloatArray:
        """Rows e1(0), e2(0), e3(0); maps lab 3-vectors to initial-frame components."""
        return np.stack([self.e1[0], self.e2[0], self.e3[0]])

    def triad(self) -> FloatArray:
        """Shape (nodes, 3, 3) with rows e1, e2, e3 at each node."""
        return np.stack([self.e1, self.e2, self.e3], axis=1)

    def orthonormality_drift(self) -> FloatArray:
        triad = self.triad()
        gram = triad @ np.swapaxes(triad, -1, -2)
        return np.max(np.abs(gram - np.eye(3)), axis=(-2, -1))

    def holonomy_angle(self, index: int = -1) -> float:
        """Signed rotation of e1 about e3(0) between node 0 and ``index``."""
        axis = self.e3[0]
        start, end = self.e1[0], self.e1[index]
        return float(np.arctan2(np.cross(start, end) @ axis, start @ end))


@dataclass(frozen=True)
class GeometricAngles:
    """beta(t), arc length l(t) and speed |dn/dt| on a grid."""

    times: FloatArray
    beta: FloatArray
    arclen: FloatArray
    speed: FloatArray


# Path families


def make_precession_path(theta: float, omega: float) -> DirectionPath:
    """
    n(t) = (sin(theta) cos(omega t), sin(theta) sin(omega t), cos(theta)).
    """
    if not 0.0 <= theta <= np.pi:
        raise PathError(f"theta must lie in [0, pi], got {theta}")
    st, ct = np.sin(theta), np.cos(theta)

    def evaluate(t: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
        c, s = np.cos(omega * t), np.sin(omega * t)
        zero = np.zeros_like(t)
        n = np.stack([st * c, st * s, ct + zero], axis=-1)
        nd = omega * st * np.stack([-s, c, zero], axis=-1)
        ndd = -(omega**2) * st * np.stack([c, s, zero], axis=-1)
        return n, nd, ndd

    return DirectionPath(
        evaluator=evaluate,
        kind=PathKind.ANALYTIC,
        label=f"precession(theta={theta:g}, omega={omega:g})",
    )


def make_static_path(direction: ArrayLike) -> DirectionPath:
    """Constant direction; every derivative vanishes."""
    n0 = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(n0)
    if n0.shape != (3,) or norm == 0.0:
        raise PathError(f"static direction must be a nonzero 3-vector, got {direction}")
    n0 = n0 / norm

    def evaluate(t: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
        n = np.broadcast_to(n0, t.shape + (3,)).copy()
        zero = np.zeros(t.shape + (3,))
        return n, zero, zero.copy()

    return DirectionPath(evaluator=evaluate, kind=PathKind.ANALYTIC, label="static")


def _finite_differences(values: FloatArray, h: float) -> tuple[FloatArray, FloatArray]:
    """
    First and second derivatives of node samples on a uniform grid.

    Centered 4th order inside. The two nodes at each end use off-centre
    stencils of the same order for the first derivative; the second
    derivative there is 4th order from six samples, 3rd order from five.
    """
    f = values
    d1 = np.empty_like(f)
    d2 = np.empty_like(f)

    d1[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    d2[2:-2] = (-f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2] + 16.0 * f[3:-1] - f[4:]) / (
        12.0 * h * h
    )

    # end node and its neighbour; reversing the samples flips the sign of d1
    d2_edge = _EDGE_D2_6 if f.shape[0] >= 6 else _EDGE_D2_5
    width = d2_edge.shape[1]
    head, tail = f[:width], f[::-1][:width]
    d1[:2] = _EDGE_D1 @ head[:5] / (12.0 * h)
    d1[:-3:-1] = -(_EDGE_D1 @ tail[:5]) / (12.0 * h)
    d2[:2] = d2_edge @ head / (12.0 * h * h)
    d2[:-3:-1] = d2_edge @ tail / (12.0 * h * h)
    return d1, d2


def _onto_sphere(
    n: FloatArray, nd: FloatArray, ndd: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Remove the normal part of dn/dt and give d2n/dt2 the normal part -|dn/dt|^2."""
    nd = nd - np.sum(n * nd, axis=-1, keepdims=True) * n
    normal = np.sum(n * ndd, axis=-1, keepdims=True) + np.sum(nd * nd, axis=-1, keepdims=True)
    return n, nd, ndd - normal * n


def tabulated_path_from_arrays(
    times: ArrayLike, vectors: ArrayLike, label: str = "tabulated"
) -> DirectionPath:
    """
    Path from unit vectors sampled on a uniform grid.

    Samples are normalised; derivatives come from finite differences on the
    nodes. Off-node values interpolate node values with cubic splines.

    Raises:
        PathError: Too few samples, non-increasing or non-uniform times, or a
            vector further than TABULATED_NORM_TOLERANCE from unit length
    """
    times = np.asarray(times, dtype=float)
    vectors = np.asarray(vectors, dtype=float)
    if times.ndim != 1 or vectors.shape != (times.size, 3):
        raise PathError("tabulated path needs times of shape (M,) and vectors of shape (M, 3)")
    if times.size < settings.TABULATED_MIN_SAMPLES:
        raise PathError(
            f"tabulated path needs at least {settings.TABULATED_MIN_SAMPLES} samples, "
            f"got {times.size}"
        )
    spacing = np.diff(times)
    if np.any(spacing <= 0):
        raise PathError("tabulated times must be strictly increasing")
    h = (times[-1] - times[0]) / (times.size - 1)
    if np.max(np.abs(spacing - h)) > 1e-9 * max(h, 1.0):
        raise PathError("tabulated path requires a uniform time grid")

    norms = np.linalg.norm(vectors, axis=1)
    worst = int(np.argmax(np.abs(norms - 1.0)))
    if abs(norms[worst] - 1.0) > settings.TABULATED_NORM_TOLERANCE:
        raise PathError(
            f"sample {worst} at t={times[worst]} has norm {norms[worst]}, "
            f"expected 1 within {settings.TABULATED_NORM_TOLERANCE}"
        )
    n = vectors / norms[:, None]
    n, nd, ndd = _onto_sphere(n, *_finite_differences(n, h))

    n_spline = CubicSpline(times, n, axis=0)
    nd_spline = CubicSpline(times, nd, axis=0)
    ndd_spline = CubicSpline(times, ndd, axis=0)

    def evaluate(t: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
        nt = n_spline(t)
        nt = nt / np.linalg.norm(nt, axis=-1, keepdims=True)
        return _onto_sphere(nt, nd_spline(t), ndd_spline(t))

    return DirectionPath(
        evaluator=evaluate,
        kind=PathKind.TABULATED,
        t_start=float(times[0]),
        t_end=float(times[-1]),
        label=label,
    )


def make_tabulated_path(samples: Sequence[tuple[float, ArrayLike]]) -> DirectionPath:
    """Path from a list of (t, 3-vector) samples."""
    if len(samples) < settings.TABULATED_MIN_SAMPLES:
        raise PathError(
            f"tabulated path needs at least {settings.TABULATED_MIN_SAMPLES} samples, "
            f"got {len(samples)}"
        )
    times = np.array([s[0] for s in samples], dtype=float)
    vectors = np.array([np.asarray(s[1], dtype=float) for s in samples])
    return tabulated_path_from_arrays(times, vectors)


def load_tabulated_path(csv_path: str) -> DirectionPath:
    """Read a ``t, nx, ny, nz`` CSV (header row required) into a tabulated path."""
    from app.utils.file_handler import read_path_samples

    times, vectors = read_path_samples(csv_path)
    return tabulated_path_from_arrays(times, vectors, label=str(csv_path))


def reparameterize(
    path: DirectionPath,
    tau: Callable[[FloatArray], FloatArray],
    tau_dot: Callable[[FloatArray], FloatArray],
    tau_ddot: Callable[[FloatArray], FloatArray],
    t_end: float,
    label: str = "",
) -> DirectionPath:
    """
    The same geometric curve traversed as n(tau(t)).

    tau must be increasing with tau(0) = path.t_start.
    """

    def evaluate(t: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
        s = tau(t)
        n, n1, n2 = path.evaluate(s)
        s1 = np.asarray(tau_dot(t))[..., None]
        s2 = np.asarray(tau_ddot(t))[..., None]
        return n, n1 * s1, n2 * s1 * s1 + n1 * s2

    return DirectionPath(
        evaluator=evaluate,
        kind=path.kind,
        t_end=t_end,
        open_end=path.open_end,
        label=label or f"reparameterized {path.label}",
    )


def slow_down(path: DirectionPath, epsilon: float) -> DirectionPath:
    """Traverse ``path`` with its speed scaled by epsilon over a 1/epsilon longer time."""
    if epsilon <= 0:
        raise PathError(f"slowing factor must be positive, got {epsilon}")
    return reparameterize(
        path,
        tau=lambda t: epsilon * t,
        tau_dot=lambda t: np.full_like(t, epsilon),
        tau_ddot=np.zeros_like,
        t_end=path.t_end / epsilon,
        label=f"{path.label} slowed by {epsilon:g}",
    )


# Frames and angles


def initial_basis(n0: ArrayLike, nd0: ArrayLike, eps: Optional[float] = None) -> FloatArray:
    """
    Rows e1 = n', e2 = n x n', e3 = n at the anchor.

    A stationary anchor gets an arbitrary orthonormal completion of n.
    """
    eps = settings.STATIONARY_SPEED_EPS if eps is None else eps
    n = np.asarray(n0, dtype=float)
    n = n / np.linalg.norm(n)
    v = np.asarray(nd0, dtype=float)
    v = v - (v @ n) * n
    speed = np.linalg.norm(v)
    if speed > eps:
        e1 = v / speed
    else:
        axis = np.eye(3)[int(np.argmin(np.abs(n)))]
        e1 = axis - (axis @ n) * n
        e1 /= np.linalg.norm(e1)
    return np.stack([e1, np.cross(n, e1), n])


def first_moving_index(speed: FloatArray, eps: Optional[float] = None) -> Optional[int]:
    """Index of the first node where |dn/dt| > eps, or None for a stationary path."""
    eps = settings.STATIONARY_SPEED_EPS if eps is None else eps
    moving = np.flatnonzero(speed > eps)
    return int(moving[0]) if moving.size else None


def transport_frame(
    path: DirectionPath, grid: TimeGrid, anchor: int = 0, eps: Optional[float] = None
) -> Frame:
    """
    Integrate e_i' = (n x n') x e_i on ``grid``.

    Each step applies the exact rotation about the angular velocity n x n'
    sampled at the step midpoint. The triad is not re-orthonormalised; drift is
    available from Frame.orthonormality_drift. Nodes before ``anchor`` hold the
    anchor triad.

    Raises:
        StationaryPathError: If |n'| <= eps at the anchor node
    """
    eps = settings.STATIONARY_SPEED_EPS if eps is None else eps
    times = grid.times
    n, nd, _ = path.evaluate(times[anchor])
    if np.linalg.norm(nd) <= eps:
        raise StationaryPathError(
            f"frame initial condition undefined: |dn/dt| <= {eps} at t={times[anchor]}"
        )
    start = initial_basis(n, nd, eps)

    nm, ndm, _ = path.evaluate(grid.midpoints[anchor:])
    rotations = Rotation.from_rotvec(np.cross(nm, ndm) * grid.step).as_matrix()

    cumulative = np.empty((times.size, 3, 3))
    cumulative[: anchor + 1] = np.eye(3)
    current = np.eye(3)
    for k, rot in enumerate(rotations, start=anchor + 1):
        current = rot @ current
        cumulative[k] = current

    # columns of start.T are e1, e2, e3 at the anchor
    triads = cumulative @ start.T
    logger.debug("transported frame over %d steps from node %d", grid.steps, anchor)
    return Frame(
        times=times,
        e1=triads[:, :, 0],
        e2=triads[:, :, 1],
        e3=triads[:, :, 2],
        anchor_index=anchor,
    )


def beta_rate(
    n: FloatArray, nd: FloatArray, ndd: FloatArray, eps: Optional[float] = None
) -> FloatArray:
    """d(beta)/dt = -ndd . (n x nd) / |nd|^2, defined as 0 where |nd| <= eps."""
    eps = settings.STATIONARY_SPEED_EPS if eps is None else eps
    speed_sq = np.sum(nd * nd, axis=-1)
    moving = speed_sq > eps * eps
    numerator = -np.sum(ndd * np.cross(n, nd), axis=-1)
    return np.where(moving, numerator / np.where(moving, speed_sq, 1.0), 0.0)


def beta_angle(
    path: DirectionPath, grid: TimeGrid, eps: Optional[float] = None
) -> GeometricAngles:
    """
    beta(t), l(t) and |dn/dt| on the grid nodes.

    Both integrals use cumulative composite Simpson quadrature.
    """
    times = grid.times
    n, nd, ndd = path.evaluate(times)
    speed = np.linalg.norm(nd, axis=-1)
    eps_value = settings.STATIONARY_SPEED_EPS if eps is None else eps
    paused = np.flatnonzero(speed[1:-1] <= eps_value)
    if paused.size and np.any(speed > eps_value):
        logger.debug("beta rate set to 0 at %d interior stationary nodes", paused.size)
    beta = cumulative_simpson(beta_rate(n, nd, ndd, eps), x=times, initial=0.0)
    arclen = cumulative_simpson(speed, x=times, initial=0.0)
    arclen = np.maximum.accumulate(np.maximum(arclen, 0.0))
    return GeometricAngles(times=times, beta=beta, arclen=arclen, speed=speed)


def frame_beta(frame: Frame, path: DirectionPath, eps: Optional[float] = None) -> FloatArray:
    """
    beta read off the triad: e1 = n' cos(beta) + (n x n') sin(beta).

    Stationary nodes carry the previous value.
    """
    eps = settings.STATIONARY_SPEED_EPS if eps is None else eps
    n, nd, _ = path.evaluate(frame.times)
    speed = np.linalg.norm(nd, axis=-1)
    moving = speed > eps
    tangent = nd / np.where(moving, speed, 1.0)[:, None]
    cos_b = np.sum(frame.e1 * tangent, axis=-1)
    sin_b = np.sum(frame.e1 * np.cross(n, tangent), axis=-1)
    raw = np.arctan2(sin_b, cos_b)

    beta = np.zeros_like(raw)
    idx = np.flatnonzero(moving)
    if idx.size:
        beta[idx] = np.unwrap(raw[idx])
        beta[idx] -= beta[idx[0]]
        # carry flat across stationary nodes
        filled = np.maximum.accumulate(np.where(moving, np.arange(raw.size), 0))
        beta = np.where(np.arange(raw.size) < idx[0], 0.0, beta[filled])
    return beta


# Solid angle

# proper rotations taking each candidate pole onto +z
_POLE_ROTATIONS: dict[str, FloatArray] = {
    "+z": np.eye(3),
    "-z": np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]),
    "+x": np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]),
    "-x": np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]),
    "+y": np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
    "-y": np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]),
}


def reduce_solid_angle(omega: float) -> float:
    """Representative of omega mod 4 pi in (-2 pi, 2 pi]."""
    return float(-(np.mod(-omega + TWO_PI, 2.0 * TWO_PI) - TWO_PI))


def check_closed(path: DirectionPath, period: float) -> None:
    ends = path.direction(np.array([path.t_start, path.t_start + period]))
    gap = float(np.linalg.norm(ends[1] - ends[0]))
    if gap >= settings.CLOSED_PATH_TOLERANCE:
        raise OpenPathError(
            f"path is not closed over period {period}: |n(T) - n(0)| = {gap:.3e}"
        )


def solid_angle(path: DirectionPath, period: float, samples: Optional[int] = None) -> float:
    """
    Oriented solid angle enclosed by a closed path, in (-2 pi, 2 pi].

    Computed as the line integral of (1 - cos(theta)) d(phi) in spherical
    coordinates about the candidate pole (+-x, +-y, +-z) that stays furthest
    from the path. Counter-clockwise loops (seen from outside) are positive.

    Raises:
        OpenPathError: If |n(T) - n(0)| >= CLOSED_PATH_TOLERANCE
        PoleSelectionError: If no candidate pole keeps clear of the path
    """
    check_closed(path, period)
    samples = samples or settings.SOLID_ANGLE_SAMPLES
    times = path.t_start + np.linspace(0.0, period, samples + 1)
    n, nd, _ = path.evaluate(times)

    clearance = {
        name: float(np.min(np.arccos(np.clip(n @ rot[2], -1.0, 1.0))))
        for name, rot in _POLE_ROTATIONS.items()
    }
    ranked = sorted(_POLE_ROTATIONS, key=lambda name: -clearance[name])
    for name in ranked[:3]:
        if clearance[name] <= settings.POLE_CLEARANCE:
            logger.debug("pole %s rejected, clearance %.3e", name, clearance[name])
            continue
        rot = _POLE_ROTATIONS[name]
        x, y, z = (n @ rot.T).T
        xd, yd, _ = (nd @ rot.T).T
        dphi = (x * yd - y * xd) / (x * x + y * y)
        omega = simpson((1.0 - z) * dphi, x=times)
        logger.debug("solid angle about pole %s: %.12f", name, omega)
        return reduce_solid_angle(float(omega))
    raise PoleSelectionError("path passes through every candidate coordinate pole")
