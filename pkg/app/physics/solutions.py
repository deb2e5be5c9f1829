"""
Fields for which N(t) is an ordinary exponential, and the closed forms of N.

Class i: beta - phi = 0, achieved by kB = -dbeta/dt; then N = exp(i l S2).
Class ii: |n'| = c1 and beta - phi = c2 t, achieved on constant-speed paths by
kB = c2 - dbeta/dt; then N = exp(i c2 t S3) exp((i c1 S2 - i c2 S3) t).
"""

import logging
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.core.config import settings
from app.core.exceptions import FieldError, PathError
from app.physics.algebra import ComplexArray, SpinRep, exp_generator
from app.physics.factorization import FieldSpec, MagnitudeLaw, constant_law
from app.physics.sphere_path import (
    DirectionPath,
    PathKind,
    beta_rate,
    make_precession_path,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

SPEED_TOLERANCE = 1e-8
CHECK_SAMPLES = 257


def _sample_times(path: DirectionPath, t_end: Optional[float]) -> FloatArray:
    end = path.t_end if t_end is None else t_end
    if not np.isfinite(end):
        raise FieldError(f"path '{path.label}' has no finite end; pass t_end")
    times = np.linspace(path.t_start, end, CHECK_SAMPLES)
    if path.open_end and end >= path.t_end:
        times = times[:-1]
    return times


def geometric_rate(path: DirectionPath) -> MagnitudeLaw:
    """dbeta/dt as a function of time, from the path's own derivatives."""

    def value(t: FloatArray) -> FloatArray:
        return beta_rate(*path.evaluate(t))

    return MagnitudeLaw(value=value, label="dbeta/dt")


def class_i_field(path: DirectionPath, t_end: Optional[float] = None) -> FieldSpec:
    """
    Field with kB(t) = -dbeta/dt, making beta - phi vanish identically.

    k is 1 and the magnitude carries the sign. Analytic paths use their exact
    derivatives; tabulated paths their finite-difference ones.

    Raises:
        FieldError: If the path is stationary at an interior sample
    """
    times = _sample_times(path, t_end)
    speed = path.speed(times)
    interior = speed[1:-1]
    if np.any(interior <= settings.STATIONARY_SPEED_EPS):
        where = float(times[1:-1][np.argmin(interior)])
        raise FieldError(
            f"class-i field needs a moving path; |dn/dt| vanishes near t={where:g}"
        )

    rate = geometric_rate(path)
    magnitude = MagnitudeLaw(value=lambda t: -rate(t), label="-dbeta/dt")
    return FieldSpec(path=path, magnitude=magnitude, k=1.0, label=f"class i on {path.label}")


def class_ii_field(
    path: DirectionPath, c2: float, c1: Optional[float] = None, t_end: Optional[float] = None
) -> FieldSpec:
    """
    Field with kB(t) = c2 - dbeta/dt on a constant-speed path.

    Raises:
        FieldError: If |n'| is not constant (or differs from ``c1``) on the samples
    """
    speed = path.speed(_sample_times(path, t_end))
    target = float(speed[0]) if c1 is None else float(c1)
    spread = float(np.max(np.abs(speed - target)))
    if spread > SPEED_TOLERANCE:
        raise FieldError(
            f"class-ii field needs |dn/dt| = {target:g} throughout; deviation {spread:.3e}"
        )
    rate = geometric_rate(path)
    magnitude = MagnitudeLaw(value=lambda t: c2 - rate(t), label=f"{c2:g} - dbeta/dt")
    return FieldSpec(
        path=path,
        magnitude=magnitude,
        k=1.0,
        label=f"class ii on {path.label}",
        constants={"c1": target, "c2": float(c2)},
    )


def class_ii_precession_field(theta: float, omega: float, c2: float) -> FieldSpec:
    """
    Precessing field of constant kB = omega cos(theta) + c2.

    This is magnetic resonance seen from the moving axis: c1 = |omega| sin(theta),
    and c2 = 0 falls back to class i.
    """
    path = make_precession_path(theta, omega)
    kb = omega * np.cos(theta) + c2
    return FieldSpec(
        path=path,
        magnitude=constant_law(kb),
        k=1.0,
        label=f"class ii precession (c2={c2:g})",
        constants={"c1": abs(omega) * np.sin(theta), "c2": float(c2)},
    )


def class_ii_constants(field: FieldSpec) -> tuple[float, float]:
    """(c1, c2) recorded on a class-ii field."""
    try:
        return field.constants["c1"], field.constants["c2"]
    except KeyError as e:
        raise FieldError(f"field '{field.label}' is not a class-ii field") from e


def class_i_closed_N(arclen: ArrayLike, rep: SpinRep) -> ComplexArray:
    """N = exp(i l S2), batched over arc lengths."""
    l = np.asarray(arclen, dtype=float)
    zeros = np.zeros_like(l)
    return exp_generator(np.stack([zeros, -l, zeros], axis=-1), rep)


def class_ii_closed_N(c1: float, c2: float, t: ArrayLike, rep: SpinRep) -> ComplexArray:
    """N = exp(i c2 t S3) exp((i c1 S2 - i c2 S3) t), batched over t."""
    t = np.asarray(t, dtype=float)
    zeros = np.zeros_like(t)
    outer = exp_generator(np.stack([zeros, zeros, -c2 * t], axis=-1), rep)
    inner = exp_generator(np.stack([zeros, -c1 * t, c2 * t], axis=-1), rep)
    return outer @ inner


def class_ii_spiral_path(lam: float, c1: float, sign: int = 1) -> DirectionPath:
    """
    Constant-speed spiral leaving the equator towards the pole.

    n(t) = (cos(lam t) cos(p), cos(lam t) sin(p), sin(lam t)) with
    p(t) = sign * sqrt(c1^2 - lam^2) / lam * ln tan(lam t / 2 + pi / 4), so
    |n'| = c1 on 0 <= t < pi / (2 lam).

    Raises:
        PathError: For lam <= 0, c1^2 <= lam^2 or sign not +-1
    """
    if lam <= 0:
        raise PathError(f"spiral rate lambda must be positive, got {lam}")
    if c1 * c1 <= lam * lam:
        raise PathError(f"spiral needs c1^2 > lambda^2, got c1={c1}, lambda={lam}")
    if sign not in (1, -1):
        raise PathError(f"spiral sign must be +1 or -1, got {sign}")
    kappa = sign * np.sqrt(c1 * c1 - lam * lam)

    def evaluate(t: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
        a = lam * t
        ca, sa = np.cos(a), np.sin(a)
        p = kappa / lam * np.log(np.tan(0.5 * a + 0.25 * np.pi))
        cp, sp = np.cos(p), np.sin(p)
        pd = kappa / ca

        n = np.stack([ca * cp, ca * sp, sa], axis=-1)
        nd = np.stack(
            [-lam * sa * cp - kappa * sp, -lam * sa * sp + kappa * cp, lam * ca], axis=-1
        )
        ndd = np.stack(
            [
                -lam * lam * ca * cp + lam * sa * sp * pd - kappa * cp * pd,
                -lam * lam * ca * sp - lam * sa * cp * pd - kappa * sp * pd,
                -lam * lam * sa,
            ],
            axis=-1,
        )
        return n, nd, ndd

    return DirectionPath(
        evaluator=evaluate,
        kind=PathKind.ANALYTIC,
        t_end=np.pi / (2.0 * lam),
        open_end=True,
        label=f"spiral(lambda={lam:g}, c1={c1:g}, sign={sign:+d})",
    )
