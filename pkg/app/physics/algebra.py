"""
Spin-j irreducible representations of su(2) and exponentials of spin generators.

Matrices are written in the basis where S3 = diag(j, j-1, ..., -j), with the
ladder operator S+ = S1 + iS2 on the superdiagonal. Everything here is a pure
function of its inputs; returned arrays are read-only.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.core.config import settings
from app.core.exceptions import RepresentationError

logger = logging.getLogger(__name__)

ComplexArray = NDArray[np.complex128]
SpinValue = Union[float, int, Fraction, str]


def _frozen(array: NDArray) -> NDArray:
    array.setflags(write=False)
    return array


def parse_spin(j: SpinValue) -> Fraction:
    """
    Read a spin magnitude given as a number or as a string such as "3/2".

    Raises:
        RepresentationError: If j is not a positive multiple of 1/2
    """
    try:
        value = Fraction(j).limit_denominator(1000) if not isinstance(j, str) else Fraction(j)
    except (ValueError, ZeroDivisionError) as e:
        raise RepresentationError(f"spin magnitude {j!r} is not a number") from e
    if isinstance(j, float) and abs(float(value) - j) > 1e-12:
        raise RepresentationError(f"spin magnitude {j} is not a multiple of 1/2")
    if (2 * value).denominator != 1:
        raise RepresentationError(f"spin magnitude {j} is not a multiple of 1/2")
    if value <= 0:
        raise RepresentationError(f"spin magnitude must be positive, got {j}")
    return value


@dataclass(frozen=True)
class SpinRep:
    """The three spin matrices of one irreducible representation."""

    j: Fraction
    s1: ComplexArray
    s2: ComplexArray
    s3: ComplexArray

    @property
    def dim(self) -> int:
        return int(2 * self.j) + 1

    @property
    def m_values(self) -> NDArray[np.float64]:
        """Eigenvalues of S3 in basis order: j, j-1, ..., -j."""
        return float(self.j) - np.arange(self.dim, dtype=float)

    @property
    def splus(self) -> ComplexArray:
        return self.s1 + 1j * self.s2

    @property
    def stack(self) -> ComplexArray:
        """S1, S2, S3 stacked along the first axis, shape (3, dim, dim)."""
        return np.stack([self.s1, self.s2, self.s3])

    @property
    def identity(self) -> ComplexArray:
        return np.eye(self.dim, dtype=complex)


def spin_matrices(j: SpinValue, dim_cap: Optional[int] = None) -> SpinRep:
    """
    Build S1, S2, S3 for spin j in the descending-m ladder basis.

    Args:
        j: Spin magnitude, a positive multiple of 1/2
        dim_cap: Largest accepted dimension 2j+1 (defaults to settings.SPIN_DIM_CAP)

    Returns:
        The representation with (S+)_{m+1, m} = sqrt(j(j+1) - m(m+1))

    Raises:
        RepresentationError: For invalid j or a dimension above the cap
    """
    spin = parse_spin(j)
    cap = dim_cap if dim_cap is not None else settings.SPIN_DIM_CAP
    dim = int(2 * spin) + 1
    if dim > cap:
        raise RepresentationError(f"spin {spin} needs dimension {dim}, cap is {cap}")

    jf = float(spin)
    m = jf - np.arange(dim, dtype=float)
    # column k holds |m_k>; S+ raises it into row k-1
    ladder = np.sqrt(jf * (jf + 1.0) - m[1:] * (m[1:] + 1.0))
    splus = np.diag(ladder, k=1).astype(complex)
    sminus = splus.conj().T

    s1 = 0.5 * (splus + sminus)
    s2 = (splus - sminus) / 2j
    s3 = np.diag(m).astype(complex)
    logger.debug("built spin-%s representation, dim=%d", spin, dim)
    return SpinRep(j=spin, s1=_frozen(s1), s2=_frozen(s2), s3=_frozen(s3))


def axis_dot(v: ArrayLike, rep: SpinRep) -> ComplexArray:
    """
    Hermitian matrix v·S = v1 S1 + v2 S2 + v3 S3.

    ``v`` may carry leading batch axes: shape (..., 3) gives (..., dim, dim).
    """
    v = np.asarray(v, dtype=float)
    return np.tensordot(v, rep.stack, axes=([-1], [0]))


def exp_hermitian(h: ComplexArray, tau: float = 1.0) -> ComplexArray:
    """exp(-i tau H) for Hermitian H (batched over leading axes) by eigendecomposition."""
    eig_val, eig_vec = np.linalg.eigh(h)
    phases = np.exp(-1j * tau * eig_val)
    return np.einsum("...ij,...j,...kj->...ik", eig_vec, phases, eig_vec.conj())


def exp_generator(v: ArrayLike, rep: SpinRep) -> ComplexArray:
    """
    Unitary exp(-i v·S), exact up to round-off.

    The Hermitian matrix v·S is diagonalised and each eigenvalue phased, so the
    result is unitary whatever the size of v. Batched over leading axes of v.
    """
    return exp_hermitian(axis_dot(v, rep))


def axis_eigenbasis(axis: ArrayLike, rep: SpinRep) -> ComplexArray:
    """
    Eigenvectors of n·S for a unit axis, as columns ordered m = j, ..., -j.
    """
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    eig_val, eig_vec = np.linalg.eigh(axis_dot(n, rep))
    # eigh sorts ascending; the basis runs from m = j down
    return eig_vec[:, ::-1]


def commutator(a: ComplexArray, b: ComplexArray) -> ComplexArray:
    return a @ b - b @ a


def unitarity_defect(u: ComplexArray) -> NDArray[np.float64]:
    """Frobenius norm of U^dagger U - I, batched over leading axes."""
    u = np.asarray(u)
    dim = u.shape[-1]
    gram = np.swapaxes(u.conj(), -1, -2) @ u
    return np.linalg.norm(gram - np.eye(dim), axis=(-2, -1))


def algebra_defects(rep: SpinRep) -> dict[str, float]:
    """
    Largest entrywise violations of the su(2) relations for one representation.

    Returns:
        Mapping with keys commutator, hermiticity, casimir, spectrum
    """
    s = rep.stack
    comm = 0.0
    for k, l, m in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        diff = commutator(s[k], s[l]) - 1j * s[m]
        comm = max(comm, float(np.max(np.abs(diff))))

    herm = max(float(np.max(np.abs(op - op.conj().T))) for op in s)

    jf = float(rep.j)
    casimir = s[0] @ s[0] + s[1] @ s[1] + s[2] @ s[2]
    cas = float(np.max(np.abs(casimir - jf * (jf + 1.0) * rep.identity)))

    eig = np.sort(np.linalg.eigvalsh(s[2]))[::-1]
    spec = float(np.max(np.abs(eig - rep.m_values)))
    return {"commutator": comm, "hermiticity": herm, "casimir": cas, "spectrum": spec}
