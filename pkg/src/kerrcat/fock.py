"""Truncated single-mode Fock space: operators, reference states, and
state primitives (expectation values, fidelity, purity).

Everything here is immutable once built. Matrices are stored as read-only
complex numpy arrays so that values can be shared freely between threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.stats import poisson

from .errors import DimensionMismatch, InvalidParameter, SanityViolation, TruncationWarning

__all__ = [
    "TruncatedFockSpace",
    "Operator",
    "StateVector",
    "DensityMatrix",
    "annihilation_op",
    "creation_op",
    "number_op",
    "identity_op",
    "parity_op",
    "displacement_op",
    "fock_state",
    "coherent_state",
    "ys_state",
    "tail_mass",
    "recommended_dim",
    "expectation",
    "fidelity_pure",
    "purity",
    "trace",
    "hermiticity_defect",
]

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-12
TAIL_MASS_TOL = 1e-10


def _frozen(array, dtype=complex) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class TruncatedFockSpace:
    """Span of the Fock states |0>, ..., |dim-1>."""

    dim: int

    def __post_init__(self):
        if isinstance(self.dim, bool) or int(self.dim) != self.dim or self.dim < 2:
            raise InvalidParameter(f"Fock dimension must be an integer >= 2, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.dim)


def _check_space(a, b) -> None:
    if a.space != b.space:
        raise DimensionMismatch(f"dim {a.space.dim} does not match dim {b.space.dim}")


@dataclass(frozen=True, eq=False)
class Operator:
    space: TruncatedFockSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatch(
                f"operator shape {m.shape} does not match space dim {self.space.dim}"
            )
        object.__setattr__(self, "matrix", m)

    def dag(self) -> Operator:
        return Operator(self.space, self.matrix.conj().T)

    def __matmul__(self, other: Operator) -> Operator:
        _check_space(self, other)
        return Operator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: Operator) -> Operator:
        _check_space(self, other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: Operator) -> Operator:
        _check_space(self, other)
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> Operator:
        return Operator(self.space, scalar * self.matrix)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state. Use :meth:`normalized` to build from raw amplitudes."""

    space: TruncatedFockSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        v = _frozen(self.amplitudes)
        if v.shape != (self.space.dim,):
            raise DimensionMismatch(
                f"amplitude vector of shape {v.shape} does not match space dim {self.space.dim}"
            )
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidParameter(f"state vector norm is {norm!r}, expected 1")
        object.__setattr__(self, "amplitudes", v)

    @classmethod
    def normalized(cls, space: TruncatedFockSpace, amplitudes) -> StateVector:
        v = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise InvalidParameter("cannot normalize the zero vector")
        return cls(space, v / norm)

    def projector(self) -> DensityMatrix:
        return DensityMatrix.from_state(self)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace matrix on a truncated Fock space.

    Hermiticity and trace are checked at construction. Positivity is not
    (it costs an eigendecomposition); call :meth:`min_eigenvalue` where it
    matters.
    """

    space: TruncatedFockSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatch(
                f"density matrix shape {m.shape} does not match space dim {self.space.dim}"
            )
        defect = float(np.max(np.abs(m - m.conj().T)))
        if defect > HERMITIAN_TOL:
            raise InvalidParameter(f"density matrix is not Hermitian (defect {defect:.3e})")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidParameter(f"density matrix trace is {tr!r}, expected 1")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_state(cls, psi: StateVector) -> DensityMatrix:
        v = psi.amplitudes
        return cls(psi.space, np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, space: TruncatedFockSpace, levels: int | None = None) -> DensityMatrix:
        levels = space.dim if levels is None else levels
        if not 1 <= levels <= space.dim:
            raise InvalidParameter(f"levels must be in [1, {space.dim}], got {levels}")
        diag = np.zeros(space.dim)
        diag[:levels] = 1.0 / levels
        return cls(space, np.diag(diag))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(h)[0])


def annihilation_op(space: TruncatedFockSpace) -> Operator:
    """Lowering operator with a[n-1, n] = sqrt(n)."""
    return Operator(space, np.diag(np.sqrt(np.arange(1, space.dim)), k=1))


def creation_op(space: TruncatedFockSpace) -> Operator:
    return annihilation_op(space).dag()


def number_op(space: TruncatedFockSpace) -> Operator:
    # built directly so the diagonal is exactly 0..dim-1
    return Operator(space, np.diag(np.arange(space.dim, dtype=float)))


def identity_op(space: TruncatedFockSpace) -> Operator:
    return Operator(space, np.eye(space.dim))


def parity_op(space: TruncatedFockSpace) -> Operator:
    return Operator(space, np.diag((-1.0) ** np.arange(space.dim)))


def displacement_op(beta: complex, space: TruncatedFockSpace) -> Operator:
    """exp(beta a^dag - conj(beta) a) evaluated on the truncated space.

    Only the block well below the truncation edge is faithful; embed in a
    larger space when displacing by more than a few units.
    """
    a = annihilation_op(space).matrix
    gen = beta * a.conj().T - np.conj(beta) * a
    return Operator(space, scipy.linalg.expm(gen))


def fock_state(n: int, space: TruncatedFockSpace) -> StateVector:
    if not 0 <= n < space.dim:
        raise InvalidParameter(f"Fock level {n} outside 0..{space.dim - 1}")
    v = np.zeros(space.dim, dtype=complex)
    v[n] = 1.0
    return StateVector(space, v)


def recommended_dim(alpha: complex) -> int:
    """Smallest dimension satisfying |alpha|^2 + 6|alpha| + 10 <= dim."""
    r = abs(alpha)
    return int(math.ceil(r * r + 6.0 * r + 10.0))


def tail_mass(alpha: complex, dim: int) -> float:
    """Poisson weight of an untruncated coherent state beyond level dim-1."""
    return float(poisson.sf(dim - 1, abs(alpha) ** 2))


def _coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    c = np.empty(dim, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(dim - 1):
        c[n + 1] = c[n] * alpha / math.sqrt(n + 1)
    return c


def _warn_truncation(alpha: complex, space: TruncatedFockSpace) -> None:
    if alpha == 0:
        return
    tail = tail_mass(alpha, space.dim)
    if tail > TAIL_MASS_TOL:
        warnings.warn(
            f"coherent amplitude {alpha} loses {tail:.2e} of its weight beyond dim={space.dim}",
            TruncationWarning,
            stacklevel=3,
        )
    elif recommended_dim(alpha) > space.dim:
        warnings.warn(
            f"dim={space.dim} is below the recommended {recommended_dim(alpha)} for alpha={alpha}",
            TruncationWarning,
            stacklevel=3,
        )


def coherent_state(alpha: complex, space: TruncatedFockSpace) -> StateVector:
    """Coherent state |alpha>, built by the stable two-term amplitude recurrence."""
    alpha = complex(alpha)
    _warn_truncation(alpha, space)
    return StateVector.normalized(space, _coherent_amplitudes(alpha, space.dim))


def ys_state(alpha: complex, space: TruncatedFockSpace) -> StateVector:
    """Yurke-Stoler superposition (|alpha> + i|-alpha>)/sqrt(2)."""
    return _ys_branch(alpha, space, +1)


def _ys_branch(alpha: complex, space: TruncatedFockSpace, sign: int) -> StateVector:
    alpha = complex(alpha)
    _warn_truncation(alpha, space)
    plus = _coherent_amplitudes(alpha, space.dim)
    minus = plus * (-1.0) ** np.arange(space.dim)
    return StateVector.normalized(space, plus + sign * 1j * minus)


def expectation(rho: DensityMatrix, op: Operator) -> complex:
    """trace(rho @ op)."""
    _check_space(rho, op)
    # trace of a product without forming it
    return complex(np.sum(rho.matrix * op.matrix.T))


def fidelity_pure(rho: DensityMatrix, psi: StateVector) -> float:
    _check_space(rho, psi)
    v = psi.amplitudes
    f = float(np.real(np.vdot(v, rho.matrix @ v)))
    if f < -1e-12 or f > 1.0 + 1e-12:
        raise SanityViolation(f"fidelity {f!r} outside [0, 1]; rho is not a valid state")
    return min(max(f, 0.0), 1.0)


def purity(rho: DensityMatrix) -> float:
    # trace(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(rho.matrix) ** 2))


def trace(rho: DensityMatrix) -> complex:
    return complex(np.trace(rho.matrix))


def hermiticity_defect(rho: DensityMatrix) -> float:
    return float(np.max(np.abs(rho.matrix - rho.matrix.conj().T)))
