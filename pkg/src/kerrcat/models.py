"""Lindblad generators for the Kerr model family.

Three presets share the Hamiltonian H = chi (a^dag a)^2:

* ``pure_kerr``       no dissipation
* ``kerr_dephasing``  phase diffusion, L = a^dag a at rate 2 chi^2
* ``kerr_damping``    zero-temperature loss, L = a at rate gamma

The dephasing rate 2 chi^2 is the unique D[a^dag a] rate for which the
|n - m| = 1 coherences (and hence <a>) decay as exp(-chi^2 tau).
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParameter
from .fock import DensityMatrix, TruncatedFockSpace, annihilation_op, number_op

__all__ = [
    "ChannelKind",
    "Channel",
    "ModelSpec",
    "PRESETS",
    "preset",
    "generator_apply",
    "CompiledGenerator",
    "compile_generator",
    "dephasing_eigenvalues",
]


class ChannelKind(enum.Enum):
    DEPHASING = "dephasing"  # L = a^dag a
    DAMPING = "damping"  # L = a


@dataclass(frozen=True)
class Channel:
    kind: ChannelKind
    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise InvalidParameter(f"channel rate must be finite and >= 0, got {self.rate!r}")
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        object.__setattr__(self, "rate", float(self.rate))


@dataclass(frozen=True)
class ModelSpec:
    chi: float
    channels: tuple[Channel, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        if not (math.isfinite(self.chi) and self.chi > 0):
            raise InvalidParameter(f"chi must be > 0, got {self.chi!r}")
        object.__setattr__(self, "chi", float(self.chi))
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def total_rate(self) -> float:
        return sum(c.rate for c in self.channels)

    def rates(self, kind: ChannelKind) -> float:
        return sum(c.rate for c in self.channels if c.kind is kind)


PRESETS = ("pure_kerr", "kerr_dephasing", "kerr_damping")


def preset(name: str, chi: float, gamma: float | None = None) -> ModelSpec:
    """Build one of the named model presets.

    >>> preset("kerr_dephasing", 0.3).channels[0].rate
    0.18
    """
    try:
        chi = float(chi)
    except (TypeError, ValueError):
        raise InvalidParameter(f"chi must be a number, got {chi!r}") from None
    if not (math.isfinite(chi) and chi > 0):
        raise InvalidParameter(f"chi must be > 0, got {chi!r}")
    if name == "kerr_damping":
        if gamma is None:
            raise InvalidParameter("kerr_damping requires gamma")
        return ModelSpec(chi, (Channel(ChannelKind.DAMPING, gamma),), name)
    if gamma is not None:
        raise InvalidParameter(f"gamma is only meaningful for kerr_damping, not {name}")
    if name == "pure_kerr":
        return ModelSpec(chi, (), name)
    if name == "kerr_dephasing":
        return ModelSpec(chi, (Channel(ChannelKind.DEPHASING, 2.0 * chi * chi),), name)
    raise InvalidParameter(f"unknown preset {name!r}; expected one of {PRESETS}")


def _dissipator(L: np.ndarray, rho: np.ndarray) -> np.ndarray:
    Ld = L.conj().T
    LdL = Ld @ L
    return L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)


def generator_apply(
    model: ModelSpec,
    rho: DensityMatrix | np.ndarray,
    space: TruncatedFockSpace | None = None,
) -> np.ndarray:
    """Lindblad derivative d rho / d tau by direct matrix products.

    Accepts a :class:`DensityMatrix`, or a raw square array (useful for
    linearity checks on non-physical inputs). This is the reference form;
    the propagator uses :func:`compile_generator`, which is tested against it.
    """
    if isinstance(rho, DensityMatrix):
        if space is not None and space != rho.space:
            raise DimensionMismatch(f"dim {rho.space.dim} does not match dim {space.dim}")
        space = rho.space
        r = rho.matrix
    else:
        r = np.asarray(rho, dtype=complex)
        space = space or TruncatedFockSpace(r.shape[0])
        if r.shape != (space.dim, space.dim):
            raise DimensionMismatch(f"matrix shape {r.shape} does not match dim {space.dim}")
    a = annihilation_op(space).matrix
    n = number_op(space).matrix
    H = model.chi * (n @ n)
    out = -1j * (H @ r - r @ H)
    for ch in model.channels:
        L = n if ch.kind is ChannelKind.DEPHASING else a
        out = out + ch.rate * _dissipator(L, r)
    return out


def dephasing_eigenvalues(chi: float, dim: int) -> np.ndarray:
    """lambda[n, m] = -i chi (n^2 - m^2) - chi^2 (n - m)^2 for the kerr_dephasing preset."""
    k = np.arange(dim, dtype=float)
    n, m = k[:, None], k[None, :]
    return -1j * chi * (n * n - m * m) - chi * chi * (n - m) ** 2


class CompiledGenerator:
    """Lindblad generator reduced to coefficient arrays.

    For this model family every term is either elementwise in the Fock basis
    or a diagonal shift, so

        d rho_nm = diag[n, m] rho_nm + jump[n, m] rho_{n+1, m+1}

    with ``jump`` present only when a damping channel is.
    """

    def __init__(self, model: ModelSpec, dim: int):
        self.model = model
        self.dim = dim
        k = np.arange(dim, dtype=float)
        n, m = k[:, None], k[None, :]
        diag = -1j * model.chi * (n * n - m * m)
        deph = model.rates(ChannelKind.DEPHASING)
        if deph:
            diag = diag - 0.5 * deph * (n - m) ** 2
        damp = model.rates(ChannelKind.DAMPING)
        if damp:
            diag = diag - 0.5 * damp * (n + m)
            s = np.sqrt(k[1:])
            self.jump = damp * np.outer(s, s)
        else:
            self.jump = None
        self.diag = diag

    @property
    def elementwise(self) -> bool:
        return self.jump is None

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = self.diag * rho
        if self.jump is not None:
            out[:-1, :-1] += self.jump * rho[1:, 1:]
        return out

    def rk4_factor(self, dt: float) -> np.ndarray:
        """Elementwise RK4 amplification 1 + z + z^2/2 + z^3/6 + z^4/24, z = dt*diag."""
        if not self.elementwise:
            raise ValueError("rk4_factor is only defined for elementwise generators")
        z = dt * self.diag
        return 1.0 + z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)))

    def rk4_terms(self, dt: float) -> list[np.ndarray]:
        """One RK4 step as sum_s C[s] * rho[s:, s:] placed at [:dim-s, :dim-s].

        Expands 1 + L + L^2/2 + L^3/6 + L^4/24 (with L = dt * generator) on the
        basis of diagonal shifts; for elementwise generators only C[0] is nonzero.
        """
        d = dt * self.diag
        jump = None
        if self.jump is not None:
            jump = np.zeros_like(d)
            jump[:-1, :-1] = dt * self.jump
        power = [np.ones_like(d)]
        total = [np.ones_like(d)]
        for k in range(1, 5):
            nxt = [d * c for c in power] + [np.zeros_like(d)]
            if jump is not None:
                for s, c in enumerate(power):
                    shifted = np.zeros_like(d)
                    shifted[:-1, :-1] = c[1:, 1:]
                    nxt[s + 1] += jump * shifted
            power = nxt
            total.append(np.zeros_like(d))
            for s, c in enumerate(power):
                total[s] += c / math.factorial(k)
        if jump is None:
            return total[:1]
        return [c[: self.dim - s, : self.dim - s].copy() for s, c in enumerate(total) if s < self.dim]


@functools.lru_cache(maxsize=32)
def compile_generator(model: ModelSpec, dim: int) -> CompiledGenerator:
    return CompiledGenerator(model, dim)
