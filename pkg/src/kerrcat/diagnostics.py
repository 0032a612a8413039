"""Cat-quality diagnostics on density matrices.

Quadratures use X_theta = (a e^{-i theta} + a^dag e^{i theta}) / 2, so the
vacuum variance is 1/4. Wigner functions are displaced-parity values

    W(beta) = (2/pi) tr[D^dag(beta) rho D(beta) Pi],  beta = x + i p,

on a square (x, p) grid in the same X1/X2 units.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .closed_forms import x2_tilde_angle
from .errors import ExtentTooSmall, InvalidParameter, SanityViolation
from .fock import (
    DensityMatrix,
    Operator,
    TruncatedFockSpace,
    _ys_branch,
    annihilation_op,
    expectation,
    fidelity_pure,
    number_op,
)

__all__ = [
    "X2_TILDE_CONVENTION",
    "quadrature_operator",
    "quadrature_variance",
    "x2_tilde_variance",
    "YSFidelity",
    "ys_fidelity",
    "photon_distribution",
    "GridSpec",
    "WignerGrid",
    "default_grid",
    "wigner",
    "negativity_volume",
]

X2_TILDE_CONVENTION = "theta(tau) = arg(alpha0) + chi*tau + pi/2; X_theta = (a e^{-i theta} + h.c.)/2; vacuum variance 1/4"
VARIANCE_FLOOR = -1e-10
WIGNER_MARGIN = 3.0


def quadrature_operator(space: TruncatedFockSpace, theta: float) -> Operator:
    a = annihilation_op(space)
    return a * (np.exp(-1j * theta) / 2) + a.dag() * (np.exp(1j * theta) / 2)


def quadrature_variance(rho: DensityMatrix, theta: float) -> float:
    X = quadrature_operator(rho.space, theta)
    mean = expectation(rho, X).real
    v = expectation(rho, X @ X).real - mean * mean
    if v < VARIANCE_FLOOR:
        raise SanityViolation(f"negative quadrature variance {v:.3e}")
    return max(v, 0.0)


def x2_tilde_variance(rho: DensityMatrix, tau: float, chi: float, alpha0: complex) -> float:
    """Variance of the rotating second quadrature (see ``X2_TILDE_CONVENTION``)."""
    return quadrature_variance(rho, x2_tilde_angle(alpha0, chi, tau))


class YSFidelity(NamedTuple):
    fidelity: float  # against (|a> + i|-a>)/sqrt2
    best: float  # max over (|a> +- i|-a>)/sqrt2
    branch: int  # +1 or -1, the sign achieving ``best``


def ys_fidelity(rho: DensityMatrix, alpha: complex) -> YSFidelity:
    """Overlap with the Yurke-Stoler state of amplitude ``alpha``.

    Kerr evolution produces the + branch at chi tau = pi/2 and the - branch
    at 3 pi/2; ``best`` covers both so that later occurrences are compared
    fairly.
    """
    plus = fidelity_pure(rho, _ys_branch(alpha, rho.space, +1))
    minus = fidelity_pure(rho, _ys_branch(alpha, rho.space, -1))
    if minus > plus:
        return YSFidelity(plus, minus, -1)
    return YSFidelity(plus, plus, +1)


def photon_distribution(rho: DensityMatrix) -> np.ndarray:
    return rho.populations()


@dataclass(frozen=True)
class GridSpec:
    """Square grid [-half_width, half_width]^2 with ``resolution`` points per axis."""

    half_width: float
    resolution: int = 201

    def __post_init__(self):
        if not (math.isfinite(self.half_width) and self.half_width > 0):
            raise InvalidParameter(f"half_width must be > 0, got {self.half_width!r}")
        if int(self.resolution) != self.resolution or self.resolution < 3:
            raise InvalidParameter(f"resolution must be an integer >= 3, got {self.resolution!r}")
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "resolution", int(self.resolution))

    def axis(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.resolution)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.resolution - 1)


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """Wigner values sampled on a grid; ``values[i, j]`` sits at (x[j], p[i])."""

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dp(self) -> float:
        return float(self.p[1] - self.p[0])

    @property
    def x_range(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    @property
    def p_range(self) -> tuple[float, float]:
        return float(self.p[0]), float(self.p[-1])

    def integral(self) -> float:
        return float(np.sum(self.values) * self.dx * self.dp)


def default_grid(alpha_abs: float, resolution: int = 201) -> GridSpec:
    return GridSpec(alpha_abs + WIGNER_MARGIN, resolution)


def _check_extent(rho: DensityMatrix, grid: GridSpec) -> None:
    mean_n = max(expectation(rho, number_op(rho.space)).real, 0.0)
    need = math.sqrt(mean_n) + WIGNER_MARGIN
    if grid.half_width < need - 1e-12:
        raise ExtentTooSmall(
            f"grid half-width {grid.half_width:g} is below sqrt(<n>) + {WIGNER_MARGIN:g} = {need:.4g}"
        )


def wigner(
    rho: DensityMatrix,
    grid: GridSpec | None = None,
    method: Literal["expm", "laguerre"] = "expm",
) -> WignerGrid:
    """Displaced-parity Wigner function of ``rho`` on ``grid``.

    ``method="expm"`` builds D(beta) as the matrix exponential of
    beta a^dag - conj(beta) a on a padded Fock space (exactly, through one
    eigendecomposition of the Hermitian generator i(a^dag - a)).
    ``method="laguerre"`` uses the closed-form Fock matrix elements of the
    displaced parity; it is much faster and is what the experiments use.
    The two agree to ~1e-10 on the default grids.
    """
    if grid is None:
        mean_n = max(expectation(rho, number_op(rho.space)).real, 0.0)
        grid = default_grid(math.sqrt(mean_n))
    _check_extent(rho, grid)
    axis = grid.axis()
    if method == "expm":
        values = _wigner_expm(rho.matrix, axis)
    elif method == "laguerre":
        values = _laguerre_basis(grid.half_width, grid.resolution, rho.space.dim).evaluate(rho.matrix)
    else:
        raise InvalidParameter(f"unknown Wigner method {method!r}")
    return WignerGrid(axis.copy(), axis.copy(), values)


def negativity_volume(grid: WignerGrid) -> float:
    """Riemann sum of max(0, -W) dx dp."""
    return float(np.sum(np.maximum(0.0, -grid.values)) * grid.dx * grid.dp)


def _polar(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X, P = np.meshgrid(axis, axis)
    beta = X + 1j * P
    return np.abs(beta), np.angle(beta)


def _effective_dim(rho: np.ndarray) -> int:
    pops = np.abs(np.real(np.diag(rho)))
    significant = np.nonzero(pops > 1e-30)[0]
    return int(significant[-1]) + 1 if significant.size else 1


def _padded_dim(dim: int, gamma_max: float) -> int:
    return int(math.ceil((gamma_max + math.sqrt(dim) + 8.0) ** 2)) + dim


def _wigner_expm(rho: np.ndarray, axis: np.ndarray, chunk: int = 2048) -> np.ndarray:
    # W = (2/pi) tr[rho D(2 beta) Pi], with D(g) = e^{i phi n} exp(-i|g| H) e^{-i phi n},
    # H = i(a^dag - a) diagonalized once on a padded space.
    dim = _effective_dim(rho)
    rho = rho[:dim, :dim]
    r, phi = _polar(axis)
    gamma = 2.0 * r.ravel()
    phi = phi.ravel()
    npad = _padded_dim(dim, float(gamma.max()))
    a = np.diag(np.sqrt(np.arange(1, npad)), k=1)
    h, V = np.linalg.eigh(1j * (a.T - a))
    Vs = V[:dim, :]
    B = ((-1.0) ** np.arange(dim))[:, None] * rho
    qs = np.arange(-(dim - 1), dim)
    A = np.zeros((npad, qs.size), dtype=complex)
    for j, q in enumerate(qs):
        m = np.arange(max(q, 0), min(dim, dim + q))
        A[:, j] = np.einsum("mk,m,mk->k", Vs[m].conj(), B[m, m - q], Vs[m - q])
    out = np.empty(gamma.size)
    for s in range(0, gamma.size, chunk):
        sl = slice(s, s + chunk)
        D = np.exp(-1j * np.outer(phi[sl], qs)) @ A.T
        E = np.exp(-1j * np.outer(gamma[sl], h))
        out[sl] = np.real(np.sum(D * E, axis=1))
    return (2.0 / math.pi) * out.reshape(r.shape)


class _LaguerreBasis:
    """Radial displaced-parity functions for every coherence offset q.

    <n|D(g)|m> for n = m + q >= m equals
    sqrt(m!/n!) g^q e^{-|g|^2/2} L_m^(q)(|g|^2); the radial parts depend on
    |beta| only, so they are tabulated on the distinct radii of the grid.
    """

    def __init__(self, half_width: float, resolution: int, dim: int):
        axis = np.linspace(-half_width, half_width, resolution)
        r, phi = _polar(axis)
        r2 = r.ravel() ** 2
        uniq, self.inverse = np.unique(np.round(r2, 12), return_inverse=True)
        self.shape = r.shape
        self.phase = np.exp(1j * phi.ravel())
        self.dim = dim
        x = 4.0 * uniq  # |2 beta|^2
        with np.errstate(divide="ignore"):
            log_g = 0.5 * np.log(x)
        self.radial = []
        for q in range(dim):
            m = np.arange(dim - q)[:, None]
            logpre = 0.5 * (gammaln(m + 1) - gammaln(m + q + 1)) - 0.5 * x[None, :]
            if q:
                logpre = logpre + q * log_g[None, :]
            sign = (-1.0) ** m
            self.radial.append(sign * np.exp(logpre) * eval_genlaguerre(m, q, x[None, :]))

    def evaluate(self, rho: np.ndarray) -> np.ndarray:
        dim = self.dim
        acc = np.zeros(self.inverse.size, dtype=complex)
        # Horner in e^{i phi} over q, highest offset first
        for q in range(dim - 1, -1, -1):
            coeff = np.diagonal(rho, offset=q)
            g = (coeff @ self.radial[q])[self.inverse]
            acc = acc * self.phase + (g if q == 0 else 2.0 * g)
        return (2.0 / math.pi) * np.real(acc).reshape(self.shape)


@functools.lru_cache(maxsize=8)
def _laguerre_basis(half_width: float, resolution: int, dim: int) -> _LaguerreBasis:
    return _LaguerreBasis(half_width, resolution, dim)
