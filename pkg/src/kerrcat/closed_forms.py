"""Analytic moments of the Kerr model family.

Two groups of formulas live here and are deliberately kept apart:

* :func:`sm_first_moment` is the first moment of the homodyne-feedback
  master equation (the one with the 1/C^2 prefactor). It is tabulated and
  tested on its own terms; it does NOT follow from any preset in
  :mod:`kerrcat.models`.
* :func:`kerr_first_moment` and the ``dephasing_*`` functions are exact for
  the ``pure_kerr`` and ``kerr_dephasing`` presets, and serve as oracles for
  the propagator. They follow from the coherence law

      rho_nm(tau) = rho_nm(0) exp(-i chi (n^2 - m^2) tau - chi^2 (n - m)^2 tau).

All functions take ``chi`` and ``tau`` separately: the damping factor
exp(-chi^2 tau) is not a function of the product chi*tau alone.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

__all__ = [
    "CFactor",
    "MomentFactors",
    "MomentResult",
    "c_factor",
    "sm_first_moment",
    "kerr_first_moment",
    "kerr_second_moment",
    "dephasing_first_moment",
    "dephasing_second_moment",
    "quadrature_variance_from_moments",
    "dephasing_quadrature_variance",
    "x2_tilde_angle",
    "recurrence_envelope",
    "first_occurrence_envelope",
]


@dataclass(frozen=True)
class CFactor:
    """C(chi tau) = 2 - exp(-2 i chi tau); |C| lies in [1, 3]."""

    value: complex

    def __complex__(self) -> complex:
        return self.value

    def __abs__(self) -> float:
        return abs(self.value)


def c_factor(chi_tau: float) -> CFactor:
    if not math.isfinite(chi_tau):
        raise ValueError(f"chi_tau must be finite, got {chi_tau!r}")
    return CFactor(2.0 - cmath.exp(-2j * chi_tau))


@dataclass(frozen=True)
class MomentFactors:
    rotation: complex  # exp(-i chi tau) / C^2
    interference: complex  # exp(-2 |alpha0|^2 (C - 1) / C)
    damping: float  # exp(-chi^2 tau)


@dataclass(frozen=True)
class MomentResult:
    value: complex
    alpha0: complex
    factors: MomentFactors

    def reconstruct(self) -> complex:
        f = self.factors
        return self.alpha0 * f.rotation * f.interference * f.damping

    def __complex__(self) -> complex:
        return self.value

    def __abs__(self) -> float:
        return abs(self.value)


def _check(chi: float, tau: float) -> None:
    if not chi > 0:
        raise ValueError(f"chi must be > 0, got {chi!r}")
    if not tau >= 0:
        raise ValueError(f"tau must be >= 0, got {tau!r}")


def sm_first_moment(alpha0: complex, chi: float, tau: float) -> MomentResult:
    """First moment <a(tau)> of the feedback master equation.

    <a> = alpha0 exp(-i chi tau) / C^2 * exp(-2 |alpha0|^2 (C - 1) / C) * exp(-chi^2 tau)
    """
    _check(chi, tau)
    alpha0 = complex(alpha0)
    chi_tau = chi * tau
    C = c_factor(chi_tau).value
    factors = MomentFactors(
        rotation=cmath.exp(-1j * chi_tau) / (C * C),
        interference=cmath.exp(-2.0 * abs(alpha0) ** 2 * (C - 1.0) / C),
        damping=math.exp(-chi * chi * tau),
    )
    value = alpha0 * factors.rotation * factors.interference * factors.damping
    return MomentResult(value, alpha0, factors)


def kerr_first_moment(alpha0: complex, chi: float, tau: float) -> complex:
    """<a> for H = chi (a^dag a)^2 acting on |alpha0>."""
    _check(chi, tau)
    alpha0 = complex(alpha0)
    chi_tau = chi * tau
    return alpha0 * cmath.exp(-1j * chi_tau) * cmath.exp(abs(alpha0) ** 2 * (cmath.exp(-2j * chi_tau) - 1.0))


def kerr_second_moment(alpha0: complex, chi: float, tau: float) -> complex:
    """<a^2> for H = chi (a^dag a)^2 acting on |alpha0>."""
    _check(chi, tau)
    alpha0 = complex(alpha0)
    chi_tau = chi * tau
    return alpha0**2 * cmath.exp(-4j * chi_tau) * cmath.exp(abs(alpha0) ** 2 * (cmath.exp(-4j * chi_tau) - 1.0))


def dephasing_first_moment(alpha0: complex, chi: float, tau: float) -> complex:
    return kerr_first_moment(alpha0, chi, tau) * math.exp(-chi * chi * tau)


def dephasing_second_moment(alpha0: complex, chi: float, tau: float) -> complex:
    # (n - m)^2 = 4 for the (n+2, n) coherences
    return kerr_second_moment(alpha0, chi, tau) * math.exp(-4.0 * chi * chi * tau)


def quadrature_variance_from_moments(mean_a: complex, mean_a2: complex, mean_n: float, theta: float) -> float:
    """Variance of X_theta = (a e^{-i theta} + a^dag e^{i theta}) / 2."""
    second = (1.0 + 2.0 * mean_n + 2.0 * (cmath.exp(-2j * theta) * mean_a2).real) / 4.0
    first = (cmath.exp(-1j * theta) * mean_a).real
    return second - first * first


def x2_tilde_angle(alpha0: complex, chi: float, tau: float) -> float:
    """Frame angle arg(alpha0) + chi tau + pi/2 of the rotating second quadrature."""
    return cmath.phase(complex(alpha0)) + chi * tau + 0.5 * math.pi


def dephasing_quadrature_variance(alpha0: complex, chi: float, tau: float, theta: float | None = None) -> float:
    """Exact quadrature variance under ``kerr_dephasing``.

    ``theta=None`` selects the rotating X2-tilde frame of :func:`x2_tilde_angle`.
    """
    if theta is None:
        theta = x2_tilde_angle(alpha0, chi, tau)
    v = quadrature_variance_from_moments(
        dephasing_first_moment(alpha0, chi, tau),
        dephasing_second_moment(alpha0, chi, tau),
        abs(complex(alpha0)) ** 2,
        theta,
    )
    return max(v, 0.0)


def recurrence_envelope(chi: float, k: int) -> float:
    """|<a>| / |alpha0| at the k-th full recurrence chi tau = k pi, i.e. exp(-k pi chi)."""
    if not chi > 0:
        raise ValueError(f"chi must be > 0, got {chi!r}")
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a non-negative integer, got {k!r}")
    return math.exp(-k * math.pi * chi)


def first_occurrence_envelope(chi: float) -> float:
    """exp(-chi^2 tau) at the first cat time chi tau = pi/2, i.e. exp(-pi chi / 2)."""
    if not chi > 0:
        raise ValueError(f"chi must be > 0, got {chi!r}")
    return math.exp(-0.5 * math.pi * chi)
