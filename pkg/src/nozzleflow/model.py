"""Gas law and the Riemann-invariant form of isentropic duct flow.

Conversions between conservative (rho, m) and diagonal (z, w) variables,
characteristic speeds, and the geometric source term of the diagonalized
system.  All operations are pure functions of immutable values; the ``*_zw``
helpers accept scalars or numpy arrays and are the versions the solver uses
on whole grids.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, InvalidStateError, VacuumStateError

#: States with w - z below this gap are treated as vacuum.
VACUUM_GAP = 1e-12

_LOG_GAMMA = 5.0 / 3.0


@dataclass(frozen=True)
class GasLaw:
    """Adiabatic exponent with the two derived exponents used everywhere.

    ``theta = (gamma-1)/2`` and ``beta = (gamma-3)/(2(gamma-1))``.  The
    gradient functionals change form at ``beta = -1`` (gamma = 5/3), so that
    branch must be selected exactly; ``from_gamma`` accepts the rational
    string "5/3" for this purpose.
    """

    gamma: float
    theta: float
    beta: float
    is_log_branch: bool

    @classmethod
    def from_gamma(cls, gamma) -> "GasLaw":
        if isinstance(gamma, str):
            try:
                gamma = Fraction(gamma)
            except (ValueError, ZeroDivisionError) as exc:
                raise DomainError(f"cannot parse adiabatic exponent {gamma!r}") from exc
        if isinstance(gamma, Fraction):
            exact_log = gamma == Fraction(5, 3)
        else:
            exact_log = float(gamma) == _LOG_GAMMA
        g = float(gamma)
        if not 1.0 < g <= _LOG_GAMMA:
            raise DomainError(f"adiabatic exponent must lie in (1, 5/3], got {g}")
        is_log = exact_log or g == _LOG_GAMMA
        if not is_log and abs(g - _LOG_GAMMA) < 1e-6:
            warnings.warn(
                "gamma is within 1e-6 of 5/3 but not equal: the general-branch "
                "coefficients are ill-conditioned this close to the log branch; "
                "pass '5/3' to select the log branch exactly",
                stacklevel=2,
            )
        theta = (g - 1.0) / 2.0
        beta = -1.0 if is_log else (g - 3.0) / (2.0 * (g - 1.0))
        return cls(g, theta, beta, is_log)

    def __post_init__(self):
        if not 1.0 < self.gamma <= _LOG_GAMMA:
            raise DomainError(f"adiabatic exponent must lie in (1, 5/3], got {self.gamma}")


@dataclass(frozen=True)
class GasState:
    """Pointwise conservative description (density, momentum, velocity)."""

    rho: float
    m: float
    v: float

    def __post_init__(self):
        if self.rho < 0.0:
            raise DomainError(f"density must be nonnegative, got {self.rho}")

    @classmethod
    def from_rho_v(cls, rho: float, v: float) -> "GasState":
        return cls(rho, rho * v, v)

    @property
    def is_vacuum(self) -> bool:
        return self.rho == 0.0


@dataclass(frozen=True)
class RiemannState:
    """Pointwise diagonal description; w >= z with equality only at vacuum."""

    z: float
    w: float

    def __post_init__(self):
        if self.w < self.z:
            raise InvalidStateError(f"invariants out of order: w={self.w} < z={self.z}")

    @property
    def gap(self) -> float:
        return self.w - self.z

    @property
    def is_vacuum(self) -> bool:
        return self.gap < VACUUM_GAP


def pressure(rho, law: GasLaw):
    """Barotropic pressure rho**gamma / gamma.  Vectorizes over rho."""
    if np.any(np.asarray(rho) < 0.0):
        raise DomainError("density must be nonnegative")
    return rho ** law.gamma / law.gamma


def sound_char_zw(z, w, law: GasLaw):
    """rho**theta expressed in the invariants: theta*(w - z)/2."""
    return 0.5 * law.theta * (np.asarray(w) - np.asarray(z))


def rho_zw(z, w, law: GasLaw):
    """Density recovered from the invariants (0 where the gap closes)."""
    gap = np.maximum(np.asarray(w) - np.asarray(z), 0.0)
    return (0.5 * law.theta * gap) ** (1.0 / law.theta)


def speeds_zw(z, w, law: GasLaw):
    """Characteristic speeds (lambda1, lambda2) from the invariants."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    v = 0.5 * (w + z)
    c = 0.5 * law.theta * (w - z)
    return v - c, v + c


def to_riemann(state: GasState, law: GasLaw) -> RiemannState:
    """Map (rho, v) to (z, w) = v -+ rho**theta/theta.  Needs rho > 0."""
    if state.rho <= 0.0:
        raise VacuumStateError("Riemann map is degenerate at vacuum (rho = 0)")
    c = state.rho ** law.theta / law.theta
    return RiemannState(state.v - c, state.v + c)


def from_riemann(r: RiemannState, law: GasLaw) -> GasState:
    """Inverse map; returns the vacuum state when the gap closes."""
    v = 0.5 * (r.w + r.z)
    if r.is_vacuum:
        return GasState(0.0, 0.0, v)
    rho = (0.5 * law.theta * r.gap) ** (1.0 / law.theta)
    return GasState(rho, rho * v, v)


def char_speeds(r: RiemannState, law: GasLaw):
    """(lambda1, lambda2) at a point; lambda1 <= lambda2, equal at vacuum."""
    lam1, lam2 = speeds_zw(r.z, r.w, law)
    return float(lam1), float(lam2)


def source_pair_zw(z, w, a, law: GasLaw):
    """Source of the diagonal system: (dz/dt, dw/dt) = (s, -s) with
    s = ((gamma-1)/8) a (w^2 - z^2).  Antisymmetric by construction."""
    s = 0.125 * (law.gamma - 1.0) * np.asarray(a) * (np.asarray(w) - np.asarray(z)) * (
        np.asarray(w) + np.asarray(z)
    )
    return s, -s


def source_rhs(r: RiemannState, a: float, law: GasLaw):
    dz, dw = source_pair_zw(r.z, r.w, a, law)
    return float(dz), float(dw)
