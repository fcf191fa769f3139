"""Closed-form solitary-wave profiles and multi-soliton sums.

The ground state solving ``Q'' + Q^p = Q`` is

    Q(x) = ((p+1) / (2*cosh^2((p-1)x/2)))^(1/(p-1))

and the speed-c profile is ``Q_c(x) = c^(1/(p-1)) Q(sqrt(c) x)``.  A soliton
is the traveling wave ``Q_c(x - c t - x0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, WindowError
from .grid import Field, GridSpec

__all__ = [
    "SolitonParams",
    "SolitonFamily",
    "InteractionConstants",
    "q_profile_closed_form",
    "q_peak",
    "q_profile",
    "soliton_field",
    "multisoliton_sum",
    "interaction_constants",
]

# Relative boundary amplitude below which periodic wraparound is negligible.
BOUNDARY_TOL = 1e-13
# Window margin for moving solitons, in decay lengths 1/sqrt(c).
WINDOW_DECAY_LENGTHS = 10.0


@dataclass(frozen=True)
class SolitonParams:
    """One soliton: speed ``c > 0`` and initial shift ``x0``."""

    c: float
    x0: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigurationError(f"soliton speed must be positive, got {self.c}")


@dataclass(frozen=True)
class SolitonFamily:
    """Ordered soliton parameters with the nonlinearity exponent.

    Speeds must be strictly increasing; ``p >= 6`` keeps the problem in the
    supercritical regime where the family parametrization is meaningful.
    """

    p: int
    members: tuple[SolitonParams, ...]

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 6:
            raise ConfigurationError(
                f"exponent p must be an integer >= 6 (supercritical), got {self.p}"
            )
        object.__setattr__(self, "members", tuple(self.members))
        speeds = [m.c for m in self.members]
        if any(b <= a for a, b in zip(speeds, speeds[1:])):
            raise ConfigurationError(
                f"speeds must be strictly increasing, got {speeds}"
            )

    @classmethod
    def from_lists(cls, p: int, speeds, shifts) -> "SolitonFamily":
        if len(speeds) != len(shifts):
            raise ConfigurationError("speeds and shifts must have equal length")
        return cls(p, tuple(SolitonParams(c, x0) for c, x0 in zip(speeds, shifts)))

    @property
    def n_solitons(self) -> int:
        return len(self.members)

    @property
    def speeds(self) -> tuple[float, ...]:
        return tuple(m.c for m in self.members)

    @property
    def shifts(self) -> tuple[float, ...]:
        return tuple(m.x0 for m in self.members)


@dataclass(frozen=True)
class InteractionConstants:
    """Interaction smallness constants derived from speeds and spectral data.

    ``gamma_paper`` is the bookkeeping rate sigma0^{3/2}/1e6; it is far too
    small to be observable at desk timescales, so thresholds use
    ``gamma_eff`` (default sigma0^{3/2}/16) instead.
    """

    sigma0: float
    gamma_paper: float
    gamma_eff: float
    eta0: float
    e0: float


def q_profile_closed_form(p: int, c: float, x: np.ndarray) -> np.ndarray:
    """Evaluate Q_c at the given abscissas.

    Written in terms of exp(-|.|) so the far tail underflows to zero instead
    of overflowing the intermediate cosh.
    """
    s = 0.5 * (p - 1) * np.sqrt(c) * np.abs(np.asarray(x, dtype=float))
    sech = 2.0 * np.exp(-s) / (1.0 + np.exp(-2.0 * s))
    amp = c ** (1.0 / (p - 1)) * ((p + 1) / 2.0) ** (1.0 / (p - 1))
    return amp * sech ** (2.0 / (p - 1))


def q_peak(p: int, c: float) -> float:
    """Peak value Q_c(0) = c^{1/(p-1)} ((p+1)/2)^{1/(p-1)}."""
    return c ** (1.0 / (p - 1)) * ((p + 1) / 2.0) ** (1.0 / (p - 1))


def _min_boundary_distance(grid: GridSpec, center: float) -> float:
    left = center - grid.origin
    right = grid.origin + grid.domain_length - center
    return min(left, right)


def q_profile(p: int, c: float, grid: GridSpec, center: float = 0.0) -> Field:
    """Sample Q_c(. - center) on the grid.

    Requires the boundary values to be below ``BOUNDARY_TOL`` of the peak so
    periodic wraparound is invisible at working precision.
    """
    if not c > 0:
        raise ConfigurationError(f"speed must be positive, got {c}")
    dist = _min_boundary_distance(grid, center)
    if dist <= 0:
        raise WindowError(f"center {center} outside grid")
    # |Q_c(x)| / Q_c(0) <= 2^{2/(p-1)} e^{-sqrt(c)|x|}; require the bound < tol.
    required = (math.log(1.0 / BOUNDARY_TOL) + 2.0 * math.log(2.0) / (p - 1)) / math.sqrt(c)
    if dist < required:
        raise ConfigurationError(
            f"domain too narrow: boundary at distance {dist:.3g} from center, "
            f"need >= {required:.3g} for boundary values < {BOUNDARY_TOL:g} of peak"
        )
    return Field(grid, q_profile_closed_form(p, c, grid.nodes - center))


def soliton_field(s: SolitonParams, p: int, t: float, grid: GridSpec) -> Field:
    """Traveling soliton R_{c,x0}(t, .) = Q_c(. - c t - x0)."""
    center = s.c * t + s.x0
    dist = _min_boundary_distance(grid, center)
    margin = WINDOW_DECAY_LENGTHS / math.sqrt(s.c)
    if dist < margin:
        raise WindowError(
            f"soliton center {center:.3g} within {dist:.3g} of the boundary "
            f"(need {margin:.3g} = {WINDOW_DECAY_LENGTHS:g} decay lengths)"
        )
    return q_profile(p, s.c, grid, center)


def multisoliton_sum(fam: SolitonFamily, t: float, grid: GridSpec) -> Field:
    """R(t) = sum of the member solitons at time t."""
    total = np.zeros(grid.num_points)
    for m in fam.members:
        total += soliton_field(m, fam.p, t, grid).values
    return Field(grid, total)


def interaction_constants(
    fam: SolitonFamily,
    basis_e0: float,
    basis_eta0: float,
    gamma_eff_divisor: float = 16.0,
) -> InteractionConstants:
    """sigma0 = min of spectral-gap and speed-gap scales; gamma rates from it."""
    if not (basis_e0 > 0 and basis_eta0 > 0):
        raise ConfigurationError("basis_e0 and basis_eta0 must be positive")
    speeds = fam.speeds
    c1 = speeds[0]
    candidates = [basis_eta0 ** (2.0 / 3.0) * c1, basis_e0 ** (2.0 / 3.0) * c1, c1]
    candidates += [b - a for a, b in zip(speeds, speeds[1:])]
    sigma0 = min(candidates)
    return InteractionConstants(
        sigma0=sigma0,
        gamma_paper=sigma0 ** 1.5 / 1e6,
        gamma_eff=sigma0 ** 1.5 / gamma_eff_divisor,
        eta0=basis_eta0,
        e0=basis_e0,
    )
