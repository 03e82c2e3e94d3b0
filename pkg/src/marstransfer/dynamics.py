"""Equations of motion: planetary longitudes, polar spacecraft dynamics and the
Cowell third-body perturbations of the escape, cruise and capture phases.

Every function works elementwise on floats, numpy arrays or casadi symbols.
Geometry checks only fire on numeric input.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .astro import MODES, PlanetModel, longitude_rate, planet_radius

COLLISION_DISTANCE = 1e-12

PLANET_STATES = ("L_E", "L_M")
SPACECRAFT_STATES = ("r", "theta", "v_r", "v_theta")
CONTROLS = ("w_r", "w_theta")


class DegenerateStateError(ValueError):
    """Spacecraft state with non-positive radius."""


class DegenerateGeometryError(ValueError):
    """Two bodies closer than the collision distance."""


class SpacecraftState(NamedTuple):
    r: object
    theta: object
    v_r: object
    v_theta: object


class ControlSample(NamedTuple):
    w_r: object
    w_theta: object


class PerturbationAccel(NamedTuple):
    a_pr: object
    a_ptheta: object


ZERO_PERTURBATION = PerturbationAccel(0.0, 0.0)


@dataclass(frozen=True)
class PhaseContext:
    """Everything a phase's right-hand side needs, in that phase's canonical units.

    ``mu_sun``, ``mu_earth`` and ``mu_mars`` are the gravitational parameters
    of the bodies in this unit set (the central body's is ``mu``, normally 1).
    """

    phase: int
    mode: str
    earth: PlanetModel
    mars: PlanetModel
    a_thrust: float = 0.0
    mu: float = 1.0
    mu_sun: float = 0.0
    mu_earth: float = 0.0
    mu_mars: float = 0.0

    def __post_init__(self):
        if self.phase not in (1, 2, 3, 4):
            raise ValueError(f"phase must be 1..4, got {self.phase}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.phase > 1 and self.a_thrust < 0.0:
            raise ValueError("thrust specific force must be non-negative")

    @property
    def perturbed(self) -> bool:
        return self.mode == "elliptic-perturbed"

    @property
    def state_names(self) -> tuple[str, ...]:
        return PLANET_STATES if self.phase == 1 else SPACECRAFT_STATES + PLANET_STATES

    @property
    def control_names(self) -> tuple[str, ...]:
        return () if self.phase == 1 else CONTROLS


def _numeric(*values) -> bool:
    return all(isinstance(v, (int, float, np.ndarray, np.number)) for v in values)


def planetary_rates(ctx: PhaseContext, L_E, L_M):
    return longitude_rate(ctx.earth, L_E), longitude_rate(ctx.mars, L_M)


def spacecraft_rates(ctx: PhaseContext, s: SpacecraftState, u: ControlSample, pert: PerturbationAccel = ZERO_PERTURBATION):
    r, _, v_r, v_theta = s
    if _numeric(r) and np.any(np.asarray(r) <= 0.0):
        raise DegenerateStateError("radius must be positive")
    return (
        v_r,
        v_theta / r,
        ctx.a_thrust * u.w_r - ctx.mu / r**2 + v_theta**2 / r + pert.a_pr,
        ctx.a_thrust * u.w_theta - v_r * v_theta / r + pert.a_ptheta,
    )


def _check_distance(d, what: str):
    if _numeric(d) and np.any(np.asarray(d) < COLLISION_DISTANCE):
        raise DegenerateGeometryError(f"{what} distance below {COLLISION_DISTANCE}")


def _sun_tide(mu_sun, r, delta, R, what):
    # Sun perturbation on a planet-centred spacecraft; delta = theta - L.
    # R/rho^3 - 1/R^2 is rewritten without the cancellation of the two terms.
    c = np.cos(delta)
    rho = np.sqrt((R - r) ** 2 + 4.0 * r * R * np.cos(0.5 * delta) ** 2)
    _check_distance(rho, what)
    rho3 = rho**3
    k = -r * (r + 2.0 * R * c) * (R * R + R * rho + rho * rho) / ((R + rho) * R * R * rho3)
    return PerturbationAccel(-mu_sun * (r / rho3 + k * c), mu_sun * k * np.sin(delta))


def sun_distance(r, delta, R):
    """Sun-spacecraft distance for a planet-centred spacecraft (r_psE / r_psM)."""
    return np.sqrt(R * R + r * r + 2.0 * r * R * np.cos(delta))


def planet_distance(r, delta, R):
    """Spacecraft-planet distance for a heliocentric spacecraft (r_pe / r_pm)."""
    return np.sqrt((r - R) ** 2 + 4.0 * r * R * np.sin(0.5 * delta) ** 2)


def perturbation_phase2(ctx: PhaseContext, s: SpacecraftState, L_E, r_E) -> PerturbationAccel:
    return _sun_tide(ctx.mu_sun, s.r, s.theta - L_E, r_E, "Sun-spacecraft")


def perturbation_phase4(ctx: PhaseContext, s: SpacecraftState, L_M, r_M) -> PerturbationAccel:
    return _sun_tide(ctx.mu_sun, s.r, s.theta - L_M, r_M, "Sun-spacecraft")


def _direct_pull(mu_q, r, delta, R, what):
    d = planet_distance(r, delta, R)
    _check_distance(d, what)
    d3 = d**3
    # r - R cos(delta) == (r - R) + 2 R sin^2(delta/2)
    radial = (r - R) + 2.0 * R * np.sin(0.5 * delta) ** 2
    return -mu_q * radial / d3, -mu_q * R * np.sin(delta) / d3


def perturbation_phase3(ctx: PhaseContext, s: SpacecraftState, L_E, L_M, r_E, r_M) -> PerturbationAccel:
    """Direct attraction of Earth and Mars on a heliocentric spacecraft.

    Only the direct term is modelled; the indirect (Sun acceleration) term of a
    full third-body expression is deliberately absent.
    """
    ar_e, at_e = _direct_pull(ctx.mu_earth, s.r, s.theta - L_E, r_E, "spacecraft-Earth")
    ar_m, at_m = _direct_pull(ctx.mu_mars, s.r, s.theta - L_M, r_M, "spacecraft-Mars")
    return PerturbationAccel(ar_e + ar_m, at_e + at_m)


def perturbation(ctx: PhaseContext, s: SpacecraftState, L_E, L_M) -> PerturbationAccel:
    if not ctx.perturbed:
        return ZERO_PERTURBATION
    if ctx.phase == 2:
        return perturbation_phase2(ctx, s, L_E, planet_radius(ctx.earth, L_E))
    if ctx.phase == 3:
        return perturbation_phase3(ctx, s, L_E, L_M, planet_radius(ctx.earth, L_E), planet_radius(ctx.mars, L_M))
    if ctx.phase == 4:
        return perturbation_phase4(ctx, s, L_M, planet_radius(ctx.mars, L_M))
    return ZERO_PERTURBATION


def path_constraint(u: ControlSample):
    return u.w_r**2 + u.w_theta**2 - 1.0


def phase_rhs(ctx: PhaseContext, x, u=()):
    """Full state derivative of a phase as a tuple of per-state rates.

    ``x`` follows ``ctx.state_names`` and ``u`` follows ``ctx.control_names``.
    """
    if ctx.phase == 1:
        return planetary_rates(ctx, x[0], x[1])
    s = SpacecraftState(x[0], x[1], x[2], x[3])
    L_E, L_M = x[4], x[5]
    rates = spacecraft_rates(ctx, s, ControlSample(u[0], u[1]), perturbation(ctx, s, L_E, L_M))
    return rates + planetary_rates(ctx, L_E, L_M)
