"""Canonical unit sets, cross-phase conversion factors and the planar
planet-centred <-> heliocentric coordinate transforms."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .astro import PhysicalConstants
from .dynamics import DegenerateGeometryError, SpacecraftState

DEGENERATE_DISTANCE = 1e-12


@dataclass(frozen=True)
class ScaleSet:
    """Length/speed/time units (SI) that make ``mu_ref`` equal to one."""

    D: float
    V: float
    T: float
    mu_ref: float

    @classmethod
    def from_reference(cls, length: float, mu: float) -> "ScaleSet":
        return cls(D=length, V=math.sqrt(mu / length), T=math.sqrt(length**3 / mu), mu_ref=mu)

    @property
    def accel(self) -> float:
        return self.V / self.T

    def mu(self, mu_si: float) -> float:
        """A gravitational parameter expressed in this unit set."""
        return mu_si / self.mu_ref


@dataclass(frozen=True)
class ConversionFactors:
    """Ratios that turn quantities from one unit set into another (``x_to = x_from * ratio``)."""

    D_ratio: float
    V_ratio: float
    T_ratio: float


class HelioState(NamedTuple):
    rho: float
    phi: float
    v_rho: float
    v_phi: float


class PlanetKinematics(NamedTuple):
    """Heliocentric polar state of a planet: radius, longitude and their rates."""

    R: float
    L: float
    R_dot: float
    L_dot: float


def make_scales(constants: PhysicalConstants) -> tuple[ScaleSet, ScaleSet, ScaleSet, ScaleSet]:
    """Unit sets of phases 1-4 (Sun, Earth, Sun, Mars as central body)."""
    helio = ScaleSet.from_reference(constants.R_SE, constants.mu_S)
    earth = ScaleSet.from_reference(constants.R_E, constants.mu_E)
    mars = ScaleSet.from_reference(constants.R_M, constants.mu_M)
    return helio, earth, helio, mars


def conversion(source: ScaleSet, target: ScaleSet) -> ConversionFactors:
    return ConversionFactors(
        D_ratio=source.D / target.D,
        V_ratio=source.V / target.V,
        T_ratio=source.T / target.T,
    )


def _unwrap_near(angle, hint):
    return angle + 2.0 * np.pi * np.round((hint - angle) / (2.0 * np.pi))


def planet_to_helio(planet: PlanetKinematics, local: SpacecraftState, phi_hint=None) -> HelioState:
    """Heliocentric polar state of a spacecraft given its planet-centred state.

    Built by summing planet and relative vectors in the inertial basis and
    projecting onto the Sun-spacecraft basis. ``phi`` is returned on the
    branch nearest ``phi_hint`` (default: the planet longitude).
    """
    R, L, R_dot, L_dot = planet
    r, theta, v_r, v_theta = local
    cL, sL = np.cos(L), np.sin(L)
    ct, st = np.cos(theta), np.sin(theta)
    x = R * cL + r * ct
    y = R * sL + r * st
    vx = R_dot * cL - R * L_dot * sL + v_r * ct - v_theta * st
    vy = R_dot * sL + R * L_dot * cL + v_r * st + v_theta * ct
    rho = np.hypot(x, y)
    if np.any(rho < DEGENERATE_DISTANCE):
        raise DegenerateGeometryError("spacecraft coincides with the Sun")
    phi = _unwrap_near(np.arctan2(y, x), L if phi_hint is None else phi_hint)
    cp, sp = x / rho, y / rho
    return HelioState(rho, phi, vx * cp + vy * sp, -vx * sp + vy * cp)


def helio_to_planet(planet: PlanetKinematics, helio: HelioState, theta_hint=0.0) -> SpacecraftState:
    """Inverse of :func:`planet_to_helio`; ``theta`` on the branch nearest ``theta_hint``."""
    R, L, R_dot, L_dot = planet
    rho, phi, v_rho, v_phi = helio
    cL, sL = np.cos(L), np.sin(L)
    cp, sp = np.cos(phi), np.sin(phi)
    dx = rho * cp - R * cL
    dy = rho * sp - R * sL
    dvx = v_rho * cp - v_phi * sp - (R_dot * cL - R * L_dot * sL)
    dvy = v_rho * sp + v_phi * cp - (R_dot * sL + R * L_dot * cL)
    r = np.hypot(dx, dy)
    if np.any(r < DEGENERATE_DISTANCE):
        raise DegenerateGeometryError("spacecraft coincides with the planet; longitude undefined")
    theta = _unwrap_near(np.arctan2(dy, dx), theta_hint)
    ct, st = dx / r, dy / r
    return SpacecraftState(r, theta, dvx * ct + dvy * st, -dvx * st + dvy * ct)


def position_residuals(planet: PlanetKinematics, local: SpacecraftState, helio: HelioState):
    """Residuals of the two scalar position relations between the frames."""
    R, L = planet.R, planet.L
    r, theta = local.r, local.theta
    rho, phi = helio.rho, helio.phi
    return (
        r - (-R * np.cos(theta - L) + rho * np.cos(theta - phi)),
        R * np.sin(theta - L) - rho * np.sin(theta - phi),
    )


def velocity_residuals(planet: PlanetKinematics, local: SpacecraftState, helio: HelioState):
    """Residuals of the two scalar velocity relations between the frames."""
    R, L, R_dot, L_dot = planet
    d = local.theta - L
    b = local.theta - helio.phi
    return (
        local.v_r - (-R_dot * np.cos(d) - R * L_dot * np.sin(d) + helio.v_rho * np.cos(b) + helio.v_phi * np.sin(b)),
        local.v_theta - (R_dot * np.sin(d) - R * L_dot * np.cos(d) - helio.v_rho * np.sin(b) + helio.v_phi * np.cos(b)),
    )
