"""Physical constants, planetary conic models and closed-form conic quantities.

All functions here accept plain floats, numpy arrays or casadi symbols, so the
same expressions drive numeric checks and the symbolic NLP.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

DEG = math.pi / 180.0
SECONDS_PER_DAY = 86400.0

MODES = ("circular", "elliptic", "elliptic-perturbed")


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants of the Sun/Earth/Mars system (lengths in m, mu in m^3/s^2)."""

    R_E: float = 6.3781e6
    R_M: float = 3.3895e6
    R_E_SOI: float = 9.2455e8
    R_M_SOI: float = 5.7717e8
    R_SE: float = 1.4960e11
    R_SM: float = 2.2794e11
    mu_E: float = 3.9860e14
    mu_S: float = 1.3271e20
    mu_M: float = 4.2828e13
    varpi_E: float = 102.9 * DEG
    varpi_M: float = 336.0 * DEG
    e_E: float = 0.0167
    e_M: float = 0.0935

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ValueError(f"constant {f.name} must be finite, got {value}")
            if f.name.startswith(("R_", "mu_")) and value <= 0.0:
                raise ValueError(f"constant {f.name} must be positive, got {value}")
        if not 0.0 <= self.e_E < 1.0 or not 0.0 <= self.e_M < 1.0:
            raise ValueError("planet eccentricities must lie in [0, 1)")
        if not self.R_E < self.R_E_SOI < self.R_SE:
            raise ValueError("require R_E < R_E_SOI < R_SE")
        if not self.R_M < self.R_M_SOI < self.R_SM:
            raise ValueError("require R_M < R_M_SOI < R_SM")

    def with_overrides(self, **overrides: float) -> "PhysicalConstants":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown constant(s): {', '.join(sorted(unknown))}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


@dataclass(frozen=True)
class PlanetModel:
    """Planar conic orbit of a planet about the Sun, in some canonical unit set.

    ``p`` is in the canonical length unit and ``mu_central`` is the Sun's
    gravitational parameter expressed in the same unit set.
    """

    p: float
    e: float
    varpi: float
    mu_central: float

    def __post_init__(self):
        if self.p <= 0.0:
            raise ValueError(f"semi-latus rectum must be positive, got {self.p}")
        if not 0.0 <= self.e < 1.0:
            raise ValueError(f"eccentricity must lie in [0, 1), got {self.e}")
        if self.mu_central <= 0.0:
            raise ValueError("mu_central must be positive")

    @property
    def f(self) -> float:
        return self.e * math.cos(self.varpi)

    @property
    def g(self) -> float:
        return self.e * math.sin(self.varpi)

    @property
    def semi_major_axis(self) -> float:
        return self.p / (1.0 - self.e**2)

    @property
    def period(self) -> float:
        return 2.0 * math.pi * math.sqrt(self.semi_major_axis**3 / self.mu_central)

    @classmethod
    def from_semi_major_axis(cls, a: float, e: float, varpi: float, mu_central: float) -> "PlanetModel":
        return cls(p=a * (1.0 - e * e), e=e, varpi=varpi, mu_central=mu_central)


@dataclass(frozen=True)
class PlanetState:
    L: float
    t: float


def planet_models(constants: PhysicalConstants, mode: str, length_unit: float, mu_unit: float) -> tuple[PlanetModel, PlanetModel]:
    """Earth and Mars models scaled to a unit set with length ``length_unit`` (m)
    and gravitational-parameter unit ``mu_unit`` (m^3/s^2).

    ``R_SE``/``R_SM`` are taken as semi-major axes; circular mode zeroes the
    eccentricities so that p equals the orbit radius.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    circular = mode == "circular"
    e_E = 0.0 if circular else constants.e_E
    e_M = 0.0 if circular else constants.e_M
    mu = constants.mu_S / mu_unit
    earth = PlanetModel.from_semi_major_axis(constants.R_SE / length_unit, e_E, constants.varpi_E, mu)
    mars = PlanetModel.from_semi_major_axis(constants.R_SM / length_unit, e_M, constants.varpi_M, mu)
    return earth, mars


def true_anomaly(model: PlanetModel, L):
    """True anomaly ``L - varpi``, left unwrapped."""
    return L - model.varpi


def planet_radius(model: PlanetModel, L):
    return model.p / (1.0 + model.e * np.cos(true_anomaly(model, L)))


def planet_radius_rate(model: PlanetModel, L, L_dot):
    nu = true_anomaly(model, L)
    return model.p * model.e * L_dot * np.sin(nu) / (1.0 + model.e * np.cos(nu)) ** 2


def longitude_rate(model: PlanetModel, L):
    """True-longitude rate of a planet on its conic, via the equinoctial form."""
    w = 1.0 + model.f * np.cos(L) + model.g * np.sin(L)
    return math.sqrt(model.mu_central / model.p**3) * w * w
