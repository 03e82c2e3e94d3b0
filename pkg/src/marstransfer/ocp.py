"""Multi-phase optimal control problem for the Earth-to-Mars transfer.

A problem is a list of phases (each with its own canonical units), constant
boundary pins, event constraints linking consecutive phases and a Mayer
objective on the phase endpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .astro import (
    DEG,
    MODES,
    SECONDS_PER_DAY,
    PhysicalConstants,
    PlanetModel,
    longitude_rate,
    planet_models,
    planet_radius,
    planet_radius_rate,
)
from .dynamics import PhaseContext, phase_rhs
from .frames import ConversionFactors, ScaleSet, conversion, make_scales

VARIANTS = ("four-phase", "three-phase-comparison")
INF = math.inf
EPOCH = datetime(2019, 1, 1, tzinfo=timezone.utc)
COMPARISON_PHASE_ANGLE = 0.9666


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemConfig:
    """One transfer case.

    ``escape_vr_bound`` / ``capture_vr_bound`` switch the ``v_r >= 0`` path
    bounds of the escape and capture phases. The capture bound makes any
    inward capture spiral infeasible, so it is off by default.
    """

    mode: str = "circular"
    a_thrust_si: float = 9.8e-4
    epoch: datetime = EPOCH
    L_E0: float | None = 101.14 * DEG
    L_M0: float | None = 41.23 * DEG
    r_park_E: float = 6.6
    r_park_M: float = 6.0
    variant: str = "four-phase"
    fixed_phase_angle: float | None = None
    escape_vr_bound: bool = True
    capture_vr_bound: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not (self.a_thrust_si > 0.0 and math.isfinite(self.a_thrust_si)):
            raise ConfigurationError(f"a_thrust_si must be positive, got {self.a_thrust_si}")
        if self.r_park_E <= 1.0 or self.r_park_M <= 1.0:
            raise ConfigurationError("parking radii must exceed one planetary radius")
        if self.variant == "four-phase":
            if self.L_E0 is None or self.L_M0 is None:
                raise ConfigurationError("four-phase variant requires epoch longitudes L_E0 and L_M0")
        else:
            if self.fixed_phase_angle is None:
                raise ConfigurationError("three-phase variant requires fixed_phase_angle")
            if self.mode != "circular":
                raise ConfigurationError("three-phase comparison variant is defined for circular mode only")

    @property
    def phase_ids(self) -> tuple[int, ...]:
        return (1, 2, 3, 4) if self.variant == "four-phase" else (2, 3, 4)


class Endpoint(NamedTuple):
    t0: object
    tf: object
    x0: Sequence
    xf: Sequence


@dataclass(frozen=True)
class PhaseDefinition:
    """Dynamics binding and bounds of one phase (all in the phase's canonical units).

    ``dynamics`` replaces the transfer equations for validation problems; it
    takes (state columns, control columns) and returns a tuple of rates, and
    then ``states``/``controls`` name the variables. ``unit_thrust`` adds the
    ``w_r^2 + w_theta^2 = 1`` path row.
    """

    ctx: PhaseContext
    scale: ScaleSet
    state_lower: np.ndarray
    state_upper: np.ndarray
    control_lower: np.ndarray
    control_upper: np.ndarray
    dynamics: Callable | None = None
    states: tuple[str, ...] | None = None
    controls: tuple[str, ...] | None = None
    unit_thrust: bool = True

    @property
    def phase(self) -> int:
        return self.ctx.phase

    @property
    def state_names(self) -> tuple[str, ...]:
        return self.states if self.states is not None else self.ctx.state_names

    @property
    def control_names(self) -> tuple[str, ...]:
        return self.controls if self.controls is not None else self.ctx.control_names

    def rhs(self, x, u=()):
        if self.dynamics is not None:
            return tuple(self.dynamics(x, u))
        return phase_rhs(self.ctx, x, u)

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_controls(self) -> int:
        return len(self.control_names)

    @property
    def has_path(self) -> bool:
        return self.unit_thrust and self.n_controls == 2

    def state_index(self, name: str) -> int:
        return self.state_names.index(name)


@dataclass(frozen=True)
class BoundaryPin:
    """``var`` of phase ``phase_index`` at ``where`` ('initial'|'final') equals ``value``.

    ``var`` is a state name or ``'t'`` for the endpoint time.
    """

    phase_index: int
    where: str
    var: str
    value: float


@dataclass(frozen=True)
class EventConstraint:
    name: str
    source: int
    target: int
    residual: Callable[[Endpoint, Endpoint], tuple]
    size: int


@dataclass(frozen=True)
class OptimalControlProblem:
    phases: tuple[PhaseDefinition, ...]
    pins: tuple[BoundaryPin, ...]
    events: tuple[EventConstraint, ...]
    objective: Callable[[Sequence[Endpoint]], object]
    config: ProblemConfig | None = None
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    name: str = "transfer"
    objective_unit_days: float = 1.0

    @property
    def phase_ids(self) -> tuple[int, ...]:
        return tuple(p.phase for p in self.phases)

    def index_of(self, phase_id: int) -> int:
        return self.phase_ids.index(phase_id)


# ---------------------------------------------------------------------------
# contexts and bounds


def phase_context(phase: int, mode: str, a_thrust_si: float, constants: PhysicalConstants) -> PhaseContext:
    scale = make_scales(constants)[phase - 1]
    earth, mars = planet_models(constants, mode, scale.D, scale.mu_ref)
    return PhaseContext(
        phase=phase,
        mode=mode,
        earth=earth,
        mars=mars,
        a_thrust=0.0 if phase == 1 else a_thrust_si / scale.accel,
        mu=1.0,
        mu_sun=scale.mu(constants.mu_S),
        mu_earth=scale.mu(constants.mu_E),
        mu_mars=scale.mu(constants.mu_M),
    )


def _phase_definition(phase: int, config: ProblemConfig, constants: PhysicalConstants, mode: str | None = None) -> PhaseDefinition:
    mode = mode or config.mode
    ctx = phase_context(phase, mode, config.a_thrust_si, constants)
    scale = make_scales(constants)[phase - 1]
    n = len(ctx.state_names)
    lo = np.full(n, -INF)
    hi = np.full(n, INF)
    perturbed = mode == "elliptic-perturbed"
    if phase == 2:
        lo[0] = config.r_park_E
        hi[0] = INF if perturbed else constants.R_E_SOI / constants.R_E
        if config.escape_vr_bound:
            lo[2] = 0.0
    elif phase == 4:
        lo[0] = config.r_park_M
        hi[0] = INF if perturbed else constants.R_M_SOI / constants.R_M
        if config.capture_vr_bound:
            lo[2] = 0.0
    nu = len(ctx.control_names)
    return PhaseDefinition(ctx, scale, lo, hi, -np.ones(nu), np.ones(nu))


# ---------------------------------------------------------------------------
# event constraints


def event_alignment_to_earth(end1: Endpoint, start2: Endpoint, factors: ConversionFactors):
    """Phase 1 terminus -> phase 2 start: time and both planet longitudes.

    The phase-2 clock is converted to heliocentric time with ``factors.T_ratio``.
    """
    return (
        end1.tf - start2.t0 * factors.T_ratio,
        end1.xf[0] - start2.x0[4],
        end1.xf[1] - start2.x0[5],
    )


def _planet_kinematics(model: PlanetModel, L):
    L_dot = longitude_rate(model, L)
    return planet_radius(model, L), planet_radius_rate(model, L, L_dot), L_dot


def event_earth_to_helio(end2: Endpoint, start3: Endpoint, factors: ConversionFactors, earth: PlanetModel, printed_sign: bool = False):
    """Phase 2 terminus (Earth units) -> phase 3 start (heliocentric units).

    ``printed_sign=True`` uses ``-r_E_dot sin(alpha)`` in the transverse
    velocity row instead of the sign implied by the frame transform; that
    variant does not close for an elliptic Earth orbit and exists for audits.
    """
    r2, th2, vr2, vt2, LE2, LM2 = end2.xf
    r3, th3, vr3, vt3, LE3, LM3 = start3.x0
    rE, rE_dot, LE_dot = _planet_kinematics(earth, LE3)
    alpha = th2 - LE3
    beta = th2 - th3
    ca, sa, cb, sb = np.cos(alpha), np.sin(alpha), np.cos(beta), np.sin(beta)
    sign = -1.0 if printed_sign else 1.0
    return (
        end2.tf * factors.T_ratio - start3.t0,
        LE2 - LE3,
        LM2 - LM3,
        r2 * factors.D_ratio - (-rE * ca + r3 * cb),
        -(-rE * sa + r3 * sb),
        vr2 * factors.V_ratio - (-rE_dot * ca - rE * LE_dot * sa + vr3 * cb + vt3 * sb),
        vt2 * factors.V_ratio - (sign * rE_dot * sa - rE * LE_dot * ca - vr3 * sb + vt3 * cb),
    )


def event_helio_to_mars(end3: Endpoint, start4: Endpoint, factors: ConversionFactors, mars: PlanetModel):
    """Phase 3 terminus (heliocentric units) -> phase 4 start (Mars units)."""
    r3, th3, vr3, vt3, LE3, LM3 = end3.xf
    r4, th4, vr4, vt4, LE4, LM4 = start4.x0
    rM, rM_dot, LM_dot = _planet_kinematics(mars, LM3)
    gamma = th4 - LM3
    delta = th4 - th3
    cg, sg, cd, sd = np.cos(gamma), np.sin(gamma), np.cos(delta), np.sin(delta)
    return (
        start4.t0 * factors.T_ratio - end3.tf,
        LE4 - LE3,
        LM4 - LM3,
        r4 * factors.D_ratio - (-rM * cg + r3 * cd),
        -(-rM * sg + r3 * sd),
        vr4 * factors.V_ratio - (-rM_dot * cg - rM * LM_dot * sg + vr3 * cd + vt3 * sd),
        vt4 * factors.V_ratio - (rM_dot * sg - rM * LM_dot * cg - vr3 * sd + vt3 * cd),
    )


def objective(end2: Endpoint, end4: Endpoint, T_SE: float, T_SM: float):
    """Transfer duration in heliocentric canonical time (alignment phase excluded)."""
    return end4.tf * T_SM - end2.t0 * T_SE


# ---------------------------------------------------------------------------
# assembly


def build_problem(config: ProblemConfig, constants: PhysicalConstants | None = None) -> OptimalControlProblem:
    """Four-phase transfer problem, or the three-phase comparison problem."""
    constants = constants or PhysicalConstants()
    scales = make_scales(constants)
    helio = scales[0]
    to_helio_E = conversion(scales[1], helio)
    to_helio_M = conversion(scales[3], helio)
    phases = tuple(_phase_definition(p, config, constants) for p in config.phase_ids)
    idx = {p.phase: i for i, p in enumerate(phases)}
    i2, i3, i4 = idx[2], idx[3], idx[4]
    earth_h, mars_h = phases[i3].ctx.earth, phases[i3].ctx.mars

    r0 = config.r_park_E
    rf = config.r_park_M
    pins = [
        BoundaryPin(i2, "initial", "r", r0),
        BoundaryPin(i2, "initial", "v_r", 0.0),
        BoundaryPin(i2, "initial", "v_theta", math.sqrt(1.0 / r0)),
        BoundaryPin(i4, "final", "r", rf),
        BoundaryPin(i4, "final", "v_r", 0.0),
        BoundaryPin(i4, "final", "v_theta", math.sqrt(1.0 / rf)),
    ]
    if config.mode != "elliptic-perturbed":
        pins.append(BoundaryPin(i2, "final", "r", constants.R_E_SOI / constants.R_E))
        pins.append(BoundaryPin(i4, "initial", "r", constants.R_M_SOI / constants.R_M))

    events = []
    if config.variant == "four-phase":
        i1 = idx[1]
        pins += [
            BoundaryPin(i1, "initial", "t", 0.0),
            BoundaryPin(i1, "initial", "L_E", config.L_E0),
            BoundaryPin(i1, "initial", "L_M", config.L_M0),
        ]
        events.append(EventConstraint(
            "alignment_to_earth", i1, i2,
            lambda a, b: event_alignment_to_earth(a, b, to_helio_E), 3))
    else:
        L_E0 = 0.0 if config.L_E0 is None else config.L_E0
        pins += [
            BoundaryPin(i2, "initial", "t", 0.0),
            BoundaryPin(i2, "initial", "L_E", L_E0),
            BoundaryPin(i2, "initial", "L_M", L_E0 + config.fixed_phase_angle),
        ]
    events.append(EventConstraint(
        "earth_to_helio", i2, i3,
        lambda a, b: event_earth_to_helio(a, b, to_helio_E, earth_h), 7))
    events.append(EventConstraint(
        "helio_to_mars", i3, i4,
        lambda a, b: event_helio_to_mars(a, b, to_helio_M, mars_h), 7))

    T_SE, T_SM = to_helio_E.T_ratio, to_helio_M.T_ratio

    def transfer_time(endpoints):
        return objective(endpoints[i2], endpoints[i4], T_SE, T_SM)

    return OptimalControlProblem(
        phases=phases,
        pins=tuple(pins),
        events=tuple(events),
        objective=transfer_time,
        config=config,
        constants=constants,
        name=f"{config.variant}/{config.mode}",
        objective_unit_days=helio.T / SECONDS_PER_DAY,
    )


def build_single_phase_problem(kind: str, config: ProblemConfig, constants: PhysicalConstants | None = None) -> OptimalControlProblem:
    """Minimum-time single-phase problems whose solutions seed the transfer.

    ``kind`` is 'escape' (circular 6.6 R_E orbit to the Earth SOI radius,
    free final velocity), 'cruise' (circular 1 AU to circular 1.5 AU about
    the Sun) or 'capture' (Mars SOI radius with free velocity to the circular
    6.0 R_M orbit). Planet models are circular, perturbations off, and the
    start longitudes are 0.
    """
    constants = constants or PhysicalConstants()
    if kind == "escape":
        phase, r_start, r_end = 2, config.r_park_E, constants.R_E_SOI / constants.R_E
        circular = ("initial",)
    elif kind == "cruise":
        phase, r_start, r_end = 3, 1.0, 1.5
        circular = ("initial", "final")
    elif kind == "capture":
        phase, r_start, r_end = 4, constants.R_M_SOI / constants.R_M, config.r_park_M
        circular = ("final",)
    else:
        raise ValueError(f"unknown single-phase problem {kind!r}")
    pdef = _phase_definition(phase, config, constants, mode="circular")
    if phase == 3:
        pdef = PhaseDefinition(pdef.ctx, pdef.scale, np.full(6, -INF), np.full(6, INF),
                               pdef.control_lower, pdef.control_upper)
    pins = [BoundaryPin(0, "initial", "t", 0.0), BoundaryPin(0, "initial", "theta", 0.0),
            BoundaryPin(0, "initial", "L_E", 0.0), BoundaryPin(0, "initial", "L_M", 0.0)]
    for where, r in (("initial", r_start), ("final", r_end)):
        pins.append(BoundaryPin(0, where, "r", r))
        if where in circular:
            pins += [BoundaryPin(0, where, "v_r", 0.0), BoundaryPin(0, where, "v_theta", math.sqrt(1.0 / r))]
    return OptimalControlProblem(
        phases=(pdef,),
        pins=tuple(pins),
        events=(),
        objective=lambda ends: ends[0].tf - ends[0].t0,
        config=config,
        constants=constants,
        name=f"single/{kind}",
        objective_unit_days=pdef.scale.T / SECONDS_PER_DAY,
    )
