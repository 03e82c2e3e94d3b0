"""NLP solver contract, the IPOPT adapter, initial guesses and continuation."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime
from typing import Protocol, Sequence

import casadi as ca
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .astro import PhysicalConstants, SECONDS_PER_DAY
from .collocation import lagrange_interpolate, lgr_nodes, support_points
from .dynamics import phase_rhs
from .frames import conversion, make_scales
from .ocp import ProblemConfig, build_problem, build_single_phase_problem, phase_context
from .transcription import (
    REFINE_TOLERANCE,
    EvaluationFault,
    Mesh,
    TranscribedNlp,
    constraint_violation,
    evaluate,
    phase_layouts,
    refine,
    transcribe,
)

log = logging.getLogger(__name__)

STATUSES = ("optimal", "feasible-suboptimal", "infeasible", "iteration-limit", "evaluation-fault")


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-6
    max_iter: int = 3000
    verbose: bool = False
    # barrier start for guesses that are already near-optimal (refined meshes, continuation)
    warm_mu: float = 1e-6


@dataclass
class NlpSolution:
    x: np.ndarray
    objective: float
    max_violation: float
    status: str
    iterations: int
    message: str = ""
    fault_index: int | None = None

    @property
    def feasible(self) -> bool:
        return self.status in ("optimal", "feasible-suboptimal")


class SolverContract(Protocol):
    """What the transcription needs from an NLP solver.

    Implementations must return the final iterate even when they fail.
    """

    capabilities: frozenset

    def solve(self, nlp: TranscribedNlp, x0: np.ndarray, options: SolverOptions, warm: bool = False) -> NlpSolution: ...


def _column_scales(nlp: TranscribedNlp, x0: np.ndarray):
    offset = np.zeros(nlp.n_x)
    scale = np.ones(nlp.n_x)
    for pdef, L in zip(nlp.problem.phases, nlp.layouts):
        duration = abs(x0[L.tf] - x0[L.t0])
        tscale = max(duration, 1e-3)
        for k in (L.t0, L.tf):
            offset[k] = x0[k]
            scale[k] = tscale
        for j in range(pdef.n_states):
            idx = L.states[:, j]
            lo, hi = pdef.state_lower[j], pdef.state_upper[j]
            if math.isfinite(lo) and math.isfinite(hi) and hi > lo:
                scale[idx] = hi - lo
            else:
                scale[idx] = max(np.max(np.abs(x0[idx])), 1e-2)
    return offset, scale


class IpoptSolver:
    """Interior-point adapter backed by IPOPT through casadi (exact Hessians)."""

    capabilities = frozenset({"bounds", "sparse-jacobian", "sparse-hessian"})

    def solve(self, nlp: TranscribedNlp, x0: np.ndarray, options: SolverOptions, warm: bool = False) -> NlpSolution:
        x0 = np.asarray(x0, dtype=float)
        try:
            J0, _ = evaluate(nlp, x0)
        except EvaluationFault as exc:
            return NlpSolution(x0, math.nan, math.inf, "evaluation-fault", 0, str(exc), exc.index)

        offset, scale = _column_scales(nlp, x0)
        z = ca.SX.sym("z", nlp.n_x)
        J_sym, g_sym = nlp.function(ca.DM(offset) + ca.DM(scale) * z)
        jac = ca.Function("scaled_jacobian", [z], [ca.jacobian(g_sym, z)])
        z0 = (x0 - offset) / scale
        Jz = jac(z0).sparse()
        row_norm = np.asarray(abs(Jz).max(axis=1).todense()).ravel()
        g_scale = np.clip(row_norm, 1e-6, 1e8)
        f_scale = max(abs(J0), 1e-8)

        prob = {"x": z, "f": J_sym / f_scale, "g": g_sym / ca.DM(g_scale)}
        ipopt_opts = {
            "tol": options.opt_tol,
            "constr_viol_tol": options.feas_tol / float(g_scale.max()),
            "acceptable_tol": max(options.opt_tol * 100, 1e-4),
            "acceptable_constr_viol_tol": options.feas_tol / float(g_scale.max()),
            "max_iter": int(options.max_iter),
            "nlp_scaling_method": "none",
            "print_level": 5 if options.verbose else 0,
            "mu_strategy": "adaptive",
            "linear_solver": "mumps",
        }
        if warm:
            ipopt_opts.update(mu_init=options.warm_mu, mu_strategy="monotone", bound_push=1e-9, bound_frac=1e-9)
        solver = ca.nlpsol("solver", "ipopt", prob, {"ipopt": ipopt_opts, "print_time": False, "expand": True})
        lbx = (nlp.x_lower - offset) / scale
        ubx = (nlp.x_upper - offset) / scale
        res = solver(x0=z0, lbx=lbx, ubx=ubx, lbg=nlp.g_lower / g_scale, ubg=nlp.g_upper / g_scale)
        stats = solver.stats()
        x = offset + scale * np.asarray(res["x"]).ravel()
        raw = stats.get("return_status", "")
        iterations = int(stats.get("iter_count", 0))
        try:
            J, g = evaluate(nlp, x)
        except EvaluationFault as exc:
            return NlpSolution(x, math.nan, math.inf, "evaluation-fault", iterations, str(exc), exc.index)
        viol = constraint_violation(nlp, x, g)
        status = _classify(raw, viol, options)
        return NlpSolution(x, J, viol, status, iterations, raw)


def _classify(raw: str, viol: float, options: SolverOptions) -> str:
    feasible = viol <= options.feas_tol
    if raw in ("Solve_Succeeded",):
        return "optimal" if feasible else "feasible-suboptimal" if viol <= 10 * options.feas_tol else "infeasible"
    if raw in ("Maximum_Iterations_Exceeded", "Maximum_CpuTime_Exceeded", "Maximum_WallTime_Exceeded"):
        return "iteration-limit" if not feasible else "feasible-suboptimal"
    if raw in ("Invalid_Number_Detected",):
        return "evaluation-fault"
    return "feasible-suboptimal" if feasible else "infeasible"


DEFAULT_SOLVER = IpoptSolver()


def solve(nlp: TranscribedNlp, guess: "GuessBundle | np.ndarray", options: SolverOptions | None = None,
          solver: SolverContract | None = None, warm: bool = False) -> NlpSolution:
    options = options or SolverOptions()
    solver = solver or DEFAULT_SOLVER
    x0 = guess if isinstance(guess, np.ndarray) else guess.to_vector(nlp)
    return solver.solve(nlp, x0, options, warm)


# ---------------------------------------------------------------------------
# guesses


@dataclass
class PhaseGuess:
    """Samples of one phase on its own canonical clock.

    With ``breakpoints``/``degrees`` the samples are collocation nodes and are
    interpolated with the segment polynomials; otherwise linearly.
    """

    t: np.ndarray
    X: np.ndarray
    U: np.ndarray | None = None
    breakpoints: tuple | None = None
    degrees: tuple | None = None

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def tf(self) -> float:
        return float(self.t[-1])

    def sample(self, s: np.ndarray):
        """States and controls at normalised times ``s`` in [0, 1]."""
        s = np.asarray(s, dtype=float)
        if self.breakpoints is not None:
            return self._sample_poly(s)
        sg = (self.t - self.t[0]) / (self.t[-1] - self.t[0])
        X = np.column_stack([np.interp(s, sg, self.X[:, j]) for j in range(self.X.shape[1])])
        U = None
        if self.U is not None and self.U.shape[1]:
            U = np.column_stack([np.interp(s, sg, self.U[:, j]) for j in range(self.U.shape[1])])
            U /= np.maximum(np.linalg.norm(U, axis=1, keepdims=True), 1e-12)
        return X, U

    def _sample_poly(self, s):
        b = np.asarray(self.breakpoints)
        seg = np.clip(np.searchsorted(b, s, side="right") - 1, 0, len(self.degrees) - 1)
        X = np.empty((len(s), self.X.shape[1]))
        nu = 0 if self.U is None else self.U.shape[1]
        U = np.empty((len(s), nu)) if nu else None
        start = 0
        for k, n in enumerate(self.degrees):
            mask = seg == k
            if mask.any():
                tau = 2.0 * (s[mask] - b[k]) / (b[k + 1] - b[k]) - 1.0
                X[mask] = lagrange_interpolate(support_points(n), self.X[start:start + n + 1], tau)
                if nu:
                    U[mask] = lagrange_interpolate(lgr_nodes(n), self.U[start:start + n], tau)
            start += n
        if nu:
            U /= np.maximum(np.linalg.norm(U, axis=1, keepdims=True), 1e-12)
        return X, U


@dataclass
class GuessBundle:
    phases: list[PhaseGuess]

    def to_vector(self, nlp: TranscribedNlp) -> np.ndarray:
        if len(self.phases) != len(nlp.layouts):
            raise ValueError("guess has a different number of phases than the NLP")
        x = np.zeros(nlp.n_x)
        for pg, L, pdef in zip(self.phases, nlp.layouts, nlp.problem.phases):
            if pg.X.shape[1] != pdef.n_states:
                raise ValueError(f"phase {pdef.phase}: guess has {pg.X.shape[1]} states, expected {pdef.n_states}")
            x[L.t0], x[L.tf] = pg.t0, pg.tf
            X, U = pg.sample(L.tau)
            x[L.states] = X
            if pdef.n_controls:
                x[L.controls] = U[:-1]
        return x

    @classmethod
    def from_solution(cls, nlp: TranscribedNlp, x: np.ndarray) -> "GuessBundle":
        phases = []
        for i, pm in enumerate(nlp.mesh.phases):
            t, X, U = nlp.phase_arrays(x, i)
            phases.append(PhaseGuess(t, X, U if U.size else None, pm.breakpoints, pm.degrees))
        return cls(phases)


def propagate_phase(ctx, x0, t_span, control=None, events=None, max_step=np.inf, rtol=1e-10, atol=1e-10):
    """Integrate one phase with a state-feedback control law ``control(t, x)``."""

    def rhs(t, y):
        u = control(t, y) if control is not None else ()
        return np.array(phase_rhs(ctx, y, u), dtype=float)

    return solve_ivp(rhs, t_span, np.asarray(x0, dtype=float), method="DOP853", rtol=rtol, atol=atol,
                     events=events, dense_output=True, max_step=max_step)


def tangential_control(sign: float = 1.0):
    """Thrust along (``sign=+1``) or against (``-1``) the velocity."""

    def law(t, y):
        v = math.hypot(y[2], y[3])
        return (sign * y[2] / v, sign * y[3] / v)

    return law


# ---------------------------------------------------------------------------
# initial guess construction

_SPIRAL_SAMPLES = 4000


def _spiral(ctx, r_start: float, r_stop: float, t_max: float = 1e6):
    """Tangential-thrust spiral from a circular orbit until ``r == r_stop``."""

    def reach(t, y):
        return y[0] - r_stop

    reach.terminal = True
    sol = propagate_phase(ctx, [r_start, 0.0, 0.0, math.sqrt(ctx.mu / r_start), 0.0, 0.0], (0.0, t_max),
                          tangential_control(1.0), events=reach)
    if sol.status != 1:
        raise RuntimeError(f"thrust spiral did not reach r = {r_stop}")
    tf = float(sol.t[-1])
    t = np.linspace(0.0, tf, _SPIRAL_SAMPLES)
    Y = sol.sol(t).T
    return t, Y


def escape_spiral(ctx, r_start: float, r_stop: float):
    """(t, [r, theta, v_r, v_theta], [w_r, w_theta]) of an outward spiral."""
    t, Y = _spiral(ctx, r_start, r_stop)
    S = Y[:, :4]
    v = np.hypot(S[:, 2], S[:, 3])
    return t, S, np.column_stack((S[:, 2] / v, S[:, 3] / v))


def capture_spiral(ctx, r_start: float, r_stop: float):
    """Inward spiral ending on the circular orbit ``r_stop``.

    It is the outward spiral from ``r_stop`` run backwards in time and
    mirrored in angle, which keeps it prograde and makes the thrust
    anti-tangential.
    """
    t, S, U = escape_spiral(ctx, r_stop, r_start)
    tf = t[-1]
    Sr = S[::-1]
    out = np.column_stack((Sr[:, 0], S[-1, 1] - Sr[:, 1], -Sr[:, 2], Sr[:, 3]))
    Ur = U[::-1]
    return tf - t[::-1], out, np.column_stack((Ur[:, 0], -Ur[:, 1]))


def planet_longitudes(ctx1, L_E0: float, L_M0: float, t_end: float):
    """Dense (L_E, L_M) on the heliocentric clock from ``t = 0``."""
    sol = solve_ivp(lambda t, y: np.array(phase_rhs(ctx1, y), dtype=float), (0.0, t_end), [L_E0, L_M0],
                    method="DOP853", rtol=1e-12, atol=1e-12, dense_output=True)
    return sol.sol


SEED_MESH = {2: 32, 3: 16, 4: 32}
DEFAULT_ALIGNMENT_DAYS = 150.0


def _seed_from(kind: str, t, S, U) -> PhaseGuess:
    X = np.column_stack((S, np.zeros((len(t), 2))))
    return PhaseGuess(np.asarray(t), X, np.asarray(U))


def _cruise_start(ratio: float, t_guess: float = 3.0) -> PhaseGuess:
    # accelerate, then brake; smooth radius ramp between the two circles
    t = np.linspace(0.0, t_guess, 50)
    s = t / t_guess
    r = 1.0 + (ratio - 1.0) * (3 * s**2 - 2 * s**3)
    theta = np.concatenate(([0.0], np.cumsum(np.diff(t) * r[1:] ** -1.5)))
    X = np.column_stack((r, theta, np.zeros_like(t), r**-0.5, np.zeros_like(t), np.zeros_like(t)))
    U = np.column_stack((np.zeros_like(t), np.where(s < 0.5, 1.0, -1.0)))
    return PhaseGuess(t, X, U)


def seed_solution(kind: str, config: ProblemConfig, constants: PhysicalConstants,
                  options: SolverOptions | None = None) -> PhaseGuess:
    """Solve one single-phase seed problem ('escape', 'cruise' or 'capture').

    Escape and capture start from tangential-thrust spirals. If the NLP fails
    the spiral itself is returned for those two; a failed cruise raises.
    """
    problem = build_single_phase_problem(kind, config, constants)
    pdef = problem.phases[0]
    pins = {(p.where, p.var): p.value for p in problem.pins}
    if kind == "escape":
        start = _seed_from(kind, *escape_spiral(pdef.ctx, pins["initial", "r"], pins["final", "r"]))
    elif kind == "capture":
        start = _seed_from(kind, *capture_spiral(pdef.ctx, pins["initial", "r"], pins["final", "r"]))
    else:
        start = _cruise_start(pins["final", "r"])
    nlp = transcribe(problem, Mesh.default(problem.phase_ids, SEED_MESH))
    sol = solve(nlp, GuessBundle([start]), options)
    if sol.feasible:
        return GuessBundle.from_solution(nlp, sol.x).phases[0]
    if kind == "cruise":
        raise RuntimeError(f"cruise seed did not converge: {sol.status} ({sol.message})")
    log.warning("%s seed NLP failed (%s); using the tangential spiral", kind, sol.status)
    return start


def _alignment_root(longitudes, d2: float, d3: float, sweep: float, horizon: float) -> float:
    """Shortest alignment duration that puts Mars at the end of the cruise arc."""

    def mismatch(tau1):
        L_E = longitudes(tau1 + d2)[0]
        L_M = longitudes(tau1 + d2 + d3)[1]
        return math.remainder(L_M - L_E - sweep, 2 * math.pi)

    grid = np.linspace(0.0, horizon, 4001)
    vals = np.array([mismatch(g) for g in grid])
    for k in range(len(grid) - 1):
        if vals[k] * vals[k + 1] <= 0.0 and abs(vals[k] - vals[k + 1]) < math.pi:
            return brentq(mismatch, grid[k], grid[k + 1], xtol=1e-12)
    raise RuntimeError("no alignment window found for the guess")


def build_guess(problem, options: SolverOptions | None = None,
                alignment_days: float | None = DEFAULT_ALIGNMENT_DAYS) -> GuessBundle:
    """Stitch the seed solutions into a phased guess for ``problem``.

    Phase 1 lasts ``alignment_days``. With ``None`` it is instead the root of
    the Mars lead-angle mismatch, which puts Mars at the end of the cruise arc
    on arrival. Each later phase is shifted onto the end of the previous one and
    rotated to sit at its planet; planet longitudes come from propagation.
    """
    config = problem.config
    constants = problem.constants
    scales = make_scales(constants)
    T_E = conversion(scales[1], scales[0]).T_ratio
    T_M = conversion(scales[3], scales[0]).T_ratio
    day = SECONDS_PER_DAY / scales[0].T
    ctx_h = phase_context(1, config.mode, config.a_thrust_si, constants)

    escape = seed_solution("escape", config, constants, options)
    cruise = seed_solution("cruise", config, constants, options)
    capture = seed_solution("capture", config, constants, options)
    d2, d3, d4 = escape.tf * T_E, cruise.tf, capture.tf * T_M
    sweep = float(cruise.X[-1, 1] - cruise.X[0, 1])

    if config.variant == "four-phase":
        L_E0, L_M0 = config.L_E0, config.L_M0
    else:
        L_E0 = config.L_E0 if config.L_E0 is not None else 0.0
        L_M0 = L_E0 + config.fixed_phase_angle
    horizon = 1000.0 * day
    longitudes = planet_longitudes(ctx_h, L_E0, L_M0, horizon + d2 + d3 + d4)

    if config.variant != "four-phase":
        tau1 = 0.0
    elif alignment_days is None:
        tau1 = _alignment_root(longitudes, d2, d3, sweep, horizon)
    else:
        tau1 = alignment_days * day

    phases = []
    if config.variant == "four-phase":
        t1 = np.linspace(0.0, tau1, 200)
        phases.append(PhaseGuess(t1, longitudes(t1).T))

    s2 = np.linspace(0.0, 1.0, 2000)
    X2, U2 = escape.sample(s2)
    tau = tau1 + s2 * d2
    X2[:, 4:6] = longitudes(tau).T
    X2[:, 1] += X2[-1, 4] + 0.5 * math.pi - X2[-1, 1]
    phases.append(PhaseGuess(tau / T_E, X2, U2))

    tau_dep = tau1 + d2
    s3 = np.linspace(0.0, 1.0, 400)
    X3, U3 = cruise.sample(s3)
    tau = tau_dep + s3 * d3
    X3[:, 4:6] = longitudes(tau).T
    X3[:, 1] += X3[0, 4] - X3[0, 1]
    phases.append(PhaseGuess(tau, X3, U3))

    tau_arr = tau_dep + d3
    s4 = np.linspace(0.0, 1.0, 2000)
    X4, U4 = capture.sample(s4)
    tau = tau_arr + s4 * d4
    X4[:, 4:6] = longitudes(tau).T
    X4[:, 1] += X4[0, 5] + math.pi - X4[0, 1]
    phases.append(PhaseGuess(tau / T_M, X4, U4))
    return GuessBundle(phases)


def _shift_to_departure(problem, nlp: TranscribedNlp, x: np.ndarray, L_E0: float) -> tuple[GuessBundle, float]:
    """Phases 2-4 of a four-phase solution moved to depart at t = 0 with Earth at
    ``L_E0``; also returns the departure phase angle L_M - L_E."""
    scales = make_scales(problem.constants)
    ratios = {p: conversion(scales[p - 1], scales[0]).T_ratio for p in (2, 3, 4)}
    bundle = GuessBundle.from_solution(nlp, x)
    i2 = problem.index_of(2)
    start = nlp.endpoints(x)[i2]
    shift_t = start.t0 * ratios[2]
    shift_a = start.x0[4] - L_E0
    phase_angle = math.remainder(start.x0[5] - start.x0[4], 2 * math.pi)
    phases = []
    for pdef, pg in zip(problem.phases, bundle.phases):
        if pdef.phase == 1:
            continue
        X = pg.X.copy()
        X[:, 1] -= shift_a
        X[:, 4] -= shift_a
        X[:, 5] -= shift_a + (start.x0[5] - start.x0[4] - phase_angle)
        phases.append(PhaseGuess(pg.t - shift_t / ratios[pdef.phase], X, pg.U, pg.breakpoints, pg.degrees))
    return GuessBundle(phases), phase_angle


def comparison_guess(config: ProblemConfig, constants: PhysicalConstants | None = None,
                     options: SolverOptions | None = None, steps: int = 4) -> tuple[GuessBundle, Mesh]:
    """Guess for the fixed-phase-angle variant by homotopy in the phase angle.

    The free-alignment transfer at the same thrust departs at its own optimal
    angle; that trajectory solves the fixed-angle problem exactly at that
    angle, which is then walked to ``config.fixed_phase_angle``.
    """
    constants = constants or PhysicalConstants()
    options = options or SolverOptions()
    L_E0 = config.L_E0 if config.L_E0 is not None else 0.0
    free = replace(config, variant="four-phase", fixed_phase_angle=None,
                   L_E0=ProblemConfig.L_E0, L_M0=ProblemConfig.L_M0)
    problem = build_problem(free, constants)
    nlp = transcribe(problem, Mesh.default(problem.phase_ids))
    sol = solve(nlp, build_guess(problem, options), options)
    if not sol.feasible:
        raise RuntimeError(f"free-alignment seed failed: {sol.status}")
    guess, angle0 = _shift_to_departure(problem, nlp, sol.x, L_E0)
    mesh = Mesh(nlp.mesh.phases[1:])
    for angle in np.linspace(angle0, config.fixed_phase_angle, steps + 1)[1:]:
        step = replace(config, fixed_phase_angle=float(angle))
        step_nlp = transcribe(build_problem(step, constants), mesh)
        res = solve(step_nlp, guess, options, warm=True)
        if not res.feasible:
            res = solve(step_nlp, guess, options)
        if not res.feasible:
            raise RuntimeError(f"phase-angle homotopy failed at {angle:.4f} rad: {res.status}")
        guess = GuessBundle.from_solution(step_nlp, res.x)
    return guess, mesh


# ---------------------------------------------------------------------------
# solved cases

MAX_REFINEMENTS = 10
SCHEMA_VERSION = 1


@dataclass
class SolutionBundle:
    """A converged (or failed) case with everything needed to rebuild its NLP."""

    config: ProblemConfig
    constants: PhysicalConstants
    mesh: Mesh
    x: np.ndarray
    objective: float
    status: str
    max_violation: float
    iterations: int
    mesh_errors: list[float] = field(default_factory=list)
    mesh_converged: bool = False
    refinements: int = 0
    message: str = ""

    def problem(self):
        return build_problem(self.config, self.constants)

    def nlp(self) -> TranscribedNlp:
        return transcribe(self.problem(), self.mesh)

    @property
    def objective_days(self) -> float:
        return self.objective * self.problem().objective_unit_days

    @property
    def feasible(self) -> bool:
        return self.status in ("optimal", "feasible-suboptimal")

    def phase_durations_days(self) -> dict[int, float]:
        problem = self.problem()
        scales = make_scales(self.constants)
        out = {}
        for pdef, L in zip(problem.phases, phase_layouts(problem, self.mesh)[0]):
            out[pdef.phase] = float(self.x[L.tf] - self.x[L.t0]) * scales[pdef.phase - 1].T / SECONDS_PER_DAY
        return out

    def departure_days(self) -> float:
        """Days from the epoch to the start of the escape spiral."""
        problem = self.problem()
        L = phase_layouts(problem, self.mesh)[0][problem.index_of(2)]
        return float(self.x[L.t0]) * make_scales(self.constants)[1].T / SECONDS_PER_DAY

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["epoch"] = self.config.epoch.isoformat()
        return {
            "schema_version": SCHEMA_VERSION,
            "config": cfg,
            "constants": asdict(self.constants),
            "mesh": self.mesh.to_dict(),
            "x": self.x.tolist(),
            "objective": self.objective,
            "status": self.status,
            "max_violation": self.max_violation,
            "iterations": self.iterations,
            "mesh_errors": list(self.mesh_errors),
            "mesh_converged": self.mesh_converged,
            "refinements": self.refinements,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolutionBundle":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported solution schema {data.get('schema_version')!r}")
        cfg = dict(data["config"])
        cfg["epoch"] = datetime.fromisoformat(cfg["epoch"])
        return cls(
            config=ProblemConfig(**cfg),
            constants=PhysicalConstants(**data["constants"]),
            mesh=Mesh.from_dict(data["mesh"]),
            x=np.asarray(data["x"], dtype=float),
            objective=float(data["objective"]),
            status=data["status"],
            max_violation=float(data["max_violation"]),
            iterations=int(data["iterations"]),
            mesh_errors=[float(e) for e in data.get("mesh_errors", [])],
            mesh_converged=bool(data.get("mesh_converged", False)),
            refinements=int(data.get("refinements", 0)),
            message=data.get("message", ""),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "SolutionBundle":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def solve_case(config: ProblemConfig, constants: PhysicalConstants | None = None,
               options: SolverOptions | None = None, guess: GuessBundle | None = None,
               mesh: Mesh | None = None, refine_tol: float = REFINE_TOLERANCE,
               max_refinements: int = MAX_REFINEMENTS, solver: SolverContract | None = None) -> SolutionBundle:
    """Solve one case, splitting segments until every segment's replay error
    is below ``refine_tol`` or ``max_refinements`` passes have been made."""
    constants = constants or PhysicalConstants()
    options = options or SolverOptions()
    problem = build_problem(config, constants)
    warm = guess is not None
    if guess is None and config.variant == "three-phase-comparison":
        guess, mesh = comparison_guess(config, constants, options)
    mesh = mesh or Mesh.default(problem.phase_ids)
    guess = guess or build_guess(problem, options)
    passes = 0
    while True:
        nlp = transcribe(problem, mesh)
        sol = solve(nlp, guess, options, solver, warm)
        if warm and not sol.feasible:
            sol = solve(nlp, guess, options, solver)
        log.info("%s a=%g mesh=%s: %s in %d its, J=%.6f d viol=%.2e", config.mode, config.a_thrust_si,
                 [pm.n_collocation for pm in mesh.phases], sol.status, sol.iterations,
                 sol.objective * problem.objective_unit_days, sol.max_violation)
        bundle = SolutionBundle(config, constants, mesh, sol.x, sol.objective, sol.status,
                                sol.max_violation, sol.iterations, refinements=passes, message=sol.message)
        if not sol.feasible:
            return bundle
        new_mesh, errors = refine(mesh, nlp, sol.x, refine_tol)
        bundle.mesh_errors = [float(e.max(initial=0.0)) for e in errors]
        bundle.mesh_converged = new_mesh == mesh
        if bundle.mesh_converged or passes >= max_refinements:
            return bundle
        guess = GuessBundle.from_solution(nlp, sol.x)
        warm = True
        mesh = new_mesh
        passes += 1


def continuation_sweep(configs: Sequence[ProblemConfig], constants: PhysicalConstants | None = None,
                       options: SolverOptions | None = None, seed: SolutionBundle | None = None,
                       mesh: Mesh | None = None, **kwargs) -> list[SolutionBundle]:
    """Solve ``configs`` in order, warm-starting each from the previous feasible
    solution (``seed`` for the first). ``mesh`` is used for cold starts."""
    results = []
    previous = seed
    for cfg in configs:
        guess = warm_mesh = None
        if previous is not None and previous.feasible and previous.config.phase_ids == cfg.phase_ids:
            guess = GuessBundle.from_solution(previous.nlp(), previous.x)
            warm_mesh = previous.mesh
        bundle = solve_case(cfg, constants, options, guess=guess, mesh=warm_mesh or mesh, **kwargs)
        if not bundle.feasible and guess is not None:
            log.warning("warm start failed for %s a=%g, retrying from a cold guess", cfg.mode, cfg.a_thrust_si)
            bundle = solve_case(cfg, constants, options, mesh=mesh, **kwargs)
        results.append(bundle)
        if bundle.feasible:
            previous = bundle
    return results


def mode_chain(config: ProblemConfig, constants: PhysicalConstants | None = None,
               options: SolverOptions | None = None, **kwargs) -> list[SolutionBundle]:
    """Circular, then elliptic, then perturbed, stopping at ``config.mode``."""
    from .astro import MODES

    stop = MODES.index(config.mode)
    return continuation_sweep([replace(config, mode=m) for m in MODES[:stop + 1]], constants, options, **kwargs)
