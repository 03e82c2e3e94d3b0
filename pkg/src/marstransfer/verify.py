"""Independent checks of a solved case: open-loop replay with a tight
integrator, constraint audits, osculating eccentricity and its unit
crossings, and the CSV/JSON exports built on them."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .astro import SECONDS_PER_DAY
from .collocation import lagrange_interpolate, lgr_nodes
from .dynamics import PhaseContext
from .frames import make_scales
from .solve import GuessBundle, SolutionBundle
from .transcription import TranscribedNlp, evaluate

REPLAY_TOL = 1e-12
CROSSING_TOL = 1e-10
TRAJECTORY_COLUMNS = ("t_canonical", "t_days", "phase", "r", "theta", "v_r", "v_theta",
                      "w_r", "w_theta", "L_E", "L_M", "ecc")


class StepFailure(RuntimeError):
    """The reference integrator could not meet its tolerances."""


def osculating_eccentricity(mu, r, v_r, v_theta):
    """Two-body eccentricity of a planar state; works elementwise on arrays."""
    h = r * v_theta
    return np.sqrt((h * h / (mu * r) - 1.0) ** 2 + (h * v_r / mu) ** 2)


def propagate(ctx: PhaseContext, x0, t_span, control=None, t_eval=None, rhs=None):
    """Integrate a phase with DOP853 at 1e-12 relative and absolute tolerance.

    ``control(t)`` returns the control tuple; ``rhs(x, u)`` overrides the
    transfer equations of ``ctx``.
    """
    from .dynamics import phase_rhs

    f = rhs or (lambda x, u: phase_rhs(ctx, x, u))

    def deriv(t, y):
        u = control(t) if control is not None else ()
        return np.array(f(y, u), dtype=float)

    sol = solve_ivp(deriv, t_span, np.asarray(x0, dtype=float), method="DOP853",
                    rtol=REPLAY_TOL, atol=REPLAY_TOL, t_eval=t_eval, dense_output=t_eval is None)
    if not sol.success:
        raise StepFailure(sol.message)
    return sol


def _segment_control(ts, Us, n):
    tau_col = lgr_nodes(n)

    def control(t):
        tau = 2.0 * (t - ts[0]) / (ts[-1] - ts[0]) - 1.0
        return lagrange_interpolate(tau_col, Us, tau)[0]

    return control


def replay_phase(nlp: TranscribedNlp, x, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Open-loop replay of phase ``i`` from its collocated initial state.

    The state is carried across segment boundaries by the integrator; only
    the control is taken from the solution (segment-wise Lagrange).
    Returns the replayed states at every mesh node and the node times.
    """
    pdef = nlp.problem.phases[i]
    pm = nlp.mesh.phases[i]
    t, X, U = nlp.phase_arrays(x, i)
    out = np.empty_like(X)
    out[0] = X[0]
    y = X[0]
    for start, n in pm.segment_slices():
        ts = t[start:start + n + 1]
        if ts[-1] <= ts[0]:
            out[start + 1:start + n + 1] = y
            continue
        control = _segment_control(ts, U[start:start + n], n) if pdef.n_controls else None
        sol = propagate(pdef.ctx, y, (ts[0], ts[-1]), control, t_eval=ts, rhs=pdef.rhs)
        out[start:start + n + 1] = sol.y.T
        y = sol.y[:, -1]
    return t, out


def _first_crossing(interp, s_nodes, e_nodes, upward: bool) -> float | None:
    d = e_nodes - 1.0
    for k in range(len(d) - 1):
        hit = (d[k] < 0.0 <= d[k + 1]) if upward else (d[k] > 0.0 >= d[k + 1])
        if hit:
            lo, hi = s_nodes[k], s_nodes[k + 1]
            f_lo = d[k]
            while hi - lo > CROSSING_TOL:
                mid = 0.5 * (lo + hi)
                f_mid = interp(mid) - 1.0
                if (f_mid < 0.0) == (f_lo < 0.0):
                    lo, f_lo = mid, f_mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)
    return None


@dataclass
class PhaseAudit:
    phase: int
    duration_days: float
    max_defect: float
    max_path_residual: float
    replay_terminal_error: list[float]
    replay_max_node_error: float
    r_initial: float | None = None
    r_final: float | None = None
    ecc_initial: float | None = None
    ecc_final: float | None = None
    ecc_min: float | None = None
    ecc_max: float | None = None
    crossing_fraction: float | None = None


@dataclass
class TrajectoryAudit:
    mode: str
    variant: str
    a_thrust: float
    status: str
    max_violation: float
    objective_days: float
    transfer_days: float
    start_days: float
    event_residuals: dict[str, float]
    max_pin_residual: float
    phases: list[PhaseAudit]
    diagnostics: dict[str, float | None] = field(default_factory=dict)

    def phase(self, phase_id: int) -> PhaseAudit:
        for p in self.phases:
            if p.phase == phase_id:
                return p
        raise KeyError(phase_id)

    @property
    def durations_days(self) -> dict[int, float]:
        return {p.phase: p.duration_days for p in self.phases}

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def audit(solution: SolutionBundle, nlp: TranscribedNlp | None = None) -> TrajectoryAudit:
    """Recompute every reported quantity of ``solution`` from its raw decision vector."""
    nlp = nlp or solution.nlp()
    problem = nlp.problem
    constants = solution.constants
    x = solution.x
    _, g = evaluate(nlp, x)
    viol = float(np.max(np.concatenate((
        np.maximum(nlp.g_lower - g, 0.0), np.maximum(g - nlp.g_upper, 0.0),
        np.maximum(nlp.x_lower - x, 0.0), np.maximum(x - nlp.x_upper, 0.0)))))
    scales = make_scales(constants)
    ends = nlp.endpoints(x)
    polys = GuessBundle.from_solution(nlp, x).phases

    phases = []
    for i, (pdef, L) in enumerate(zip(problem.phases, nlp.layouts)):
        T = scales[pdef.phase - 1].T
        t, X, U = nlp.phase_arrays(x, i)
        _, R = replay_phase(nlp, x, i)
        pa = PhaseAudit(
            phase=pdef.phase,
            duration_days=float(x[L.tf] - x[L.t0]) * T / SECONDS_PER_DAY,
            max_defect=float(np.max(np.abs(g[L.defects]), initial=0.0)),
            max_path_residual=float(np.max(np.abs(g[L.path]), initial=0.0)),
            replay_terminal_error=np.abs(R[-1] - X[-1]).tolist(),
            replay_max_node_error=float(np.max(np.abs(R - X))),
        )
        if pdef.phase > 1:
            mu = pdef.ctx.mu
            ecc = osculating_eccentricity(mu, X[:, 0], X[:, 2], X[:, 3])
            pa.r_initial, pa.r_final = float(X[0, 0]), float(X[-1, 0])
            pa.ecc_initial, pa.ecc_final = float(ecc[0]), float(ecc[-1])
            pa.ecc_min, pa.ecc_max = float(ecc.min()), float(ecc.max())
            if pdef.phase in (2, 4):
                poly = polys[i]

                def ecc_at(s, poly=poly, mu=mu):
                    Xs, _ = poly.sample(np.array([s]))
                    return float(osculating_eccentricity(mu, Xs[0, 0], Xs[0, 2], Xs[0, 3]))

                pa.crossing_fraction = _first_crossing(ecc_at, L.tau, ecc, upward=pdef.phase == 2)
        phases.append(pa)

    events = {ev.name: float(np.max(np.abs(g[sl]))) for ev, sl in zip(problem.events, nlp.event_slices)}
    pins = g[nlp.boundary.start:nlp.boundary.start + nlp.n_pins]
    objective_days = float(problem.objective(ends)) * problem.objective_unit_days
    by_id = {p.phase: p for p in phases}
    transfer = sum(by_id[k].duration_days for k in (2, 3, 4))
    i2 = problem.index_of(2)
    start_days = float(ends[i2].t0) * scales[1].T / SECONDS_PER_DAY

    diagnostics = {
        "escape_crossing_fraction": by_id[2].crossing_fraction,
        "capture_crossing_fraction": by_id[4].crossing_fraction,
        "phase2_terminal_ecc": by_id[2].ecc_final,
        "phase2_terminal_radius_soi": by_id[2].r_final * constants.R_E / constants.R_E_SOI,
        "phase4_initial_radius_soi": by_id[4].r_initial * constants.R_M / constants.R_M_SOI,
        "phase3_ecc_min": by_id[3].ecc_min,
        "phase3_ecc_max": by_id[3].ecc_max,
    }
    cfg = solution.config
    return TrajectoryAudit(
        mode=cfg.mode, variant=cfg.variant, a_thrust=cfg.a_thrust_si, status=solution.status,
        max_violation=viol, objective_days=objective_days, transfer_days=transfer,
        start_days=start_days, event_residuals=events,
        max_pin_residual=float(np.max(np.abs(pins), initial=0.0)),
        phases=phases, diagnostics=diagnostics,
    )


def trajectory_rows(solution: SolutionBundle, nlp: TranscribedNlp | None = None, dense: int = 0):
    """Rows of the trajectory export.

    With ``dense == 0`` the rows are the mesh nodes (controls blank at each
    phase's final node); otherwise each segment is sampled ``dense`` times
    through its interpolating polynomials.
    """
    nlp = nlp or solution.nlp()
    scales = make_scales(solution.constants)
    polys = GuessBundle.from_solution(nlp, solution.x).phases
    nan = math.nan
    for i, (pdef, pm) in enumerate(zip(nlp.problem.phases, nlp.mesh.phases)):
        t, X, U = nlp.phase_arrays(solution.x, i)
        if dense:
            b = np.asarray(pm.breakpoints)
            s = np.unique(np.concatenate([np.linspace(b[k], b[k + 1], dense + 1) for k in range(pm.segments)]))
            X, U = polys[i].sample(s)
            t = t[0] + (t[-1] - t[0]) * s
        day = scales[pdef.phase - 1].T / SECONDS_PER_DAY
        for k in range(len(t)):
            if pdef.phase == 1:
                row = [nan] * 6 + [X[k, 0], X[k, 1], nan]
            else:
                u = U[k] if U is not None and k < len(U) else (nan, nan)
                e = osculating_eccentricity(pdef.ctx.mu, X[k, 0], X[k, 2], X[k, 3])
                row = [X[k, 0], X[k, 1], X[k, 2], X[k, 3], u[0], u[1], X[k, 4], X[k, 5], e]
            yield [float(t[k]), float(t[k] * day), pdef.phase] + [float(v) for v in row]


def write_trajectory_csv(path, solution: SolutionBundle, nlp: TranscribedNlp | None = None, dense: int = 0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for row in trajectory_rows(solution, nlp, dense):
            w.writerow(["" if isinstance(v, float) and math.isnan(v) else (repr(v) if isinstance(v, float) else v)
                        for v in row])
