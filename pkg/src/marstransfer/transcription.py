"""Legendre-Gauss-Radau direct collocation of a multi-phase problem into a sparse NLP.

Decision vector, per phase in order: ``t0, tf``, the states at every mesh node
(node-major), then the controls at every collocation point (point-major).

Constraint vector: per phase the defects (point-major) and the unit-thrust
path rows, then every event block, then the boundary block (pins followed by
one ``tf - t0 >= 0`` row per phase).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import casadi as ca
import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp

from .collocation import differentiation_matrix, lagrange_interpolate, lgr_nodes
from .dynamics import ControlSample, path_constraint
from .ocp import Endpoint, OptimalControlProblem

try:
    ca.GlobalOptions.setNumpyMode(-1)
except AttributeError:  # older casadi
    pass

DEFAULT_DEGREE = 4
DEFAULT_SEGMENTS = {1: 4, 2: 24, 3: 12, 4: 24}
REFINE_TOLERANCE = 1e-7
MAX_SEGMENTS = 600
MAX_DEGREE = 8


class MeshError(ValueError):
    pass


class EvaluationFault(FloatingPointError):
    """Non-finite or physically invalid evaluation; ``index`` locates the offender."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


# ---------------------------------------------------------------------------
# mesh


@dataclass(frozen=True)
class PhaseMesh:
    breakpoints: tuple[float, ...]
    degrees: tuple[int, ...]

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        if len(self.degrees) == 0:
            raise MeshError("a phase needs at least one segment")
        if len(b) != len(self.degrees) + 1:
            raise MeshError("breakpoints must have one more entry than degrees")
        if b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0.0):
            raise MeshError("breakpoints must increase strictly from 0 to 1")
        if min(self.degrees) < 2:
            raise MeshError("collocation degree must be at least 2")

    @classmethod
    def uniform(cls, segments: int, degree: int = DEFAULT_DEGREE) -> "PhaseMesh":
        if segments < 1:
            raise MeshError("a phase needs at least one segment")
        return cls(tuple(np.linspace(0.0, 1.0, segments + 1).tolist()), (degree,) * segments)

    @property
    def segments(self) -> int:
        return len(self.degrees)

    @property
    def n_collocation(self) -> int:
        return sum(self.degrees)

    @property
    def n_nodes(self) -> int:
        return self.n_collocation + 1

    def node_positions(self) -> np.ndarray:
        """Normalised positions on [0, 1] of all nodes (collocation points plus the end)."""
        out = []
        b = self.breakpoints
        for k, n in enumerate(self.degrees):
            out.append(b[k] + (b[k + 1] - b[k]) * (lgr_nodes(n) + 1.0) / 2.0)
        out.append([1.0])
        return np.concatenate(out)

    def segment_slices(self):
        """(node start index, degree) of each segment; nodes start..start+degree inclusive."""
        start = 0
        for n in self.degrees:
            yield start, n
            start += n


@dataclass(frozen=True)
class Mesh:
    phases: tuple[PhaseMesh, ...]

    @classmethod
    def default(cls, phase_ids, segments: dict | None = None, degree: int = DEFAULT_DEGREE) -> "Mesh":
        segments = {**DEFAULT_SEGMENTS, **(segments or {})}
        return cls(tuple(PhaseMesh.uniform(segments[p], degree) for p in phase_ids))

    def to_dict(self) -> dict:
        return {"phases": [{"breakpoints": list(m.breakpoints), "degrees": list(m.degrees)} for m in self.phases]}

    @classmethod
    def from_dict(cls, data: dict) -> "Mesh":
        return cls(tuple(PhaseMesh(tuple(p["breakpoints"]), tuple(p["degrees"])) for p in data["phases"]))


# ---------------------------------------------------------------------------
# layout


@dataclass(frozen=True)
class PhaseLayout:
    offset: int
    t0: int
    tf: int
    states: np.ndarray  # (n_nodes, n_states) indices
    controls: np.ndarray  # (n_collocation, n_controls) indices
    defects: slice
    path: slice
    tau: np.ndarray  # node positions on [0, 1]

    @property
    def size(self) -> int:
        return int(self.tf - self.t0 + 1 + self.states.size + self.controls.size)


@dataclass
class TranscribedNlp:
    problem: OptimalControlProblem
    mesh: Mesh
    layouts: tuple[PhaseLayout, ...]
    event_slices: tuple[slice, ...]
    boundary: slice
    n_pins: int
    x_lower: np.ndarray
    x_upper: np.ndarray
    g_lower: np.ndarray
    g_upper: np.ndarray
    x_sym: ca.SX = field(repr=False)
    objective_sym: ca.SX = field(repr=False)
    g_sym: ca.SX = field(repr=False)
    function: ca.Function = field(repr=False)

    @property
    def n_x(self) -> int:
        return len(self.x_lower)

    @property
    def n_g(self) -> int:
        return len(self.g_lower)

    def jacobian_sparsity(self) -> sparse.csc_matrix:
        sp = ca.jacobian_sparsity(self.g_sym, self.x_sym)
        colind, row = sp.get_ccs()
        return sparse.csc_matrix((np.ones(len(row)), row, colind), shape=(sp.size1(), sp.size2()))

    def endpoints(self, x: np.ndarray) -> list[Endpoint]:
        x = np.asarray(x, dtype=float)
        return [Endpoint(x[L.t0], x[L.tf], x[L.states[0]], x[L.states[-1]]) for L in self.layouts]

    def phase_arrays(self, x: np.ndarray, i: int):
        """(t nodes, state nodes, controls at collocation points) of phase ``i``."""
        L = self.layouts[i]
        x = np.asarray(x, dtype=float)
        t0, tf = x[L.t0], x[L.tf]
        return t0 + (tf - t0) * L.tau, x[L.states], x[L.controls]

    def diagnostic_dict(self) -> dict:
        out = {"problem": self.problem.name, "n_variables": self.n_x, "n_constraints": self.n_g, "phases": []}
        for pid, m, L in zip(self.problem.phase_ids, self.mesh.phases, self.layouts):
            out["phases"].append({
                "phase": pid,
                "segments": m.segments,
                "degrees": list(m.degrees),
                "breakpoints": list(m.breakpoints),
                "variable_offsets": {"t0": int(L.t0), "tf": int(L.tf),
                                     "states": int(L.states.flat[0]),
                                     "controls": int(L.controls.flat[0]) if L.controls.size else None,
                                     "end": int(L.offset + L.size)},
                "constraint_offsets": {"defects": [L.defects.start, L.defects.stop],
                                       "path": [L.path.start, L.path.stop]},
            })
        out["events"] = [{"name": e.name, "rows": [s.start, s.stop]} for e, s in zip(self.problem.events, self.event_slices)]
        out["boundary"] = [self.boundary.start, self.boundary.stop]
        return out

    def dump_layout(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.diagnostic_dict(), fh, indent=2)


def _global_differentiation(pm: PhaseMesh) -> sparse.csr_matrix:
    rows, cols, vals = [], [], []
    row = 0
    for start, n in pm.segment_slices():
        D = differentiation_matrix(n)
        for i in range(n):
            for j in range(n + 1):
                rows.append(row + i)
                cols.append(start + j)
                vals.append(D[i, j])
        row += n
    return sparse.csr_matrix((vals, (rows, cols)), shape=(pm.n_collocation, pm.n_nodes))


def _half_widths(pm: PhaseMesh) -> np.ndarray:
    b = np.asarray(pm.breakpoints)
    return np.repeat(np.diff(b) / 2.0, pm.degrees)


def _to_dm(mat: sparse.spmatrix) -> ca.DM:
    csc = sparse.csc_matrix(mat)
    csc.sort_indices()
    sp = ca.Sparsity(csc.shape[0], csc.shape[1], csc.indptr.tolist(), csc.indices.tolist())
    return ca.DM(sp, csc.data)


def phase_layouts(problem: OptimalControlProblem, mesh: Mesh) -> tuple[list[PhaseLayout], int, int]:
    """Variable and constraint placement of every phase, plus the totals
    (variables, phase constraint rows) they occupy."""
    if len(mesh.phases) != len(problem.phases):
        raise MeshError("mesh must have one entry per phase")
    layouts = []
    offset = 0
    g_offset = 0
    for pdef, pm in zip(problem.phases, mesh.phases):
        nx, nu = pdef.n_states, pdef.n_controls
        start = offset
        t0, tf = offset, offset + 1
        offset += 2
        states = np.arange(offset, offset + pm.n_nodes * nx).reshape(pm.n_nodes, nx)
        offset += states.size
        controls = np.arange(offset, offset + pm.n_collocation * nu).reshape(pm.n_collocation, nu)
        offset += controls.size
        defects = slice(g_offset, g_offset + pm.n_collocation * nx)
        g_offset = defects.stop
        path = slice(g_offset, g_offset + (pm.n_collocation if pdef.has_path else 0))
        g_offset = path.stop
        layouts.append(PhaseLayout(start, t0, tf, states, controls, defects, path, pm.node_positions()))
    return layouts, offset, g_offset


def transcribe(problem: OptimalControlProblem, mesh: Mesh) -> TranscribedNlp:
    layouts, n_x, g_offset = phase_layouts(problem, mesh)

    x = ca.SX.sym("x", n_x)
    g_parts = []
    for pdef, pm, L in zip(problem.phases, mesh.phases, layouts):
        X = ca.horzcat(*[x[L.states[:, j].tolist()] for j in range(pdef.n_states)])
        U = ca.horzcat(*[x[L.controls[:, j].tolist()] for j in range(pdef.n_controls)]) if pdef.n_controls else None
        n_col = pm.n_collocation
        Xc = X[:n_col, :]
        cols = [Xc[:, j] for j in range(pdef.n_states)]
        ucols = [U[:, j] for j in range(pdef.n_controls)] if U is not None else ()
        F = ca.horzcat(*pdef.rhs(cols, ucols))
        scale = ca.DM(_half_widths(pm)) * (x[L.tf] - x[L.t0])
        defect = ca.mtimes(_to_dm(_global_differentiation(pm)), X) - F * ca.repmat(scale, 1, pdef.n_states)
        g_parts.append(ca.vec(defect.T))
        if pdef.has_path:
            g_parts.append(path_constraint(ControlSample(ucols[0], ucols[1])))

    def endpoint(i):
        L = layouts[i]
        return Endpoint(x[int(L.t0)], x[int(L.tf)],
                        [x[int(k)] for k in L.states[0]], [x[int(k)] for k in L.states[-1]])

    ends = [endpoint(i) for i in range(len(layouts))]
    event_slices = []
    for ev in problem.events:
        res = ev.residual(ends[ev.source], ends[ev.target])
        if len(res) != ev.size:
            raise MeshError(f"event {ev.name} returned {len(res)} rows, declared {ev.size}")
        event_slices.append(slice(g_offset, g_offset + ev.size))
        g_offset += ev.size
        g_parts.append(ca.vertcat(*res))

    pin_rows = []
    for pin in problem.pins:
        e = ends[pin.phase_index]
        pdef = problem.phases[pin.phase_index]
        if pin.var == "t":
            val = e.t0 if pin.where == "initial" else e.tf
        else:
            k = pdef.state_index(pin.var)
            val = e.x0[k] if pin.where == "initial" else e.xf[k]
        pin_rows.append(val - pin.value)
    order_rows = [e.tf - e.t0 for e in ends]
    boundary = slice(g_offset, g_offset + len(pin_rows) + len(order_rows))
    g_parts.append(ca.vertcat(*(pin_rows + order_rows)))
    g_offset = boundary.stop

    g = ca.vertcat(*g_parts)
    J = problem.objective(ends)

    x_lo = np.full(n_x, -math.inf)
    x_hi = np.full(n_x, math.inf)
    for pdef, L in zip(problem.phases, layouts):
        x_lo[L.states] = pdef.state_lower
        x_hi[L.states] = pdef.state_upper
        if pdef.n_controls:
            x_lo[L.controls] = pdef.control_lower
            x_hi[L.controls] = pdef.control_upper
    g_lo = np.zeros(g_offset)
    g_hi = np.zeros(g_offset)
    g_hi[boundary.stop - len(order_rows):boundary.stop] = math.inf

    function = ca.Function("nlp", [x], [J, g], ["x"], ["J", "g"])
    return TranscribedNlp(
        problem=problem, mesh=mesh, layouts=tuple(layouts), event_slices=tuple(event_slices),
        boundary=boundary, n_pins=len(pin_rows), x_lower=x_lo, x_upper=x_hi,
        g_lower=g_lo, g_upper=g_hi, x_sym=x, objective_sym=J, g_sym=g, function=function,
    )


def evaluate(nlp: TranscribedNlp, x) -> tuple[float, np.ndarray]:
    """Objective and constraint vector at ``x``; raises :class:`EvaluationFault`
    on non-positive radii or non-finite output."""
    x = np.asarray(x, dtype=float)
    if x.shape != (nlp.n_x,):
        raise ValueError(f"decision vector must have shape ({nlp.n_x},), got {x.shape}")
    for pdef, L in zip(nlp.problem.phases, nlp.layouts):
        if pdef.phase > 1 and pdef.dynamics is None:
            r_idx = L.states[:, 0]
            bad = np.flatnonzero(x[r_idx] <= 0.0)
            if bad.size:
                raise EvaluationFault(f"non-positive radius in phase {pdef.phase}", int(r_idx[bad[0]]))
    J, g = nlp.function(x)
    J = float(J)
    g = np.asarray(g).ravel()
    if not math.isfinite(J):
        raise EvaluationFault("non-finite objective")
    bad = np.flatnonzero(~np.isfinite(g))
    if bad.size:
        raise EvaluationFault(f"non-finite constraint row {bad[0]}", int(bad[0]))
    return J, g


def constraint_violation(nlp: TranscribedNlp, x, g=None) -> float:
    """Largest violation over constraint rows and variable bounds."""
    x = np.asarray(x, dtype=float)
    if g is None:
        _, g = evaluate(nlp, x)
    viol = np.concatenate((
        np.maximum(nlp.g_lower - g, 0.0), np.maximum(g - nlp.g_upper, 0.0),
        np.maximum(nlp.x_lower - x, 0.0), np.maximum(x - nlp.x_upper, 0.0),
    ))
    return float(viol.max(initial=0.0))


# ---------------------------------------------------------------------------
# mesh refinement


def segment_errors(nlp: TranscribedNlp, x, phase_index: int) -> np.ndarray:
    """Relative dynamics error of every segment of one phase.

    Each segment is re-integrated from its first node with the segment's
    control polynomial. The discrepancy with the state polynomial at the
    segment's nodes is divided, per component, by ``1 + max |state|`` over
    the whole phase.
    """
    pdef = nlp.problem.phases[phase_index]
    pm = nlp.mesh.phases[phase_index]
    t, X, U = nlp.phase_arrays(x, phase_index)
    scale = 1.0 + np.max(np.abs(X), axis=0)
    errors = np.zeros(pm.segments)
    for k, (start, n) in enumerate(pm.segment_slices()):
        ts = t[start:start + n + 1]
        Xs = X[start:start + n + 1]
        if ts[-1] <= ts[0]:
            continue
        Us = U[start:start + n] if pdef.n_controls else None
        tau_col = lgr_nodes(n)

        def rhs(tt, y, ts=ts, Us=Us, tau_col=tau_col):
            tau = 2.0 * (tt - ts[0]) / (ts[-1] - ts[0]) - 1.0
            u = lagrange_interpolate(tau_col, Us, tau)[0] if Us is not None else ()
            return np.array(pdef.rhs(y, u), dtype=float)

        sol = solve_ivp(rhs, (ts[0], ts[-1]), Xs[0], method="DOP853", rtol=1e-12, atol=1e-12,
                        t_eval=ts)
        if not sol.success:
            errors[k] = math.inf
            continue
        errors[k] = float(np.max(np.abs(sol.y.T - Xs) / scale))
    return errors


def refine_phase(pm: PhaseMesh, errors: np.ndarray, tol: float = REFINE_TOLERANCE,
                 max_degree: int = MAX_DEGREE) -> PhaseMesh:
    """ph update of one phase; unchanged when every error is within ``tol``.

    A failing segment first gains ``ceil(log(err/tol) / log(n))`` points; past
    ``max_degree`` it is split in two halves of roughly half the degree.
    """
    if np.all(errors <= tol):
        return pm
    b = list(pm.breakpoints)
    new_b = [b[0]]
    new_d = []
    budget = MAX_SEGMENTS - pm.segments
    for k, n in enumerate(pm.degrees):
        err = errors[k]
        pieces, degree = 1, n
        if err > tol:
            wanted = n + max(1, math.ceil(math.log(err / tol) / math.log(n)))
            if wanted <= max_degree:
                degree = wanted
            elif budget > 0:
                pieces = 2
                degree = max(DEFAULT_DEGREE, n // 2 + 1)
            else:
                degree = max_degree
        budget -= pieces - 1
        edges = np.linspace(b[k], b[k + 1], pieces + 1)[1:]
        new_b.extend(edges.tolist())
        new_d.extend([degree] * pieces)
    new_b[-1] = 1.0
    return PhaseMesh(tuple(new_b), tuple(new_d))


def refine(mesh: Mesh, nlp: TranscribedNlp, x, tol: float = REFINE_TOLERANCE) -> tuple[Mesh, list[np.ndarray]]:
    """New mesh with every over-tolerance segment split, plus the per-phase errors."""
    errors = [segment_errors(nlp, x, i) for i in range(len(mesh.phases))]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        phases = tuple(refine_phase(pm, e, tol) for pm, e in zip(mesh.phases, errors))
    return Mesh(phases), errors
