import json
import math

import numpy as np
import pytest

from marstransfer.astro import PhysicalConstants
from marstransfer.dynamics import phase_rhs
from marstransfer.frames import ScaleSet
from marstransfer.ocp import (BoundaryPin, OptimalControlProblem, PhaseDefinition, ProblemConfig, build_problem,
                              phase_context)
from marstransfer.solve import (GuessBundle, PhaseGuess, SolutionBundle, SolverOptions, _classify, capture_spiral,
                                escape_spiral, solve, tangential_control)
from marstransfer.transcription import Mesh, PhaseMesh, transcribe
from marstransfer.verify import propagate


def double_integrator(segments: int = 10, degree: int = 4):
    """min T s.t. x'' = u, |u| <= 1, from rest at 0 to rest at 1; T* = 2."""
    ctx = phase_context(2, "circular", 9.8e-4, PhysicalConstants())
    pdef = PhaseDefinition(ctx, ScaleSet(1.0, 1.0, 1.0, 1.0), np.full(2, -np.inf), np.full(2, np.inf),
                           -np.ones(1), np.ones(1), dynamics=lambda x, u: (x[1], u[0]),
                           states=("x", "v"), controls=("u",), unit_thrust=False)
    pins = tuple(BoundaryPin(0, where, var, value) for where, var, value in (
        ("initial", "t", 0.0), ("initial", "x", 0.0), ("initial", "v", 0.0),
        ("final", "x", 1.0), ("final", "v", 0.0)))
    problem = OptimalControlProblem((pdef,), pins, (), lambda ends: ends[0].tf - ends[0].t0, name="double-integrator")
    return transcribe(problem, Mesh((PhaseMesh.uniform(segments, degree),)))


def test_double_integrator_minimum_time():
    nlp = double_integrator()
    t = np.linspace(0.0, 3.0, 20)
    guess = GuessBundle([PhaseGuess(t, np.column_stack((t / 3, np.full_like(t, 1 / 3))), np.ones((20, 1)))])
    sol = solve(nlp, guess, SolverOptions(feas_tol=1e-10, opt_tol=1e-10))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(2.0, abs=1e-6)
    _, _, U = nlp.phase_arrays(sol.x, 0)
    np.testing.assert_allclose(np.abs(U), 1.0, atol=1e-5)


def test_guess_resampling_identity():
    nlp = double_integrator(segments=3, degree=5)
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, nlp.n_x)
    L = nlp.layouts[0]
    x[L.t0], x[L.tf] = 0.5, 2.5
    x[L.controls] = np.sign(x[L.controls])
    again = GuessBundle.from_solution(nlp, x).to_vector(nlp)
    np.testing.assert_allclose(again, x, atol=1e-13)


def test_linear_guess_renormalises_controls():
    g = PhaseGuess(np.array([0.0, 1.0]), np.zeros((2, 6)), np.array([[1.0, 0.0], [0.0, 1.0]]))
    _, U = g.sample(np.array([0.5]))
    assert np.linalg.norm(U[0]) == pytest.approx(1.0)


def test_guess_rejects_wrong_shape():
    nlp = double_integrator(segments=2, degree=3)
    bad = GuessBundle([PhaseGuess(np.array([0.0, 1.0]), np.zeros((2, 3)), np.zeros((2, 1)))])
    with pytest.raises(ValueError):
        bad.to_vector(nlp)


def test_escape_spiral_reaches_target_with_tangential_thrust():
    ctx = phase_context(2, "circular", 9.8e-4, PhysicalConstants())
    t, S, U = escape_spiral(ctx, 6.6, 20.0)
    assert S[0, 0] == pytest.approx(6.6) and S[-1, 0] == pytest.approx(20.0, rel=1e-6)
    v = np.hypot(S[:, 2], S[:, 3])
    np.testing.assert_allclose(U, np.column_stack((S[:, 2], S[:, 3])) / v[:, None], atol=1e-12)


def test_capture_spiral_is_a_trajectory():
    ctx = phase_context(4, "circular", 9.8e-4, PhysicalConstants())
    t, S, U = capture_spiral(ctx, 40.0, 6.0)
    assert S[0, 0] == pytest.approx(40.0, rel=1e-6) and S[-1, 0] == pytest.approx(6.0)
    # replay forward with anti-tangential thrust from the spiral's first state
    law = tangential_control(-1.0)
    x0 = np.concatenate((S[0], [0.0, 0.0]))
    sol = propagate(ctx, x0, (t[0], t[-1]), rhs=lambda y, u: phase_rhs(ctx, y, law(0.0, y)))
    np.testing.assert_allclose(sol.y[:4, -1], S[-1], rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("raw, viol, expected", [
    ("Solve_Succeeded", 1e-10, "optimal"),
    ("Solve_Succeeded", 5e-8, "feasible-suboptimal"),
    ("Solve_Succeeded", 1e-3, "infeasible"),
    ("Maximum_Iterations_Exceeded", 1.0, "iteration-limit"),
    ("Maximum_Iterations_Exceeded", 1e-10, "feasible-suboptimal"),
    ("Invalid_Number_Detected", 1.0, "evaluation-fault"),
    ("Infeasible_Problem_Detected", 1.0, "infeasible"),
])
def test_status_classification(raw, viol, expected):
    assert _classify(raw, viol, SolverOptions()) == expected


def test_solution_bundle_json_round_trip(tmp_path):
    config = ProblemConfig(mode="elliptic")
    problem = build_problem(config)
    mesh = Mesh.default(problem.phase_ids, {1: 1, 2: 2, 3: 2, 4: 2}, degree=3)
    n = transcribe(problem, mesh).n_x
    x = np.random.default_rng(4).standard_normal(n) * math.pi
    bundle = SolutionBundle(config, PhysicalConstants(), mesh, x, 0.1 + 0.2, "optimal", 1e-11, 42,
                            mesh_errors=[1e-8, 3e-9], mesh_converged=True, refinements=2)
    path = tmp_path / "s.json"
    bundle.save(path)
    back = SolutionBundle.load(path)
    assert back.config == config and back.mesh == mesh
    assert np.array_equal(back.x, x) and back.objective == bundle.objective
    assert json.dumps(back.to_dict()) == json.dumps(bundle.to_dict())
    data = bundle.to_dict()
    data["schema_version"] = 99
    with pytest.raises(ValueError):
        SolutionBundle.from_dict(data)
