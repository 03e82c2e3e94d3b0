"""Command-line driver: run a sweep of cases from a JSON config and write the
solution, audit, trajectory and summary artifacts."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields, replace
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

from .astro import DEG, MODES, PhysicalConstants
from .ocp import COMPARISON_PHASE_ANGLE, EPOCH, VARIANTS, ConfigurationError, ProblemConfig
from .solve import MAX_REFINEMENTS, SolutionBundle, SolverOptions, continuation_sweep, mode_chain
from .transcription import DEFAULT_DEGREE, REFINE_TOLERANCE, Mesh
from .verify import TrajectoryAudit, audit, write_trajectory_csv

log = logging.getLogger("marstransfer")

SCHEMA_VERSION = 1
FEASIBILITY_FALLBACK = 1e-6
OBJECTIVE_FALLBACK = 0.05

# published transfer times (days) by thrust level, used for the summary deltas
REFERENCE_DAYS = {
    ("four-phase", "circular"): {9.8e-4: 215.05, 9.9e-4: 213.90, 10.0e-4: 212.76, 10.1e-4: 211.64, 10.2e-4: 210.53},
    ("four-phase", "elliptic"): {9.8e-4: 195.94, 9.9e-4: 194.86, 10.0e-4: 193.78, 10.1e-4: 192.72, 10.2e-4: 191.68},
    ("four-phase", "elliptic-perturbed"): {9.8e-4: 197.83, 9.9e-4: 196.71, 10.0e-4: 195.61, 10.1e-4: 194.53,
                                           10.2e-4: 193.46},
    ("three-phase-comparison", "circular"): {9.604e-4: 223.60, 9.702e-4: 222.74, 9.800e-4: 221.89,
                                             10.290e-4: 217.84, 10.780e-4: 214.07},
}
REFERENCE_TOLERANCE_DAYS = {"circular": 2.0, "elliptic": 2.0, "elliptic-perturbed": 3.0}
# published trajectory diagnostics (value, tolerance) of the perturbed 9.8e-4 case
REFERENCE_DIAGNOSTICS = {
    ("four-phase", "elliptic-perturbed", 9.8e-4): {
        "escape_crossing_fraction": (0.75, 0.10),
        "capture_crossing_fraction": (0.32, 0.10),
        "phase2_terminal_ecc": (2.0, 0.3),
        "phase2_terminal_radius_soi": (1.01, 0.05),
        "phase4_initial_radius_soi": (0.86, 0.05),
    },
}

_TOP_KEYS = {"schema_version", "mode", "variant", "a_thrust", "epoch", "L_E0_deg", "L_M0_deg",
             "fixed_phase_angle", "r_park_E", "r_park_M", "escape_vr_bound", "capture_vr_bound",
             "constants", "mesh", "solver", "chain_modes", "output"}
_MESH_KEYS = {"segments", "degree", "refine_tol", "max_refinements"}
_SOLVER_KEYS = {"feas_tol", "opt_tol", "max_iter"}


class ConfigError(ValueError):
    """Malformed run configuration; the message names the offending key."""


@dataclass
class RunConfig:
    mode: str = "circular"
    variant: str = "four-phase"
    a_thrust: list[float] = field(default_factory=lambda: [9.8e-4])
    epoch: datetime = EPOCH
    L_E0_deg: float = 101.14
    L_M0_deg: float = 41.23
    fixed_phase_angle: float | None = None
    r_park_E: float = 6.6
    r_park_M: float = 6.0
    escape_vr_bound: bool = True
    capture_vr_bound: bool = False
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    segments: dict[int, int] = field(default_factory=dict)
    degree: int = DEFAULT_DEGREE
    refine_tol: float = REFINE_TOLERANCE
    max_refinements: int = MAX_REFINEMENTS
    solver: SolverOptions = field(default_factory=SolverOptions)
    chain_modes: bool = True
    output: str = "out"

    def problem_config(self, a: float) -> ProblemConfig:
        return ProblemConfig(
            mode=self.mode, a_thrust_si=a, epoch=self.epoch,
            L_E0=self.L_E0_deg * DEG if self.variant == "four-phase" else 0.0,
            L_M0=self.L_M0_deg * DEG if self.variant == "four-phase" else None,
            r_park_E=self.r_park_E, r_park_M=self.r_park_M, variant=self.variant,
            fixed_phase_angle=self.fixed_phase_angle, escape_vr_bound=self.escape_vr_bound,
            capture_vr_bound=self.capture_vr_bound,
        )

    def mesh_for(self, phase_ids) -> Mesh:
        return Mesh.default(phase_ids, self.segments, self.degree)


def _positive(key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if not (math.isfinite(value) and value > 0):
        raise ConfigError(f"{key}: must be positive and finite, got {value!r}")
    return float(value)


def _unknown(keys, allowed, where: str) -> None:
    extra = sorted(set(keys) - allowed)
    if extra:
        raise ConfigError(f"unknown key {where}{extra[0]!r}")


def parse_run_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    _unknown(data, _TOP_KEYS, "")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    rc = RunConfig()
    if "mode" in data:
        if data["mode"] not in MODES:
            raise ConfigError(f"mode: expected one of {MODES}, got {data['mode']!r}")
        rc.mode = data["mode"]
    if "variant" in data:
        if data["variant"] not in VARIANTS:
            raise ConfigError(f"variant: expected one of {VARIANTS}, got {data['variant']!r}")
        rc.variant = data["variant"]
    if "a_thrust" in data:
        values = data["a_thrust"]
        if not isinstance(values, list) or not values:
            raise ConfigError("a_thrust: expected a non-empty list")
        rc.a_thrust = [_positive(f"a_thrust[{i}]", v) for i, v in enumerate(values)]
    if "epoch" in data:
        try:
            epoch = datetime.fromisoformat(str(data["epoch"]).replace("Z", "+00:00"))
        except ValueError as exc:
            raise ConfigError(f"epoch: {exc}") from None
        rc.epoch = epoch if epoch.tzinfo else epoch.replace(tzinfo=timezone.utc)
    for key in ("L_E0_deg", "L_M0_deg"):
        if key in data:
            v = data[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{key}: expected a finite number, got {v!r}")
            setattr(rc, key, float(v))
    for key in ("fixed_phase_angle", "r_park_E", "r_park_M"):
        if key in data and data[key] is not None:
            setattr(rc, key, _positive(key, data[key]))
    if rc.variant == "three-phase-comparison" and rc.fixed_phase_angle is None:
        rc.fixed_phase_angle = COMPARISON_PHASE_ANGLE
    for key in ("escape_vr_bound", "capture_vr_bound", "chain_modes"):
        if key in data:
            if not isinstance(data[key], bool):
                raise ConfigError(f"{key}: expected true or false")
            setattr(rc, key, data[key])
    if "constants" in data:
        overrides = data["constants"]
        if not isinstance(overrides, dict):
            raise ConfigError("constants: expected an object")
        _unknown(overrides, {f.name for f in fields(PhysicalConstants)}, "constants.")
        values = {}
        for k, v in overrides.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"constants.{k}: expected a number, got {v!r}")
            values[k] = float(v)
        try:
            rc.constants = PhysicalConstants().with_overrides(**values)
        except ValueError as exc:
            raise ConfigError(f"constants: {exc}") from None
    if "mesh" in data:
        mesh = data["mesh"]
        _unknown(mesh, _MESH_KEYS, "mesh.")
        if "segments" in mesh:
            try:
                rc.segments = {int(k): int(_positive(f"mesh.segments.{k}", v)) for k, v in mesh["segments"].items()}
            except (TypeError, ValueError, AttributeError) as exc:
                raise ConfigError(f"mesh.segments: {exc}") from None
        if "degree" in mesh:
            rc.degree = int(_positive("mesh.degree", mesh["degree"]))
        if "refine_tol" in mesh:
            rc.refine_tol = _positive("mesh.refine_tol", mesh["refine_tol"])
        if "max_refinements" in mesh:
            v = mesh["max_refinements"]
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ConfigError("mesh.max_refinements: expected a non-negative integer")
            rc.max_refinements = v
    if "solver" in data:
        s = data["solver"]
        _unknown(s, _SOLVER_KEYS, "solver.")
        kw = {k: _positive(f"solver.{k}", v) for k, v in s.items()}
        if "max_iter" in kw:
            kw["max_iter"] = int(kw["max_iter"])
        rc.solver = replace(rc.solver, **kw)
    if "output" in data:
        rc.output = str(data["output"])
    try:
        for a in rc.a_thrust:
            rc.problem_config(a)
    except ConfigurationError as exc:
        raise ConfigError(str(exc)) from None
    return rc


def load_run_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_run_config(data)


def start_date(epoch: datetime, days: float) -> date:
    """Calendar date (UTC) ``days`` after ``epoch``; 1 d = 86400 s, no leap seconds."""
    return (epoch.astimezone(timezone.utc) + timedelta(days=days)).date()


def case_label(a: float) -> str:
    return f"{a:.4e}"


# ---------------------------------------------------------------------------
# summary


@dataclass
class ReportRow:
    a_thrust: float
    durations: dict[int, float]
    transfer_days: float
    start: date | None
    status: str
    max_violation: float
    reference_days: float | None
    tier: str
    notes: str = ""

    @property
    def delta_days(self) -> float | None:
        return None if self.reference_days is None else self.transfer_days - self.reference_days


def reference_for(variant: str, mode: str, a: float) -> float | None:
    table = REFERENCE_DAYS.get((variant, mode), {})
    for key, value in table.items():
        if math.isclose(key, a, rel_tol=1e-9):
            return value
    return None


def diagnostic_misses(variant: str, mode: str, a: float, audit_: TrajectoryAudit) -> list[str]:
    """Published diagnostics of this case that the audit does not reproduce."""
    for (v, m, key), table in REFERENCE_DIAGNOSTICS.items():
        if v == variant and m == mode and math.isclose(key, a, rel_tol=1e-9):
            return [name for name, (ref, tol) in table.items()
                    if audit_.diagnostics.get(name) is None or abs(audit_.diagnostics[name] - ref) > tol]
    return []


def classify(audit_: TrajectoryAudit, reference: float | None, feasible: bool, misses: list[str] = ()) -> str:
    """'primary' within the reference tolerance (and every published
    diagnostic matched), 'fallback' within 5 % at feasibility <= 1e-6,
    'fail' otherwise ('n/a' without a reference)."""
    if not feasible:
        return "fail"
    if reference is None:
        return "n/a"
    tol = REFERENCE_TOLERANCE_DAYS[audit_.mode]
    if abs(audit_.transfer_days - reference) <= tol and not misses:
        return "primary"
    if audit_.max_violation <= FEASIBILITY_FALLBACK and abs(audit_.transfer_days - reference) <= OBJECTIVE_FALLBACK * reference:
        return "fallback"
    return "fail"


def report_row(solution: SolutionBundle, audit_: TrajectoryAudit) -> ReportRow:
    cfg = solution.config
    durations = audit_.durations_days
    # the comparison variant has no alignment phase, hence no calendar start
    start = start_date(cfg.epoch, audit_.start_days) if cfg.variant == "four-phase" else None
    reference = reference_for(cfg.variant, cfg.mode, cfg.a_thrust_si)
    misses = diagnostic_misses(cfg.variant, cfg.mode, cfg.a_thrust_si, audit_)
    notes = "diagnostics off reference: " + ", ".join(misses) if misses else ""
    return ReportRow(cfg.a_thrust_si, durations, audit_.transfer_days, start, solution.status,
                     audit_.max_violation, reference, classify(audit_, reference, solution.feasible, misses), notes)


SUMMARY_COLUMNS = ("a_thrust", "phase1_d", "phase2_d", "phase3_d", "phase4_d", "transfer_d", "start_date",
                   "status", "max_violation", "reference_d", "delta_d", "tier", "notes")


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_summary_csv(path, rows: list[ReportRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([_csv_value(v) for v in (
                r.a_thrust, r.durations.get(1), r.durations.get(2), r.durations.get(3), r.durations.get(4),
                r.transfer_days, r.start.isoformat() if r.start else None, r.status, r.max_violation,
                r.reference_days, r.delta_days, r.tier, r.notes or None)])


def format_table(rows: list[ReportRow]) -> str:
    def g(v):
        return "-" if v is None else f"{v:.6g}"

    header = ("a (m/s^2)", "Ph1 (d)", "Ph2 (d)", "Ph3 (d)", "Ph4 (d)", "Total (d)", "Start", "Ref (d)",
              "Delta (d)", "Status", "Tier")
    body = [(g(r.a_thrust), g(r.durations.get(1)), g(r.durations.get(2)), g(r.durations.get(3)),
             g(r.durations.get(4)), g(r.transfer_days), r.start.strftime("%d %b %Y") if r.start else "-",
             g(r.reference_days), g(r.delta_days), r.status, r.tier) for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(wd) for h, wd in zip(header, widths))]
    lines += ["  ".join(c.rjust(wd) for c, wd in zip(b, widths)) for b in body]
    if any(r.tier == "fallback" for r in rows):
        lines.append("NOTE: at least one case passes only under the fallback rule "
                     "(feasibility <= 1e-6 and total within 5% of the reference).")
    for r in rows:
        if r.notes:
            lines.append(f"NOTE a={g(r.a_thrust)}: {r.notes}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# execution


def _write_case(out: Path, solution: SolutionBundle, emit_plot_data: bool) -> ReportRow:
    label = case_label(solution.config.a_thrust_si)
    nlp = solution.nlp()
    solution.save(out / f"case_{label}.solution.json")
    a = audit(solution, nlp)
    a.save(out / f"case_{label}.audit.json")
    write_trajectory_csv(out / f"case_{label}.traj.csv", solution, nlp)
    if emit_plot_data:
        write_trajectory_csv(out / f"case_{label}.dense.csv", solution, nlp, dense=10)
    return report_row(solution, a)


def _select(values: list[float], cases: str | None) -> list[float]:
    if not cases:
        return values
    wanted = [float(c) for c in cases.split(",") if c.strip()]
    picked = [a for a in values if any(math.isclose(a, w, rel_tol=1e-9) for w in wanted)]
    if not picked:
        raise ConfigError(f"--cases {cases!r} matches none of {values}")
    return picked


def run(rc: RunConfig, out: Path, cases: str | None = None, emit_plot_data: bool = False) -> tuple[list[ReportRow], list[SolutionBundle]]:
    out.mkdir(parents=True, exist_ok=True)
    values = sorted(_select(rc.a_thrust, cases))
    configs = [rc.problem_config(a) for a in values]
    kwargs = dict(refine_tol=rc.refine_tol, max_refinements=rc.max_refinements)
    seed = None
    if rc.chain_modes and rc.mode != "circular":
        chain = mode_chain(configs[0], rc.constants, rc.solver,
                           mesh=rc.mesh_for(configs[0].phase_ids), **kwargs)
        seed = chain[-1]
        solutions = [seed] + continuation_sweep(configs[1:], rc.constants, rc.solver, seed=seed, **kwargs)
    else:
        solutions = continuation_sweep(configs, rc.constants, rc.solver,
                                       mesh=rc.mesh_for(configs[0].phase_ids), **kwargs)
    rows = [_write_case(out, s, emit_plot_data) for s in solutions]
    write_summary_csv(out / "summary.csv", rows)
    return rows, solutions


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="marstransfer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="solve the cases of a config file")
    p.add_argument("config", nargs="?", help="run configuration (JSON)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--cases", help="comma-separated thrust values to run")
    p.add_argument("--verify-only", metavar="SOLUTION", help="audit a stored solution instead of solving")
    p.add_argument("--emit-plot-data", action="store_true", help="also write densely sampled trajectory CSV")
    p.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        if args.verify_only:
            solution = SolutionBundle.load(args.verify_only)
            out = Path(args.out or Path(args.verify_only).parent)
            out.mkdir(parents=True, exist_ok=True)
            rows = [_write_case(out, solution, args.emit_plot_data)]
            write_summary_csv(out / "summary.csv", rows)
        else:
            if not args.config:
                parser.error("run needs a config file unless --verify-only is given")
            rc = load_run_config(args.config)
            out = Path(args.out or rc.output)
            rows, _ = run(rc, out, args.cases, args.emit_plot_data)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(format_table(rows))
    failed = [r for r in rows if r.status not in ("optimal", "feasible-suboptimal")]
    if failed:
        print(f"{len(failed)} case(s) infeasible", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
