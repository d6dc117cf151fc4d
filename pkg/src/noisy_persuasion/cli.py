"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 resource limit,
4 a checked property failed.  Standard output is deterministic for fixed
inputs and seed; wall time goes to standard error only with ``--timing``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .analysis import brute_force_value, check_monotone_condition
from .errors import GridTooLarge, ParseError, PersuasionError, ValidationError
from .performative import check_monotone_utility, run_performative
from .signaling import PersuasionSolution, solve_optimal_scheme, user_welfare_check
from .state_model import ACTIONS, PerformativeConfig, load_confusion_matrix, load_scenario
from .verification import run_suites

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2
EXIT_RESOURCE = 3
EXIT_PROPERTY = 4

ORACLE_GAP_TOL = 1e-7
ACTION_NAMES = {0: "not share", 1: "share"}

SOLVE_CSV_COLUMNS = [
    "kind", "theta_hat", "m_hat", "v_hat", "share_prob", "p_share", "platform_utility",
    "user_utility", "baseline_platform_utility", "baseline_user_utility", "persuasive",
]
SOLVE_CSV_HELP = (
    "CSV columns: kind (scheme|summary), theta_hat, m_hat, v_hat, share_prob, "
    "p_share, platform_utility, user_utility, baseline_platform_utility, "
    "baseline_user_utility, persuasive"
)
PERFORMATIVE_CSV_HELP = (
    "CSV columns: t, alpha, p_share, platform_utility, distance_to_target, "
    "prior_0 ... prior_{n-1}"
)


class PropertyFailure(Exception):
    """A checked property did not hold; maps to exit code 4."""


@dataclass
class RunReport:
    command: str
    scenario_path: str
    outputs: dict[str, Any]
    wall_time: float = 0.0
    seed: int | None = None
    lines: list[str] = field(default_factory=list)

    def emit(self, line: str = "") -> None:
        self.lines.append(line)

    def to_dict(self) -> dict[str, Any]:
        # wall time is left out so that reports stay byte-identical
        return {"command": self.command, "scenario_path": self.scenario_path, "seed": self.seed, "outputs": self.outputs}


def _num(x: float) -> str:
    """Shortest round-trip decimal form, used for CSV cells."""
    return repr(float(x))


def _fmt(x: float | None) -> str:
    if x is None:
        return "-"
    if abs(x) < 1e-12:
        x = 0.0  # round-off noise, shown as zero in tables only
    return f"{x:.6g}" if abs(x) >= 1e-4 or x == 0 else f"{x:.3e}"


def _vec(v: Sequence[float]) -> str:
    return "[" + ", ".join(_fmt(float(a)) for a in v) + "]"


def _write_csv(path: str, header: list[str], rows: list[list[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _solution_dict(sol: PersuasionSolution) -> dict[str, Any]:
    branches = {}
    for s, b in sorted(sol.branches.items()):
        branches[str(s)] = {
            "probability": b.probability,
            "true_posterior": b.true_posterior.probs.tolist(),
            "predicted_posterior": b.predicted_posterior.probs.tolist(),
            "action": b.action,
            "ic_slack": b.ic_slack,
        }
    return {
        "scheme": sol.scheme.share_prob.tolist(),
        "signal_probs": list(sol.signal_probs),
        "platform_utility": sol.platform_utility,
        "user_utility": sol.user_utility,
        "baseline_action": sol.baseline_action,
        "baseline_platform_utility": sol.baseline_platform_utility,
        "baseline_user_utility": sol.baseline_user_utility,
        "persuasive": sol.persuasive,
        "branches": branches,
    }


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args: argparse.Namespace) -> RunReport:
    inst, conf, _ = load_scenario(args.scenario, strict=args.strict)
    sol = solve_optimal_scheme(inst, conf)
    user_welfare_check(sol)
    report = RunReport("solve", args.scenario, {"solution": _solution_dict(sol)})
    emit = report.emit
    emit(f"baseline action        {ACTION_NAMES[sol.baseline_action]}")
    emit(f"baseline platform      {_fmt(sol.baseline_platform_utility)}")
    emit(f"baseline user          {_fmt(sol.baseline_user_utility)}")
    emit(f"optimal platform       {_fmt(sol.platform_utility)}")
    emit(f"optimal user           {_fmt(sol.user_utility)}")
    emit(f"P(share signal)        {_fmt(sol.share_probability)}")
    emit(f"persuasive             {'yes' if sol.persuasive else 'no'}")
    emit("")
    emit("theta_hat  m_hat  v_hat  P(share | theta_hat)")
    space = inst.space
    for j, p in enumerate(sol.scheme.share_prob):
        m, v = space.unflatten(j)
        emit(f"{j:>9}  {m:>5}  {v:>5}  {_fmt(float(p))}")
    emit("")
    for s in ACTIONS:
        branch = sol.branches.get(s)
        if branch is None:
            emit(f"signal {s} ({ACTION_NAMES[s]}): never sent")
            continue
        emit(
            f"signal {s} ({ACTION_NAMES[s]}): prob {_fmt(branch.probability)}, "
            f"posterior {_vec(branch.true_posterior.probs)}, "
            f"predicted {_vec(branch.predicted_posterior.probs)}, IC slack {_fmt(branch.ic_slack)}"
        )
    if args.csv:
        rows = []
        for j, p in enumerate(sol.scheme.share_prob):
            m, v = space.unflatten(j)
            rows.append(["scheme", j, m, v, _num(p), "", "", "", "", "", ""])
        rows.append([
            "summary", "", "", "", "", _num(sol.share_probability), _num(sol.platform_utility),
            _num(sol.user_utility), _num(sol.baseline_platform_utility), _num(sol.baseline_user_utility),
            int(sol.persuasive),
        ])
        _write_csv(args.csv, SOLVE_CSV_COLUMNS, rows)
    return report


def cmd_oracle(args: argparse.Namespace) -> RunReport:
    inst, conf, _ = load_scenario(args.scenario, strict=args.strict)
    oracle, scheme = brute_force_value(inst, conf, args.grid)
    lp = solve_optimal_scheme(inst, conf).platform_utility
    gap = lp - oracle
    report = RunReport(
        "oracle", args.scenario,
        {"oracle_value": oracle, "lp_value": lp, "gap": gap, "grid_step": args.grid, "oracle_scheme": scheme.share_prob.tolist()},
    )
    report.emit(f"grid step     {_fmt(args.grid)}")
    report.emit(f"oracle value  {_fmt(oracle)}")
    report.emit(f"LP value      {_fmt(lp)}")
    report.emit(f"gap           {_fmt(gap)}")
    report.emit(f"oracle scheme {_vec(scheme.share_prob)}")
    if gap < -ORACLE_GAP_TOL:
        raise PropertyFailure(f"LP value is below the grid oracle by {-gap:.3g}", report)
    return report


def cmd_performative(args: argparse.Namespace) -> RunReport:
    inst, conf, cfg = load_scenario(args.scenario, strict=args.strict)
    cfg = cfg or PerformativeConfig()
    try:
        config = PerformativeConfig(
            lam=cfg.lam if args.lam is None else args.lam,
            max_rounds=cfg.max_rounds if args.rounds is None else args.rounds,
            tolerance=cfg.tolerance if args.tol is None else args.tol,
            normalize=cfg.normalize or args.normalize,
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    trace = run_performative(inst, conf, config)
    rows = []
    report = RunReport("performative", args.scenario, {})
    report.emit(f"lambda {_fmt(config.lam)}, rounds {config.max_rounds}, tolerance {_fmt(config.tolerance)}, "
                f"normalized {'yes' if config.normalize else 'no'} (c_n = {_fmt(trace.normalization)})")
    report.emit("")
    report.emit(f"{'t':>4}  {'alpha':>10}  {'P(share)':>10}  {'utility':>10}  {'distance':>10}")
    for r in trace.rounds:
        report.emit(
            f"{r.index:>4}  {_fmt(r.alpha):>10}  {_fmt(r.solution.share_probability):>10}  "
            f"{_fmt(r.platform_utility):>10}  {_fmt(r.distance_to_target):>10}"
        )
        rows.append(
            [r.index, _num(r.alpha), _num(r.solution.share_probability), _num(r.platform_utility),
             "" if r.distance_to_target is None else _num(r.distance_to_target)]
            + [_num(p) for p in r.prior.probs]
        )
    monotone_checked = None
    if config.lam == 0:
        monotone_checked = check_monotone_utility(trace, inst)
    report.emit("")
    report.emit(f"converged_at   {'-' if trace.converged_at is None else trace.converged_at}")
    report.emit(f"stable_at      {'-' if trace.stable_at is None else trace.stable_at}")
    report.emit(f"degenerate_at  {'-' if trace.degenerate_at is None else trace.degenerate_at}")
    report.emit(f"monotone       {'yes' if trace.monotone_utility else 'no'}")
    report.emit(f"final prior    {_vec(trace.final_prior.probs)}")
    report.emit(f"final utility  {_fmt(trace.rounds[-1].platform_utility)}")
    if trace.segment_violations:
        report.emit(f"segment check  prior left the round-0 posterior segment in rounds {list(trace.segment_violations)}")
    report.outputs = {
        "config": {"lambda": config.lam, "rounds": config.max_rounds, "tolerance": config.tolerance, "normalize": config.normalize},
        "converged_at": trace.converged_at,
        "stable_at": trace.stable_at,
        "degenerate_at": trace.degenerate_at,
        "monotone_utility": trace.monotone_utility,
        "monotone_utility_normalized": monotone_checked,
        "normalization": trace.normalization,
        "target_posterior": None if trace.target_posterior is None else trace.target_posterior.probs.tolist(),
        "rounds": [
            {"t": r.index, "prior": r.prior.probs.tolist(), "alpha": r.alpha, "p_share": r.solution.share_probability,
             "platform_utility": r.platform_utility, "distance_to_target": r.distance_to_target,
             "scheme": r.solution.scheme.share_prob.tolist()}
            for r in trace.rounds
        ],
    }
    if args.csv:
        n = inst.theta_count
        header = ["t", "alpha", "p_share", "platform_utility", "distance_to_target"] + [f"prior_{i}" for i in range(n)]
        _write_csv(args.csv, header, rows)
    return report


def cmd_check_monotone(args: argparse.Namespace) -> RunReport:
    q1 = load_confusion_matrix(args.q1)
    q2 = load_confusion_matrix(args.q2)
    results = check_monotone_condition(q1, q2)
    report = RunReport("check-monotone", f"{args.q1} {args.q2}", {})
    columns = []
    for r in results:
        if r.is_member:
            report.emit(f"column {r.column}: member, weights {_vec(r.weights)}")
            columns.append({"column": r.column, "member": True, "weights": r.weights.tolist()})
        else:
            b, margin = r.violation_certificate
            report.emit(f"column {r.column}: not a member, separating b {_vec(b)}, margin {_fmt(margin)}")
            columns.append({"column": r.column, "member": False, "certificate": b.tolist(), "margin": margin})
    guaranteed = all(r.is_member for r in results)
    backed = bool(results) and results[0].proof_backed
    report.emit("")
    verdict = "yes" if guaranteed else "no"
    if guaranteed and not backed:
        verdict += " (hull condition only: asymmetric confusions admit instances where it fails)"
    report.emit(f"u*(Q2) >= u*(Q1) guaranteed for all instances: {verdict}")
    report.emit(f"proof-backed (both matrices symmetric): {'yes' if backed else 'no'}")
    report.outputs = {"columns": columns, "guaranteed": guaranteed, "proof_backed": backed}
    return report


def cmd_verify(args: argparse.Namespace) -> RunReport:
    inst, conf, _ = load_scenario(args.scenario, strict=args.strict)
    if args.trials < 1:
        raise ValidationError("trials must be a positive integer")
    results = run_suites(inst, conf, args.seed, args.trials)
    report = RunReport("verify", args.scenario, {}, seed=args.seed)
    report.emit(f"seed {args.seed}, trials {args.trials}, state space {inst.space.m_count} x {inst.space.v_count}")
    report.emit("")
    for r in results:
        verdict = "PASS" if r.passed else "FAIL"
        report.emit(f"{verdict}  {r.name:<20} {r.trials:>4} trials, {r.failures} failures; {r.detail}")
    report.outputs = {
        "properties": [
            {"name": r.name, "passed": r.passed, "trials": r.trials, "failures": r.failures, "detail": r.detail}
            for r in results
        ]
    }
    failed = [r.name for r in results if not r.passed]
    if failed:
        report.outputs["first_failure"] = failed[0]
        raise PropertyFailure(f"property failed: {failed[0]}", report)
    return report


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisy-persuasion",
        description="Optimal signaling with a noisy classifier: solve, check and simulate scenarios.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--json", metavar="PATH", help="write the structured report as JSON")
        p.add_argument("--timing", action="store_true", help="print wall time to standard error")

    p = sub.add_parser("solve", help="optimal scheme for a scenario", epilog=SOLVE_CSV_HELP)
    p.add_argument("scenario")
    p.add_argument("--csv", metavar="PATH", help="write one row per predicted state plus a summary row")
    p.add_argument("--strict", action="store_true", help="reject ill-conditioned confusions")
    common(p)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("oracle", help="compare the LP against grid enumeration")
    p.add_argument("scenario")
    p.add_argument("--grid", type=float, default=0.05, help="grid step 1/k with k <= 40 (default 0.05)")
    p.add_argument("--strict", action="store_true")
    common(p)
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("performative", help="simulate the repeated process", epilog=PERFORMATIVE_CSV_HELP)
    p.add_argument("scenario")
    p.add_argument("--lambda", dest="lam", type=float, help="weight on the previous prior")
    p.add_argument("--rounds", type=int, help="maximum number of rounds")
    p.add_argument("--tol", type=float, help="convergence tolerance on the predicted prior")
    p.add_argument("--normalize", action="store_true", help="report utilities shifted by max u(0, theta)")
    p.add_argument("--csv", metavar="PATH", help="write the per-round table")
    p.add_argument("--strict", action="store_true")
    common(p)
    p.set_defaults(handler=cmd_performative)

    p = sub.add_parser("check-monotone", help="hull condition for a weakly better classifier")
    p.add_argument("q1", help="file with the first confusion (q_theta, or q_m and q_v)")
    p.add_argument("q2", help="file with the second confusion")
    common(p)
    p.set_defaults(handler=cmd_check_monotone)

    p = sub.add_parser("verify", help="randomized property suites on the scenario's dimensions")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--strict", action="store_true")
    common(p)
    p.set_defaults(handler=cmd_verify)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, PropertyFailure):
        return EXIT_PROPERTY
    if isinstance(exc, GridTooLarge):
        return EXIT_RESOURCE
    if isinstance(exc, (ParseError, ValidationError, ValueError, OSError)):
        return EXIT_INPUT
    return EXIT_SOLVER


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler: Callable[[argparse.Namespace], RunReport] = args.handler
    start = time.perf_counter()
    report: RunReport | None = None
    code = EXIT_OK
    try:
        report = handler(args)
    except PropertyFailure as exc:
        code = EXIT_PROPERTY
        if len(exc.args) > 1:
            report = exc.args[1]
        message = exc.args[0]
        if report is None:
            print(f"error: {message}", file=sys.stderr)
        else:
            report.emit("")
            report.emit(f"error: {message}")
    except (PersuasionError, ValueError, OSError) as exc:
        code = _exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
    if report is not None:
        report.wall_time = time.perf_counter() - start
        for line in report.lines:
            print(line)
        if args.json:
            Path(args.json).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n")
    if args.timing:
        print(f"wall time {time.perf_counter() - start:.3f} s", file=sys.stderr)
    return code


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
