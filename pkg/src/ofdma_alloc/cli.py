"""Command-line front end: solve, reduce, verify, gen, bench.

Exit codes: 0 success, 2 infeasible, 3 invalid input, 4 enumeration or
partition budget exceeded, 5 verification disagreement.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import assignment, exact, transport, waterfill
from .core import (
    InfeasibleError,
    InvalidInstanceError,
    OfdmaInstance,
    UtilityKind,
    is_ofdma,
    rates,
    utility,
    validate_instance,
)
from .io import GenSpec, dumps, generate_instance, instance_to_dict, load_instance
from .reductions import (
    ThreeDMInstance,
    Variant,
    random_3dm,
    reduce_feasibility_c,
    reduce_utility,
    verify_reduction_roundtrip,
)

EXIT_OK, EXIT_INFEASIBLE, EXIT_INVALID, EXIT_BUDGET, EXIT_DISAGREE = 0, 2, 3, 4, 5

METHODS = ("auto", "waterfill", "assignment", "transport", "exact")
VERIFY_TOL = 1e-8


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class SolveReport:
    method: str
    problem: str
    status: str  # Optimal | Infeasible | BudgetExceeded | VerificationFailed
    value: Optional[float] = None
    alloc: Optional[list] = None
    rates: Optional[list] = None
    residuals: dict = field(default_factory=dict)
    wall_time: float = 0.0
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "problem": self.problem,
            "status": self.status,
            "value": self.value,
            "alloc": self.alloc,
            "rates": self.rates,
            "residuals": self.residuals,
            "wall_time": self.wall_time,
            "message": self.message,
        }

    @property
    def exit_code(self) -> int:
        return {
            "Optimal": EXIT_OK,
            "Infeasible": EXIT_INFEASIBLE,
            "BudgetExceeded": EXIT_BUDGET,
        }.get(self.status, EXIT_DISAGREE)


def problem_of(inst: OfdmaInstance) -> str:
    if inst.rate_target is not None:
        return "min-power"
    if inst.user_budget is not None:
        return "utility"
    return "sum-rate"


def pick_method(inst: OfdmaInstance, c_bound: int = 4) -> str:
    problem = problem_of(inst)
    if inst.num_users == 1:
        return "waterfill"
    if problem == "min-power" and inst.num_subcarriers - inst.num_users <= c_bound:
        return "assignment"
    if problem == "sum-rate":
        return "transport"
    return "exact"


def _run(inst, method, kind, weights, eps, enum_budget, c_bound):
    """Dispatch to a solver; returns (power matrix, value, kkt residual or None)."""
    problem = problem_of(inst)
    K, N = inst.num_users, inst.num_subcarriers
    if weights is not None and not (method == "transport" or (method == "waterfill" and problem == "sum-rate")):
        raise ValueError("--weights only applies to the sum-rate problem without user budgets")
    if method == "waterfill":
        if K != 1:
            raise ValueError("waterfill handles single-user instances only")
        ch = waterfill.SingleUserChannel.of_user(inst, 0)
        if problem == "min-power":
            res = waterfill.min_power_single_user(ch, float(inst.rate_target[0]), eps)
            kkt = waterfill.kkt_residual(ch, res.total_power, res.powers, res.water_level)
            return res.powers[None, :], res.total_power, kkt
        budget = float(inst.user_budget[0]) if problem == "utility" else math.inf
        res = waterfill.max_rate_single_user(ch, budget)
        kkt = waterfill.kkt_residual(ch, budget, res.powers, res.water_level)
        w = 1.0 if weights is None else float(weights[0])
        return res.powers[None, :], (res.rate if problem == "utility" else w * res.rate), kkt
    if method == "assignment":
        if problem != "min-power":
            raise ValueError("assignment solves the power-minimization problem only")
        C = N - K
        if C > c_bound:
            raise BudgetExceeded(f"N - K = {C} exceeds the partition bound {c_bound}")
        sol = assignment.min_power_square(inst) if C == 0 else assignment.min_power_offset(inst, C, eps)
        return sol.alloc.power, sol.total, None
    if method == "transport":
        if problem != "sum-rate":
            raise ValueError("transport needs an instance without rate targets or user budgets")
        sol = transport.max_sum_rate_no_total_budget(inst, weights)
        return sol.alloc.power, sol.value, None
    if method == "exact":
        if problem == "min-power":
            sol = exact.exact_min_power(inst, eps, enum_budget=enum_budget)
            return sol.alloc.power, sol.total, None
        if problem == "utility":
            sol = exact.exact_max_utility(inst, kind, enum_budget=enum_budget)
            return sol.alloc.power, sol.value, None
        relaxed = inst.replace(user_budget=inst.subcarrier_budget.sum(axis=1) + 1.0)
        sol = exact.exact_max_utility(relaxed, UtilityKind.SUM_RATE, enum_budget=enum_budget)
        return sol.alloc.power, float(sol.rates.sum()), None
    raise ValueError(f"unknown method {method!r}")


def check_solution(inst: OfdmaInstance, power) -> dict:
    """Re-verify an allocation from scratch; returns residuals and failures."""
    power = np.asarray(power, dtype=float)
    out = {"ofdma": is_ofdma(power)}
    cap_slack = float(np.min(inst.subcarrier_budget - power))
    budget_slack = cap_slack
    if inst.user_budget is not None:
        budget_slack = min(budget_slack, float(np.min(inst.user_budget - power.sum(axis=1))))
    out["budget_slack"] = budget_slack
    out["min_power"] = float(power.min())
    if out["ofdma"]:
        r = rates(inst, power)
        out["rates"] = r
        if inst.rate_target is not None:
            out["rate_slack"] = float(np.min(r - inst.rate_target))
    failures = []
    if not out["ofdma"]:
        failures.append("allocation is not OFDMA")
    if budget_slack < -VERIFY_TOL or out["min_power"] < 0:
        failures.append(f"budget violated (slack {budget_slack:.3g})")
    if out.get("rate_slack", 0.0) < -VERIFY_TOL:
        failures.append(f"rate target missed by {-out['rate_slack']:.3g}")
    out["failures"] = failures
    return out


def solve_instance(inst: OfdmaInstance, method: str = "auto", kind=UtilityKind.SUM_RATE,
                   weights=None, eps: float = 1e-10, enum_budget=exact.DEFAULT_ENUM_BUDGET,
                   c_bound: int = 4) -> SolveReport:
    """Validate, solve and independently verify one instance."""
    violations = validate_instance(inst)
    if violations:
        raise InvalidInstanceError(violations)
    kind = UtilityKind(kind)
    chosen = pick_method(inst, c_bound) if method == "auto" else method
    problem = problem_of(inst)
    t0 = time.perf_counter()
    try:
        power, value, kkt = _run(inst, chosen, kind, weights, eps, enum_budget, c_bound)
    except InfeasibleError as exc:
        return SolveReport(chosen, problem, "Infeasible", wall_time=time.perf_counter() - t0,
                           message=str(exc))
    except (exact.EnumerationBudgetExceeded, BudgetExceeded) as exc:
        return SolveReport(chosen, problem, "BudgetExceeded", wall_time=time.perf_counter() - t0,
                           message=str(exc))
    elapsed = time.perf_counter() - t0
    chk = check_solution(inst, power)
    residuals = {
        "kkt": kkt,
        "rate_slack": chk.get("rate_slack"),
        "budget_slack": chk["budget_slack"],
    }
    status = "Optimal" if not chk["failures"] else "VerificationFailed"
    r = chk.get("rates")
    return SolveReport(
        chosen, problem, status, float(value), np.asarray(power).tolist(),
        None if r is None else r.tolist(), residuals, elapsed, "; ".join(chk["failures"]),
    )


# ---------------------------------------------------------------- commands


def _parse_c(text: str) -> Fraction:
    try:
        c = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad ratio {text!r}; use NUM/DEN")
    if c <= 1:
        raise argparse.ArgumentTypeError("c must be > 1")
    return c


def _parse_range(text: str):
    lo, hi = (float(x) for x in text.split(","))
    return lo, hi


def _parse_floats(text: str):
    return [float(x) for x in text.split(",")]


def _parse_ints(text: str):
    return [int(x) for x in text.split(",")]


def _map(fn, items, workers: int):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    try:
        report = solve_instance(inst, args.method, args.utility, args.weights, args.eps,
                                args.enum_budget, args.c_bound)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = dumps(report.to_dict())
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    value = "-" if report.value is None else f"{report.value:.10g}"
    print(f"{report.method}\t{report.problem}\t{report.status}\t{value}\t{report.wall_time:.4f}s",
          file=sys.stderr if not args.output else sys.stdout)
    if report.message:
        print(report.message, file=sys.stderr)
    return report.exit_code


def _load_tdm(args) -> ThreeDMInstance:
    if args.tdm:
        return ThreeDMInstance.from_dict(json.loads(Path(args.tdm).read_text()))
    rng = np.random.default_rng(args.seed)
    return random_3dm(rng, args.random_size, args.triples)


def cmd_reduce(args) -> int:
    tdm = _load_tdm(args)
    c = args.c
    variant = Variant(args.variant)
    if variant is Variant.FEASIBILITY and c != 2:
        print("error: --variant feasibility is the c = 2 gadget; use feasibility-c", file=sys.stderr)
        return EXIT_INVALID
    try:
        if variant is Variant.UTILITY:
            bundle = reduce_utility(tdm, args.utility, c.numerator, c.denominator)
        else:
            bundle = reduce_feasibility_c(tdm, c.numerator, c.denominator)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    sidecar = {"variant": variant.value, **bundle.sidecar()}
    inst_text = dumps(instance_to_dict(bundle.instance))
    if args.output:
        out = Path(args.output)
        out.write_text(inst_text)
        side = Path(args.sidecar) if args.sidecar else out.with_suffix(".meta.json")
        side.write_text(dumps(sidecar))
        print(f"wrote {out} and {side}")
    else:
        sys.stdout.write(inst_text)
        if args.sidecar:
            Path(args.sidecar).write_text(dumps(sidecar))
    return EXIT_OK


def _verify_one(job):
    tdm, variant, c, kind, budget = job
    rt = verify_reduction_roundtrip(tdm, variant, c.numerator, c.denominator, kind, budget)
    return tdm, rt


def cmd_verify(args) -> int:
    c = args.c
    variant = Variant(args.variant)
    if args.dir:
        tdms = [ThreeDMInstance.from_dict(json.loads(p.read_text()))
                for p in sorted(Path(args.dir).glob("*.json"))]
    else:
        rng = np.random.default_rng(args.seed)
        tdms = [random_3dm(rng, int(rng.choice(args.sizes))) for _ in range(args.count)]
    jobs = [(t, variant, c, UtilityKind(args.utility), args.enum_budget) for t in tdms]
    results = _map(_verify_one, jobs, args.workers)
    bad = [(t, rt) for t, rt in results if not rt.agree]
    yes = sum(rt.tdm_answer for _, rt in results)
    print(f"variant={variant.value} c={c} instances={len(results)} 3dm_yes={yes} "
          f"agree={len(results) - len(bad)} disagree={len(bad)}")
    for t, rt in bad:
        print(f"  disagreement: 3dm={rt.tdm_answer} ofdma={rt.ofdma_answer} {json.dumps(t.to_dict())}")
    return EXIT_DISAGREE if bad else EXIT_OK


def _gen_spec(args, seed) -> GenSpec:
    return GenSpec(
        K=args.K, N=args.N, seed=seed, gain=args.gain_range, noise=args.noise_range,
        budget=args.budget_range,
        target=args.target_range if args.problem == "min-power" else None,
        user_budget=args.user_budget_range if args.problem == "utility" else None,
    )


def cmd_gen(args) -> int:
    try:
        inst = generate_instance(_gen_spec(args, args.seed))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = dumps(instance_to_dict(inst))
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _bench_one(job):
    name, inst, method, kind, eps, budget, c_bound = job
    try:
        rep = solve_instance(inst, method, kind, None, eps, budget, c_bound)
    except ValueError as exc:
        return {"instance": name, "method": method, "status": "Invalid", "value": "",
                "wall_time": 0.0, "message": str(exc)}
    return {"instance": name, "method": method, "status": rep.status,
            "value": "" if rep.value is None else repr(rep.value),
            "wall_time": f"{rep.wall_time:.6f}", "message": rep.message}


def cmd_bench(args) -> int:
    if args.ensemble:
        named = [(p.name, load_instance(p)) for p in sorted(Path(args.ensemble).glob("*.json"))]
    else:
        named = [(f"seed{args.seed + i}", generate_instance(_gen_spec(args, args.seed + i)))
                 for i in range(args.count)]
    jobs = [(name, inst, m, UtilityKind(args.utility), args.eps, args.enum_budget, args.c_bound)
            for name, inst in named for m in args.methods]
    rows = _map(_bench_one, jobs, args.workers)
    fields = ["instance", "method", "status", "value", "wall_time"]
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.csv:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--eps", type=float, default=1e-10, help="water-level tolerance")
    common.add_argument("--enum-budget", type=float, default=float(exact.DEFAULT_ENUM_BUDGET),
                        help="max (K+1)^N owner maps for the exact solver")
    common.add_argument("--c-bound", type=int, default=4, help="max N-K for the assignment solver")
    common.add_argument("--workers", type=int, default=1)

    utilities = [k.value for k in UtilityKind]
    parser = argparse.ArgumentParser(prog="ofdma-alloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve an instance file")
    p.add_argument("instance")
    p.add_argument("--method", choices=METHODS, default="auto")
    p.add_argument("--utility", choices=utilities, default="sum-rate")
    p.add_argument("--weights", type=_parse_floats, default=None, help="comma-separated user weights")
    p.add_argument("-o", "--output", help="report path (default: stdout)")
    p.set_defaults(func=cmd_solve)

    def add_reduction_args(q):
        q.add_argument("--variant", choices=[v.value for v in Variant], default="feasibility")
        q.add_argument("--c", type=_parse_c, default=Fraction(2), help="ratio N/K as NUM/DEN")
        q.add_argument("--utility", choices=utilities, default="sum-rate")

    p = sub.add_parser("reduce", parents=[common], help="build a gadget instance from 3DM")
    add_reduction_args(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--tdm", help="3DM JSON file {size, triples}")
    src.add_argument("--random-size", type=int, help="random 3DM instance of this size")
    p.add_argument("--triples", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.add_argument("--sidecar")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("verify", parents=[common], help="3DM vs reduced-instance round trips")
    add_reduction_args(p)
    p.add_argument("--dir", help="directory of 3DM JSON files")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--sizes", type=_parse_ints, default=[2, 3, 4])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    def add_gen_args(q, required=True):
        q.add_argument("--K", type=int, required=required, default=2)
        q.add_argument("--N", type=int, required=required, default=2)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--problem", choices=["min-power", "utility", "sum-rate"], default="min-power")
        q.add_argument("--gain-range", type=_parse_range, default=(0.1, 10.0))
        q.add_argument("--noise-range", type=_parse_range, default=(0.1, 10.0))
        q.add_argument("--budget-range", type=_parse_range, default=(0.5, 5.0))
        q.add_argument("--target-range", type=_parse_range, default=(0.5, 4.0))
        q.add_argument("--user-budget-range", type=_parse_range, default=(1.0, 10.0))

    p = sub.add_parser("gen", parents=[common], help="seeded random instance")
    add_gen_args(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", parents=[common], help="method matrix over an ensemble, CSV out")
    add_gen_args(p, required=False)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--ensemble", help="directory of instance JSON files")
    p.add_argument("--methods", type=lambda s: s.split(","), default=["auto", "exact"])
    p.add_argument("--utility", choices=utilities, default="sum-rate")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInstanceError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
