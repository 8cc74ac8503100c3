"""Command-line entry point: ``hflopt {generate,optimize,associate,simulate,sweep,check}``.

Exit status is 0 on success, 1 on invalid input and 2 when the solver or the
simulation stops at its iteration cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from hflopt import association as assoc_mod
from hflopt import flsim
from hflopt.concavity import concavity_check
from hflopt.experiments import (
    ScenarioError,
    SweepSpec,
    _atomic_write,
    generate_scenario,
    load_scenario,
    rows_to_csv,
    run_sweep,
    save_scenario,
    scenario_to_dict,
)
from hflopt.optimizer import grid_oracle, kkt_residuals, solve
from hflopt.scenario import ConstraintViolation, InfeasibleScenario, cloud_round_delay

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2

SIM_HEADER = ("round", "simulated_time_s", "global_loss", "gap")


def _emit(text: str, out) -> None:
    if out:
        _atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    def conv(v):
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, np.generic):
            return v.item()
        raise TypeError(type(v).__name__)

    return json.dumps(doc, indent=2, default=conv) + "\n"


def _plan_doc(plan, scenario, association) -> dict:
    return {
        "a_real": plan.a_real,
        "b_real": plan.b_real,
        "a_int": plan.a_int,
        "b_int": plan.b_int,
        "rounds": plan.rounds,
        "big_t_s": plan.big_t,
        "objective_s": plan.objective,
        "relaxed_objective_s": plan.relaxed_objective,
        "tau_s": plan.tau,
        "cpu_hz": plan.cpu,
        "power_w": plan.power,
        "converged": plan.converged,
        "iterations": plan.iterations,
        "association": {str(k): v for k, v in sorted(association.assignment.items())},
    }


def cmd_generate(args) -> int:
    scenario = generate_scenario(args.seed, args.ues, args.edges, epsilon=args.epsilon)
    if args.out:
        save_scenario(scenario, args.out)
    else:
        sys.stdout.write(_json(scenario_to_dict(scenario)))
    return EXIT_OK


def cmd_optimize(args) -> int:
    scenario = load_scenario(args.scenario, seed=args.seed)
    res = assoc_mod.associate(scenario, args.strategy, seed=args.seed)
    plan = solve(scenario, res.association, eta=args.eta, tol=args.tol, max_iters=args.max_iters)
    doc = _plan_doc(plan, scenario, res.association)
    doc["strategy"] = args.strategy
    if args.grid_max:
        ref = grid_oracle(scenario, res.association, (1, args.grid_max), (1, args.grid_max))
        doc["grid_oracle"] = {"a": ref.a_int, "b": ref.b_int, "objective_s": ref.objective}
    _emit(_json(doc), args.out)
    return EXIT_OK if plan.converged else EXIT_NOT_CONVERGED


def cmd_associate(args) -> int:
    scenario = load_scenario(args.scenario, seed=args.seed)
    res = assoc_mod.associate(scenario, args.strategy, a=args.a, seed=args.seed)
    doc = {
        "strategy": res.strategy,
        "a": args.a,
        "max_latency_s": res.max_latency,
        "loads": res.association.loads(scenario),
        "assignment": {str(k): v for k, v in sorted(res.association.assignment.items())},
    }
    _emit(_json(doc), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = generate_scenario(args.seed, args.ues, args.edges, epsilon=args.epsilon)
    association = assoc_mod.propose(scenario).association
    a, b = args.a, args.b
    converged = True
    if a is None or b is None:
        plan = solve(scenario, association, eta=args.eta, tol=args.tol, max_iters=args.max_iters)
        converged = plan.converged
        a = plan.a_int if a is None else a
        b = plan.b_int if b is None else b
    round_time = cloud_round_delay(scenario, association, a, b)
    tasks = flsim.make_tasks(args.seed, args.dim, args.ues)
    report = flsim.run(
        tasks,
        association.edge_indices(scenario),
        a,
        b,
        epsilon=args.epsilon,
        max_rounds=args.max_rounds,
        round_time=round_time,
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SIM_HEADER)
    for r, t, loss, gap in report.rows():
        writer.writerow([r, repr(t), repr(loss), repr(gap)])
    _emit(buf.getvalue(), args.out)
    logging.info("a=%d b=%d rounds=%d converged=%s", a, b, report.rounds, report.converged)
    return EXIT_OK if report.converged and converged else EXIT_NOT_CONVERGED


def cmd_sweep(args) -> int:
    spec = SweepSpec.load(args.spec)
    overrides = {k: getattr(args, k) for k in ("eta", "tol", "max_iters") if getattr(args, k) is not None}
    if overrides:
        spec = replace(spec, **overrides)
    rows = run_sweep(spec, out=args.out)
    if not args.out:
        sys.stdout.write(rows_to_csv(rows))
    return EXIT_OK if all(r.converged for r in rows if not r.error) else EXIT_NOT_CONVERGED


def cmd_check(args) -> int:
    grid = np.linspace(0.1, 100.0, args.grid_points)
    lines = []
    ok = True
    for zeta in range(1, 11):
        for gamma in range(1, 11):
            rep = concavity_check(zeta, gamma, grid, grid, fd_stride=args.fd_stride)
            ok &= rep.ok
            if not rep.ok or args.verbose:
                lines.append(
                    f"zeta={zeta} gamma={gamma} f_aa_max={rep.f_aa_max:.3e} "
                    f"det_min_region={rep.region_det_min:.3e} fd_err={rep.fd_max_rel_err:.2e} "
                    f"ok={rep.ok}"
                )
    lines.append(f"concavity: {'ok' if ok else 'VIOLATIONS'} over zeta, gamma in 1..10")

    for seed in range(args.seed, args.seed + args.scenarios):
        scenario = generate_scenario(seed, args.ues, args.edges)
        association = assoc_mod.propose(scenario).association
        plan = solve(scenario, association, eta=args.eta, tol=args.tol, max_iters=args.max_iters)
        kkt = kkt_residuals(scenario, association, plan)
        active = plan.dual.lam > 0
        tau_rel = np.abs(kkt.tau_residual[active]) / (plan.dual.lam[active] * plan.b_real)
        good = plan.converged and kkt.t_ok and bool(np.all(tau_rel <= 1e-3))
        ok &= good
        lines.append(
            f"kkt seed={seed}: |sum(lam)-R|/R={abs(kkt.t_residual) / kkt.rounds:.2e} "
            f"max tau residual={tau_rel.max(initial=0.0):.2e} d_a={kkt.d_a:.2e} d_b={kkt.d_b:.2e} "
            f"converged={plan.converged}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_INVALID


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1; argparse's own 2 is reserved for non-convergence."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--eta", type=float, default=None, help="dual step size (default 0.01)")
    common.add_argument("--tol", type=float, default=None, help="primal tolerance (default 1e-6)")
    common.add_argument("--max-iters", type=int, default=None, help="iteration cap (default 10000)")
    common.add_argument("--grid-max", type=int, default=0, help="also run the exhaustive (a, b) grid up to this bound")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="hflopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a random scenario file")
    p.add_argument("--ues", type=int, default=100)
    p.add_argument("--edges", type=int, default=5)
    p.add_argument("--epsilon", type=float, default=0.25)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("optimize", parents=[common], help="associate, then solve for (a, b)")
    p.add_argument("scenario")
    p.add_argument("--strategy", choices=assoc_mod.STRATEGIES, default="proposed")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("associate", parents=[common], help="UE-to-edge association only")
    p.add_argument("scenario")
    p.add_argument("--strategy", choices=assoc_mod.STRATEGIES, default="proposed")
    p.add_argument("--a", type=float, default=1.0, help="local iterations used in the latency")
    p.set_defaults(func=cmd_associate)

    p = sub.add_parser("simulate", parents=[common], help="hierarchical training on synthetic quadratics")
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--ues", type=int, default=8)
    p.add_argument("--edges", type=int, default=2)
    p.add_argument("--a", type=int, default=None, help="local steps (default: solved)")
    p.add_argument("--b", type=int, default=None, help="edge rounds (default: solved)")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--max-rounds", type=int, default=10_000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="run a JSON sweep spec, write CSV")
    p.add_argument("spec")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", parents=[common], help="concavity and KKT residual reports")
    p.add_argument("--grid-points", type=int, default=50)
    p.add_argument("--fd-stride", type=int, default=5, help="finite-difference every k-th grid point")
    p.add_argument("--scenarios", type=int, default=5)
    p.add_argument("--ues", type=int, default=8)
    p.add_argument("--edges", type=int, default=2)
    p.set_defaults(func=cmd_check)
    return parser


_SOLVER_DEFAULTS = {"eta": 0.01, "tol": 1e-6, "max_iters": 10_000}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command != "sweep":
        for k, v in _SOLVER_DEFAULTS.items():
            if getattr(args, k) is None:
                setattr(args, k, v)
    try:
        return args.func(args)
    except (
        ScenarioError,
        InfeasibleScenario,
        ConstraintViolation,
        FileNotFoundError,
        IsADirectoryError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
