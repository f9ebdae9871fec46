"""
Command-line front end.

Exit codes: 0 success, 1 input or validation error, 2 no convergence,
3 plant collapse, 4 infeasible limits.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .comms import TriggerConfig, format_trigger_report, write_trigger_csv
from .controller import ControllerGains
from .grid import PlantCollapseError
from .optimizer import InfeasibleProblemError, NonConvexProblemError, format_kkt_report, \
    reference_qp_solve
from .scenario import Scenario, bundled, load_scenario, load_topology
from .sim import StaticPlant, nonlinear_optimum, run_case_study, trigger_summary
from .textio import ParseError

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_COLLAPSE, EXIT_INFEASIBLE = 0, 1, 2, 3, 4


def _resolve_scenario(args) -> Scenario:
    if args.scenario:
        path = Path(args.scenario)
    elif getattr(args, "case", None):
        path = bundled(f"case_{args.case}.scn")
    else:
        raise ParseError("<args>", 0, 0, "give a scenario file or --case")
    sc = load_scenario(path)
    gains = None
    if any(v is not None for v in (getattr(args, "k_p", None), getattr(args, "k_d_i", None),
                                   getattr(args, "k_d_v", None))):
        g = sc.gains
        gains = ControllerGains(args.k_p if args.k_p is not None else g.K_p,
                                args.k_d_i if args.k_d_i is not None else g.K_d_I,
                                args.k_d_v if args.k_d_v is not None else g.K_d_V, n=g.n)
    trig = None
    if any(getattr(args, k, None) is not None for k in ("sigma_y", "sigma_x", "sigma_g", "t_min", "t_max")):
        t = sc.sim.trigger
        trig = TriggerConfig(
            args.sigma_y if args.sigma_y is not None else t.sigma_y,
            args.sigma_x if args.sigma_x is not None else t.sigma_x,
            args.sigma_g if args.sigma_g is not None else t.sigma_G,
            args.t_min if args.t_min is not None else t.T_min,
            args.t_max if args.t_max is not None else t.T_max)
    return sc.with_overrides(comm_mode=getattr(args, "comm", None), plant=getattr(args, "plant", None),
                             duration=getattr(args, "duration", None), gains=gains, trigger=trig)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_run(args) -> int:
    sc = _resolve_scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rec, summary, loop = run_case_study(sc.study(), sc.sim)
    rec.to_csv(out / "trajectory.csv")
    write_trigger_csv(out / "triggers.csv", rec.channels)
    report = trigger_summary(loop)
    if sc.sim.comm_mode == "event":
        # held samples leave a bounded offset; judge by distance to the optimum
        bound = 2.0 * sc.sim.trigger.sigma_x
        converged = summary.u_error <= bound
        criterion = f"u_error_bound = {bound:.9g}"
    else:
        converged = summary.kkt_worst < sc.kkt_tolerance
        criterion = f"kkt_tolerance = {sc.kkt_tolerance:.9g}"
    text = summary.as_text() + f"{criterion}\nconverged = {str(converged).lower()}\n"
    _write(out / "summary.txt", text)
    _write(out / "trigger_report.txt", format_trigger_report(report))
    print(text, end="")
    if not converged:
        print(f"run did not converge ({criterion}; kkt {summary.kkt_worst:.3e}, "
              f"u error {summary.u_error:.3e} V)", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_oracle(args) -> int:
    sc = _resolve_scenario(args)
    if sc.model is not None:
        point = reference_qp_solve(sc.cost, sc.limits, sc.model)
    else:
        t = sc.schedule.activation_time if args.time is None else args.time
        plant = StaticPlant(sc.topology, sc.V_nom)
        plant.set_injections(sc.schedule.injections_at(t, sc.topology))
        point = nonlinear_optimum(plant, sc.resolved_cost(t), sc.limits)
    text = format_kkt_report(point)
    print(text, end="")
    if args.out:
        _write(Path(args.out), text)
    return EXIT_OK if point.residuals.worst < 1e-6 else EXIT_NOT_CONVERGED


def cmd_compare_comm(args) -> int:
    sc = _resolve_scenario(args)
    results = {}
    for mode in ("periodic", "event"):
        run_sc = sc.with_overrides(comm_mode=mode)
        rec, summary, loop = run_case_study(run_sc.study(), run_sc.sim)
        results[mode] = (rec, summary, loop)
    du = float(np.abs(results["event"][0].u[-1] - results["periodic"][0].u[-1]).max())
    dy = float(np.abs(results["event"][0].y[-1] - results["periodic"][0].y[-1]).max())
    bound = args.bound if args.bound is not None else 2.0 * sc.sim.trigger.sigma_x
    lines = [f"terminal_u_difference_inf = {du:.9g}", f"terminal_y_difference_inf = {dy:.9g}",
             f"bound = {bound:.9g}"]
    for mode, (_, summary, loop) in results.items():
        rep = trigger_summary(loop)
        for kind, stats in rep.items():
            lines.append(f"{mode}.{kind}.count = {stats.count}")
            lines.append(f"{mode}.{kind}.violations = {stats.violations}")
        lines.append(f"{mode}.kkt_worst_relative = {summary.kkt_worst:.9g}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        _write(Path(args.out) / "compare_comm.txt", text)
    return EXIT_OK if du <= bound else EXIT_NOT_CONVERGED


def cmd_validate(args) -> int:
    path = Path(args.scenario) if args.scenario else bundled(f"case_{args.case}.scn")
    if path.suffix == ".grid":
        topo = load_topology(path)
        print(f"topology ok: {topo.n} dc-GFM, {topo.m} ac-GFM, {len(topo.lines)} lines")
        return EXIT_OK
    sc = load_scenario(path)
    if sc.topology is not None:
        sc.schedule.validate(sc.topology)
    print(f"scenario ok: case {sc.case}, n = {sc.limits.n}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hvdc-ofo", description="Primal-dual secondary control of dc grids")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sim=True):
        sp.add_argument("scenario", nargs="?", help="scenario file (default: bundled case file)")
        sp.add_argument("--case", choices=["loss", "quadratic", "proportional"],
                        help="use the bundled scenario of this case")
        if sim:
            sp.add_argument("--comm", choices=["continuous", "periodic", "event"])
            sp.add_argument("--plant", choices=["static", "dynamic"])
            sp.add_argument("--duration", type=float)
            sp.add_argument("--k-p", dest="k_p", type=float)
            sp.add_argument("--k-d-i", dest="k_d_i", type=float)
            sp.add_argument("--k-d-v", dest="k_d_v", type=float)
            for name in ("sigma-y", "sigma-x", "sigma-g", "t-min", "t-max"):
                sp.add_argument(f"--{name}", dest=name.replace("-", "_"), type=float)

    r = sub.add_parser("run", help="simulate a scenario")
    common(r)
    r.add_argument("--out", default="out", help="output directory")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="solve the steady-state program only")
    common(o, sim=False)
    o.add_argument("--time", type=float, help="schedule time whose injections are used")
    o.add_argument("--out", help="write the report to this file")
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("compare-comm", help="periodic versus event-triggered communication")
    common(c)
    c.add_argument("--bound", type=float, help="allowed terminal |du| (default 2 sigma_x)")
    c.add_argument("--out", help="output directory")
    c.set_defaults(func=cmd_compare_comm)

    v = sub.add_parser("validate", help="check a topology or scenario file")
    v.add_argument("scenario", nargs="?")
    v.add_argument("--case", choices=["loss", "quadratic", "proportional"])
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, FileNotFoundError, NonConvexProblemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleProblemError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        print(f"certificate: row {exc.constraint}, total violation {exc.violation:.9g}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PlantCollapseError as exc:
        print(f"plant collapse at node {exc.node}: {exc}", file=sys.stderr)
        return EXIT_COLLAPSE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
