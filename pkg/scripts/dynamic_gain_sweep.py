"""Closed loop on the dynamic plant for a range of gain scalings.

Reports terminal KKT residual and distance to the optimum, or the node
where the ac-GFM voltage collapsed.
"""

import argparse

from hvdc_ofo.grid import PlantCollapseError
from hvdc_ofo.scenario import bundled, load_scenario
from hvdc_ofo.sim import run_case_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--case", default="proportional")
    ap.add_argument("--scales", type=float, nargs="+", default=[1.0, 0.25, 0.1])
    ap.add_argument("--duration", type=float, default=40.0)
    args = ap.parse_args()
    base = load_scenario(bundled(f"case_{args.case}.scn")).with_overrides(plant="dynamic",
                                                                           duration=args.duration)
    for f in args.scales:
        sc = base.with_overrides(gains=base.gains.scaled(f))
        try:
            _, s, _ = run_case_study(sc.study(), sc.sim)
            print(f"gain x{f:g}: kkt {s.kkt_worst:.2e}, |u-u*| {s.u_error:.1f} V")
        except PlantCollapseError as exc:
            print(f"gain x{f:g}: collapse at node {exc.node}")


if __name__ == "__main__":
    main()
