"""Curvature of the substituted objective at each case optimum.

The eigenvalues of H bound the primal rates K_p * lambda(H): the largest
sets the periodic-sampling limit T * K_p * lambda_max < 2 and how fast the
controller is relative to the converter voltage lag; the smallest sets how
slowly the weakly observable common voltage level settles.
"""

import argparse

import numpy as np

from hvdc_ofo.scenario import bundled, load_scenario
from hvdc_ofo.sim import StaticPlant, _linear_model, segment_optima


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--period", type=float, default=0.01)
    ap.add_argument("--tau", type=float, default=0.05)
    args = ap.parse_args()
    print(f"{'case':13s}{'t0':>5s}{'lam_min':>11s}{'lam_max':>11s}{'Kp*lmin':>10s}{'Kp*lmax':>10s}"
          f"{'T*Kp*lmax':>11s}{'tau*Kp*lmax':>13s}")
    for case in ("loss", "quadratic", "proportional"):
        sc = load_scenario(bundled(f"case_{case}.scn"))
        study = sc.study()
        plant = StaticPlant(study.topology, sc.V_nom)
        k_p = float(study.gains.K_p.max())
        for t0, point in segment_optima(study):
            plant.set_injections(study.schedule.injections_at(t0, study.topology))
            H, _, _ = study.cost.reduced(_linear_model(plant, plant.evaluate(point.u)))
            lam = np.linalg.eigvalsh(H)
            print(f"{case:13s}{t0:5.0f}{lam[0]:11.2e}{lam[-1]:11.2e}{k_p * lam[0]:10.2e}"
                  f"{k_p * lam[-1]:10.1f}{args.period * k_p * lam[-1]:11.2f}{args.tau * k_p * lam[-1]:13.2f}")


if __name__ == "__main__":
    main()
