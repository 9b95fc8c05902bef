"""Closed-form visibility and phase against full master-equation Ramsey runs on a rate grid.

Usage: python3 scripts/dissipation_grid.py [--T 1000] [--values 0 0.01 0.05]
"""

import argparse
import itertools
import math

from jcberry.dissipation import closed_form_rho_T
from jcberry.model import circle_sweep
from jcberry.propagator import DissipationRates
from jcberry.protocols import RamseyConfig, run_ramsey


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, default=1000.0)
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--M", type=int, default=50)
    ap.add_argument("--fock", type=int, default=10)
    ap.add_argument("--r", type=float, nargs="+", default=[0.3, 1 / math.sqrt(2)])
    ap.add_argument("--values", type=float, nargs="+", default=[0.0, 0.01, 0.05])
    args = ap.parse_args()
    print("r,gamma_T,kappa_g_T,kappa_f_T,nu_sim,nu_closed,beta_sim,beta_closed")
    for r in args.r:
        for g, kg, kf in itertools.product(args.values, repeat=3):
            R = DissipationRates.from_products(args.T, g, kg, kf)
            sch = circle_sweep(r, args.T, steps=args.steps, kicks="uniform", M=args.M)
            res = run_ramsey(RamseyConfig(sch, rates=R, fock_dim=args.fock))
            c = closed_form_rho_T(r, 2 * math.pi / args.T, args.T, R)
            print(f"{r:.4f},{g},{kg},{kf},{res.visibility:.6f},{c.nu:.6f},{res.beta:.6f},{c.beta:.6f}")


if __name__ == "__main__":
    main()
