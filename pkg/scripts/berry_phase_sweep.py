"""Loop phase and leakage of the dark-state circle sweep versus sweep time.

Usage: python3 scripts/berry_phase_sweep.py [--r 0.7071] [--T 10 20 40 100 400]
"""

import argparse
import math

from jcberry.geometry import berry_line_integral
from jcberry.hilbert import System, fock_dim_for
from jcberry.model import ModelParams, PumpParams, circle_sweep, dark_state
from jcberry.propagator import evolve_unitary


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--r", type=float, default=1 / math.sqrt(2))
    ap.add_argument("--T", type=float, nargs="+", default=[10, 20, 40, 100, 200, 400])
    args = ap.parse_args()
    m = ModelParams(1.0)
    s = System.single(fock_dim_for(args.r) + 4)
    psi0 = dark_state(m, PumpParams(args.r, 0.0), s.fock)
    print(f"# r = {args.r:.6g}, ideal phase {-2 * math.pi * args.r**2:.6f}")
    print("lambda_T,overlap_phase,line_integral,leakage")
    for T in args.T:
        res = evolve_unitary(circle_sweep(args.r, T), m, psi0, s)
        li = berry_line_integral(res.path().closed_by_chord())
        print(f"{T:g},{res.accumulated_phase:.6f},{li:.6f},{res.leakage[-1]:.4e}")


if __name__ == "__main__":
    main()
