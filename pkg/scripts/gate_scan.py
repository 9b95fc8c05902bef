"""Controlled-phase gate fidelity and conditional phase versus sweep time, couplings and detuning.

Usage: python3 scripts/gate_scan.py [--T 200 1000 8000]
"""

import argparse
import math

import numpy as np

from jcberry.model import circle_sweep
from jcberry.protocols import GateSpec, gate_fidelity, ideal_gate, simulate_gate

VARIANTS = {
    "equal": ((1.0, 1.0), None),
    "lambda2=1.3": ((1.0, 1.3), None),
    "delta=0.2": ((1.0, 1.0), (0.2, 0.2)),
    "three qubits": ((1.0, 1.0, 1.0), None),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, nargs="+", default=[200.0, 1000.0, 8000.0])
    ap.add_argument("--r", type=float, default=1 / math.sqrt(2))
    args = ap.parse_args()
    beta = -2 * math.pi * args.r**2
    print("lambda_T,variant,infidelity,conditional_phase,max_offdiag,leakage")
    for T in args.T:
        for name, (lams, deltas) in VARIANTS.items():
            g = simulate_gate(GateSpec(circle_sweep(args.r, T), lams, deltas))
            off = np.max(np.abs(g.U - np.diag(np.diag(g.U))))
            infid = 1 - gate_fidelity(g.U, ideal_gate(len(lams), beta))
            print(f"{T:g},{name},{infid:.3e},{g.conditional_phase:.6f},{off:.1e},{g.leakage:.1e}")


if __name__ == "__main__":
    main()
