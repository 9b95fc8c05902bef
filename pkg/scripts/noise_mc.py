"""Monte Carlo phase statistics under Rabi-frequency and pump-phase noise.

Usage: python3 scripts/noise_mc.py [--T 200] [--gamma-T 0.01 1 10 200] [--n-traj 10000]
"""

import argparse
import math

from jcberry.noise import NoiseProcessParams, mc_coherence, mc_phase_statistics


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, default=200.0)
    ap.add_argument("--r", type=float, default=1 / math.sqrt(2))
    ap.add_argument("--sigma-omega", type=float, default=0.02)
    ap.add_argument("--sigma-phi", type=float, default=0.05)
    ap.add_argument("--gamma-T", type=float, nargs="+", default=[0.01, 1.0, 10.0, 200.0])
    ap.add_argument("--n-traj", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()
    quiet = NoiseProcessParams(1.0, 0.0)
    print("Gamma_T,mean_beta,se_mean,var_beta,se_var,analytic_var,skewness")
    for gT in args.gamma_T:
        pO = NoiseProcessParams(gT / args.T, args.sigma_omega**2)
        st = mc_phase_statistics(pO, quiet, args.r, args.T, n_traj=args.n_traj, seed=args.seed,
                                 workers=args.workers)
        print(f"{gT:g},{st.mean_beta:.6f},{st.se_mean:.2e},{st.var_beta:.4e},{st.se_var:.2e},"
              f"{st.analytic_var:.4e},{st.skewness:+.3f}")
    pO = NoiseProcessParams(10 / args.T, args.sigma_omega**2)
    pP = NoiseProcessParams(10 / args.T, args.sigma_phi**2)
    chk = mc_coherence(pO, pP, args.r, args.T, n_traj=args.n_traj, seed=args.seed, workers=args.workers)
    print(f"# coherence: MC {chk.F_mc:.6f} +- {chk.se:.1e}, formula {chk.F_formula:.6f}")


if __name__ == "__main__":
    main()
