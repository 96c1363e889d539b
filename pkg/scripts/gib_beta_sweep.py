"""Fixed points of the scalar GIB iteration across beta.

Prints A, S_xi and the two information terms at each fixed point; below
the critical beta the projection collapses to zero.
"""
import argparse

import numpy as np

from gabpkf import gib


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rho", type=float, default=0.5, help="correlation of X and Y")
    ap.add_argument("--betas", type=float, nargs="+", default=[0.5, 1, 2, 3, 4, 4.5, 5, 8, 16, 64])
    args = ap.parse_args()
    print("beta,rounds,A,Sigma_xi,I_XT,I_TY")
    for beta in args.betas:
        problem = gib.GibProblem([[1.0]], [[1.0]], [[args.rho]], beta)
        state, rounds = gib.gib_fixed_point(problem, gib.GibState([[1.0]], [[1.0]]), max_rounds=20_000)
        ic, ir = gib.information_terms(problem, state)
        print(f"{beta},{rounds},{state.a[0, 0]:.6g},{state.sigma_xi[0, 0]:.6g},{ic:.6g},{ir:.6g}")
    print(f"# critical beta for rho={args.rho}: {1 / (args.rho ** 2):.4g}")


if __name__ == "__main__":
    main()
