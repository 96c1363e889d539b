"""Rounds-to-tolerance of GaBP against log(1/eps) on a loopy 10-node system.

Prints a CSV table and the least-squares fit of rounds on log(1/eps), with
the walk-summability radius for reference.
"""
import argparse

import numpy as np

from gabpkf import gabp
from gabpkf.problems import cycle_system


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--coupling", type=float, default=0.45)
    args = ap.parse_args()

    a = cycle_system(args.n, args.coupling)
    b = np.arange(1.0, args.n + 1)
    rho = gabp.spectral_radius_check(a).radius
    eps = 10.0 ** -np.arange(1, 13)
    rounds = np.array([gabp.solve(a, b, tol=e).rounds for e in eps])
    print("eps,log_inv_eps,rounds")
    for e, r in zip(eps, rounds):
        print(f"{e:.0e},{np.log(1 / e):.4f},{r}")
    x = np.log(1 / eps)
    slope, icpt = np.polyfit(x, rounds, 1)
    r2 = 1 - np.sum((rounds - slope * x - icpt) ** 2) / np.sum((rounds - rounds.mean()) ** 2)
    print(f"# rho={rho:.4f} slope={slope:.3f} rounds per unit log(1/eps), R^2={r2:.4f}")


if __name__ == "__main__":
    main()
