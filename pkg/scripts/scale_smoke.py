"""GaBP on large sparse tridiagonal systems; prints size, rounds, time, residual."""
import argparse
import time

import numpy as np

from gabpkf import gabp
from gabpkf.problems import tridiagonal


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000, 1_000_000])
    ap.add_argument("--diag", type=float, default=2.5)
    args = ap.parse_args()
    print("n,rounds,converged,seconds,max_residual")
    for n in args.sizes:
        a = tridiagonal(n, diag=args.diag)
        b = np.ones(n)
        t0 = time.perf_counter()
        rep = gabp.solve(a, b)
        dt = time.perf_counter() - t0
        print(f"{n},{rep.rounds},{rep.converged},{dt:.3f},{np.max(np.abs(a @ rep.solution - b)):.2e}")


if __name__ == "__main__":
    main()
