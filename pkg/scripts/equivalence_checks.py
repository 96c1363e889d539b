"""Numerical checks of the four equivalences on seeded random instances.

1. Kalman covariance as two Schur steps (and with GaBP in the inner solve).
2. GIB at beta = 1 as a Kalman round.
3. GIB for beta > 1 as a Kalman round plus a weighted average; also shows
   how far the precision-space noise update sits from that average.
4. Affine scaling projector and its Kalman-regularised form.
"""
import argparse

import numpy as np

from gabpkf import affine, gib, kalman
from gabpkf.affine import LpProblem
from gabpkf.problems import bounded_lp, gib_case, kalman_case


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    w1 = w1g = 0.0
    for _ in range(args.trials):
        model, p = kalman_case(rng, int(rng.integers(1, 6)), int(rng.integers(1, 6)))
        ref = kalman._classical_step(p, model)[1]
        w1 = max(w1, np.max(np.abs(kalman.pk_via_two_schur(p, model) - ref)))
        w1g = max(w1g, np.max(np.abs(kalman.pk_via_gabp(p, model) - ref)))
    print(f"kalman: two-Schur {w1:.2e}, GaBP {w1g:.2e}")

    w2 = 0.0
    for _ in range(args.trials):
        problem, state = gib_case(rng, int(rng.integers(1, 4)))
        model, p_prev = gib.kalman_from_gib(problem, state)
        w2 = max(w2, np.max(np.abs(kalman.pk_via_two_schur(p_prev, model)
                                   - gib.gib_iterate(problem, state).sigma_xi)))
    print(f"gib beta=1 vs kalman: {w2:.2e}")

    print("beta,max|modified-kalman - weighted average|,max|precision form - weighted average|")
    for beta in (1.0, 1.5, 2.0, 5.0):
        w3 = gap = 0.0
        for _ in range(args.trials // 4):
            problem, state = gib_case(rng, int(rng.integers(1, 4)), beta)
            st, sty = gib.t_covariances(problem, state)
            blend = beta * sty + (1 - beta) * st
            w3 = max(w3, np.max(np.abs(gib.gib_via_modified_kalman(problem, state).sigma_xi - blend)))
            gap = max(gap, np.max(np.abs(gib.xi_update(beta, st, sty) - blend)))
        print(f"{beta},{w3:.2e},{gap:.3e}")

    w4 = w4r = 0.0
    for _ in range(args.trials):
        a, b, c, x0 = bounded_lp(rng, int(rng.integers(1, 4)), 6)
        lp = LpProblem(a, b, c)
        proj = affine.projection_matrix(lp, x0)
        w4 = max(w4, np.max(np.abs(proj @ proj - proj)), np.max(np.abs(proj @ np.diag(x0) @ a.T)))
        model, p_prev = affine.kalman_params_from_lp(lp, affine.AffineState(x0))
        w4r = max(w4r, np.max(np.abs(kalman.pk_via_two_schur(p_prev, model) - proj)))
    print(f"affine projector laws {w4:.2e}; Kalman form differs from projector by up to {w4r:.3f}")


if __name__ == "__main__":
    main()
