"""Second-order coefficient k and L^1(B_1) mass along the scaling family u_l."""

import argparse
import math

from serrin.lane_emden import SolveConfig, family_sweep, solve
from serrin.special_fn import Params


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--radius", type=float, default=1e-2)
    ap.add_argument("--l", type=float, nargs="+",
                    default=[1.0, math.e, math.e ** 2, math.e ** 3, math.e ** 5])
    args = ap.parse_args()
    p = Params(3, 0.5)
    cfg = SolveConfig(p, ball_radius=args.radius, method="newton")
    u, rep = solve(cfg)
    if not rep.converged:
        raise SystemExit(f"base solve failed: {rep.message}")
    print(f"K_s m0 = {p.K_s * p.m0:.4f}")
    print(f"{'l':>10} {'ln l':>6} {'k':>12} {'fit rms':>10} {'L1(B_1)':>12}")
    for e in sorted(family_sweep(cfg, args.l, u=u), key=lambda e: e.l):
        print(f"{e.l:10.4f} {math.log(e.l):6.2f} {e.k:12.5f} {e.fit_quality:10.3e} {e.l1_norm:12.6f}")


if __name__ == "__main__":
    main()
