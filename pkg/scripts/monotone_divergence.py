"""Weighted step sizes of the monotone iteration on B_{e^-2}.

The steps grow geometrically until the iterate overflows; the chain stays ordered.
"""

import argparse
import warnings

from serrin.lane_emden import SolveConfig, solve
from serrin.special_fn import Params


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-iters", type=int, default=60)
    args = ap.parse_args()
    warnings.simplefilter("ignore", RuntimeWarning)
    _, rep = solve(SolveConfig(Params(3, 0.5), max_iters=args.max_iters))
    print(f"{'n':>3} {'|v_n - v_(n-1)|':>16} {'ratio':>10}")
    for n, d in enumerate(rep.weighted_diff_norms, 1):
        q = rep.contraction_ratios[n - 2] if n > 1 else float("nan")
        print(f"{n:3d} {d:16.6e} {q:10.3e}")
    print(f"monotone chain: {rep.monotone_chain}; converged: {rep.converged}; {rep.message}")


if __name__ == "__main__":
    main()
