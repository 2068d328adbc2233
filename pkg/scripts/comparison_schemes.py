"""Coupled jump-free vs jumping variance under the two Euler-type schemes.

The drift-implicit square-root step is monotone in the state, so the
ordering survives discretisation; full truncation can swap two coupled
paths once both sit next to zero.  Prints violation counts per step size.
"""

import argparse

from hawkesvol.mc_harness import Experiment, run_comparison
from hawkesvol.model import TimeGrid, default_params


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    m, h, law = default_params()
    print(f"{'scheme':<10} {'steps':>6} {'violating':>10} {'max excess':>12}")
    for steps in (100, 1000):
        for scheme in ("implicit", "euler"):
            e = Experiment("comparison", m, h, law, args.paths, args.seed, TimeGrid.uniform(m.horizon, steps),
                           options=(("scheme", scheme),))
            r = run_comparison(e)
            print(f"{scheme:<10} {steps:>6} {r.extra['violating_paths']:>10} {r.extra['max_excess']:>12.3e}")


if __name__ == "__main__":
    main()
