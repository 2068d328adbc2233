"""c_s and c_l for the three example jump laws over a sweep of branching ratios."""

import argparse

from hawkesvol.affine_odes import compute_c_l, compute_c_s
from hawkesvol.model import HawkesParams, default_params, example_laws


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--beta", type=float, default=2.0)
    args = p.parse_args()

    m, _, _ = default_params()
    print(f"{'law':<12} {'alpha/beta':>10} {'c_s':>14} {'c_l':>14} {'cap':>10}")
    for ratio in (0.1, 0.3, 0.5, 0.7, 0.9):
        h = HawkesParams(1.0, ratio * args.beta, args.beta)
        for name, law in example_laws().items():
            print(f"{name:<12} {ratio:>10.2f} {compute_c_s(m, h, law):>14.8g} "
                  f"{compute_c_l(m, h, law):>14.8g} {m.c_cap:>10.6g}")


if __name__ == "__main__":
    main()
