"""Exponential-moment bound against Monte Carlo on a ladder of exponents.

    python3 scripts/bound_ladder.py --paths 50000 --law gamma
"""

import argparse

from hawkesvol.affine_odes import compute_c_l
from hawkesvol.mc_harness import Experiment, format_table, run_exp_moment
from hawkesvol.model import TimeGrid, default_params, example_laws


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--law", choices=sorted(example_laws()), default="exponential")
    args = p.parse_args()

    m, h, _ = default_params()
    law = example_laws()[args.law]
    c_l = compute_c_l(m, h, law)
    exp = Experiment("exp-moment", m, h, law, args.paths, args.seed, TimeGrid.uniform(m.horizon, args.steps))
    reports = [run_exp_moment(f * c_l, exp) for f in (0.0, 0.1, 0.3, 0.5, 0.7, 0.9)]
    print(f"c_l = {c_l:.10g}")
    print(format_table(reports))


if __name__ == "__main__":
    main()
