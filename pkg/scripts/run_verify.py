"""Run a verification suite and write its JSON report.

    python3 scripts/run_verify.py --suite quick --seed 1 --out out/
"""

import argparse
import logging
import sys
from pathlib import Path

from hawkesvol.io import write_json
from hawkesvol.mc_harness import SUITE_PATHS, format_table, run_suite, suite_json


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--suite", choices=sorted(SUITE_PATHS), default="quick")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("out"))
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    reports = run_suite(args.suite, seed=args.seed, workers=args.workers)
    doc = suite_json(args.suite, args.seed, reports)
    write_json(args.out / f"verify_{args.suite}.json", doc)
    print(format_table(reports))
    sys.exit(0 if doc["all_pass"] else 1)


if __name__ == "__main__":
    main()
