"""Verify the minimax diagram on a seeded ensemble and save the aggregate report.

    python3 scripts/run_ensemble.py --count 100 --seed 7 --out results/ensemble.json
"""

import argparse
import json
from pathlib import Path

from robustmax.diagram import ensemble_verify


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--max-states", type=int, default=4)
    ap.add_argument("--max-extremes", type=int, default=4)
    ap.add_argument("--out", default="results/ensemble.json")
    args = ap.parse_args()
    rep = ensemble_verify(args.seed, args.count, args.max_states, args.max_extremes)
    print(rep.summary())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(rep.to_dict(), indent=2))
    return 1 if rep.violations else 0


if __name__ == "__main__":
    raise SystemExit(main())
