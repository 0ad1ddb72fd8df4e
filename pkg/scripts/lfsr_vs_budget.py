"""Seed recovery from known keystream bits, width by width, against a criterion budget.

    python3 scripts/lfsr_vs_budget.py --eps 2^-10 --n 1000
"""

import argparse

import numpy as np

from keysec import guarantees as gu
from keysec import stream_cipher as sc
from keysec.cli import parse_eps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=parse_eps, default=2.0 ** -10)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    print(f"{'width':>5}  {'specs':>5}  {'unique':>6}  {'H(stream)':>9}  {'p1 conv':>10}  {'p1 under delta_E':>16}")
    bound = gu.table1_report(gu.CriterionSpec("delta_E", args.eps, args.n)).rows[0].value
    for w in range(4, 13, 2):
        specs = sc.primitive_specs(w)
        unique = 0
        for spec in specs:
            seed = int(rng.integers(1, 1 << w))
            ks = sc.generate_keystream(spec, seed, 3 * w)
            sol = sc.kpa_recover_seed(spec, sc.KpaInstance.consecutive(ks, w, w))
            unique += sol.unique and sol.seeds == (seed,)
        h = sc.shannon_limit_check(specs[0], 2 * w)["entropy"]
        print(f"{w:>5}  {len(specs):>5}  {unique:>6}  {h:>9.4f}  {2.0 ** -w:>10.3g}  {bound:>16.3g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
