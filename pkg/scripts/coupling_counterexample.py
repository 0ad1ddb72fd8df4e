"""Same marginals, different disagreement: maximal versus independent couplings.

Also prints the decomposition figures for a spike against uniform, where the
minimal-weight split leaves a P' that is not maximally far from uniform.
"""

from keysec import interpret as it
from keysec import probcore as pc


def main():
    print(f"{'N':>4}  {'delta':>6}  {'maximal':>8}  {'independent':>11}")
    for n in (1, 2, 3, 4):
        u = pc.ProbVec.uniform(n)
        print(f"{u.N:>4}  {pc.stat_distance(u, u):>6.3f}  {it.maximal_coupling(u, u).pr_neq():>8.4f}"
              f"  {it.independent_coupling(u, u).pr_neq():>11.4f}")

    p = pc.ProbVec(2, [0.5, 1 / 6, 1 / 6, 1 / 6])
    q = pc.ProbVec.uniform(2)
    r = it.eq12_decomposition_test(p, q)
    print()
    print(f"spike vs uniform: delta={r.delta:.4f}, solved P' valid={r.valid_pprime}, "
          f"eps_min={r.eps_min:.4f}, P'={tuple(round(x, 4) for x in r.pprime_min)}, "
          f"delta(P', Q)={r.delta_pprime_q:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
