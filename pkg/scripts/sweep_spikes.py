"""Information budget versus guessing probability for the spike constructions.

For each key length n and exponent l prints the whole-key guess of the
information-constrained spike next to its I_E/n, and the distance-constrained
spike's guess.  The closed forms hold for any n, so n runs far past enumeration.

    python3 scripts/sweep_spikes.py > spikes.csv
"""

import csv
import sys
from fractions import Fraction

from keysec import extremal as ex

NS = (8, 16, 64, 256, 1024, 4096)
LS = (1, 2, 3, 5, 10, 20)


def main():
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "l", "budget", "info_spike_p1", "info_spike_I_per_bit", "delta_spike_p1", "slack"])
    for n in NS:
        for l in LS:
            if l > n:
                continue
            s1 = ex.theorem1_dist(n, l)
            s2 = ex.theorem2_dist(n, l)
            budget = 2.0 ** -l
            w.writerow([n, l, f"{budget:.17g}", f"{float(s1.p1):.17g}", f"{s1.info_per_bit():.17g}",
                        f"{float(s2.p1):.17g}", f"{budget - s1.info_per_bit():.6g}"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
