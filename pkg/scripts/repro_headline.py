"""Run every acceptance check and write a JSON summary.

    python3 scripts/repro_headline.py [summary.json]
"""

import json
import sys

from keysec.acceptance import run_all


def main(path=None):
    results = run_all()
    for r in results:
        print(r.line)
    summary = {"passed": sum(r.passed for r in results), "total": len(results),
               "criteria": [r.to_json() for r in results]}
    if path:
        with open(path, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    return 0 if summary["passed"] == summary["total"] else 1


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:2]))
