"""Tuned desk-scale method comparison (multiclass CE + partial AUC).

Equivalent CLI: entrisk bench-suite --out out/bench
"""

import sys

from entrisk.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out/bench"
    raise SystemExit(main(["bench-suite", "--out", out]))
