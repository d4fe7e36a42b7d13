"""Dual-only mirror-vs-SGD error-ratio grid at the published settings.

Runs the full (mu, sigma) grid for 10^6 steps per cell and writes per-run
metrics plus ratio_summary.csv.  Equivalent CLI:

    entrisk dual-sim --out out/dual_ratio
"""

import sys

from entrisk.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out/dual_ratio"
    raise SystemExit(main(["dual-sim", "--out", out]))
