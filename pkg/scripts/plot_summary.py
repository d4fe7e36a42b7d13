"""Companion plotting script: renders metric curves from a summary.csv.

The core toolchain stays plotting-free; this consumes its output instead.

    python scripts/plot_summary.py out/dual_ratio/summary.csv obj_gap curves.png
"""

import csv
import sys
from collections import defaultdict


def load_summary(path, metric):
    curves = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["metric"] == metric:
                curves[row["config_id"]].append((int(row["iteration"]),
                                                 float(row["mean"]), float(row["std"])))
    return {cid: sorted(points) for cid, points in curves.items()}


def main(path, metric, out_png):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curves = load_summary(path, metric)
    if not curves:
        print(f"no rows with metric {metric!r} in {path}")
        return 1
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for cid, points in sorted(curves.items()):
        its = [p[0] for p in points]
        means = [p[1] for p in points]
        ax.plot(its, means, label=cid)
    ax.set_xlabel("iteration")
    ax.set_ylabel(metric)
    ax.set_yscale("log")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    print(f"wrote {out_png}")
    return 0


if __name__ == "__main__":
    if len(sys.argv) != 4:
        print(__doc__)
        raise SystemExit(2)
    raise SystemExit(main(*sys.argv[1:]))
