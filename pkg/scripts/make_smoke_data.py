"""Regenerate the 50-row synthetic regression smoke file shipped in data/."""

from pathlib import Path

from entrisk.dataio import write_csv
from entrisk.problems import synth_regression

OUT = Path(__file__).resolve().parents[1] / "data" / "regression_smoke.csv"

if __name__ == "__main__":
    OUT.parent.mkdir(exist_ok=True)
    write_csv(synth_regression(50, 8, 0.55, seed=2024), OUT)
    print(f"wrote {OUT}")
