#!/usr/bin/env python3
"""Regenerate tracking-error figures from results.csv files.

Consumes the CSV schema written by ``dgdtrack run`` / ``dgdtrack sweep``
(columns t, rms_te, mean_fpte, mean_bias, bound, mean_fp_residual, n_runs)
and plots RMS tracking error versus the time index, one curve per input
file, with the certified bound overlaid when requested.

    python scripts/plot_tracking.py out/E=1/results.csv out/E=5/results.csv \
        --labels "E=1" "E=5" --with-bound --out tracking.png
"""

import argparse
import csv
import sys


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csvs", nargs="+", help="results.csv files to plot")
    parser.add_argument("--labels", nargs="*", help="one legend label per file")
    parser.add_argument("--with-bound", action="store_true",
                        help="overlay the certified bound column")
    parser.add_argument("--metric", default="rms_te",
                        choices=("rms_te", "mean_fpte", "mean_bias"))
    parser.add_argument("--out", default="tracking.png")
    args = parser.parse_args(argv)

    if args.labels and len(args.labels) != len(args.csvs):
        parser.error("need as many labels as csv files")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for idx, path in enumerate(args.csvs):
        label = args.labels[idx] if args.labels else path
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        ts = [int(r["t"]) for r in rows]
        ax.plot(ts, [float(r[args.metric]) for r in rows], label=label)
        if args.with_bound:
            pairs = [(t, float(r["bound"])) for t, r in zip(ts, rows)
                     if float(r["bound"]) == float(r["bound"])]  # drop NaN rows
            if pairs:
                ax.plot(*zip(*pairs), linestyle="--", alpha=0.6,
                        label=f"{label} bound")
    ax.set_xlabel("time index t")
    ax.set_ylabel(args.metric)
    ax.set_yscale("log")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
