#!/usr/bin/env python3
"""Plot mean latency against arrival rate from a `pisim sweep` CSV."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", help="NAME_sweep.csv written by pisim sweep")
    ap.add_argument("-o", "--output", default="sweep.png")
    ap.add_argument("--linear", action="store_true", help="linear latency axis")
    args = ap.parse_args()

    df = pd.read_csv(args.csv)
    df = df[~df["infeasible"]]
    wide = df.pivot_table(
        index=["protocol", "client_capacity", "arrival_rate"], columns="statistic", values="value"
    ).reset_index()

    fig, ax = plt.subplots(figsize=(6, 4))
    for (proto, cap), g in wide.groupby(["protocol", "client_capacity"]):
        g = g.sort_values("arrival_rate")
        label = f"{proto.upper()} {cap / 1e9:g} GB"
        yerr = g["ci95_half_width"] if "ci95_half_width" in g else None
        ax.errorbar(g["arrival_rate"], g["mean_latency"], yerr=yerr, marker="o", capsize=3, label=label)

    ax.set_xscale("log")
    if not args.linear:
        ax.set_yscale("log")
    ax.set_xlabel("arrival rate (requests/s)")
    ax.set_ylabel("mean latency (s)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
