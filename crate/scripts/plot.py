"""Plots the CSVs written by `mhp`.

    python scripts/plot.py curve run/curve.csv curve.png
    python scripts/plot.py scatter scatter.csv scatter.png
    python scripts/plot.py hops hops.csv hops.png
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def curve(df, ax):
    ax.plot(df["iteration"], df["mean_train_tts_h"], label="training episodes")
    ev = df.dropna(subset=["eval_tts_h"])
    ax.plot(ev["iteration"], ev["eval_tts_h"], "o-", label="evaluation")
    ax.set_xlabel("iteration")
    ax.set_ylabel("TTS (h)")
    ax.legend()


def scatter(df, ax):
    r = df["reward"].corr(df["tts_h"])
    ax.scatter(df["reward"], df["tts_h"])
    ax.set_xlabel("episode reward")
    ax.set_ylabel("TTS (h)")
    ax.set_title(f"r = {r:.3f}")


def hops(df, ax):
    ax.errorbar(df["hop"], df["tts_mean_h"], yerr=df["tts_std_h"], fmt="o-", capsize=4)
    ax.set_xticks(df["hop"])
    ax.set_xlabel("upstream hops")
    ax.set_ylabel("TTS (h)")
    ax.set_title(df["scenario"].iloc[0])


def main():
    if len(sys.argv) != 4 or sys.argv[1] not in ("curve", "scatter", "hops"):
        sys.exit(__doc__)
    kind, src, dst = sys.argv[1:]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    globals()[kind](pd.read_csv(src), ax)
    fig.tight_layout()
    fig.savefig(dst, dpi=150)


if __name__ == "__main__":
    main()
