#!/usr/bin/env python3
"""Violin + box plots of the paired/random score distributions.

Reads every <metric>.json next to this script and writes text.png and
visual.png (2x2 grids). Needs matplotlib.
"""
import json
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = pathlib.Path(__file__).resolve().parent
GROUPS = {
    "text": ["tfidf", "wmd", "use", "sbert"],
    "visual": ["hi", "sift", "lpips_conv", "lpips_transformer"],
}


def draw(name, metrics):
    fig, axes = plt.subplots(2, 2, figsize=(8, 7))
    for ax, metric in zip(axes.flat, metrics):
        path = HERE / f"{metric}.json"
        if not path.exists():
            ax.set_title(f"{metric} (skipped)")
            ax.axis("off")
            continue
        d = json.loads(path.read_text())
        data = [d["paired"], d["random"]]
        ax.violinplot(data, showextrema=False)
        ax.boxplot(data, widths=0.15)
        ax.set_xticks([1, 2], ["paired", "random"])
        arrow = "lower = closer" if d["orientation"] == "lower_similar" else "higher = closer"
        ax.set_title(f"{metric} ({arrow})")
    fig.tight_layout()
    fig.savefig(HERE / f"{name}.png", dpi=150)


if __name__ == "__main__":
    for name, metrics in GROUPS.items():
        draw(name, metrics)
