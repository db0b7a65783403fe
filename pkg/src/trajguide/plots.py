"""Figure rendering for runs, ablations and sweeps.

Charts are written as PNG files next to the delimited data they
visualize; nothing here feeds back into the engine.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import Trajectory


def energy_vs_step(rows, path) -> Path:
    """Line chart of the per-step energy breakdown.

    rows: dicts with step, e_control, e_movement, e_total (StepRecord
    instances work too).
    """
    def pick(r, k):
        return float(r[k]) if isinstance(r, dict) else float(getattr(r, k))

    steps = [pick(r, "step") for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    for key, style in (("e_control", "-"), ("e_movement", "--"), ("e_total", "-")):
        ax.plot(steps, [pick(r, key) for r in rows], style, label=key,
                linewidth=2 if key == "e_total" else 1.2)
    ax.set_xlabel("step")
    ax.set_ylabel("energy")
    ax.set_title("energy vs step")
    ax.legend()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def scene_overlay(image: np.ndarray, trajectories, scale: int, path,
                  masks: dict | None = None) -> Path:
    """Rendered image with trajectories (and optional masks) drawn on top."""
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(image, cmap="gray", vmin=0.0, vmax=max(1.0, float(image.max())))
    cycle = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for t in trajectories:
        color = cycle[t.token_index % len(cycle)]
        for poly in t.scaled(float(scale)).polylines:
            pts = np.array(poly)
            ax.plot(pts[:, 1], pts[:, 0], color=color, linewidth=2.0,
                    label=f"token {t.token_index}")
        if masks is not None and t.token_index in masks:
            ax.contour(masks[t.token_index].astype(float), levels=[0.5],
                       colors=[color], linewidths=0.8, linestyles="dotted")
    handles, labels = ax.get_legend_handles_labels()
    seen = dict(zip(labels, handles))
    if seen:
        ax.legend(seen.values(), seen.keys(), loc="lower right", fontsize=8)
    ax.set_title("trajectories over render")
    ax.set_axis_off()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def attention_heatmaps(attention_values: np.ndarray, dims: tuple[int, int],
                       token_indices, path) -> Path:
    """One heatmap per requested token from an (H*W, m) attention matrix."""
    token_indices = list(token_indices)
    fig, axes = plt.subplots(1, max(1, len(token_indices)),
                             figsize=(3 * max(1, len(token_indices)), 3))
    if len(token_indices) <= 1:
        axes = [axes]
    for ax, tok in zip(axes, token_indices):
        ax.imshow(attention_values[:, tok].reshape(dims), cmap="viridis")
        ax.set_title(f"token {tok}")
        ax.set_axis_off()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def ablation_chart(labels, means, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(labels))
    ax.bar(x, means, color="tab:blue")
    ax.set_xticks(x, labels, rotation=20, ha="right")
    ax.set_ylabel("mean DTL")
    ax.set_title("ablation: mean DTL by variant")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def sweep_chart(lams, means, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(lams))
    ax.plot(x, means, "o-")
    ax.set_xticks(x, [f"{v:g}" for v in lams])
    ax.set_xlabel("lambda")
    ax.set_ylabel("mean DTL")
    ax.set_title("lambda sweep")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def render_run_plots(run_dir) -> list:
    """Render figures from a written run directory's artifacts."""
    run = Path(run_dir)
    cfg_path = run / "config.json"
    csv_path = run / "energies.csv"
    img_path = run / "image.png"
    for p in (cfg_path, csv_path, img_path):
        if not p.is_file():
            raise FileNotFoundError(f"not a run directory (missing {p.name}): {run}")

    with csv_path.open() as fh:
        rows = list(csv.DictReader(fh))
    written = [energy_vs_step(rows, run / "energy_vs_step.png")]

    cfg = json.loads(cfg_path.read_text())
    scale = int(cfg.get("model", {}).get("render_scale", 8))
    trajectories = [Trajectory.from_json(t) for t in cfg.get("trajectories", [])]

    from PIL import Image

    image = np.asarray(Image.open(img_path), dtype=float) / 255.0
    masks = {}
    for t in trajectories:
        mp = run / f"mask_{t.token_index}.png"
        if mp.is_file():
            masks[t.token_index] = np.asarray(Image.open(mp)) > 127
    written.append(scene_overlay(image, trajectories, scale,
                                 run / "overlay.png", masks))
    return written
