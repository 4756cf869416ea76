"""Report figures: blend-variant preview strips, PR curves, F-measure bars."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .imaging import RleMask, load_image, rle_to_mask  # noqa: E402


def _finish(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def preview_group(manifest: dict, dataset_dir, group_id: str, out_path) -> Path:
    """One column per blend variant of a scene plus a column showing the gap mask."""
    members = [im for im in manifest["images"] if im["group_id"] == group_id]
    if not members:
        raise KeyError(f"group {group_id!r} not in manifest")
    dataset_dir = Path(dataset_dir)
    n = len(members) + 1
    fig, axes = plt.subplots(1, n, figsize=(2.6 * n, 2.6), squeeze=False)
    for ax, im in zip(axes[0], members):
        ax.imshow(load_image(dataset_dir / im["file"]))
        ax.set_title(im["blend_method"], fontsize=10)
        ax.set_axis_off()
    gap = rle_to_mask(RleMask.from_json(members[0]["gap"]))
    axes[0][-1].imshow(gap, cmap="gray", vmin=0, vmax=1)
    axes[0][-1].set_title("gap mask", fontsize=10)
    axes[0][-1].set_axis_off()
    return _finish(fig, out_path)


def plot_pr_curves(report, out_path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    for cat, (recall, precision) in sorted(report.curves.items()):
        if recall.size:
            ax.step(np.concatenate(([0], recall)), np.concatenate(([1], precision)), where="post",
                    label=f"{cat} ({report.ap[cat]:.3f})")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_title(f"AP@{report.iou_thresh:g}  mAP={report.mean_ap:.3f}")
    if report.curves:
        ax.legend(fontsize=7, loc="lower left")
    return _finish(fig, out_path)


def plot_fmeasure(rows: list[tuple[str, float, float, float]], out_path) -> Path:
    """Bars of precision/recall/F per scene; ``rows`` are (scene, P, R, F)."""
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(rows) + 2), 3.5))
    x = np.arange(len(rows))
    for k, (label, off) in enumerate((("precision", -0.25), ("recall", 0.0), ("F", 0.25))):
        ax.bar(x + off, [r[k + 1] for r in rows], width=0.25, label=label)
    ax.set_xticks(x, [r[0] for r in rows], rotation=30, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    return _finish(fig, out_path)
