"""Static result figures. Uses the non-interactive Agg backend."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Ellipse  # noqa: E402
from PIL import Image  # noqa: E402

WRAP_TINT = np.array([230, 40, 40], dtype=float)
CONTAIN_TINT = np.array([40, 90, 230], dtype=float)


def overlay(rgb, labels, alpha: float = 0.55) -> np.ndarray:
    """Tint wrap-grasp pixels red and contain pixels blue; unlabeled pixels are untouched."""
    out = np.asarray(rgb).astype(float).copy()
    labels = np.asarray(labels) > 0
    for c, tint in enumerate((WRAP_TINT, CONTAIN_TINT)):
        m = labels[..., c]
        out[m] = (1 - alpha) * out[m] + alpha * tint
    out = np.where(labels.any(axis=-1, keepdims=True), np.rint(out), np.asarray(rgb, dtype=float))
    return out.astype(np.uint8)


def save_overlay_grid(images, labels, path, scale: int = 4) -> Path:
    """Input images on top, tinted predictions below, one column per sample."""
    top = np.concatenate(list(images), axis=1)
    bottom = np.concatenate([overlay(i, l) for i, l in zip(images, labels)], axis=1)
    grid = np.concatenate([top, bottom], axis=0)
    img = Image.fromarray(grid)
    img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path)
    return path


def _cov_ellipse(ax, center, cov, n_std=2.0, **kw):
    vals, vecs = np.linalg.eigh(cov)
    vals = np.clip(vals, 0.0, None)
    angle = np.degrees(np.arctan2(vecs[1, 1], vecs[0, 1]))
    w, h = 2 * n_std * np.sqrt(vals[::-1])
    ax.add_patch(Ellipse(center, w, h, angle=angle, fill=False, **kw))


def error_ellipses(plot_rows, path, cells=(3, 3)) -> Path:
    """Final positions grouped into workspace cells, with 2-sigma error ellipses.

    ``plot_rows`` carry ``x, y`` (true cup position) and ``err_x, err_y``.
    """
    xs = np.array([r["x"] for r in plot_rows], dtype=float)
    ys = np.array([r["y"] for r in plot_rows], dtype=float)
    ex = np.array([r["err_x"] for r in plot_rows], dtype=float)
    ey = np.array([r["err_y"] for r in plot_rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 5))
    if len(xs):
        ax.scatter(xs, ys, s=8, c="k", marker="x", label="cup")
        ax.scatter(xs + ex, ys + ey, s=6, c="tab:red", alpha=0.5, label="end effector")
        bx = np.linspace(xs.min(), xs.max() + 1e-9, cells[0] + 1)
        by = np.linspace(ys.min(), ys.max() + 1e-9, cells[1] + 1)
        ix = np.clip(np.digitize(xs, bx) - 1, 0, cells[0] - 1)
        iy = np.clip(np.digitize(ys, by) - 1, 0, cells[1] - 1)
        groups = defaultdict(list)
        for k, key in enumerate(zip(ix, iy)):
            groups[key].append(k)
        for idx in groups.values():
            if len(idx) < 3:
                continue
            c = np.array([xs[idx].mean() + ex[idx].mean(), ys[idx].mean() + ey[idx].mean()])
            _cov_ellipse(ax, c, np.cov(np.stack([ex[idx], ey[idx]])), edgecolor="tab:blue")
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title("placement error (2-sigma ellipses)")
    return _save(fig, path)


def clutter_curve(report_rows, path) -> Path:
    """Mean error and success rate against the number of clutter objects."""
    by_level = defaultdict(list)
    for r in report_rows:
        if r.get("n"):
            by_level[r["clutter"]].append(r)
    levels = sorted(by_level)
    err, succ = [], []
    for lv in levels:
        rows = by_level[lv]
        n = np.array([r["n"] for r in rows], dtype=float)
        err.append(100 * np.average([r["mean_err_m"] for r in rows], weights=n))
        succ.append(100 * np.average([r["success_rate"] for r in rows], weights=n))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(levels, err, "o-", color="tab:red")
    ax.set_xlabel("clutter objects")
    ax.set_ylabel("mean error [cm]", color="tab:red")
    ax2 = ax.twinx()
    ax2.plot(levels, succ, "s--", color="tab:blue")
    ax2.set_ylabel("success [%]", color="tab:blue")
    ax2.set_ylim(0, 105)
    return _save(fig, path)


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
