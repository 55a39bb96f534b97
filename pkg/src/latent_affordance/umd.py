"""Optional benchmark harness for the UMD part-affordance dataset.

The dataset is not shipped. Point ``umd_harness`` at an extracted copy
(``<root>/**/<name>_rgb.jpg`` next to ``<name>_label.mat`` holding a
``gt_label`` integer map); without it the harness reports a clean skip.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image

from .metrics import MetricConfig, per_affordance_scores
from .vaed import TrainConfig, VaedConfig, predict_maps, train_vaed

log = logging.getLogger(__name__)

AFFORDANCES = ("grasp", "cut", "scoop", "contain", "pound", "support", "wrap-grasp")
# comparison context only (RGB input)
REFERENCE = {"contain": 0.859, "wrap-grasp": 0.774, "average": 0.761}


def find_pairs(root) -> list[tuple[Path, Path]]:
    root = Path(root)
    pairs = []
    for rgb in sorted(root.rglob("*_rgb.jpg")):
        label = rgb.with_name(rgb.name[: -len("_rgb.jpg")] + "_label.mat")
        if label.exists():
            pairs.append((rgb, label))
    return pairs


def split(n: int, seed: int, train_fraction: float = 0.7):
    """Deterministic shuffled split; ``len(train) == floor(train_fraction * n)``."""
    order = np.random.default_rng(seed).permutation(n)
    k = int(np.floor(train_fraction * n))
    return np.sort(order[:k]), np.sort(order[k:])


def load_pair(rgb_path, label_path, size=(64, 64)):
    from scipy.io import loadmat

    rgb = Image.open(rgb_path).convert("RGB").resize(size[::-1], Image.BILINEAR)
    lab = loadmat(label_path)["gt_label"].astype(np.uint8)
    lab = np.asarray(Image.fromarray(lab).resize(size[::-1], Image.NEAREST))
    masks = np.stack([lab == k + 1 for k in range(len(AFFORDANCES))], axis=-1).astype(np.uint8)
    return np.asarray(rgb), masks


def umd_harness(
    dataset_path,
    split_seed: int = 0,
    cfg: VaedConfig = VaedConfig(latent_dim=20, beta=4.0, n_affordances=len(AFFORDANCES)),
    train_cfg: TrainConfig = TrainConfig(),
    size=(64, 64),
) -> dict:
    """Train a VAED on 70% of the dataset and score F^w_beta per affordance on the rest.

    Returns ``{"skipped": True, "reason": ...}`` when the data is missing.
    """
    pairs = find_pairs(dataset_path) if dataset_path and Path(dataset_path).exists() else []
    if not pairs:
        msg = f"UMD data not found under {dataset_path!r}; harness skipped"
        log.warning(msg)
        return {"skipped": True, "reason": msg}
    data = [load_pair(r, l, size) for r, l in pairs]
    rgb = np.stack([d[0] for d in data])
    masks = np.stack([d[1] for d in data])
    tr, va = split(len(pairs), split_seed)
    model, _ = train_vaed(rgb[tr], masks[tr], cfg, train_cfg)
    pred = predict_maps(model, rgb[va])
    per = np.array([per_affordance_scores(p, g, MetricConfig(), threshold=0.5)[0] for p, g in zip(pred, masks[va])])
    present = masks[va].any(axis=(1, 2))
    rows = []
    for k, name in enumerate(AFFORDANCES):
        # only images that contain the affordance count toward its score
        vals = per[present[:, k], k]
        rows.append({"affordance": name, "n": int(len(vals)), "fw_beta": float(vals.mean()) if len(vals) else None})
    scored = [r["fw_beta"] for r in rows if r["fw_beta"] is not None]
    return {
        "skipped": False,
        "n_train": int(len(tr)),
        "n_val": int(len(va)),
        "rows": rows,
        "average": float(np.mean(scored)) if scored else None,
        "reference": REFERENCE,
    }
