"""Segmentation and task metrics.

The weighted F-measure follows Margolin et al., "How to evaluate foreground
maps?" (CVPR 2014): errors are smoothed with a Gaussian dependency kernel,
background errors are weighted up with distance from the foreground, and the
weighted precision/recall are combined as an F-beta score.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class MetricConfig:
    beta: float = 1.0
    sigma: float = 5.0
    alpha: float = math.log(0.5) / 5.0
    kernel_size: int = 7

    def __post_init__(self):
        if self.beta <= 0 or self.sigma <= 0 or self.alpha >= 0 or self.kernel_size < 1:
            raise ValueError(f"invalid metric config {self}")


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Normalized square Gaussian, same as MATLAB ``fspecial('gaussian')``."""
    r = (size - 1) / 2.0
    y, x = np.mgrid[-r : r + 1, -r : r + 1]
    k = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    k[k < np.finfo(float).eps * k.max()] = 0
    return k / k.sum()


def weighted_fbeta(pred, gt, cfg: MetricConfig = MetricConfig()) -> float:
    """Weighted F-beta of a [0, 1] map ``pred`` against a binary mask ``gt``.

    An empty foreground scores 1 when ``pred`` is all zero and 0 otherwise.
    For background pixels with several equidistant foreground neighbours the
    error is borrowed from the one ``scipy.ndimage.distance_transform_edt``
    reports.
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt)
    if pred.shape != gt.shape or pred.ndim != 2:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    fg = gt.astype(bool)
    if not fg.any():
        return 1.0 if not pred.any() else 0.0

    dist, idx = ndimage.distance_transform_edt(~fg, return_indices=True)
    E = np.abs(pred - fg)
    Et = E[idx[0], idx[1]]
    K = gaussian_kernel(cfg.kernel_size, cfg.sigma)
    EA = ndimage.correlate(Et, K, mode="constant", cval=0.0)
    min_e = np.where(fg & (EA < E), EA, E)
    B = np.where(fg, 1.0, 2.0 - np.exp(cfg.alpha * dist))
    Ew = min_e * B

    tp = fg.sum() - Ew[fg].sum()
    fp = Ew[~fg].sum()
    recall = 1.0 - Ew[fg].mean()
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    b2 = cfg.beta**2
    denom = b2 * precision + recall
    if denom <= 0:
        return 0.0
    return float((1.0 + b2) * precision * recall / denom)


def per_affordance_scores(pred_map, gt_masks, cfg: MetricConfig = MetricConfig(), threshold=None):
    """F^w_beta per channel (H x W x C inputs) plus their unweighted mean."""
    pred_map = np.asarray(pred_map, dtype=float)
    gt_masks = np.asarray(gt_masks)
    if pred_map.shape != gt_masks.shape or pred_map.ndim != 3:
        raise ValueError(f"channel mismatch: {pred_map.shape} vs {gt_masks.shape}")
    if threshold is not None:
        pred_map = (pred_map >= threshold).astype(float)
    scores = [weighted_fbeta(pred_map[..., c], gt_masks[..., c], cfg) for c in range(pred_map.shape[-1])]
    return scores, float(np.mean(scores))


def pixel_f1(pred, gt, threshold: float = 0.5) -> float:
    """Plain F1 of thresholded predictions; empty-vs-empty counts as 1."""
    p = np.asarray(pred) >= threshold
    g = np.asarray(gt).astype(bool)
    tp = np.logical_and(p, g).sum()
    denom = p.sum() + g.sum()
    return 1.0 if denom == 0 else float(2.0 * tp / denom)


def position_error(pred_pos, true_pos) -> dict:
    """Planar (x, y) error in meters; z is ignored."""
    d = np.asarray(pred_pos, dtype=float)[:2] - np.asarray(true_pos, dtype=float)[:2]
    return {"err": float(np.hypot(d[0], d[1])), "x_err": float(abs(d[0])), "y_err": float(abs(d[1]))}
