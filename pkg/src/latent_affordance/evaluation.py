"""Task-level evaluation: place-the-ball trials per (clutter level, cup shape)."""
from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .metrics import position_error
from .policy import BALL_RADIUS, success_predicate
from .scenegen import RandomizationConfig, SceneSpec, render_sample, sample_scene
from .scenegen.dataset import sample_seed
from .scenegen.scene import CupProfile


def _profile(radii, height, split_frac=0.08):
    heights = np.linspace(0.0, height, len(radii))
    return CupProfile(tuple(heights.tolist()), tuple(float(r) for r in radii), split_frac * height)


# fixed test cups, loosely after everyday containers
EVAL_CUPS: dict[str, CupProfile] = {
    "can": _profile([0.033] * 6, 0.10),
    "tall": _profile([0.040, 0.040, 0.041, 0.042, 0.042, 0.042], 0.15),
    "flared": _profile([0.032, 0.034, 0.037, 0.040, 0.043, 0.045], 0.11),
    "bulge": _profile([0.035, 0.040, 0.044, 0.044, 0.040, 0.037], 0.12),
    "short": _profile([0.045] * 6, 0.08),
}


@dataclass
class Trial:
    index: int
    condition: str
    clutter: int
    cup: str
    scene: SceneSpec
    rgb: np.ndarray
    labels: np.ndarray


def make_trial(index, clutter, cup_name, cfg: RandomizationConfig, seed: int) -> Trial:
    s = sample_seed(seed, index)
    rng = np.random.default_rng(s)
    scene = sample_scene(rng, cfg.replace(clutter_count=(clutter, clutter)), seed=s)
    if cup_name in EVAL_CUPS:
        scene = dataclasses.replace(scene, cup=dataclasses.replace(scene.cup, profile=EVAL_CUPS[cup_name]))
    rgb, labels, _ = render_sample(scene)
    return Trial(index, f"clutter={clutter}/cup={cup_name}", clutter, cup_name, scene, rgb, labels)


def evaluate(
    predict: Callable[[Trial], np.ndarray],
    cfg: RandomizationConfig,
    n_trials: int,
    clutter_levels: Sequence[int] = (0,),
    cup_shapes: Sequence[str] = tuple(EVAL_CUPS),
    seed: int = 0,
    inner_radius: float | None = 0.04,
    ball_radius: float = BALL_RADIUS,
) -> dict:
    """Run ``n_trials`` trials spread round-robin over clutter x cup conditions.

    ``predict`` maps a trial to the final end-effector position. With
    ``inner_radius=None`` each cup's own mouth radius is used for success.
    Returns ``{"rows": [...], "trials": [...]}``; rows carry condition, n,
    mean planar error and its x/y parts (meters) and success rate.
    """
    conditions = [(c, s) for c in clutter_levels for s in cup_shapes]
    trials = []
    for i in range(n_trials):
        clutter, cup = conditions[i % len(conditions)]
        trial = make_trial(i, clutter, cup, cfg, seed)
        pos = np.asarray(predict(trial), dtype=float)
        true = trial.scene.cup_position()
        err = position_error(pos, true)
        r_in = trial.scene.cup.profile.inner_radius if inner_radius is None else inner_radius
        trials.append(
            {
                "index": i,
                "condition": trial.condition,
                "clutter": clutter,
                "cup": cup,
                "x": float(true[0]),
                "y": float(true[1]),
                "err_x": float(pos[0] - true[0]),
                "err_y": float(pos[1] - true[1]),
                "err": err["err"],
                "success": success_predicate(pos, true, r_in, ball_radius),
            }
        )
    rows = []
    for clutter, cup in conditions:
        sel = [t for t in trials if t["clutter"] == clutter and t["cup"] == cup]
        row = {"condition": f"clutter={clutter}/cup={cup}", "clutter": clutter, "cup": cup, "n": len(sel)}
        if sel:
            row.update(
                mean_err_m=float(np.mean([t["err"] for t in sel])),
                x_err_m=float(np.mean([abs(t["err_x"]) for t in sel])),
                y_err_m=float(np.mean([abs(t["err_y"]) for t in sel])),
                success_rate=float(np.mean([t["success"] for t in sel])),
            )
        else:
            row.update(mean_err_m=None, x_err_m=None, y_err_m=None, success_rate=None)
        rows.append(row)
    return {"rows": rows, "trials": trials}


def write_report(report: dict, out_dir) -> dict:
    """``report.json``, ``report.csv`` (one row per condition) and ``plot_data.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps({"rows": report["rows"]}, indent=1, sort_keys=True))
    cols = ["condition", "n", "mean_err_m", "x_err_m", "y_err_m", "success_rate"]
    with open(out_dir / "report.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        w.writerows(report["rows"])
    with open(out_dir / "plot_data.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["x", "y", "err_x", "err_y"], extrasaction="ignore")
        w.writeheader()
        w.writerows(report["trials"])
    return {"json": out_dir / "report.json", "csv": out_dir / "report.csv", "plot_data": out_dir / "plot_data.csv"}
