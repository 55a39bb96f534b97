"""On-disk datasets of rendered samples.

Layout under ``out_dir``::

    manifest.json
    samples/00000000_rgb.png     8-bit RGB
    samples/00000000_label.png   R = wrap-grasp * 255, G = contain * 255, B = 0
    samples/00000000_meta.json   scene, cup world position, camera, seed
"""
from __future__ import annotations

import dataclasses
import json
import logging
import multiprocessing as mp
import shutil
from pathlib import Path

import numpy as np
from PIL import Image

from .config import RandomizationConfig
from .render import CUP_ID, render_buffers, render_sample
from .scene import SceneSpec, sample_scene

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


class DatasetError(RuntimeError):
    pass


def sample_seed(master_seed: int, index: int) -> int:
    """64-bit per-sample seed; depends only on (master_seed, index)."""
    lo, hi = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


def scene_for_index(master_seed: int, index: int, cfg: RandomizationConfig) -> SceneSpec:
    seed = sample_seed(master_seed, index)
    return sample_scene(np.random.default_rng(seed), cfg, seed=seed)


def sample_names(i: int) -> tuple[str, str, str]:
    return f"{i:08d}_rgb.png", f"{i:08d}_label.png", f"{i:08d}_meta.json"


def labels_to_png(labels: np.ndarray) -> np.ndarray:
    h, w, _ = labels.shape
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[..., 0] = labels[..., 0] * 255
    img[..., 1] = labels[..., 1] * 255
    return img


def png_to_labels(img: np.ndarray) -> np.ndarray:
    return (np.asarray(img)[..., :2] >= 128).astype(np.uint8)


def _write_sample(args):
    master_seed, i, cfg_dict, sample_dir = args
    cfg = RandomizationConfig.from_mapping(cfg_dict)
    scene = scene_for_index(master_seed, i, cfg)
    rgb, labels, _ = render_sample(scene)
    rgb_name, label_name, meta_name = sample_names(i)
    sample_dir = Path(sample_dir)
    Image.fromarray(rgb, "RGB").save(sample_dir / rgb_name)
    Image.fromarray(labels_to_png(labels), "RGB").save(sample_dir / label_name)
    meta = {
        "index": i,
        "seed": scene.seed,
        "scene": scene.to_dict(),
        "cup_position": scene.cup_position().tolist(),
        "camera": scene.camera.to_dict(),
    }
    (sample_dir / meta_name).write_text(json.dumps(meta, sort_keys=True, indent=1))
    return i


def generate_dataset(n: int, cfg: RandomizationConfig, out_dir, workers: int = 1, master_seed: int = 0) -> dict:
    """Render ``n`` samples into ``out_dir`` and write ``manifest.json``.

    Sample ``i`` depends only on ``(master_seed, i, cfg)``, so the files are
    identical for any worker count.
    """
    out_dir = Path(out_dir)
    sample_dir = out_dir / "samples"
    written: list[int] = []
    try:
        sample_dir.mkdir(parents=True, exist_ok=True)
        jobs = [(master_seed, i, cfg.to_dict(), str(sample_dir)) for i in range(n)]
        if workers > 1 and n > 1:
            ctx = mp.get_context("fork")
            with ctx.Pool(workers) as pool:
                for i in pool.imap_unordered(_write_sample, jobs, chunksize=max(1, n // (4 * workers))):
                    written.append(i)
        else:
            for job in jobs:
                written.append(_write_sample(job))
        files = []
        for i in range(n):
            files.extend(f"samples/{name}" for name in sample_names(i))
        manifest = {
            "format_version": FORMAT_VERSION,
            "master_seed": int(master_seed),
            "n": int(n),
            "config": cfg.to_dict(),
            "files": files,
        }
        (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
    except OSError as exc:
        for i in written:
            for name in sample_names(i):
                (sample_dir / name).unlink(missing_ok=True)
        (out_dir / "manifest.json").unlink(missing_ok=True)
        raise DatasetError(f"dataset generation failed: {exc}") from exc
    return manifest


def load_manifest(root) -> dict:
    path = Path(root) / "manifest.json"
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read manifest {path}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DatasetError(f"unsupported dataset format {manifest.get('format_version')}")
    return manifest


def load_sample(root, i: int):
    """(rgb uint8 HxWx3, labels uint8 HxWx2, meta dict)."""
    sample_dir = Path(root) / "samples"
    rgb_name, label_name, meta_name = sample_names(i)
    rgb = np.asarray(Image.open(sample_dir / rgb_name).convert("RGB"))
    labels = png_to_labels(np.asarray(Image.open(sample_dir / label_name).convert("RGB")))
    meta = json.loads((sample_dir / meta_name).read_text())
    return rgb, labels, meta


def load_arrays(root, indices=None, max_bad_fraction: float = 0.01):
    """Stack samples into arrays, skipping unreadable ones.

    Returns ``(rgb (N,H,W,3) uint8, labels (N,H,W,2) uint8, metas, kept_indices)``.
    Raises :class:`DatasetError` if more than ``max_bad_fraction`` fail to load.
    """
    manifest = load_manifest(root)
    if indices is None:
        indices = range(manifest["n"])
    indices = list(indices)
    rgbs, labels, metas, kept = [], [], [], []
    bad = 0
    for i in indices:
        try:
            r, l, m = load_sample(root, i)
        except (OSError, ValueError) as exc:
            bad += 1
            log.warning("skipping unreadable sample %d: %s", i, exc)
            continue
        rgbs.append(r)
        labels.append(l)
        metas.append(m)
        kept.append(i)
    if indices and bad / len(indices) > max_bad_fraction:
        raise DatasetError(f"{bad} of {len(indices)} samples unreadable")
    if not rgbs:
        return np.zeros((0, 0, 0, 3), np.uint8), np.zeros((0, 0, 0, 2), np.uint8), [], []
    return np.stack(rgbs), np.stack(labels), metas, kept


def check_label_soundness(scene: SceneSpec, labels: np.ndarray) -> bool:
    """Labels are disjoint and every labeled pixel sees the cup first.

    Verified two ways: the id buffer of the full scene must show the cup, and
    the depth of a cup-only render must equal the full-scene depth there.
    """
    labels = np.asarray(labels).astype(bool)
    if np.any(labels[..., 0] & labels[..., 1]):
        return False
    any_label = labels.any(axis=-1)
    if not any_label.any():
        return True
    if scene.cup is None:
        return False
    full, _ = render_buffers(scene)
    if not np.all(full.obj[any_label] == CUP_ID):
        return False
    alone, _ = render_buffers(dataclasses.replace(scene, clutter=()))
    return bool(np.allclose(alone.depth[any_label], full.depth[any_label], rtol=0, atol=1e-12))


def remove_dataset(root) -> None:
    shutil.rmtree(root, ignore_errors=True)
