import dataclasses
import json
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from latent_affordance.scenegen import (
    CameraPose,
    Clutter,
    ConfigError,
    Cup,
    CupProfile,
    DatasetError,
    Light,
    RandomizationConfig,
    SceneSpec,
    Table,
    Texture,
    check_label_soundness,
    generate_cup_profile,
    generate_dataset,
    load_arrays,
    load_manifest,
    load_randomization,
    load_sample,
    render,
    render_labels,
    render_sample,
    sample_scene,
    save_randomization,
    scene_for_index,
    simplified_config,
)
from latent_affordance.scenegen.dataset import labels_to_png, png_to_labels
from latent_affordance.scenegen.render import BACKGROUND, CLUTTER0, project, render_buffers

FLAT = Texture("flat", (0.6, 0.3, 0.2))
CAM = CameraPose((0.45, 0.55, 0.70), (0.45, -0.03, 0.03), focal=105.0)


def cup_scene(cup_xy=(0.45, 0.0), clutter=(), camera=CAM, profile=None):
    profile = profile or CupProfile((0.0, 0.06, 0.12), (0.04, 0.04, 0.04), 0.01)
    cup = Cup(profile, cup_xy[0], cup_xy[1], Texture("flat", (0.9, 0.9, 0.1)), FLAT)
    return SceneSpec(cup, tuple(clutter), Table(FLAT), camera, (Light((0.4, 0.2, 1.2), 0.7),), 0)


# --- sampling -------------------------------------------------------------------


def test_zero_clutter_range():
    cfg = RandomizationConfig(clutter_count=(0, 0))
    assert sample_scene(np.random.default_rng(0), cfg).clutter == ()


def test_sample_scene_deterministic():
    cfg = RandomizationConfig()
    a = sample_scene(np.random.default_rng(42), cfg)
    b = sample_scene(np.random.default_rng(42), cfg)
    assert a == b
    assert SceneSpec.from_dict(json.loads(json.dumps(a.to_dict()))) == a


def test_clutter_count_uniform():
    cfg = RandomizationConfig()
    counts = Counter(len(scene_for_index(7, i, cfg).clutter) for i in range(1000))
    observed = [counts.get(k, 0) for k in range(11)]
    assert all(o > 0 for o in observed)
    assert stats.chisquare(observed).pvalue > 0.001


def test_ranges_respected():
    cfg = RandomizationConfig()
    for i in range(10_000):
        rng = np.random.default_rng(i)
        s = sample_scene(rng, cfg)
        assert cfg.workspace_x[0] <= s.cup.x <= cfg.workspace_x[1]
        assert cfg.workspace_y[0] <= s.cup.y <= cfg.workspace_y[1]
        assert cfg.clutter_count[0] <= len(s.clutter) <= cfg.clutter_count[1]
        assert cfg.light_count[0] <= len(s.lights) <= cfg.light_count[1]
        r = s.cup.profile.radii
        assert min(r) >= cfg.cup_radius[0] - 1e-12 and max(r) <= cfg.cup_radius[1] + 1e-12
        assert cfg.cup_height[0] <= s.cup.profile.height <= cfg.cup_height[1]
        assert cfg.focal[0] <= s.camera.focal <= cfg.focal[1]
        for c in s.clutter:
            assert min(c.scale) > 0


def test_invalid_range_rejected():
    with pytest.raises(ConfigError):
        RandomizationConfig(cup_radius=(0.05, 0.03))
    with pytest.raises(ConfigError):
        RandomizationConfig.from_mapping({"no_such_key": "1 2"})


def test_config_file_roundtrip(tmp_path):
    cfg = simplified_config(focal=(90.0, 95.0))
    save_randomization(cfg, tmp_path / "r.cfg")
    assert load_randomization(tmp_path / "r.cfg") == cfg
    (tmp_path / "s.cfg").write_text("# a comment\nclutter_count = 2 4\nfocal = 80 90  # px\n")
    got = load_randomization(tmp_path / "s.cfg")
    assert got.clutter_count == (2.0, 4.0) and got.focal == (80.0, 90.0)


# --- cup profiles --------------------------------------------------------------------


def test_collapsed_radius_range():
    cfg = RandomizationConfig(cup_radius=(0.04, 0.04))
    p = generate_cup_profile(np.random.default_rng(0), cfg)
    assert all(r == pytest.approx(0.04, abs=1e-15) for r in p.radii)


def test_profile_ratio_and_smoothness():
    cfg = RandomizationConfig()
    span = cfg.cup_radius[1] - cfg.cup_radius[0]
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        p = generate_cup_profile(rng, cfg)
        r = np.asarray(p.radii)
        assert len(r) >= 4
        assert r.max() / r.min() <= cfg.cup_max_ratio + 1e-12
        assert np.all(np.abs(np.diff(r)) < cfg.cup_smoothness * span)
        assert p.heights[0] == 0 and np.all(np.diff(p.heights) > 0)


def test_profile_validation():
    with pytest.raises(ValueError):
        CupProfile((0.0, 0.05, 0.04), (0.03, 0.03, 0.03), 0.01)
    with pytest.raises(ValueError):
        CupProfile((0.0, 0.05), (0.03, 0.03), 0.06)


# --- rendering -----------------------------------------------------------------------


def test_render_deterministic():
    s = scene_for_index(3, 5, RandomizationConfig())
    assert np.array_equal(render(s), render(s))


def test_looking_away_shows_background_only():
    cam = CameraPose((0.45, 0.0, 0.3), (0.45, 0.0, 5.0), up=(1.0, 0.0, 0.0), focal=100.0)
    img = render(cup_scene(camera=cam))
    expected = (BACKGROUND * 255 + 0.5).astype(np.uint8)
    assert np.all(img == expected)


def test_sphere_silhouette_matches_projection():
    r, d, f = 0.1, 0.9, 100.0
    sphere = Clutter("sphere", (0.45, 0.0, 0.0), (r, r, r), FLAT)
    cam = CameraPose((0.45, -d, r), (0.45, 0.0, r), focal=f)
    scene = SceneSpec(None, (sphere,), Table(FLAT), cam, (), 0)
    buf, _ = render_buffers(scene)
    area = (buf.obj == CLUTTER0).sum()
    expected = f * r / np.sqrt(d * d - r * r)
    assert abs(np.sqrt(area / np.pi) - expected) < 1.0


def test_no_cup_no_labels():
    s = dataclasses.replace(cup_scene(), cup=None)
    assert render_labels(s).sum() == 0


def test_unoccluded_cup_has_both_channels():
    labels = render_labels(cup_scene())
    assert labels[..., 0].any() and labels[..., 1].any()
    assert not np.any(labels[..., 0] & labels[..., 1])


def test_occluding_box_removes_labels():
    s = cup_scene()
    # a box between camera and cup, large enough to cover the cup's whole projection
    cam = np.asarray(CAM.position)
    mid = 0.5 * (cam + np.array([0.45, 0.0, 0.06]))
    box = Clutter("box", (mid[0], mid[1], 0.0), (0.2, 0.05, mid[2] + 0.2), FLAT)
    occluded = dataclasses.replace(s, clutter=(box,))
    buf, _ = render_buffers(occluded)
    cup_px = render_labels(s).any(axis=-1)
    assert np.all(buf.obj[cup_px] == CLUTTER0)
    assert render_labels(occluded).sum() == 0


def test_partial_occlusion_sound():
    s = cup_scene(clutter=[Clutter("box", (0.45, 0.12, 0.3), (0.03, 0.02, 0.06), FLAT)])
    labels = render_labels(s)
    assert labels.sum() > 0
    assert labels.sum() < render_labels(cup_scene()).sum()
    assert check_label_soundness(s, labels)


def test_project_inverts_rays():
    s = cup_scene()
    u, v = project(CAM, [0.45, 0.0, 0.06])[0]
    labels = render_labels(s)
    assert labels[int(v), int(u)].any()


def test_label_soundness_random_scenes():
    cfg = RandomizationConfig()
    for i in range(100):
        s = scene_for_index(11, i, cfg)
        _, labels, _ = render_sample(s)
        assert check_label_soundness(s, labels)


def test_soundness_detects_bad_labels():
    s = cup_scene()
    labels = render_labels(s)
    bad = labels.copy()
    bad[0, 0, 0] = 1  # a corner pixel that shows the wall
    assert not check_label_soundness(s, bad)
    both = labels.copy()
    both[..., 1] |= both[..., 0]
    assert not check_label_soundness(s, both)


# --- datasets --------------------------------------------------------------------------


def test_label_png_roundtrip():
    lab = np.zeros((4, 4, 2), np.uint8)
    lab[0, 0, 0] = lab[1, 1, 1] = 1
    img = labels_to_png(lab)
    assert img[0, 0].tolist() == [255, 0, 0] and img[1, 1].tolist() == [0, 255, 0]
    assert np.array_equal(png_to_labels(img), lab)


def test_empty_dataset(tmp_path):
    m = generate_dataset(0, RandomizationConfig(), tmp_path / "d")
    assert m["n"] == 0 and m["files"] == []
    assert not any((tmp_path / "d" / "samples").iterdir())


def test_dataset_worker_independent(tmp_path):
    cfg = RandomizationConfig()
    generate_dataset(24, cfg, tmp_path / "a", workers=1, master_seed=5)
    generate_dataset(24, cfg, tmp_path / "b", workers=3, master_seed=5)
    for name in load_manifest(tmp_path / "a")["files"] + ["manifest.json"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rgb, lab, meta = load_sample(tmp_path / "a", 3)
    s = SceneSpec.from_dict(meta["scene"])
    r2, l2, _ = render_sample(s)
    assert np.array_equal(rgb, r2) and np.array_equal(lab, l2)
    assert meta["cup_position"] == s.cup_position().tolist()


def test_load_arrays_skips_bad_sample(tmp_path):
    generate_dataset(5, RandomizationConfig(), tmp_path, master_seed=1)
    (tmp_path / "samples" / "00000002_rgb.png").write_bytes(b"garbage")
    with pytest.raises(DatasetError):
        load_arrays(tmp_path)
    rgb, lab, metas, kept = load_arrays(tmp_path, max_bad_fraction=0.5)
    assert kept == [0, 1, 3, 4] and rgb.shape == (4, 64, 64, 3)


def test_io_failure_cleans_up(tmp_path):
    blocker = tmp_path / "d"
    blocker.mkdir()
    (blocker / "samples").write_text("not a directory")
    with pytest.raises(DatasetError):
        generate_dataset(3, RandomizationConfig(), blocker)
    assert not (blocker / "manifest.json").exists()
