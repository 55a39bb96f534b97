"""Acceptance gate: one test per criterion, one verdict line each in the summary.

Criteria 6 to 10 share a full-scale pipeline run (default configuration) and
take over an hour on one CPU core; criterion 10 repeats that run from scratch.
"""

import json
import math
import time

import numpy as np
import pytest
import torch

from conftest import VERDICTS
from fw_oracle import all_binary_maps, fw_batch
from gradcheck import directional_errors
from latent_affordance import pipeline
from latent_affordance.kinematics import fk_jacobian, forward_kinematics, planar_chain
from latent_affordance.metrics import weighted_fbeta
from latent_affordance.policy import PolicyConfig, PolicyNet, end_to_end_loss
from latent_affordance.scenegen import RandomizationConfig, generate_dataset
from latent_affordance.scenegen.dataset import check_label_soundness, load_arrays, scene_for_index
from latent_affordance.trajvae import BetaSchedule, TrajectoryVAE, TrajVaeConfig, beta_at, traj_loss
from latent_affordance.vaed import VAED, VaedConfig, kl_divergence, reparameterize, vaed_loss

pytestmark = pytest.mark.slow


def verdict(n, ok, detail):
    VERDICTS[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


# --- 1 to 5: analytic and property checks --------------------------------------


def test_criterion_1_analytic_oracles():
    t0 = time.perf_counter()
    gen = torch.Generator().manual_seed(0)
    mu = torch.tensor([0.5, -1.0, 0.2, 0.0], dtype=torch.float64)
    lv = torch.tensor([-0.5, 0.3, 0.0, 0.7], dtype=torch.float64)
    n = 10**6
    z = reparameterize(mu.expand(n, 4), lv.expand(n, 4), torch.randn(n, 4, generator=gen, dtype=torch.float64))
    sd = torch.exp(0.5 * lv)
    mc = ((-0.5 * ((z - mu) / sd) ** 2 - torch.log(sd)).sum(1) + 0.5 * (z**2).sum(1)).mean().item()
    closed = kl_divergence(mu, lv).item()
    kl_rel = abs(mc - closed) / closed

    chain = planar_chain([0.7, 0.4])
    rng = np.random.default_rng(0)
    fk_err = 0.0
    for q1, q2 in rng.uniform(-np.pi, np.pi, (100, 2)):
        expect = [0.7 * math.cos(q1) + 0.4 * math.cos(q1 + q2), 0.7 * math.sin(q1) + 0.4 * math.sin(q1 + q2), 0.0]
        fk_err = max(fk_err, np.max(np.abs(forward_kinematics(chain, [q1, q2])[1] - expect)))

    jac_err, h = 0.0, 1e-6
    for q in rng.uniform(-np.pi, np.pi, (100, 2)):
        J = fk_jacobian(chain, q)
        for j in range(2):
            dq = np.zeros(2)
            dq[j] = h
            fd = (forward_kinematics(chain, q + dq)[1] - forward_kinematics(chain, q - dq)[1]) / (2 * h)
            jac_err = max(jac_err, np.max(np.abs(fd - J[:, j])))
    dt = time.perf_counter() - t0
    ok = kl_rel < 0.01 and fk_err < 1e-9 and jac_err < 1e-6 and dt < 60
    verdict(1, ok, f"KL MC rel err {kl_rel:.2e}, FK max err {fk_err:.1e} m, Jacobian max err {jac_err:.1e}, {dt:.1f} s")


def test_criterion_2_gradient_integrity():
    t0 = time.perf_counter()
    torch.manual_seed(0)
    rng = np.random.default_rng(0)
    images = torch.from_numpy(rng.uniform(0, 1, (4, 3, 8, 8)))
    labels = torch.from_numpy((rng.uniform(0, 1, (4, 2, 8, 8)) > 0.7).astype(np.float64))
    vcfg = VaedConfig(latent_dim=3, conv_spec=((4, 3, 1), (4, 4, 2), (4, 3, 1), (4, 4, 2)), image_size=(8, 8), hidden_dim=8)
    vaed = VAED(vcfg).double()
    noise = torch.randn(4, 3, dtype=torch.float64)
    e_vaed = directional_errors(lambda: vaed_loss(vaed, images, labels, noise)[0], list(vaed.parameters()), n_dirs=20)

    traj = TrajectoryVAE(TrajVaeConfig(steps=4, n_joints=2, action_dim=2, hidden=(8, 6, 4))).double()
    u = torch.randn(6, 4, 2, dtype=torch.float64)
    traj.set_normalization(u.numpy())
    tnoise = torch.randn(6, 2, dtype=torch.float64)
    e_traj = directional_errors(lambda: traj_loss(traj, u, tnoise, 0.3)[0], list(traj.parameters()), n_dirs=20)

    vaed.eval()
    for p in list(vaed.parameters()) + list(traj.parameters()):
        p.requires_grad_(False)
    policy = PolicyNet(PolicyConfig(latent_dim=3, cam_dim=7, action_dim=2, hidden=(6, 5, 4))).double()
    cams, targets = rng.normal(size=(4, 7)), rng.normal(0, 0.3, (4, 3))
    chain = planar_chain([0.4, 0.3])
    e_pol = directional_errors(
        lambda: end_to_end_loss(images, cams, targets, vaed, policy, traj, chain), list(policy.parameters()), n_dirs=20
    )
    dt = time.perf_counter() - t0
    worst = {"vaed_loss": max(e_vaed), "traj_loss": max(e_traj), "end_to_end_loss": max(e_pol)}
    ok = all(v < 1e-4 for v in worst.values()) and min(map(len, (e_vaed, e_traj, e_pol))) >= 20 and dt < 300
    verdict(2, ok, ", ".join(f"{k} max rel err {v:.1e}" for k, v in worst.items()) + f" over 20 directions, {dt:.1f} s")


def test_criterion_3_weighted_fmeasure():
    t0 = time.perf_counter()
    gt = np.zeros((4, 4), np.uint8)
    gt[1:3, 0:2] = 1
    maps = all_binary_maps()
    lib = np.array([weighted_fbeta(m, gt) for m in maps])
    agree = float(np.max(np.abs(lib - fw_batch(maps, gt))))
    perfect = weighted_fbeta(gt.astype(float), gt)
    gt_code = int(sum(int(b) << k for k, b in enumerate(gt.ravel())))
    codes = np.arange(len(maps))
    violations = 0
    for k in range(16):
        wrong = ((codes >> k) & 1) != ((gt_code >> k) & 1)
        violations += int(np.sum(lib[codes[wrong] ^ (1 << k)] < lib[codes[wrong]] - 1e-12))
    dt = time.perf_counter() - t0
    ok = len(maps) == 2**16 and agree < 1e-10 and perfect == 1.0 and violations == 0 and dt < 300
    verdict(3, ok, f"{len(maps)} maps, max |lib - oracle| {agree:.1e}, perfect {perfect}, monotonicity violations {violations}, {dt:.1f} s")


def test_criterion_4_beta_schedule():
    t0 = time.perf_counter()
    s = BetaSchedule()
    values = [beta_at(s, e) for e in range(20000)]
    changes = [e for e in range(1, 20000) if values[e] != values[e - 1]]
    dt = time.perf_counter() - t0
    ok = values[0] == 1e-8 and max(values) == 1e-5 and values[-1] == 1e-5 and all(e % 400 == 0 for e in changes) and dt < 1
    verdict(4, ok, f"beta(0)={values[0]:g}, cap {max(values):g}, changes at {changes}, {dt:.2f} s")


def test_criterion_5_dataset_generator(tmp_path):
    t0 = time.perf_counter()
    cfg = RandomizationConfig()
    hashes = []
    for name, workers in (("w1", 1), ("w8", 8), ("again", 1)):
        generate_dataset(1000, cfg, tmp_path / name, workers=workers, master_seed=11)
        hashes.append(pipeline.dataset_hash(tmp_path / name))
    _, labels, _, kept = load_arrays(tmp_path / "w1")
    sound = sum(check_label_soundness(scene_for_index(11, i, cfg), labels[j]) for j, i in enumerate(kept))
    disjoint = int(np.sum(~np.any(labels[..., 0] & labels[..., 1], axis=(1, 2))))
    dt = time.perf_counter() - t0
    ok = len(set(hashes)) == 1 and len(kept) == 1000 and sound == 1000 and disjoint == 1000 and dt < 600
    verdict(5, ok, f"hashes equal across workers 1/8 and rerun: {len(set(hashes)) == 1}, sound {sound}/1000, disjoint {disjoint}/1000, {dt:.0f} s")


# --- 6 to 10: full-scale pipeline ------------------------------------------------


def run_full_pipeline(out):
    """Every stage with the default configuration; returns (config, stage wall times)."""
    cfg = pipeline.load_config(None, {"pipeline.output_root": str(out)}, env={})
    times = {}
    for entry in (
        pipeline.cmd_gen_data(cfg),
        pipeline.cmd_train_vaed(cfg),
        pipeline.cmd_train_trajvae(cfg),
        pipeline.cmd_train_policy(cfg),
        pipeline.cmd_evaluate(cfg),
    ):
        times[entry.stage] = entry.wall_time_s
    return cfg, times


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("full_a")
    cfg, times = run_full_pipeline(out)
    return out, cfg, times


def report(root, name):
    return json.loads((root / "reports" / f"{name}.json").read_text())


def test_criterion_6_trajectory_vae(full_run):
    root, cfg, times = full_run
    r = report(root, "trajvae")
    ok = (
        r["n_trajectories"] == 1000
        and cfg.int("trajvae", "steps") == 24
        and cfg.chain().n_joints == 3
        and cfg.int("trajvae", "action_dim") == 5
        and r["holdout_rmse_rad"] < 0.05
        and times["trajvae"] < 600
    )
    verdict(6, ok, f"{r['n_trajectories']} trajectories, held-out RMSE {r['holdout_rmse_rad']:.4f} rad on {r['n_holdout']}, {times['trajvae']:.0f} s")


def test_criterion_7_vaed(full_run):
    root, cfg, times = full_run
    r = report(root, "vaed")
    ok = (
        r["n_train"] == 5000
        and cfg.int("vaed", "latent_dim") == 10
        and cfg.float("vaed", "beta") == 4.0
        and r["f1_mean"] >= 0.75
        and times["vaed"] < 1800
    )
    verdict(
        7,
        ok,
        f"held-out F1 wrap-grasp {r['f1_wrap_grasp']:.3f}, contain {r['f1_contain']:.3f}, mean {r['f1_mean']:.3f} "
        f"on {r['n_holdout']} images, {times['vaed']:.0f} s",
    )


def test_criterion_8_policy(full_run):
    root, cfg, times = full_run
    r = report(root, "policy")
    x0, x1, y0, y1 = cfg.floats("trajvae", "workspace", 4)
    limit = 0.05 * math.hypot(x1 - x0, y1 - y0)
    ok = (
        r["n_samples"] >= 20000
        and cfg.float("policy", "inner_radius") == 0.04
        and cfg.float("policy", "ball_radius") == 0.02
        and r["mean_err_m"] < limit
        and r["success_rate"] >= 0.8
        and times["policy"] < 3600
    )
    verdict(
        8,
        ok,
        f"{r['n_samples']} scenes, validation mean planar error {r['mean_err_m'] * 100:.2f} cm (limit {limit * 100:.2f} cm), "
        f"success {r['success_rate']:.1%} on {r['n']}, {times['policy']:.0f} s",
    )


def test_criterion_9_frozen_weights(full_run):
    root, _, _ = full_run
    runs = {r["stage"]: r for r in pipeline.read_runs(root)}
    lay = pipeline.Layout(root)
    checks = []
    for path, stage in ((lay.vaed_ckpt, "vaed"), (lay.trajvae_ckpt, "trajvae")):
        written = runs[stage]["outputs"][str(path)]
        seen_by_policy = runs["policy"]["inputs"][str(path)]
        checks.append(written == seen_by_policy == pipeline.sha256_file(path))
    ok = all(checks) and report(root, "policy")["frozen_unchanged"]
    verdict(9, ok, f"VAED checkpoint unchanged: {checks[0]}, trajectory checkpoint unchanged: {checks[1]}")


def test_criterion_10_reproducibility(full_run, tmp_path_factory):
    root, _, _ = full_run
    again = tmp_path_factory.mktemp("full_b")
    run_full_pipeline(again)
    a, b = pipeline.artifact_hashes(root), pipeline.artifact_hashes(again)
    differ = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    ok = not differ and len(a) > 0
    verdict(10, ok, f"{len(a)} artifacts compared, {len(differ)} differ" + (f": {differ[:5]}" if differ else ""))
