import numpy as np
import pytest
import torch

from gradcheck import directional_errors
from latent_affordance.kinematics import default_arm, forward_kinematics, planar_chain
from latent_affordance.trajvae import (
    BetaSchedule,
    TrajectoryVAE,
    TrajTrainConfig,
    TrajVaeConfig,
    beta_at,
    generate_training_trajectories,
    interpolate_via,
    load_trajectory_set,
    load_trajvae,
    plan_reach,
    reconstruct,
    rmse_per_joint,
    save_trajectory_set,
    save_trajvae,
    traj_loss,
    train_trajectory_vae,
)

TINY = TrajVaeConfig(steps=4, n_joints=2, action_dim=2, hidden=(8, 6, 4))
START = np.array([0.0, 1.9, 1.6])
WORKSPACE = (0.30, 0.60, -0.20, 0.20)


def test_beta_ladder():
    s = BetaSchedule()
    assert beta_at(s, 0) == 1e-8
    assert beta_at(s, 399) == 1e-8
    assert beta_at(s, 400) == pytest.approx(1e-7)
    assert beta_at(s, 10**6) == 1e-5
    values = [beta_at(s, e) for e in range(0, 3000, 7)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert all(1e-8 <= v <= 1e-5 for v in values)
    changes = [e for e in range(1, 3000) if beta_at(s, e) != beta_at(s, e - 1)]
    assert all(e % 400 == 0 for e in changes)
    with pytest.raises(ValueError):
        beta_at(s, -1)
    with pytest.raises(ValueError):
        BetaSchedule(beta_start=1e-4, beta_end=1e-5)


def test_shapes():
    m = TrajectoryVAE()
    mu, lv = m.encode(torch.zeros(3, 24, 3))
    assert mu.shape == (3, 5)
    assert m.decode(mu).shape == (3, 24, 3)
    with pytest.raises(ValueError):
        m.encode(torch.zeros(3, 23, 3))
    with pytest.raises(ValueError):
        m.decode(torch.zeros(3, 4))


def test_mse_term_analytic():
    m = TrajectoryVAE(TINY).double()
    u = torch.zeros(5, 4, 2, dtype=torch.float64)
    with torch.no_grad():
        # decoder outputs exactly 0.1 everywhere
        for p in m.decoder.parameters():
            p.zero_()
        m.u_mean.fill_(0.1)
    _, parts = traj_loss(m, u, torch.zeros(5, 2, dtype=torch.float64), 0.0)
    assert parts["mse"].item() == pytest.approx(0.01, abs=1e-12)


def test_traj_loss_gradient():
    torch.manual_seed(0)
    m = TrajectoryVAE(TINY).double()
    u = torch.randn(6, 4, 2, dtype=torch.float64)
    m.set_normalization(u.numpy())
    noise = torch.randn(6, 2, dtype=torch.float64)
    errs = directional_errors(lambda: traj_loss(m, u, noise, 0.3)[0], list(m.parameters()))
    assert max(errs) < 1e-4


def test_decoder_jacobian_matches_finite_differences():
    torch.manual_seed(1)
    m = TrajectoryVAE(TINY).double()
    a = torch.randn(2, dtype=torch.float64)
    J = torch.autograd.functional.jacobian(lambda x: m.decode(x[None])[0], a)
    h = 1e-6
    for k in range(2):
        e = torch.zeros(2, dtype=torch.float64)
        e[k] = h
        fd = (m.decode((a + e)[None]) - m.decode((a - e)[None]))[0] / (2 * h)
        rel = (fd - J[..., k]).abs().max() / J[..., k].abs().max()
        assert rel < 1e-4


def test_interpolate_via_endpoints():
    a, b, c = np.zeros(3), np.ones(3), np.full(3, 2.0)
    u = interpolate_via(a, b, c, 24)
    assert u.shape == (24, 3)
    assert np.array_equal(u[0], a) and np.array_equal(u[-1], c)
    assert np.any(np.all(u == b, axis=1))


def test_single_cell_grid_reaches_target():
    chain = default_arm()
    ts = generate_training_trajectories(chain, (0.44, 0.46, -0.01, 0.01), (1, 1), START, 0.25)
    assert len(ts.u) == 1
    _, p = forward_kinematics(chain, ts.u[0, -1])
    assert np.linalg.norm(p - ts.targets[0]) < 1e-3


def test_grid_coverage_and_limits():
    chain = default_arm()
    ts = generate_training_trajectories(chain, WORKSPACE, (10, 10), START, 0.25)
    assert len(ts.u) >= 95
    assert np.all(ts.u[:, 0, :] == START)
    assert np.all(ts.u >= chain.lower - 1e-12) and np.all(ts.u <= chain.upper + 1e-12)
    for u, goal in zip(ts.u, ts.targets):
        assert np.linalg.norm(forward_kinematics(chain, u[-1])[1] - goal) < 1e-3


def test_unreachable_targets_are_reported():
    chain = planar_chain([0.3, 0.3], base_height=0.25)
    ts = generate_training_trajectories(chain, (0.1, 1.0, -0.1, 0.1), (4, 1), [0.1, 0.5], 0.25)
    assert len(ts.unreachable) >= 1
    assert len(ts.u) + len(ts.unreachable) == 4


def test_trajectory_set_roundtrip(tmp_path):
    ts = generate_training_trajectories(default_arm(), WORKSPACE, (3, 2), START, 0.25)
    save_trajectory_set(ts, tmp_path / "t.bin")
    back = load_trajectory_set(tmp_path / "t.bin")
    np.testing.assert_array_equal(back.u, ts.u.astype(np.float32))
    np.testing.assert_array_equal(back.targets, ts.targets)
    assert back.grid == ts.grid


def test_training_log_and_reproducibility(tmp_path):
    ts = generate_training_trajectories(default_arm(), WORKSPACE, (6, 5), START, 0.25, steps=8)
    sched = BetaSchedule(interval=5)
    cfg = TrajTrainConfig(epochs=12, batch_size=8, seed=4)
    m1, log1 = train_trajectory_vae(ts.u, None, sched, cfg)
    m2, log2 = train_trajectory_vae(ts.u, None, sched, cfg)
    assert [r["beta"] for r in log1] == [beta_at(sched, e) for e in range(12)]
    assert log1 == log2
    save_trajvae(m1, tmp_path / "a.ckpt")
    save_trajvae(m2, tmp_path / "b.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
    m3 = load_trajvae(tmp_path / "a.ckpt")
    np.testing.assert_allclose(reconstruct(m3, ts.u), reconstruct(m1, ts.u), atol=1e-6)
    assert rmse_per_joint(ts.u, reconstruct(m1, ts.u)) == pytest.approx(
        np.sqrt(np.mean((ts.u - reconstruct(m1, ts.u)) ** 2))
    )


def test_plan_reach_starts_at_start():
    u = plan_reach(default_arm(), [0.45, 0.0, 0.25], START)
    assert np.array_equal(u[0], START)
