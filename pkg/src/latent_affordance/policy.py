"""Policy head and end-to-end training through frozen perception and trajectory models.

The policy maps (affordance latent, camera features) to a latent action. It is
trained with the squared distance between the forward-kinematics position of
the decoded trajectory's final step and the labeled cup position; gradients
pass through the frozen trajectory decoder and the FK graph into the policy
only.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

from . import checkpoint
from .kinematics import KinematicChain, fk_position_torch
from .metrics import position_error
from .trajvae import TrajectoryVAE
from .vaed import VAED, encode_mean, images_to_tensor

log = logging.getLogger(__name__)

BALL_RADIUS = 0.02
CAM_DIM = 7


class PolicyConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    latent_dim: int = 10
    cam_dim: int = CAM_DIM
    action_dim: int = 5
    hidden: tuple = (128, 64, 32)

    def __post_init__(self):
        if len(self.hidden) != 3:
            raise PolicyConfigError("the policy has exactly three hidden layers")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def input_dim(self) -> int:
        return self.latent_dim + self.cam_dim

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class PolicyTrainConfig:
    epochs: int = 150
    batch_size: int = 128
    lr: float = 1e-3
    lr_final: float = 1e-5
    val_fraction: float = 0.1
    seed: int = 0


class PolicyNet(nn.Module):
    def __init__(self, cfg: PolicyConfig = PolicyConfig()):
        super().__init__()
        self.cfg = cfg
        sizes = [cfg.input_dim, *cfg.hidden]
        layers = []
        for a, b in zip(sizes[:-1], sizes[1:]):
            layers += [nn.Linear(a, b), nn.ELU()]
        layers.append(nn.Linear(sizes[-1], cfg.action_dim))
        self.net = nn.Sequential(*layers)
        self.register_buffer("in_mean", torch.zeros(cfg.input_dim))
        self.register_buffer("in_scale", torch.ones(cfg.input_dim))

    def set_normalization(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        self.in_mean.copy_(torch.as_tensor(x.mean(axis=0)))
        self.in_scale.copy_(torch.as_tensor(np.maximum(x.std(axis=0), 1e-6)))

    def forward(self, s: torch.Tensor, cam: torch.Tensor) -> torch.Tensor:
        if s.ndim != 2 or s.shape[1] != self.cfg.latent_dim:
            raise PolicyConfigError(f"latent must be (N, {self.cfg.latent_dim}), got {tuple(s.shape)}")
        if cam.ndim != 2 or cam.shape[1] != self.cfg.cam_dim or len(cam) != len(s):
            raise PolicyConfigError(f"camera features must be (N, {self.cfg.cam_dim}), got {tuple(cam.shape)}")
        x = (torch.cat([s, cam], dim=1) - self.in_mean) / self.in_scale
        return self.net(x)


def policy_forward(policy: PolicyNet, s, cam) -> torch.Tensor:
    """Latent action for latent ``s`` and camera features ``cam`` (batched or single)."""
    dtype = next(policy.parameters()).dtype
    s = torch.as_tensor(s, dtype=dtype)
    cam = torch.as_tensor(cam, dtype=dtype)
    single = s.ndim == 1
    if single:
        s, cam = s[None], cam[None]
    a = policy(s, cam)
    return a[0] if single else a


def final_positions(policy, traj_model, chain, s, cam) -> torch.Tensor:
    """FK position of the last step of the decoded trajectory, (N, 3)."""
    u = traj_model.decode(policy(s, cam))
    return fk_position_torch(chain, u[:, -1, :])


def end_to_end_loss(
    images,
    cams,
    targets,
    vaed: VAED,
    policy: PolicyNet,
    traj_model: TrajectoryVAE,
    chain: KinematicChain,
) -> torch.Tensor:
    """Mean over the batch of ||FK(u_T) - target||^2 with u = decode(policy(mu(image), cam)).

    The perception encoder runs without a graph; gradients reach the policy
    through the (frozen) trajectory decoder and the FK graph.
    """
    dtype = next(policy.parameters()).dtype
    if isinstance(images, torch.Tensor):
        x = images.to(dtype)
    else:
        x = images_to_tensor(images, dtype)
    with torch.no_grad():
        s, _ = vaed.encode(x)
    cams = torch.as_tensor(np.asarray(cams), dtype=dtype).reshape(len(s), -1)
    targets = torch.as_tensor(np.asarray(targets), dtype=dtype).reshape(len(s), 3)
    p = final_positions(policy, traj_model, chain, s, cams)
    return (p - targets).pow(2).sum(dim=1).mean()


def latent_loss(policy, traj_model, chain, s, cams, targets) -> torch.Tensor:
    """Same objective as :func:`end_to_end_loss` on precomputed encoder means."""
    p = final_positions(policy, traj_model, chain, s, cams)
    return (p - targets).pow(2).sum(dim=1).mean()


def success_predicate(final_pos, cup_pos, inner_radius: float, ball_radius: float = BALL_RADIUS) -> bool:
    """True iff the ball dropped at ``final_pos`` fits in the cup mouth (planar test, boundary inclusive)."""
    if inner_radius <= ball_radius:
        raise PolicyConfigError(f"inner radius {inner_radius} must exceed ball radius {ball_radius}")
    d = np.asarray(final_pos, dtype=float)[:2] - np.asarray(cup_pos, dtype=float)[:2]
    # 1e-12 m slack so a boundary case survives float rounding of the difference
    return bool(np.hypot(d[0], d[1]) <= inner_radius - ball_radius + 1e-12)


def params_digest(module: nn.Module) -> str:
    h = hashlib.sha256()
    for name, t in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(t.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def validation_report(pred, true, inner_radius: float = 0.04, ball_radius: float = BALL_RADIUS) -> dict:
    pred = np.asarray(pred, dtype=float)
    true = np.asarray(true, dtype=float)
    if len(pred) == 0:
        return {"n": 0}
    errs = np.array([position_error(p, t)["err"] for p, t in zip(pred, true)])
    ok = [success_predicate(p, t, inner_radius, ball_radius) for p, t in zip(pred, true)]
    return {
        "n": int(len(errs)),
        "mean_err_m": float(errs.mean()),
        "median_err_m": float(np.median(errs)),
        "p90_err_m": float(np.percentile(errs, 90)),
        "mean_err_3d_m": float(np.linalg.norm(pred - true, axis=1).mean()),
        "success_rate": float(np.mean(ok)),
    }


def fit_policy(
    latents,
    cams,
    targets,
    traj_model: TrajectoryVAE,
    chain: KinematicChain,
    cfg: PolicyConfig | None = None,
    train_cfg: PolicyTrainConfig = PolicyTrainConfig(),
    on_epoch: Callable | None = None,
):
    """Train a policy on precomputed encoder means; returns ``(policy, log, report)``.

    A ``val_fraction`` tail of a seeded permutation is held out for the report.
    """
    latents = np.asarray(latents, dtype=np.float32)
    cams = np.asarray(cams, dtype=np.float32)
    targets = np.asarray(targets, dtype=np.float32)
    if cfg is None:
        cfg = PolicyConfig(latent_dim=latents.shape[1], cam_dim=cams.shape[1], action_dim=traj_model.cfg.action_dim)
    if cfg.latent_dim != latents.shape[1] or cfg.action_dim != traj_model.cfg.action_dim:
        raise PolicyConfigError("policy dimensions do not match the frozen models")
    if chain.n_joints != traj_model.cfg.n_joints:
        raise PolicyConfigError("kinematic chain does not match the trajectory model")
    torch.manual_seed(train_cfg.seed)
    gen = torch.Generator().manual_seed(train_cfg.seed)
    n = len(latents)
    order = torch.randperm(n, generator=gen).numpy()
    n_val = int(round(train_cfg.val_fraction * n))
    val_idx, tr_idx = order[:n_val], order[n_val:]

    policy = PolicyNet(cfg)
    policy.set_normalization(np.concatenate([latents[tr_idx], cams[tr_idx]], axis=1))
    frozen = [p for p in traj_model.parameters()]
    for p in frozen:
        p.requires_grad_(False)
    opt = torch.optim.Adam(policy.parameters(), lr=train_cfg.lr)
    gamma = (train_cfg.lr_final / train_cfg.lr) ** (1.0 / max(train_cfg.epochs - 1, 1))
    sched = torch.optim.lr_scheduler.ExponentialLR(opt, gamma)
    S, C, Y = (torch.from_numpy(a) for a in (latents, cams, targets))
    tr = torch.from_numpy(tr_idx)
    rows = []
    for epoch in range(train_cfg.epochs):
        policy.train()
        perm = tr[torch.randperm(len(tr), generator=gen)]
        total = 0.0
        for i in range(0, len(perm), train_cfg.batch_size):
            idx = perm[i : i + train_cfg.batch_size]
            loss = latent_loss(policy, traj_model, chain, S[idx], C[idx], Y[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        sched.step()
        row = {"epoch": epoch, "loss": total / max(len(tr), 1)}
        if n_val:
            with torch.no_grad():
                pv = final_positions(policy, traj_model, chain, S[val_idx], C[val_idx]).numpy()
            row["val_mean_err_m"] = float(np.linalg.norm(pv[:, :2] - targets[val_idx, :2], axis=1).mean())
        rows.append(row)
        log.info("policy epoch %d %s", epoch, row)
        if on_epoch is not None:
            on_epoch(row)
    policy.eval()
    if n_val:
        with torch.no_grad():
            pv = final_positions(policy, traj_model, chain, S[val_idx], C[val_idx]).numpy()
        report = validation_report(pv, targets[val_idx])
    else:
        report = {"n": 0}
    return policy, rows, report


def train_policy(
    images,
    cams,
    targets,
    vaed: VAED,
    traj_model: TrajectoryVAE,
    chain: KinematicChain,
    cfg: PolicyConfig | None = None,
    train_cfg: PolicyTrainConfig = PolicyTrainConfig(),
    on_epoch: Callable | None = None,
):
    """Encode images with the frozen VAED (posterior mean) and fit the policy."""
    if vaed.cfg.latent_dim != (cfg.latent_dim if cfg else vaed.cfg.latent_dim):
        raise PolicyConfigError("policy latent_dim does not match the VAED")
    latents = encode_mean(vaed, images)
    return fit_policy(latents, cams, targets, traj_model, chain, cfg, train_cfg, on_epoch)


def save_policy(policy: PolicyNet, path, extra: dict | None = None) -> None:
    config = {"kind": "policy", "model": policy.cfg.to_dict()}
    if extra:
        config.update(extra)
    checkpoint.save(path, policy.state_dict(), config)


def load_policy(path) -> PolicyNet:
    header, tensors = checkpoint.load(path)
    config = header["config"]
    if config.get("kind") != "policy":
        raise checkpoint.CheckpointError(f"{path} is not a policy checkpoint")
    policy = PolicyNet(PolicyConfig.from_dict(config["model"]))
    policy.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
    policy.eval()
    return policy


@dataclass
class VisuomotorStack:
    """Frozen perception + policy + trajectory generator + kinematics."""

    vaed: VAED
    policy: PolicyNet
    traj_model: TrajectoryVAE
    chain: KinematicChain

    @torch.no_grad()
    def trajectory(self, rgb, cam_features) -> np.ndarray:
        s = torch.from_numpy(encode_mean(self.vaed, np.asarray(rgb)[None])).float()
        cam = torch.as_tensor(np.asarray(cam_features), dtype=torch.float32)[None]
        return self.traj_model.decode(self.policy(s, cam))[0].numpy()

    @torch.no_grad()
    def final_positions(self, rgb, cam_features) -> np.ndarray:
        """Batched: uint8 images (N, H, W, 3), features (N, 7) -> (N, 3)."""
        s = torch.from_numpy(encode_mean(self.vaed, rgb)).float()
        cam = torch.as_tensor(np.asarray(cam_features), dtype=torch.float32)
        return final_positions(self.policy, self.traj_model, self.chain, s, cam).numpy()
