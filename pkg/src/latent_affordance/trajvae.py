"""Trajectory VAE and its training data.

Trajectories are (T, J) joint-position matrices. The decoder of the trained
VAE turns a low-dimensional action vector into a full trajectory and is the
frozen trajectory generator used during policy training.
"""
from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import checkpoint
from .kinematics import KinematicChain, _dls_solve, forward_kinematics, inverse_kinematics, UnreachableTargetError
from .vaed import kl_divergence, reparameterize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BetaSchedule:
    beta_start: float = 1e-8
    beta_end: float = 1e-5
    interval: int = 400
    factor: float = 10.0

    def __post_init__(self):
        if not 0 < self.beta_start <= self.beta_end:
            raise ValueError("need 0 < beta_start <= beta_end")
        if self.interval < 1 or self.factor < 1:
            raise ValueError("interval and factor must be >= 1")


def beta_at(schedule: BetaSchedule, epoch: int) -> float:
    """Geometric ladder: one factor step every ``interval`` epochs, capped at ``beta_end``."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    k = epoch // schedule.interval
    if schedule.factor > 1:
        # beyond this many steps the cap applies; avoids overflow for huge epochs
        k = min(k, math.ceil(math.log(schedule.beta_end / schedule.beta_start, schedule.factor)) + 1)
    return min(schedule.beta_start * schedule.factor**k, schedule.beta_end)


@dataclass(frozen=True)
class TrajVaeConfig:
    steps: int = 24
    n_joints: int = 3
    action_dim: int = 5
    hidden: tuple = (256, 128, 64)

    def __post_init__(self):
        if len(self.hidden) != 3:
            raise ValueError("the trajectory VAE uses three hidden layers per side")
        if min(self.steps, self.n_joints, self.action_dim, *self.hidden) < 1:
            raise ValueError("trajectory VAE sizes must be positive")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class TrajTrainConfig:
    epochs: int = 2000
    batch_size: int = 64
    lr: float = 1e-3
    lr_final: float = 1e-4
    seed: int = 0


def _mlp(sizes):
    layers = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        layers += [nn.Linear(a, b), nn.ELU()]
    return layers


class TrajectoryVAE(nn.Module):
    """Three ELU hidden layers per side plus linear output heads.

    Inputs are standardized with the ``u_mean`` / ``u_scale`` buffers fitted on
    the training set; decoder outputs are mapped back to radians.
    """

    def __init__(self, cfg: TrajVaeConfig = TrajVaeConfig()):
        super().__init__()
        self.cfg = cfg
        d = cfg.steps * cfg.n_joints
        h = cfg.hidden
        self.encoder = nn.Sequential(*_mlp([d, *h]))
        self.fc_mu = nn.Linear(h[-1], cfg.action_dim)
        self.fc_logvar = nn.Linear(h[-1], cfg.action_dim)
        self.decoder = nn.Sequential(*_mlp([cfg.action_dim, *h[::-1]]), nn.Linear(h[0], d))
        self.register_buffer("u_mean", torch.zeros(d))
        self.register_buffer("u_scale", torch.ones(1))

    def set_normalization(self, u: np.ndarray):
        flat = np.asarray(u, dtype=np.float64).reshape(len(u), -1)
        self.u_mean.copy_(torch.as_tensor(flat.mean(axis=0)))
        self.u_scale.fill_(float(max(flat.std(), 1e-6)))

    def encode(self, u: torch.Tensor):
        """(N, T, J) trajectories -> (mu, logvar), each (N, action_dim)."""
        T, J = self.cfg.steps, self.cfg.n_joints
        if u.ndim != 3 or u.shape[1:] != (T, J):
            raise ValueError(f"expected trajectories (N, {T}, {J}), got {tuple(u.shape)}")
        x = (u.reshape(len(u), -1) - self.u_mean) / self.u_scale
        x = self.encoder(x)
        return self.fc_mu(x), torch.clamp(self.fc_logvar(x), -10.0, 10.0)

    def decode(self, a: torch.Tensor) -> torch.Tensor:
        """(N, action_dim) actions -> (N, T, J) trajectories."""
        if a.ndim != 2 or a.shape[1] != self.cfg.action_dim:
            raise ValueError(f"expected actions (N, {self.cfg.action_dim}), got {tuple(a.shape)}")
        x = self.decoder(a) * self.u_scale + self.u_mean
        return x.view(len(a), self.cfg.steps, self.cfg.n_joints)


def reconstruction_mse(u, u_hat):
    return (u - u_hat).pow(2).mean()


def traj_loss(model: TrajectoryVAE, u, noise, beta: float):
    """MSE(u, decode(z)) + beta * KL with z reparameterized from ``noise``."""
    mu, logvar = model.encode(u)
    u_hat = model.decode(reparameterize(mu, logvar, noise))
    mse = reconstruction_mse(u, u_hat)
    kl = kl_divergence(mu, logvar)
    return mse + beta * kl, {"mse": mse, "kl": kl}


@torch.no_grad()
def reconstruct(model: TrajectoryVAE, u: np.ndarray) -> np.ndarray:
    """decode(mean(encode(u))) in the model's dtype."""
    dtype = next(model.parameters()).dtype
    mu, _ = model.encode(torch.as_tensor(np.asarray(u), dtype=dtype))
    return model.decode(mu).numpy()


def rmse_per_joint(u, u_hat) -> float:
    """Root mean squared joint error over all steps, joints and trajectories."""
    return float(np.sqrt(np.mean((np.asarray(u) - np.asarray(u_hat)) ** 2)))


def train_trajectory_vae(
    u: np.ndarray,
    cfg: TrajVaeConfig | None = None,
    schedule: BetaSchedule = BetaSchedule(),
    train_cfg: TrajTrainConfig = TrajTrainConfig(),
    on_epoch=None,
):
    """Fit the VAE on trajectories (N, T, J); ``log`` rows are {epoch, mse, kl, beta}.

    The learning rate decays geometrically from ``lr`` to ``lr_final``.
    """
    u = np.asarray(u, dtype=np.float32)
    if len(u) < 2:
        raise ValueError("need at least two trajectories")
    if cfg is None:
        cfg = TrajVaeConfig(steps=u.shape[1], n_joints=u.shape[2])
    torch.manual_seed(train_cfg.seed)
    gen = torch.Generator().manual_seed(train_cfg.seed)
    model = TrajectoryVAE(cfg)
    model.set_normalization(u)
    opt = torch.optim.Adam(model.parameters(), lr=train_cfg.lr)
    gamma = (train_cfg.lr_final / train_cfg.lr) ** (1.0 / max(train_cfg.epochs - 1, 1))
    sched = torch.optim.lr_scheduler.ExponentialLR(opt, gamma)
    data = torch.from_numpy(u)
    n = len(data)
    rows = []
    for epoch in range(train_cfg.epochs):
        beta = beta_at(schedule, epoch)
        perm = torch.randperm(n, generator=gen)
        sums = np.zeros(2)
        for i in range(0, n, train_cfg.batch_size):
            idx = perm[i : i + train_cfg.batch_size]
            noise = torch.randn(len(idx), cfg.action_dim, generator=gen)
            total, parts = traj_loss(model, data[idx], noise, beta)
            opt.zero_grad()
            total.backward()
            opt.step()
            sums += len(idx) * np.array([parts["mse"].item(), parts["kl"].item()])
        sched.step()
        mse, kl = sums / n
        row = {"epoch": epoch, "mse": float(mse), "kl": float(kl), "beta": beta}
        rows.append(row)
        if on_epoch is not None:
            on_epoch(row)
        if epoch % 100 == 0:
            log.info("trajvae epoch %d mse %.3e kl %.3f beta %.1e", epoch, mse, kl, beta)
    model.eval()
    return model, rows


def save_trajvae(model: TrajectoryVAE, path, extra: dict | None = None) -> None:
    config = {"kind": "trajvae", "model": model.cfg.to_dict()}
    if extra:
        config.update(extra)
    checkpoint.save(path, model.state_dict(), config)


def load_trajvae(path) -> TrajectoryVAE:
    header, tensors = checkpoint.load(path)
    config = header["config"]
    if config.get("kind") != "trajvae":
        raise checkpoint.CheckpointError(f"{path} is not a trajectory VAE checkpoint")
    model = TrajectoryVAE(TrajVaeConfig.from_dict(config["model"]))
    model.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model


# --- training trajectories --------------------------------------------------------


@dataclass
class TrajectorySet:
    u: np.ndarray  # (N, T, J) radians
    targets: np.ndarray  # (N, 3) end-effector goals
    joint_limits: np.ndarray  # (J, 2)
    start_config: np.ndarray  # (J,)
    grid: dict = field(default_factory=dict)
    unreachable: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.u.shape[1]

    @property
    def n_joints(self) -> int:
        return self.u.shape[2]


def interpolate_via(q_start, q_via, q_goal, steps: int) -> np.ndarray:
    """Piecewise-linear joint path start -> via -> goal with ``steps`` rows."""
    mid = (steps - 1) // 2
    first = np.linspace(0.0, 1.0, mid + 1)[:, None]
    second = np.linspace(0.0, 1.0, steps - mid)[1:, None]
    return np.concatenate([q_start + first * (q_via - q_start), q_via + second * (q_goal - q_via)])


def plan_reach(chain: KinematicChain, target, start_config, steps: int = 24, via_lift: float = 0.05, tol: float = 1e-6):
    """Joint trajectory from ``start_config`` to an IK solution for ``target``.

    The path passes through the configuration that best reaches the midpoint
    between start and goal raised by ``via_lift`` along world z (chains that
    cannot move vertically simply get the closest reachable point).
    """
    start = np.asarray(start_config, dtype=float)
    target = np.asarray(target, dtype=float)
    _, p0 = forward_kinematics(chain, start)
    via_point = 0.5 * (p0 + target) + np.array([0.0, 0.0, via_lift])
    q_via, _ = _dls_solve(chain, via_point, start, tol, 200, 0.1)
    q_goal = inverse_kinematics(chain, target, q_via, tol=tol)
    return interpolate_via(start, q_via, q_goal, steps)


def generate_training_trajectories(
    chain: KinematicChain,
    workspace,
    grid,
    start_config,
    hover_z: float,
    steps: int = 24,
    via_lift: float = 0.05,
) -> TrajectorySet:
    """One reach trajectory per cell center of an ``grid = (nx, ny)`` grid.

    ``workspace`` is ``(x_min, x_max, y_min, y_max)``; goals sit at ``hover_z``.
    Unreachable goals are left out and listed in ``unreachable``.
    """
    x0, x1, y0, y1 = (float(v) for v in workspace)
    nx, ny = (int(v) for v in grid)
    xs = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
    ys = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
    us, goals, bad = [], [], []
    for x in xs:
        for y in ys:
            goal = np.array([x, y, hover_z])
            try:
                us.append(plan_reach(chain, goal, start_config, steps, via_lift))
                goals.append(goal)
            except UnreachableTargetError as exc:
                bad.append(goal.tolist())
                log.warning("unreachable target %s (residual %.2e)", goal.tolist(), exc.residual)
    if bad:
        log.info("%d of %d grid targets unreachable", len(bad), nx * ny)
    J = chain.n_joints
    return TrajectorySet(
        np.array(us).reshape(-1, steps, J),
        np.array(goals).reshape(-1, 3),
        np.stack([chain.lower, chain.upper], axis=1),
        np.asarray(start_config, dtype=float),
        {"workspace": [x0, x1, y0, y1], "shape": [nx, ny], "hover_z": hover_z, "via_lift": via_lift},
        bad,
    )


_TRAJ_MAGIC = b"LATRAJ01"


def save_trajectory_set(ts: TrajectorySet, path) -> None:
    """JSON header (J, T, limits, grid) + little-endian float32 (N, T, J) block."""
    header = {
        "format_version": 1,
        "N": int(len(ts.u)),
        "T": int(ts.steps),
        "J": int(ts.n_joints),
        "joint_limits": ts.joint_limits.tolist(),
        "start_config": ts.start_config.tolist(),
        "grid": ts.grid,
        "targets": ts.targets.tolist(),
        "unreachable": ts.unreachable,
    }
    h = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(_TRAJ_MAGIC + struct.pack("<Q", len(h)) + h + np.ascontiguousarray(ts.u, dtype="<f4").tobytes())


def load_trajectory_set(path) -> TrajectorySet:
    blob = Path(path).read_bytes()
    if blob[:8] != _TRAJ_MAGIC:
        raise ValueError(f"{path}: not a trajectory set file")
    (hlen,) = struct.unpack_from("<Q", blob, 8)
    header = json.loads(blob[16 : 16 + hlen])
    shape = (header["N"], header["T"], header["J"])
    count = math.prod(shape)
    if len(blob) < 16 + hlen + 4 * count:
        raise ValueError(f"{path}: truncated trajectory block")
    u = np.frombuffer(blob, dtype="<f4", count=count, offset=16 + hlen).reshape(shape).astype(np.float32)
    return TrajectorySet(
        u,
        np.asarray(header["targets"], dtype=float).reshape(-1, 3),
        np.asarray(header["joint_limits"], dtype=float),
        np.asarray(header["start_config"], dtype=float),
        header["grid"],
        header["unreachable"],
    )
