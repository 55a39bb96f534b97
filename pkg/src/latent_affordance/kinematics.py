"""Serial-arm kinematics.

A chain is a base pose followed by revolute joints. Each joint carries a fixed
offset transform (applied before the joint rotation) and a unit rotation axis
expressed in the joint's own frame. An optional tip transform maps the last
joint frame to the end effector.

Two forward-kinematics paths exist: :func:`forward_kinematics` in float64
numpy (used by IK and as a reference) and :func:`fk_torch`, a batched torch
version that lives inside training graphs.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

log = logging.getLogger(__name__)

DEFAULT_DAMPING = 0.1
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 200


class KinematicsError(ValueError):
    """Malformed chain or joint vector."""


class UnreachableTargetError(RuntimeError):
    def __init__(self, target, best_q, residual):
        self.target = np.asarray(target, dtype=float)
        self.best_q = np.asarray(best_q, dtype=float)
        self.residual = float(residual)
        super().__init__(
            f"IK did not reach {self.target.tolist()} (best residual {self.residual:.3e} m)"
        )


def translation(x=0.0, y=0.0, z=0.0) -> np.ndarray:
    T = np.eye(4)
    T[:3, 3] = (x, y, z)
    return T


def axis_angle(axis, angle: float) -> np.ndarray:
    """3x3 rotation about a unit axis (Rodrigues)."""
    k = np.asarray(axis, dtype=float)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def check_pose(T: np.ndarray, tol: float = 1e-9) -> bool:
    T = np.asarray(T, dtype=float)
    if T.shape != (4, 4):
        return False
    R = T[:3, :3]
    return bool(
        np.allclose(R.T @ R, np.eye(3), atol=tol, rtol=0)
        and abs(np.linalg.det(R) - 1.0) <= tol
        and np.array_equal(T[3], [0.0, 0.0, 0.0, 1.0])
    )


@dataclass(frozen=True)
class Joint:
    axis: np.ndarray
    offset: np.ndarray
    limits: tuple[float, float]
    name: str = ""

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(axis)
        if not np.isfinite(n) or abs(n - 1.0) > 1e-9:
            raise KinematicsError(f"joint axis must be unit-norm, got {axis.tolist()}")
        offset = np.asarray(self.offset, dtype=float).reshape(4, 4)
        if not check_pose(offset, tol=1e-6):
            raise KinematicsError("joint offset is not a rigid transform")
        lo, hi = (float(v) for v in self.limits)
        if not lo < hi:
            raise KinematicsError(f"joint limits need lo < hi, got ({lo}, {hi})")
        axis.setflags(write=False)
        offset.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "limits", (lo, hi))


@dataclass(frozen=True)
class KinematicChain:
    joints: tuple[Joint, ...]
    base: np.ndarray = field(default_factory=lambda: np.eye(4))
    tip: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        joints = tuple(self.joints)
        if not joints:
            raise KinematicsError("a chain needs at least one joint")
        for name in ("base", "tip"):
            T = np.asarray(getattr(self, name), dtype=float).reshape(4, 4)
            if not check_pose(T, tol=1e-6):
                raise KinematicsError(f"{name} is not a rigid transform")
            T.setflags(write=False)
            object.__setattr__(self, name, T)
        object.__setattr__(self, "joints", joints)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints])

    def with_base(self, base: np.ndarray) -> "KinematicChain":
        return KinematicChain(self.joints, base, self.tip)

    def to_dict(self) -> dict:
        return {
            "base": self.base.reshape(-1).tolist(),
            "tip": self.tip.reshape(-1).tolist(),
            "joints": [
                {
                    "name": j.name,
                    "axis": j.axis.tolist(),
                    "offset": j.offset.reshape(-1).tolist(),
                    "limits": list(j.limits),
                }
                for j in self.joints
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KinematicChain":
        joints = tuple(
            Joint(
                axis=j["axis"],
                offset=np.asarray(j["offset"], dtype=float).reshape(4, 4),
                limits=tuple(j["limits"]),
                name=j.get("name", ""),
            )
            for j in d["joints"]
        )
        base = np.asarray(d.get("base", np.eye(4).ravel()), dtype=float).reshape(4, 4)
        tip = np.asarray(d.get("tip", np.eye(4).ravel()), dtype=float).reshape(4, 4)
        return cls(joints, base, tip)


def load_chain(path) -> KinematicChain:
    """Read a chain file (JSON: base, joints[axis, offset(16 row-major), limits])."""
    with open(path) as f:
        return KinematicChain.from_dict(json.load(f))


def save_chain(chain: KinematicChain, path) -> None:
    Path(path).write_text(json.dumps(chain.to_dict(), indent=2))


def planar_chain(
    lengths: Sequence[float],
    base_height: float = 0.0,
    limits: Sequence[tuple[float, float]] | None = None,
) -> KinematicChain:
    """Horizontal planar arm: every joint rotates about world z."""
    lengths = [float(l) for l in lengths]
    if limits is None:
        limits = [(-np.pi, np.pi)] * len(lengths)
    joints = []
    for i, lim in enumerate(limits):
        offset = translation(lengths[i - 1]) if i > 0 else np.eye(4)
        joints.append(Joint((0.0, 0.0, 1.0), offset, tuple(lim), name=f"joint{i + 1}"))
    return KinematicChain(tuple(joints), translation(0, 0, base_height), translation(lengths[-1]))


def default_arm() -> KinematicChain:
    """Three-link planar arm mounted at hover height; the pipeline default."""
    return planar_chain(
        [0.35, 0.30, 0.15],
        base_height=0.25,
        limits=[(-np.pi, np.pi), (-2.6, 2.6), (-2.6, 2.6)],
    )


def panda_chain() -> KinematicChain:
    return load_chain(Path(__file__).parent / "data" / "franka_panda.json")


def _check_q(chain: KinematicChain, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.n_joints,):
        raise KinematicsError(f"expected {chain.n_joints} joint values, got shape {q.shape}")
    return q


def joint_frames(chain: KinematicChain, q) -> tuple[list[np.ndarray], np.ndarray]:
    """World frame of every joint (before its rotation) and the end-effector pose."""
    q = _check_q(chain, q)
    T = chain.base.copy()
    frames = []
    for joint, qi in zip(chain.joints, q):
        T = T @ joint.offset
        frames.append(T.copy())
        R = np.eye(4)
        R[:3, :3] = axis_angle(joint.axis, qi)
        T = T @ R
    return frames, T @ chain.tip


def forward_kinematics(chain: KinematicChain, q) -> tuple[np.ndarray, np.ndarray]:
    """End-effector pose and position for joint vector ``q``.

    Out-of-limit joints only log a warning; the pose is still computed.
    """
    q = _check_q(chain, q)
    if np.any(q < chain.lower) or np.any(q > chain.upper):
        log.warning("joint vector outside limits: %s", q.tolist())
    _, T = joint_frames(chain, q)
    return T, T[:3, 3].copy()


def fk_jacobian(chain: KinematicChain, q) -> np.ndarray:
    """3xJ positional geometric Jacobian; column j = axis_j x (p_ee - p_j)."""
    frames, T = joint_frames(chain, q)
    p_ee = T[:3, 3]
    J = np.empty((3, chain.n_joints))
    for j, (F, joint) in enumerate(zip(frames, chain.joints)):
        J[:, j] = np.cross(F[:3, :3] @ joint.axis, p_ee - F[:3, 3])
    return J


def _dls_solve(chain, target, q0, tol, max_iter, damping):
    lo, hi = chain.lower, chain.upper
    q = np.clip(np.asarray(q0, dtype=float), lo, hi)
    best_q, best_err = q.copy(), np.inf
    for _ in range(max_iter + 1):
        _, T = joint_frames(chain, q)
        e = target - T[:3, 3]
        err = float(np.linalg.norm(e))
        if err < best_err:
            best_q, best_err = q.copy(), err
        if err <= tol:
            break
        J = fk_jacobian(chain, q)
        # damping shrinks with the residual so convergence stays fast near singular poses
        lam2 = damping**2 * min(err, 1.0)
        dq = J.T @ np.linalg.solve(J @ J.T + lam2 * np.eye(3), e)
        q = np.clip(q + dq, lo, hi)
    return best_q, best_err


def inverse_kinematics(
    chain: KinematicChain,
    target,
    q0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    damping: float = DEFAULT_DAMPING,
) -> np.ndarray:
    """Position-only damped-least-squares IK seeded at ``q0``.

    Joint limits are enforced by clipping after every step. Raises
    :class:`UnreachableTargetError` when ``tol`` is not met in ``max_iter``.
    """
    target = np.asarray(target, dtype=float).reshape(3)
    if not np.all(np.isfinite(target)):
        raise KinematicsError("IK target must be finite")
    _check_q(chain, q0)
    q, err = _dls_solve(chain, target, q0, tol, max_iter, damping)
    if err > tol:
        raise UnreachableTargetError(target, q, err)
    return q


# --- torch path -------------------------------------------------------------


def _chain_tensors(chain: KinematicChain, dtype, device):
    as_t = lambda a: torch.as_tensor(np.array(a), dtype=dtype, device=device)
    return (
        as_t(chain.base),
        as_t(np.stack([j.offset for j in chain.joints])),
        as_t(np.stack([j.axis for j in chain.joints])),
        as_t(chain.tip),
    )


def fk_torch(chain: KinematicChain, q: torch.Tensor) -> torch.Tensor:
    """Batched differentiable FK. ``q``: (..., J) -> end-effector poses (..., 4, 4)."""
    if q.shape[-1] != chain.n_joints:
        raise KinematicsError(f"expected {chain.n_joints} joint values, got {q.shape[-1]}")
    base, offsets, axes, tip = _chain_tensors(chain, q.dtype, q.device)
    batch = q.shape[:-1]
    T = base.expand(*batch, 4, 4)
    eye3 = torch.eye(3, dtype=q.dtype, device=q.device)
    bottom = torch.tensor([0.0, 0.0, 0.0, 1.0], dtype=q.dtype, device=q.device)
    for j in range(chain.n_joints):
        k = axes[j]
        K = torch.zeros(3, 3, dtype=q.dtype, device=q.device)
        K[0, 1], K[0, 2], K[1, 0] = -k[2], k[1], k[2]
        K[1, 2], K[2, 0], K[2, 1] = -k[0], -k[1], k[0]
        th = q[..., j, None, None]
        R = eye3 + torch.sin(th) * K + (1.0 - torch.cos(th)) * (K @ K)
        top = torch.cat([R, torch.zeros(*batch, 3, 1, dtype=q.dtype, device=q.device)], dim=-1)
        Rh = torch.cat([top, bottom.expand(*batch, 1, 4)], dim=-2)
        T = T @ offsets[j] @ Rh
    return T @ tip


def fk_position_torch(chain: KinematicChain, q: torch.Tensor) -> torch.Tensor:
    return fk_torch(chain, q)[..., :3, 3]
