"""From joint angles to a learned 5-d trajectory space.

Walks through the default 3-joint planar arm: forward kinematics, its
Jacobian against finite differences, damped least squares IK to a hover
point, and a short trajectory-VAE fit on a coarse grid of reaching motions.

    python3 demos/arm_and_trajectories.py
"""

import numpy as np

from latent_affordance.kinematics import default_arm, fk_jacobian, forward_kinematics, inverse_kinematics
from latent_affordance.trajvae import (
    BetaSchedule,
    TrajTrainConfig,
    generate_training_trajectories,
    reconstruct,
    rmse_per_joint,
    train_trajectory_vae,
)

arm = default_arm()
start = np.array([0.0, 1.9, 1.6])
_, p = forward_kinematics(arm, start)
print("start pose end effector:", np.round(p, 4))

J = fk_jacobian(arm, start)
h = 1e-6
fd = np.stack([(forward_kinematics(arm, start + h * e)[1] - forward_kinematics(arm, start - h * e)[1]) / (2 * h) for e in np.eye(3)], 1)
print("Jacobian vs central differences, max abs diff:", f"{np.abs(J - fd).max():.1e}")

goal = [0.45, 0.1, 0.25]
q = inverse_kinematics(arm, goal, start)
print("IK to", goal, "->", np.round(q, 3), "residual", f"{np.linalg.norm(forward_kinematics(arm, q)[1] - goal):.1e} m")

ts = generate_training_trajectories(arm, (0.30, 0.60, -0.20, 0.20), (12, 10), start, 0.25)
print(f"{len(ts.u)} reaching trajectories of shape {ts.u.shape[1:]}, {len(ts.unreachable)} unreachable targets")

order = np.random.default_rng(0).permutation(len(ts.u))
held, train = order[:20], order[20:]
model, log = train_trajectory_vae(ts.u[train], None, BetaSchedule(interval=100), TrajTrainConfig(epochs=500))
print("beta went", log[0]["beta"], "->", log[-1]["beta"])
print(f"held-out reconstruction RMSE {rmse_per_joint(ts.u[held], reconstruct(model, ts.u[held])):.4f} rad")
