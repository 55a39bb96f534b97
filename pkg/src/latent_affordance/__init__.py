"""Latent-space visuomotor stack for learning cup affordances from synthetic scenes.

Perception (VAED) maps an RGB image to a 10-d latent and per-pixel
affordance maps; a small policy maps that latent plus camera pose to a 5-d
action; a trajectory VAE decoder turns the action into joint angles.
"""

from latent_affordance.kinematics import KinematicChain, default_arm, fk_jacobian, forward_kinematics, inverse_kinematics
from latent_affordance.metrics import pixel_f1, weighted_fbeta
from latent_affordance.policy import PolicyConfig, PolicyNet, VisuomotorStack, success_predicate
from latent_affordance.trajvae import BetaSchedule, TrajectoryVAE, TrajVaeConfig, beta_at
from latent_affordance.vaed import VAED, VaedConfig

__version__ = "0.1.0"

__all__ = [
    "VAED",
    "BetaSchedule",
    "KinematicChain",
    "PolicyConfig",
    "PolicyNet",
    "TrajVaeConfig",
    "TrajectoryVAE",
    "VaedConfig",
    "VisuomotorStack",
    "beta_at",
    "default_arm",
    "fk_jacobian",
    "forward_kinematics",
    "inverse_kinematics",
    "pixel_f1",
    "success_predicate",
    "weighted_fbeta",
]
