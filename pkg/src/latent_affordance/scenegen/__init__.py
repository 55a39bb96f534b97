"""Domain-randomized scene generation with pixel-exact affordance labels."""
from .config import ConfigError, RandomizationConfig, load_randomization, save_randomization, simplified_config
from .dataset import (
    DatasetError,
    check_label_soundness,
    generate_dataset,
    load_arrays,
    load_manifest,
    load_sample,
    sample_seed,
    scene_for_index,
)
from .render import render, render_buffers, render_labels, render_sample
from .scene import (
    CameraPose,
    Clutter,
    Cup,
    CupProfile,
    Light,
    SceneSpec,
    Table,
    Texture,
    generate_cup_profile,
    sample_scene,
)

__all__ = [
    "CameraPose",
    "Clutter",
    "ConfigError",
    "Cup",
    "CupProfile",
    "DatasetError",
    "Light",
    "RandomizationConfig",
    "SceneSpec",
    "Table",
    "Texture",
    "check_label_soundness",
    "generate_cup_profile",
    "generate_dataset",
    "load_arrays",
    "load_manifest",
    "load_randomization",
    "load_sample",
    "render",
    "render_buffers",
    "render_labels",
    "render_sample",
    "sample_scene",
    "sample_seed",
    "save_randomization",
    "scene_for_index",
    "simplified_config",
]
