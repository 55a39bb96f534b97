"""Randomization ranges for scene sampling.

Stored as a flat ``key = value`` text file; ranges are two whitespace-separated
numbers, ``#`` starts a comment. Unknown keys are rejected.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

TEXTURE_KINDS = ("flat", "checker", "noise", "stripes")


class ConfigError(ValueError):
    pass


Range = tuple[float, float]


@dataclass(frozen=True)
class RandomizationConfig:
    # cup placement, meters (robot base frame, table top at z = 0)
    workspace_x: Range = (0.30, 0.60)
    workspace_y: Range = (-0.20, 0.20)
    # cup shape
    cup_radius: Range = (0.030, 0.050)
    cup_height: Range = (0.08, 0.16)
    cup_profile_samples: int = 6
    cup_max_ratio: float = 1.5
    cup_smoothness: float = 0.5
    cup_step_std: float = 0.25
    cup_base_fraction: Range = (0.04, 0.12)
    # clutter
    clutter_count: Range = (0, 10)
    clutter_size: Range = (0.015, 0.05)
    clutter_x: Range = (0.10, 0.85)
    clutter_y: Range = (-0.45, 0.45)
    clutter_shapes: tuple[str, ...] = ("box", "sphere", "cylinder")
    # table half-extents are nominal * scale
    table_scale: Range = (0.9, 1.15)
    # camera
    camera_x: Range = (0.40, 0.50)
    camera_y: Range = (0.50, 0.60)
    camera_z: Range = (0.65, 0.75)
    look_at_x: Range = (0.43, 0.47)
    look_at_y: Range = (-0.05, -0.01)
    look_at_z: Range = (0.01, 0.05)
    focal: Range = (100.0, 110.0)
    image_height: int = 64
    image_width: int = 64
    # lights
    light_count: Range = (1, 3)
    light_x: Range = (-0.2, 1.1)
    light_y: Range = (-0.8, 0.8)
    light_z: Range = (0.8, 1.6)
    light_intensity: Range = (0.3, 0.9)
    # textures
    texture_kinds: tuple[str, ...] = TEXTURE_KINDS
    texture_scale: Range = (8.0, 60.0)

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
                if not v[0] <= v[1]:
                    raise ConfigError(f"{f.name}: min {v[0]} exceeds max {v[1]}")
        if self.cup_profile_samples < 4:
            raise ConfigError("cup_profile_samples must be >= 4")
        if self.cup_radius[0] <= 0 or self.cup_height[0] <= 0:
            raise ConfigError("cup radius and height must be positive")
        if self.cup_max_ratio < 1.0:
            raise ConfigError("cup_max_ratio must be >= 1")
        if not 0 < self.cup_smoothness:
            raise ConfigError("cup_smoothness must be positive")
        if self.clutter_count[0] < 0 or self.light_count[0] < 0:
            raise ConfigError("counts must be non-negative")
        if self.clutter_size[0] <= 0 or self.table_scale[0] <= 0:
            raise ConfigError("scales must be positive")
        if self.focal[0] <= 0 or self.image_height < 1 or self.image_width < 1:
            raise ConfigError("camera intrinsics must be positive")
        bad = set(self.texture_kinds) - set(TEXTURE_KINDS)
        if bad or not self.texture_kinds:
            raise ConfigError(f"unknown texture kinds {sorted(bad)}")
        if not self.clutter_shapes or set(self.clutter_shapes) - {"box", "sphere", "cylinder"}:
            raise ConfigError(f"bad clutter shapes {self.clutter_shapes}")

    @property
    def image_size(self) -> tuple[int, int]:
        return (self.image_height, self.image_width)

    def replace(self, **kw) -> "RandomizationConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v, tuple) else v) for f in fields(self) for v in [getattr(self, f.name)]}

    @classmethod
    def from_mapping(cls, m) -> "RandomizationConfig":
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for key, raw in m.items():
            if key not in known:
                raise ConfigError(f"unknown randomization key {key!r}")
            default = getattr(cls, key, None)
            if isinstance(raw, str):
                parts = raw.split()
            elif isinstance(raw, (list, tuple)):
                parts = list(raw)
            else:
                parts = [raw]
            try:
                if isinstance(default, tuple) and default and isinstance(default[0], str):
                    kw[key] = tuple(str(p) for p in parts)
                elif isinstance(default, tuple):
                    if len(parts) != 2:
                        raise ConfigError(f"{key}: expected 'min max', got {raw!r}")
                    kw[key] = (float(parts[0]), float(parts[1]))
                elif isinstance(default, int):
                    kw[key] = int(parts[0])
                else:
                    kw[key] = float(parts[0])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: cannot parse {raw!r}") from exc
        return cls(**kw)

    def dumps(self) -> str:
        out = []
        for k, v in self.to_dict().items():
            out.append(f"{k} = {' '.join(str(x) for x in v) if isinstance(v, list) else v}")
        return "\n".join(out) + "\n"


def load_randomization(path) -> RandomizationConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[randomization]\n" + Path(path).read_text())
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return RandomizationConfig.from_mapping(dict(parser["randomization"]))


def save_randomization(cfg: RandomizationConfig, path) -> None:
    Path(path).write_text(cfg.dumps())


def simplified_config(**overrides) -> RandomizationConfig:
    """Clutter-free scenes with light camera jitter, used for policy training."""
    base = RandomizationConfig(
        clutter_count=(0, 0),
        camera_x=(0.44, 0.46),
        camera_y=(0.54, 0.56),
        camera_z=(0.69, 0.71),
        look_at_x=(0.445, 0.455),
        look_at_y=(-0.035, -0.025),
        look_at_z=(0.025, 0.035),
        focal=(104.0, 106.0),
    )
    return base.replace(**overrides)
