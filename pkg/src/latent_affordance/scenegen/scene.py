"""Scene description types and the randomized sampler."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d

from .config import ConfigError, RandomizationConfig

# nominal table: centered in front of the robot, half-extents scaled per scene
TABLE_CENTER = (0.45, 0.0)
TABLE_HALF = (0.45, 0.55)


@dataclass(frozen=True)
class Texture:
    kind: str = "flat"
    base_color: tuple[float, float, float] = (0.5, 0.5, 0.5)
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return {"kind": self.kind, "base_color": list(self.base_color), "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], tuple(d["base_color"]), dict(d.get("params", {})))


@dataclass(frozen=True)
class CupProfile:
    heights: tuple[float, ...]
    radii: tuple[float, ...]
    split_height: float

    def __post_init__(self):
        h = np.asarray(self.heights)
        if len(self.heights) != len(self.radii) or len(h) < 2:
            raise ValueError("heights and radii must have equal length >= 2")
        if h[0] != 0.0 or np.any(np.diff(h) <= 0):
            raise ValueError("heights must start at 0 and strictly increase")
        if not 0 <= self.split_height < h[-1]:
            raise ValueError("split_height must lie inside the cup")

    @property
    def height(self) -> float:
        return self.heights[-1]

    def radius_at(self, z):
        return np.interp(z, self.heights, self.radii)

    @property
    def inner_radius(self) -> float:
        """Mouth radius."""
        return float(self.radii[-1])

    def to_dict(self):
        return {"heights": list(self.heights), "radii": list(self.radii), "split_height": self.split_height}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["heights"]), tuple(d["radii"]), float(d["split_height"]))


@dataclass(frozen=True)
class Cup:
    profile: CupProfile
    x: float
    y: float
    inner_texture: Texture
    outer_texture: Texture

    def to_dict(self):
        return {
            "profile": self.profile.to_dict(),
            "pose": [self.x, self.y],
            "inner_texture": self.inner_texture.to_dict(),
            "outer_texture": self.outer_texture.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            CupProfile.from_dict(d["profile"]),
            float(d["pose"][0]),
            float(d["pose"][1]),
            Texture.from_dict(d["inner_texture"]),
            Texture.from_dict(d["outer_texture"]),
        )


@dataclass(frozen=True)
class Clutter:
    """Primitive resting on the table.

    ``scale`` holds half-extents for a box, (radius, -, -) for a sphere and
    (radius, -, half-height) for a cylinder. ``pose`` is (x, y, yaw).
    """

    shape: str
    pose: tuple[float, float, float]
    scale: tuple[float, float, float]
    texture: Texture

    def __post_init__(self):
        if self.shape not in ("box", "sphere", "cylinder"):
            raise ValueError(f"unknown clutter shape {self.shape!r}")
        if min(self.scale) <= 0:
            raise ValueError("clutter scale must be positive")

    def to_dict(self):
        return {"shape": self.shape, "pose": list(self.pose), "scale": list(self.scale), "texture": self.texture.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["shape"], tuple(d["pose"]), tuple(d["scale"]), Texture.from_dict(d["texture"]))


@dataclass(frozen=True)
class Table:
    texture: Texture
    scale: float = 1.0

    @property
    def bounds(self):
        cx, cy = TABLE_CENTER
        hx, hy = TABLE_HALF[0] * self.scale, TABLE_HALF[1] * self.scale
        return (cx - hx, cx + hx, cy - hy, cy + hy)

    def to_dict(self):
        return {"texture": self.texture.to_dict(), "scale": self.scale}

    @classmethod
    def from_dict(cls, d):
        return cls(Texture.from_dict(d["texture"]), float(d["scale"]))


@dataclass(frozen=True)
class CameraPose:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 0.0, 1.0)
    focal: float = 85.0
    image_size: tuple[int, int] = (64, 64)

    def __post_init__(self):
        p, t, u = (np.asarray(v, dtype=float) for v in (self.position, self.look_at, self.up))
        view = t - p
        if np.linalg.norm(view) == 0:
            raise ValueError("camera position equals look_at")
        if np.linalg.norm(np.cross(view, u)) < 1e-9 * np.linalg.norm(view) * np.linalg.norm(u):
            raise ValueError("camera up vector is parallel to the view direction")
        if self.focal <= 0:
            raise ValueError("focal length must be positive")

    def basis(self):
        """(forward, right, up) orthonormal camera axes in world coordinates."""
        f = np.subtract(self.look_at, self.position).astype(float)
        f /= np.linalg.norm(f)
        r = np.cross(f, self.up)
        r /= np.linalg.norm(r)
        return f, r, np.cross(r, f)

    def features(self) -> np.ndarray:
        """Policy input: position (3), unit view direction (3), focal (1)."""
        f, _, _ = self.basis()
        return np.concatenate([np.asarray(self.position, dtype=float), f, [float(self.focal)]])

    def to_dict(self):
        return {
            "position": list(self.position),
            "look_at": list(self.look_at),
            "up": list(self.up),
            "focal": self.focal,
            "image_size": list(self.image_size),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["position"]), tuple(d["look_at"]), tuple(d["up"]), float(d["focal"]), tuple(d["image_size"]))


@dataclass(frozen=True)
class Light:
    position: tuple[float, float, float]
    intensity: float

    def to_dict(self):
        return {"position": list(self.position), "intensity": self.intensity}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["position"]), float(d["intensity"]))


@dataclass(frozen=True)
class SceneSpec:
    cup: Cup | None
    clutter: tuple[Clutter, ...]
    table: Table
    camera: CameraPose
    lights: tuple[Light, ...]
    seed: int = 0

    def to_dict(self):
        return {
            "cup": None if self.cup is None else self.cup.to_dict(),
            "clutter": [c.to_dict() for c in self.clutter],
            "table": self.table.to_dict(),
            "camera": self.camera.to_dict(),
            "lights": [l.to_dict() for l in self.lights],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            None if d["cup"] is None else Cup.from_dict(d["cup"]),
            tuple(Clutter.from_dict(c) for c in d["clutter"]),
            Table.from_dict(d["table"]),
            CameraPose.from_dict(d["camera"]),
            tuple(Light.from_dict(l) for l in d["lights"]),
            int(d["seed"]),
        )

    def cup_position(self) -> np.ndarray:
        """Cup base center in world coordinates (table top is z = 0)."""
        if self.cup is None:
            raise ValueError("scene has no cup")
        return np.array([self.cup.x, self.cup.y, 0.0])


# --- sampling ---------------------------------------------------------------


def _u(rng, r):
    return float(rng.uniform(r[0], r[1])) if r[0] < r[1] else float(r[0])


def _count(rng, r):
    return int(rng.integers(int(r[0]), int(r[1]) + 1))


def sample_texture(rng: np.random.Generator, cfg: RandomizationConfig) -> Texture:
    kind = str(cfg.texture_kinds[rng.integers(len(cfg.texture_kinds))])
    base = tuple(float(c) for c in rng.uniform(0, 1, 3))
    second = [float(c) for c in rng.uniform(0, 1, 3)]
    params: dict = {}
    if kind != "flat":
        params = {"color2": second, "scale": _u(rng, cfg.texture_scale)}
        if kind == "stripes":
            d = rng.normal(size=3)
            params["direction"] = (d / np.linalg.norm(d)).tolist()
        elif kind == "noise":
            params["seed"] = int(rng.integers(0, 2**31 - 1))
    return Texture(kind, base, params)


def generate_cup_profile(rng: np.random.Generator, cfg: RandomizationConfig) -> CupProfile:
    """Smoothed random-walk radius profile.

    The walk starts at a uniform radius, takes clipped Gaussian steps, is
    clipped to a band that keeps max/min <= ``cup_max_ratio`` inside the
    configured radius range, and is finally smoothed with a 3-tap moving
    average (which can only shrink both the band and the step sizes).
    """
    r_min, r_max = cfg.cup_radius
    k = cfg.cup_profile_samples
    height = _u(rng, cfg.cup_height)
    span = r_max - r_min
    r0 = _u(rng, cfg.cup_radius)
    steps = rng.normal(0.0, cfg.cup_step_std * span, k - 1)
    max_step = 0.99 * cfg.cup_smoothness * span
    steps = np.clip(steps, -max_step, max_step)
    lo = max(r_min, r0 / np.sqrt(cfg.cup_max_ratio))
    hi = min(r_max, r0 * np.sqrt(cfg.cup_max_ratio))
    walk = np.empty(k)
    walk[0] = r0
    for i, s in enumerate(steps, start=1):
        walk[i] = np.clip(walk[i - 1] + s, lo, hi)
    radii = uniform_filter1d(walk, size=3, mode="nearest")
    radii = np.clip(radii, lo, hi)
    heights = np.linspace(0.0, height, k)
    split = _u(rng, cfg.cup_base_fraction) * height
    return CupProfile(tuple(heights.tolist()), tuple(radii.tolist()), float(split))


def sample_camera(rng, cfg: RandomizationConfig) -> CameraPose:
    pos = (_u(rng, cfg.camera_x), _u(rng, cfg.camera_y), _u(rng, cfg.camera_z))
    at = (_u(rng, cfg.look_at_x), _u(rng, cfg.look_at_y), _u(rng, cfg.look_at_z))
    return CameraPose(pos, at, (0.0, 0.0, 1.0), _u(rng, cfg.focal), cfg.image_size)


def _sample_clutter(rng, cfg: RandomizationConfig, cup: Cup | None) -> Clutter:
    shape = str(cfg.clutter_shapes[rng.integers(len(cfg.clutter_shapes))])
    size = rng.uniform(cfg.clutter_size[0], cfg.clutter_size[1], 3) if cfg.clutter_size[0] < cfg.clutter_size[1] else np.full(3, cfg.clutter_size[0])
    if shape == "sphere":
        size[1] = size[2] = size[0]
    elif shape == "cylinder":
        size[1] = size[0]
    texture = sample_texture(rng, cfg)
    yaw = float(rng.uniform(-np.pi, np.pi))
    # rejection keeps clutter from interpenetrating the cup; give up after a few tries
    for _ in range(20):
        x, y = _u(rng, cfg.clutter_x), _u(rng, cfg.clutter_y)
        if cup is None:
            break
        reach = float(np.linalg.norm(size[:2])) + max(cup.profile.radii)
        if np.hypot(x - cup.x, y - cup.y) > reach:
            break
    return Clutter(shape, (x, y, yaw), tuple(float(s) for s in size), texture)


def sample_scene(rng: np.random.Generator, cfg: RandomizationConfig, seed: int = 0) -> SceneSpec:
    """Draw one randomized scene. Deterministic given the generator state."""
    if not isinstance(cfg, RandomizationConfig):
        raise ConfigError("sample_scene needs a RandomizationConfig")
    profile = generate_cup_profile(rng, cfg)
    cup = Cup(
        profile,
        _u(rng, cfg.workspace_x),
        _u(rng, cfg.workspace_y),
        sample_texture(rng, cfg),
        sample_texture(rng, cfg),
    )
    n_clutter = _count(rng, cfg.clutter_count)
    clutter = tuple(_sample_clutter(rng, cfg, cup) for _ in range(n_clutter))
    table = Table(sample_texture(rng, cfg), _u(rng, cfg.table_scale))
    camera = sample_camera(rng, cfg)
    n_lights = _count(rng, cfg.light_count)
    lights = tuple(
        Light((_u(rng, cfg.light_x), _u(rng, cfg.light_y), _u(rng, cfg.light_z)), _u(rng, cfg.light_intensity))
        for _ in range(n_lights)
    )
    return SceneSpec(cup, clutter, table, camera, lights, int(seed))
