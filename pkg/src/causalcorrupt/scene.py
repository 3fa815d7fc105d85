"""Procedural multi-object scene synthesis with exact ground-truth masks.

Scenes are flat-shaded primitives (circle, square, triangle) on a solid
background. The RGB render is supersampled for antialiased edges; the label
mask is rasterized at native resolution from pixel-center coverage with no
antialiasing, so labels are hard. Everything is a pure function of
(config, scene_id, global_seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .imgio import MAX_LABELS
from .rng import STREAM_SCENE, generator_for

SHAPE_KINDS = ("circle", "square", "triangle")

# Saturated object palette on a neutral dark background.
DEFAULT_PALETTE: tuple[tuple[float, float, float], ...] = (
    (0.90, 0.10, 0.10),
    (0.10, 0.75, 0.15),
    (0.15, 0.25, 0.90),
    (0.95, 0.80, 0.10),
    (0.60, 0.15, 0.80),
    (0.10, 0.80, 0.80),
)
DEFAULT_BACKGROUND: tuple[float, float, float] = (0.30, 0.30, 0.32)

_MAX_PLACE_ATTEMPTS = 100
_MAX_SCENE_RETRIES = 100


@dataclass(frozen=True)
class SceneConfig:
    """Parameters of the scene generator.

    size is the circumradius of a shape in pixels; centers are placed so the
    whole shape stays on canvas.
    """

    width: int = 128
    height: int = 128
    n_objects: tuple[int, int] = (3, 6)
    shapes: tuple[str, ...] = SHAPE_KINDS
    palette: tuple[tuple[float, float, float], ...] = DEFAULT_PALETTE
    background: tuple[float, float, float] = DEFAULT_BACKGROUND
    size_range: tuple[float, float] = (10.0, 24.0)
    allow_occlusion: bool = True
    supersample: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "shapes", tuple(self.shapes))
        object.__setattr__(self, "palette", tuple(tuple(float(c) for c in col) for col in self.palette))
        object.__setattr__(self, "background", tuple(float(c) for c in self.background))
        object.__setattr__(self, "n_objects", (int(self.n_objects[0]), int(self.n_objects[1])))
        object.__setattr__(self, "size_range", (float(self.size_range[0]), float(self.size_range[1])))
        if self.width < 8 or self.height < 8:
            raise ConfigError(f"canvas {self.width}x{self.height} is too small")
        if self.supersample < 1:
            raise ConfigError("supersample must be >= 1")
        nmin, nmax = self.n_objects
        if nmin < 0 or nmax < nmin:
            raise ConfigError(f"bad n_objects range {self.n_objects}")
        if nmax > MAX_LABELS:
            raise ConfigError(f"n_objects max {nmax} exceeds the {MAX_LABELS} label limit")
        smin, smax = self.size_range
        if smin <= 0 or smax < smin:
            raise ConfigError(f"bad size_range {self.size_range}")
        if 2.0 * smax >= min(self.width, self.height):
            raise ConfigError(
                f"size_range max {smax} cannot fit inside a {self.width}x{self.height} canvas"
            )
        unknown = set(self.shapes) - set(SHAPE_KINDS)
        if not self.shapes or unknown:
            raise ConfigError(f"shapes must be a non-empty subset of {SHAPE_KINDS}")
        if not self.palette:
            raise ConfigError("palette must not be empty")
        for col in self.palette + (self.background,):
            if len(col) != 3 or any(not (0.0 <= c <= 1.0) for c in col):
                raise ConfigError(f"colors must be RGB triples in [0, 1], got {col}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SceneConfig":
        data = json.loads(text)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scene config keys: {sorted(unknown)}")
        for key in ("n_objects", "size_range", "shapes", "background"):
            if key in data:
                data[key] = tuple(data[key])
        if "palette" in data:
            data["palette"] = tuple(tuple(c) for c in data["palette"])
        return cls(**data)


@dataclass(frozen=True)
class SceneObject:
    label: int
    shape: str
    color: tuple[float, float, float]
    size: float
    center: tuple[float, float]
    angle: float


@dataclass(frozen=True)
class Scene:
    image: np.ndarray  # (H, W, 3) float64 in [0, 1]
    masks: np.ndarray  # (H, W) int32, 0 = background
    objects: tuple[SceneObject, ...] = field(default_factory=tuple)
    background: tuple[float, float, float] = DEFAULT_BACKGROUND

    @property
    def n_objects(self) -> int:
        return len(self.objects)


def _coverage(obj: SceneObject, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Boolean containment of points (xs, ys) in the shape."""
    cx, cy = obj.center
    dx = xs - cx
    dy = ys - cy
    if obj.shape == "circle":
        return dx * dx + dy * dy <= obj.size * obj.size
    cos_a = math.cos(-obj.angle)
    sin_a = math.sin(-obj.angle)
    u = dx * cos_a - dy * sin_a
    v = dx * sin_a + dy * cos_a
    if obj.shape == "square":
        half = obj.size / math.sqrt(2.0)
        return np.maximum(np.abs(u), np.abs(v)) <= half
    # Equilateral triangle with circumradius size, apex along +v before rotation.
    verts = [
        (obj.size * math.sin(t), -obj.size * math.cos(t))
        for t in (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)
    ]
    inside = np.ones(u.shape, dtype=bool)
    for i in range(3):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % 3]
        cross = (x2 - x1) * (v - y1) - (y2 - y1) * (u - x1)
        inside &= cross >= 0.0
    return inside


def _sample_objects(config: SceneConfig, rng: np.random.Generator) -> list[SceneObject] | None:
    """One placement attempt; None when non-occluding placement fails."""
    nmin, nmax = config.n_objects
    count = int(rng.integers(nmin, nmax + 1))
    objects: list[SceneObject] = []
    boxes: list[tuple[float, float, float, float]] = []
    for label in range(1, count + 1):
        placed = False
        for _ in range(_MAX_PLACE_ATTEMPTS):
            shape = config.shapes[int(rng.integers(0, len(config.shapes)))]
            color = config.palette[int(rng.integers(0, len(config.palette)))]
            size = float(rng.uniform(*config.size_range))
            angle = 0.0 if shape == "circle" else float(rng.uniform(0.0, 2.0 * math.pi))
            cx = float(rng.uniform(size, config.width - size))
            cy = float(rng.uniform(size, config.height - size))
            box = (cx - size, cy - size, cx + size, cy + size)
            if not config.allow_occlusion:
                clash = any(
                    box[0] < b[2] and b[0] < box[2] and box[1] < b[3] and b[1] < box[3]
                    for b in boxes
                )
                if clash:
                    continue
            objects.append(SceneObject(label, shape, color, size, (cx, cy), angle))
            boxes.append(box)
            placed = True
            break
        if not placed:
            return None
    return objects


def generate_scene(config: SceneConfig, scene_id: int, global_seed: int) -> Scene:
    """Deterministically synthesize one scene.

    When allow_occlusion is false and placement gets stuck, the scene is
    re-seeded (derived deterministically from the retry round) rather than
    silently dropping objects; ConfigError after too many rounds.
    """
    objects = None
    for retry in range(_MAX_SCENE_RETRIES):
        rng = generator_for(global_seed, scene_id, f"retry{retry}" if retry else "", STREAM_SCENE)
        objects = _sample_objects(config, rng)
        if objects is not None:
            break
    if objects is None:
        raise ConfigError(
            f"could not place objects without occlusion for scene {scene_id}; "
            "reduce n_objects or size_range"
        )

    h, w, ss = config.height, config.width, config.supersample
    # Native-resolution pixel centers for the hard label mask.
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64) + 0.5
    masks = np.zeros((h, w), dtype=np.int32)
    # Supersampled grid for the antialiased render.
    sy, sx = (np.mgrid[0 : h * ss, 0 : w * ss].astype(np.float64) + 0.5) / ss
    canvas = np.empty((h * ss, w * ss, 3), dtype=np.float64)
    canvas[:, :] = config.background

    for obj in objects:  # back-to-front; later objects overwrite
        masks[_coverage(obj, xs, ys)] = obj.label
        cover = _coverage(obj, sx, sy)
        canvas[cover] = obj.color

    image = canvas.reshape(h, ss, w, ss, 3).mean(axis=(1, 3))

    # Drop fully occluded objects and compact the surviving labels.
    visible = [obj for obj in objects if np.any(masks == obj.label)]
    relabel = np.zeros(len(objects) + 1, dtype=np.int32)
    final_objects = []
    for new_label, obj in enumerate(visible, start=1):
        relabel[obj.label] = new_label
        final_objects.append(
            SceneObject(new_label, obj.shape, obj.color, obj.size, obj.center, obj.angle)
        )
    masks = relabel[masks]

    return Scene(
        image=image,
        masks=masks,
        objects=tuple(final_objects),
        background=config.background,
    )


def scene_metadata(scene: Scene) -> dict:
    return {
        "n_objects": scene.n_objects,
        "background": list(scene.background),
        "objects": [
            {
                "label": o.label,
                "shape": o.shape,
                "color": list(o.color),
                "size": o.size,
                "center": list(o.center),
                "angle": o.angle,
            }
            for o in scene.objects
        ],
    }
