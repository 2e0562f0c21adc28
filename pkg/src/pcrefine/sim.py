"""Procedural labeled scenes and a configurable noisy-prediction oracle.

Synthetic scenes (floor plus labeled boxes) and seeded corruption of their
ground truth stand in for a real dataset and raw encoder predictions, so
the whole refinement pipeline can be verified end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, ContractError
from .prototypes import SupportSet, SupportShot
from .scene import ClassSchema, PointCloudScene


@dataclass(frozen=True)
class BoxSpec:
    """An axis-aligned box of labeled points: center/size in meters,
    density in points per cubic meter."""

    class_id: int
    center: tuple[float, float, float]
    size: tuple[float, float, float]
    density: float

    def __post_init__(self):
        if self.density <= 0:
            raise ConfigError(f"box density must be positive, got {self.density}")
        if any(s <= 0 for s in self.size):
            raise ConfigError(f"box size must be positive, got {self.size}")

    @property
    def volume(self) -> float:
        return self.size[0] * self.size[1] * self.size[2]


@dataclass(frozen=True)
class SceneSpec:
    extent: tuple[float, float]
    objects: tuple[BoxSpec, ...] = ()
    floor_class: int = 0
    floor_density: float = 200.0  # points per square meter
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ConfigError(f"extent must be positive, got {self.extent}")
        if self.floor_density <= 0:
            raise ConfigError(f"floor_density must be positive, got {self.floor_density}")


@dataclass(frozen=True)
class NoiseSpec:
    """Corruption applied to ground truth, in order: whole-class dropout,
    boundary erosion of each predicted mask, then per-point label flips."""

    p_miss: float = 0.0
    erosion_frac: float = 0.0
    flip_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("p_miss", "erosion_frac", "flip_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")


def gen_scene(spec: SceneSpec) -> PointCloudScene:
    """Deterministic scene: floor at z ~ 0 plus one point blob per box.

    Every requested box contributes at least one point. Boxes must lie
    within the XY extent.
    """
    rng = np.random.default_rng(spec.seed)
    ex, ey = spec.extent

    for obj in spec.objects:
        lo_x = obj.center[0] - obj.size[0] / 2
        hi_x = obj.center[0] + obj.size[0] / 2
        lo_y = obj.center[1] - obj.size[1] / 2
        hi_y = obj.center[1] + obj.size[1] / 2
        if lo_x < 0 or hi_x > ex or lo_y < 0 or hi_y > ey:
            raise ConfigError(
                f"box of class {obj.class_id} at {obj.center} size {obj.size} "
                f"extends outside extent {spec.extent}"
            )

    n_floor = max(1, int(rng.poisson(spec.floor_density * ex * ey)))
    floor = np.empty((n_floor, 3))
    floor[:, 0] = rng.uniform(0, ex, n_floor)
    floor[:, 1] = rng.uniform(0, ey, n_floor)
    floor[:, 2] = rng.uniform(0.0, 0.02, n_floor)
    chunks = [floor]
    labels = [np.full(n_floor, spec.floor_class, dtype=np.int64)]

    for obj in spec.objects:
        n = max(1, int(rng.poisson(obj.density * obj.volume)))
        pts = np.empty((n, 3))
        for k in range(3):
            half = obj.size[k] / 2
            pts[:, k] = rng.uniform(obj.center[k] - half, obj.center[k] + half, n)
        chunks.append(pts)
        labels.append(np.full(n, obj.class_id, dtype=np.int64))

    return PointCloudScene(
        positions=np.concatenate(chunks), labels=np.concatenate(labels)
    )


def corrupt_predictions(
    gt: np.ndarray,
    positions: np.ndarray,
    noise: NoiseSpec,
    schema: ClassSchema,
) -> np.ndarray:
    """Simulated raw predictions: ground truth with seeded corruption."""
    gt = np.asarray(gt, dtype=np.int64)
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape[0] != gt.shape[0]:
        raise ConfigError("positions and labels must be aligned")
    rng = np.random.default_rng(noise.seed)
    out = gt.copy()

    # 1. Whole-class dropout of novel classes.
    for c in sorted(schema.novel_indices):
        if (out == c).any() and rng.random() < noise.p_miss:
            out[out == c] = -1

    # 2. Boundary erosion: relabel the mask points closest to the complement.
    if noise.erosion_frac > 0:
        for c in sorted(schema.novel_indices):
            mask = out == c
            n_mask = int(mask.sum())
            if n_mask == 0 or n_mask == out.shape[0]:
                continue
            k = int(np.floor(noise.erosion_frac * n_mask))
            if k == 0:
                continue
            tree = cKDTree(positions[~mask])
            dist, _ = tree.query(positions[mask], k=1)
            order = np.argsort(dist, kind="stable")
            idx = np.flatnonzero(mask)[order[:k]]
            out[idx] = -1

    # 3. Per-point flips to a uniformly random other class.
    if noise.flip_prob > 0:
        n = out.shape[0]
        nc = schema.n_classes
        flip = rng.random(n) < noise.flip_prob
        draw = rng.integers(0, nc, size=n)
        labeled = out >= 0
        # For labeled points sample from the nc - 1 other classes.
        alt = rng.integers(0, nc - 1, size=n)
        alt = alt + (alt >= out)
        new = np.where(labeled, alt, draw)
        out = np.where(flip, new, out)

    return out


def random_scene_spec(
    schema: ClassSchema,
    seed: int,
    extent: tuple[float, float] = (8.0, 8.0),
    novel_prob: float = 0.7,
    box_density: float = 400.0,
    floor_density: float = 60.0,
) -> SceneSpec:
    """A randomized spec: floor (base class 0) plus one box per included
    class. Every novel class is included with probability novel_prob; base
    classes beyond the floor get one box each."""
    rng = np.random.default_rng(seed)
    ex, ey = extent
    objects = []

    def add_box(class_id: int, scale: float) -> None:
        size = (
            float(rng.uniform(0.3, 0.9) * scale),
            float(rng.uniform(0.3, 0.9) * scale),
            float(rng.uniform(0.3, 1.2)),
        )
        center = (
            float(rng.uniform(size[0] / 2, ex - size[0] / 2)),
            float(rng.uniform(size[1] / 2, ey - size[1] / 2)),
            float(size[2] / 2),
        )
        objects.append(BoxSpec(class_id, center, size, box_density))

    for c in range(1, schema.n_base):
        add_box(c, scale=1.5)
    for c in schema.novel_indices:
        if rng.random() < novel_prob:
            add_box(c, scale=1.0)
    return SceneSpec(
        extent=extent,
        objects=tuple(objects),
        floor_class=0,
        floor_density=floor_density,
        seed=int(rng.integers(0, 2**31)),
    )


def base_only_labels(gt: np.ndarray, schema: ClassSchema) -> np.ndarray:
    """Ground truth with every novel label cleared to background."""
    gt = np.asarray(gt, dtype=np.int64)
    return np.where(gt >= schema.n_base, -1, gt)


def make_support(
    scenes: list[PointCloudScene],
    schema: ClassSchema,
    k: int,
    seed: int,
) -> SupportSet:
    """Draw K (scene, mask) shots per novel class from a corpus."""
    rng = np.random.default_rng(seed)
    shots: dict[int, tuple[SupportShot, ...]] = {}
    for c in sorted(schema.novel_indices):
        candidates = [i for i, s in enumerate(scenes) if (s.labels == c).any()]
        if len(candidates) < k:
            raise ContractError(
                f"novel class {c} ({schema.name_of(c)}) appears in only "
                f"{len(candidates)} scenes; need K = {k}"
            )
        chosen = rng.choice(len(candidates), size=k, replace=False)
        shots[c] = tuple(
            SupportShot(scenes[candidates[int(i)]],
                        scenes[candidates[int(i)]].labels == c)
            for i in chosen
        )
    return SupportSet(schema=schema, shots=shots)
