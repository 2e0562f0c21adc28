"""Novel-base mix augmentation: crop a support sample around its novel
object, align it to the base scene at a randomly chosen pair of opposite
XY corners with floor-level Z alignment, and concatenate. Repeating for
several blocks grows the scene outward while leaving base points untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyMaskError
from .prototypes import SupportSet
from .scene import PointCloudScene

PAIRINGS = ("bottom", "top", "left", "right")

# Selected base corner -> opposite novel corner.
_OPPOSITE = {"bottom": "top", "top": "bottom", "left": "right", "right": "left"}


@dataclass(frozen=True)
class MixConfig:
    n_blocks: int = 3
    crop_margin_xy: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_blocks < 1:
            raise ConfigError(f"n_blocks must be >= 1, got {self.n_blocks}")
        if self.crop_margin_xy < 0:
            raise ConfigError(f"crop_margin_xy must be >= 0, got {self.crop_margin_xy}")


@dataclass(frozen=True)
class CornerSet:
    """XY-extreme points of a cloud: top (max Y), bottom (min Y),
    left (min X), right (max X). Full 3D coordinates are retained."""

    top: np.ndarray
    bottom: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __getitem__(self, key: str) -> np.ndarray:
        return getattr(self, key)


def corners_xy(points: np.ndarray) -> CornerSet:
    """Extreme points in the XY plane; ties break to the smallest index."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ConfigError("corners_xy needs at least one point")
    return CornerSet(
        top=points[int(np.argmax(points[:, 1]))].copy(),
        bottom=points[int(np.argmin(points[:, 1]))].copy(),
        left=points[int(np.argmin(points[:, 0]))].copy(),
        right=points[int(np.argmax(points[:, 0]))].copy(),
    )


def pick_pair(rng: np.random.Generator) -> str:
    """Uniformly choose which base corner to align; the novel cloud
    contributes the opposite corner."""
    return PAIRINGS[int(rng.integers(0, 4))]


def crop_novel(
    support_scene: PointCloudScene, mask: np.ndarray, margin: float
) -> tuple[PointCloudScene, np.ndarray]:
    """Cut the XY bounding box of masked points, expanded by margin per side.

    The full Z range is kept. Retained points carry the support scene's label
    where masked and -1 elsewhere, so surrounding context comes along without
    leaking foreign labels.
    """
    mask = np.asarray(mask).astype(bool)
    if not mask.any():
        raise EmptyMaskError("crop mask selects no points")
    pos = support_scene.positions
    lo = pos[mask, :2].min(axis=0) - margin
    hi = pos[mask, :2].max(axis=0) + margin
    keep = (
        (pos[:, 0] >= lo[0]) & (pos[:, 0] <= hi[0])
        & (pos[:, 1] >= lo[1]) & (pos[:, 1] <= hi[1])
    )
    kept_mask = mask[keep]
    labels = np.where(kept_mask, support_scene.labels[keep], -1)
    colors = support_scene.colors[keep] if support_scene.colors is not None else None
    cropped = PointCloudScene(positions=pos[keep].copy(), labels=labels, colors=colors)
    return cropped, kept_mask


def translate_and_align(
    base: PointCloudScene, novel_local: PointCloudScene, pairing: str
) -> PointCloudScene:
    """Snap the novel block's opposite corner onto the chosen base corner in
    XY, drop it to the base floor level in Z, and concatenate."""
    if pairing not in PAIRINGS:
        raise ConfigError(f"pairing must be one of {PAIRINGS}, got {pairing!r}")
    base_corner = corners_xy(base.positions)[pairing]
    novel_corner = corners_xy(novel_local.positions)[_OPPOSITE[pairing]]

    translation = np.array(
        [base_corner[0] - novel_corner[0], base_corner[1] - novel_corner[1], 0.0]
    )
    moved = novel_local.positions + translation
    moved[:, 2] += base.positions[:, 2].min() - moved[:, 2].min()

    positions = np.concatenate([base.positions, moved])
    labels = np.concatenate([base.labels, novel_local.labels])
    colors = None
    if base.colors is not None and novel_local.colors is not None:
        colors = np.concatenate([base.colors, novel_local.colors])
    return PointCloudScene(positions=positions, labels=labels, colors=colors)


def mix(
    base: PointCloudScene,
    support: SupportSet,
    cfg: MixConfig,
    rng: np.random.Generator | None = None,
) -> PointCloudScene:
    """Insert n_blocks cropped support shots around the base scene.

    Shots are sampled uniformly with replacement (class, then shot). Each
    block aligns against the accumulated cloud from previous blocks, so
    insertions fan out as the scene grows. Base points are never altered.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    classes = support.classes()
    mixed = base
    for _ in range(cfg.n_blocks):
        c = classes[int(rng.integers(0, len(classes)))]
        shot = support.shots[c][int(rng.integers(0, support.k))]
        cropped, _ = crop_novel(shot.scene, shot.mask, cfg.crop_margin_xy)
        pairing = pick_pair(rng)
        mixed = translate_and_align(mixed, cropped, pairing)
    return mixed
