"""Point-cloud data model, label-space semantics, and voxel-grid downsampling.

Label convention: -1 marks background / unlabeled points, base classes occupy
indices [0, n_base), novel classes [n_base, n_classes).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ConfigError


@dataclass
class PointCloudScene:
    """A point cloud with per-point labels and optional colors.

    positions: (N, 3) float64 coordinates in meters.
    labels: (N,) int64 class indices (-1 for background).
    colors: optional (N, 3) float64 in [0, 1].
    """

    positions: np.ndarray
    labels: np.ndarray
    colors: np.ndarray | None = None
    source_path: str | None = field(default=None, compare=False)

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise AlignmentError(
                f"positions must be (N, 3), got {self.positions.shape}"
            )
        n = self.positions.shape[0]
        if n < 1:
            raise AlignmentError("a scene must contain at least one point")
        if self.labels.shape != (n,):
            raise AlignmentError(
                f"labels length {self.labels.shape} does not match {n} points"
            )
        if self.colors is not None:
            self.colors = np.ascontiguousarray(self.colors, dtype=np.float64)
            if self.colors.shape != (n, 3):
                raise AlignmentError(
                    f"colors shape {self.colors.shape} does not match {n} points"
                )

    @property
    def point_count(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class ClassSchema:
    """Ordered base and novel class names defining the label index space."""

    base_names: tuple[str, ...]
    novel_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "base_names", tuple(self.base_names))
        object.__setattr__(self, "novel_names", tuple(self.novel_names))
        overlap = set(self.base_names) & set(self.novel_names)
        if overlap:
            raise ConfigError(f"base/novel class names overlap: {sorted(overlap)}")
        if len(set(self.base_names)) != len(self.base_names):
            raise ConfigError("duplicate base class names")
        if len(set(self.novel_names)) != len(self.novel_names):
            raise ConfigError("duplicate novel class names")

    @property
    def n_base(self) -> int:
        return len(self.base_names)

    @property
    def n_novel(self) -> int:
        return len(self.novel_names)

    @property
    def n_classes(self) -> int:
        return self.n_base + self.n_novel

    @property
    def novel_indices(self) -> range:
        return range(self.n_base, self.n_classes)

    def is_base(self, index: int) -> bool:
        return 0 <= index < self.n_base

    def is_novel(self, index: int) -> bool:
        return self.n_base <= index < self.n_classes

    def name_of(self, index: int) -> str:
        if self.is_base(index):
            return self.base_names[index]
        if self.is_novel(index):
            return self.novel_names[index - self.n_base]
        raise ConfigError(f"class index {index} outside [0, {self.n_classes})")

    def to_dict(self) -> dict:
        return {
            "base_names": list(self.base_names),
            "novel_names": list(self.novel_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassSchema":
        return cls(tuple(d["base_names"]), tuple(d["novel_names"]))


@dataclass(frozen=True)
class VoxelConfig:
    grid_size: float = 0.02

    def __post_init__(self):
        if not self.grid_size > 0:
            raise ConfigError(f"grid_size must be positive, got {self.grid_size}")


@dataclass(frozen=True)
class Violation:
    kind: str
    index: int
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_scene(scene: PointCloudScene, schema: ClassSchema) -> ValidationReport:
    """Diagnostic check of scene invariants against a schema.

    Never raises; reports the first offending index per violation class.
    """
    violations = []
    n = scene.point_count
    if scene.labels.shape[0] != n:
        violations.append(
            Violation("length_mismatch", 0,
                      f"labels length {scene.labels.shape[0]} != {n} points")
        )
    bad = ~np.isfinite(scene.positions)
    if bad.any():
        i = int(np.argwhere(bad.any(axis=1))[0, 0])
        violations.append(
            Violation("non_finite_coordinate", i, f"non-finite position at point {i}")
        )
    out = (scene.labels < -1) | (scene.labels >= schema.n_classes)
    if out.any():
        i = int(np.argmax(out))
        violations.append(
            Violation("label_out_of_range", i,
                      f"label {scene.labels[i]} at point {i} outside "
                      f"[-1, {schema.n_classes})")
        )
    if scene.colors is not None:
        badc = ~np.isfinite(scene.colors)
        if badc.any():
            i = int(np.argwhere(badc.any(axis=1))[0, 0])
            violations.append(
                Violation("non_finite_color", i, f"non-finite color at point {i}")
            )
    return ValidationReport(tuple(violations))


def voxel_cells(positions: np.ndarray, grid_size: float) -> np.ndarray:
    """Per-axis integer cell index: floor(coordinate / grid_size)."""
    return np.floor(positions / grid_size).astype(np.int64)


def voxelize(scene: PointCloudScene, cfg: VoxelConfig) -> PointCloudScene:
    """Collapse each occupied voxel cell to one representative point.

    Position and color are cell means; the label is the cell-majority label
    with ties broken toward the smallest label value. Output points are
    ordered by lexicographic cell index, so the result is independent of
    input point order.
    """
    cells = voxel_cells(scene.positions, cfg.grid_size)
    rel = cells - cells.min(axis=0)
    spans = rel.max(axis=0) + 1
    # Packing preserves lexicographic (x, y, z) cell order under integer sort.
    key = (rel[:, 0] * spans[1] + rel[:, 1]) * spans[2] + rel[:, 2]
    _, inverse = np.unique(key, return_inverse=True)
    n_cells = int(inverse.max()) + 1
    counts = np.bincount(inverse, minlength=n_cells).astype(np.float64)

    positions = np.stack(
        [np.bincount(inverse, weights=scene.positions[:, k], minlength=n_cells)
         / counts for k in range(3)],
        axis=1,
    )
    colors = None
    if scene.colors is not None:
        colors = np.stack(
            [np.bincount(inverse, weights=scene.colors[:, k], minlength=n_cells)
             / counts for k in range(3)],
            axis=1,
        )

    labels = _majority_labels(inverse, scene.labels, n_cells)
    return PointCloudScene(positions=positions, labels=labels, colors=colors)


def _majority_labels(inverse: np.ndarray, labels: np.ndarray, n_cells: int) -> np.ndarray:
    shifted = labels - labels.min()  # non-negative for packing
    span = int(shifted.max()) + 1
    pair = inverse * span + shifted
    uniq, counts = np.unique(pair, return_counts=True)
    cell_of = uniq // span
    label_of = uniq % span
    # Per cell: highest count first, smallest label on ties.
    order = np.lexsort((label_of, -counts, cell_of))
    first = np.unique(cell_of[order], return_index=True)[1]
    out = label_of[order][first] + labels.min()
    assert out.shape[0] == n_cells
    return out.astype(np.int64)
