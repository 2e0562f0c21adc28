"""Masked average pooling, cosine similarity, and prototype containers.

These are the shared primitives of pseudo-label selection and adaptive
infilling: a prototype is the masked mean of per-point features for one
class, and all agreement decisions are cosine comparisons between them.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix

from .errors import AlignmentError, ConfigError, ContractError, EmptyMaskError, FormatError
from .scene import ClassSchema, PointCloudScene

PROTOTYPE_MAGIC = b"GFVP"
PROTOTYPE_VERSION = 1


def masked_pool(features: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Arithmetic mean of feature rows selected by a binary mask.

    Summation runs in ascending row order in float64, so results are
    bitwise reproducible.
    """
    features = np.asarray(features, dtype=np.float64)
    mask = np.asarray(mask)
    if mask.shape[0] != features.shape[0]:
        raise AlignmentError(
            f"mask length {mask.shape[0]} != feature rows {features.shape[0]}"
        )
    mask = mask.astype(bool)
    count = int(mask.sum())
    if count == 0:
        raise EmptyMaskError("mask selects no points")
    return features[mask].sum(axis=0) / count


def pool_by_class(
    features: np.ndarray, labels: np.ndarray
) -> dict[int, np.ndarray]:
    """Masked mean per label value in one pass over the data.

    Equivalent to masked_pool(features, labels == c) for every c >= 0
    present in labels. The per-class sums run through a sparse indicator
    matrix so the feature matrix is read once, not once per class.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != features.shape[0]:
        raise AlignmentError(
            f"labels length {labels.shape[0]} != feature rows {features.shape[0]}"
        )
    valid = np.flatnonzero(labels >= 0)
    if valid.size == 0:
        return {}
    values, inverse = np.unique(labels[valid], return_inverse=True)
    indicator = csr_matrix(
        (np.ones(valid.size), (inverse, valid)),
        shape=(values.size, labels.shape[0]),
    )
    sums = indicator @ features
    counts = np.bincount(inverse)
    return {int(c): sums[i] / counts[i] for i, c in enumerate(values)}


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; degenerate (near-zero norm) inputs return -1."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        return -1.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class PrototypeSet:
    """Immutable map from class index to a feature-space centroid."""

    vectors: dict[int, np.ndarray]

    def __post_init__(self):
        clean = {}
        dim = None
        for c, v in self.vectors.items():
            v = np.asarray(v, dtype=np.float64)
            if v.ndim != 1:
                raise ContractError(f"prototype for class {c} is not a vector")
            if dim is None:
                dim = v.shape[0]
            elif v.shape[0] != dim:
                raise ContractError(
                    f"prototype for class {c} has dim {v.shape[0]}, expected {dim}"
                )
            if not np.isfinite(v).all():
                raise ContractError(f"prototype for class {c} is not finite")
            clean[int(c)] = v
        object.__setattr__(self, "vectors", clean)

    def classes(self) -> list[int]:
        return sorted(self.vectors)

    @property
    def dim(self) -> int:
        if not self.vectors:
            raise ContractError("empty prototype set has no dimension")
        return next(iter(self.vectors.values())).shape[0]

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, class_id: int) -> bool:
        return class_id in self.vectors

    def __getitem__(self, class_id: int) -> np.ndarray:
        return self.vectors[class_id]

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Class ids (ascending) and the stacked prototype matrix."""
        ids = np.array(self.classes(), dtype=np.int64)
        mat = np.stack([self.vectors[int(c)] for c in ids])
        return ids, mat


def save_prototypes(protos: PrototypeSet, path: str | Path) -> None:
    ids, mat = protos.matrix()
    mat = mat.astype("<f4")
    with open(path, "wb") as f:
        f.write(PROTOTYPE_MAGIC)
        f.write(struct.pack("<III", PROTOTYPE_VERSION, len(ids), mat.shape[1]))
        f.write(ids.astype("<i4").tobytes())
        f.write(mat.tobytes())


def load_prototypes(path: str | Path) -> PrototypeSet:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != PROTOTYPE_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {PROTOTYPE_MAGIC!r}")
    version, n, d = struct.unpack_from("<III", data, 4)
    if version != PROTOTYPE_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    off = 16
    need = n * 4 + n * d * 4
    if len(data) - off < need:
        raise FormatError(f"{path}: truncated payload: need {need} bytes, have {len(data) - off}")
    ids = np.frombuffer(data, dtype="<i4", count=n, offset=off)
    mat = np.frombuffer(data, dtype="<f4", count=n * d, offset=off + n * 4).reshape(n, d)
    return PrototypeSet({int(c): mat[i].astype(np.float64) for i, c in enumerate(ids)})


@dataclass(frozen=True)
class SupportShot:
    """One labeled exemplar: a scene plus the binary mask of its novel class."""

    scene: PointCloudScene
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask).astype(bool)
        if mask.shape != (self.scene.point_count,):
            raise AlignmentError(
                f"mask shape {mask.shape} does not match scene with "
                f"{self.scene.point_count} points"
            )
        if not mask.any():
            raise EmptyMaskError("support mask selects no points")
        object.__setattr__(self, "mask", mask)


@dataclass(frozen=True)
class SupportSet:
    """K shots per novel class; masks are exclusive to their class."""

    schema: ClassSchema
    shots: dict[int, tuple[SupportShot, ...]]
    k: int = field(init=False)

    def __post_init__(self):
        shots = {int(c): tuple(v) for c, v in self.shots.items()}
        expected = set(self.schema.novel_indices)
        if set(shots) != expected:
            missing = sorted(expected - set(shots))
            extra = sorted(set(shots) - expected)
            raise ContractError(
                f"support set must cover exactly the novel classes; "
                f"missing {missing}, unexpected {extra}"
            )
        sizes = {len(v) for v in shots.values()}
        if len(sizes) != 1 or 0 in sizes:
            raise ContractError(f"every novel class needs the same K >= 1 shots, got {sizes}")
        object.__setattr__(self, "shots", shots)
        object.__setattr__(self, "k", sizes.pop())

    def classes(self) -> list[int]:
        return sorted(self.shots)


def support_prototypes(support: SupportSet, provider) -> PrototypeSet:
    """Per novel class: pool each shot with its mask, average the K results.

    Each shot contributes with equal weight regardless of its mask size;
    for K = 1 this is the plain masked mean.
    """
    vectors = {}
    for c in support.classes():
        per_shot = []
        for k, shot in enumerate(support.shots[c]):
            feats = provider.embed_scene(shot.scene)
            try:
                per_shot.append(masked_pool(feats, shot.mask))
            except EmptyMaskError as e:
                raise EmptyMaskError(f"class {c}, shot {k}: {e}") from e
        stacked = np.stack(per_shot)
        if (stacked == stacked[0]).all():
            # K identical shots must reduce to the K = 1 result bitwise.
            vectors[c] = stacked[0]
        else:
            vectors[c] = stacked.mean(axis=0)
    if not vectors:
        raise ConfigError("support set produced no prototypes")
    return PrototypeSet(vectors)
