"""Pseudo-label selection: keep a novel class's raw predictions only when
its predicted prototype agrees with the support prototype, then merge the
survivors into the background of the base label map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, ConfigError, ContractError
from .prototypes import PrototypeSet, cosine, pool_by_class
from .scene import ClassSchema


@dataclass(frozen=True)
class SelectionConfig:
    tau: float = 0.6

    def __post_init__(self):
        if not -1.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must be in [-1, 1], got {self.tau}")


def predicted_prototypes(
    features: np.ndarray, raw: np.ndarray, schema: ClassSchema
) -> PrototypeSet:
    """Masked mean feature per novel class present in the raw predictions."""
    features = np.asarray(features, dtype=np.float64)
    raw = np.asarray(raw, dtype=np.int64)
    if raw.shape[0] != features.shape[0]:
        raise AlignmentError(
            f"raw labels length {raw.shape[0]} != feature rows {features.shape[0]}"
        )
    pooled = pool_by_class(features, raw)
    return PrototypeSet({c: v for c, v in pooled.items() if schema.is_novel(c)})


def prototype_agreement(
    predicted: PrototypeSet, support: PrototypeSet
) -> dict[int, float]:
    """Cosine between predicted and support prototype, per predicted class."""
    agreement = {}
    for c in predicted.classes():
        if c not in support:
            raise ConfigError(
                f"novel class {c} predicted but absent from the support prototypes; "
                f"the class list used for prediction does not match the support set"
            )
        agreement[c] = cosine(predicted[c], support[c])
    return agreement


def select_pseudo_labels(
    raw: np.ndarray,
    predicted: PrototypeSet,
    support: PrototypeSet,
    cfg: SelectionConfig,
    schema: ClassSchema,
) -> np.ndarray:
    """Class-level filter of raw predictions.

    Base-class predictions are always cleared to -1. A novel class keeps all
    of its points iff cosine(predicted, support) >= tau; the decision is one
    cosine per class, applied via mask indexing.
    """
    raw = np.asarray(raw, dtype=np.int64)
    agreement = prototype_agreement(predicted, support)
    out = raw.copy()
    out[(raw >= 0) & (raw < schema.n_base)] = -1
    for c, sim in agreement.items():
        if sim < cfg.tau:
            out[raw == c] = -1
    return out


def merge_into_background(
    base_labels: np.ndarray, filtered: np.ndarray, schema: ClassSchema
) -> np.ndarray:
    """Fill the background (-1) of base labels with filtered novel labels.

    Ground-truth base labels are never overwritten. The filtered vector may
    only carry novel indices and -1; a base index there means selection was
    skipped or mis-ordered.
    """
    base_labels = np.asarray(base_labels, dtype=np.int64)
    filtered = np.asarray(filtered, dtype=np.int64)
    if base_labels.shape != filtered.shape:
        raise AlignmentError(
            f"length mismatch: base {base_labels.shape} vs filtered {filtered.shape}"
        )
    if ((base_labels >= schema.n_base) | (base_labels < -1)).any():
        raise ContractError("base labels must contain only base indices and -1")
    bad = (filtered >= 0) & (filtered < schema.n_base)
    if bad.any():
        raise ContractError(
            f"filtered labels contain base index {int(filtered[bad][0])}; "
            f"expected only novel indices and -1"
        )
    return np.where(base_labels != -1, base_labels, filtered)


def ps_refine(
    features: np.ndarray,
    raw: np.ndarray,
    base_labels: np.ndarray,
    support: PrototypeSet,
    cfg: SelectionConfig,
    schema: ClassSchema,
) -> np.ndarray:
    """Selection pipeline: predicted prototypes -> class filter -> merge."""
    predicted = predicted_prototypes(features, raw, schema)
    filtered = select_pseudo_labels(raw, predicted, support, cfg, schema)
    return merge_into_background(base_labels, filtered, schema)
