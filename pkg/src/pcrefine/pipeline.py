"""Full refinement pipeline: selection followed by adaptive infilling,
with a per-scene report of what was kept, filtered, and infilled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .infill import InfillConfig, adaptive_set, context_prototypes, infill
from .prototypes import PrototypeSet
from .scene import ClassSchema
from .selection import (
    SelectionConfig,
    merge_into_background,
    predicted_prototypes,
    prototype_agreement,
    select_pseudo_labels,
)


@dataclass
class RefineReport:
    class_agreement: dict[int, float] = field(default_factory=dict)
    kept_classes: list[int] = field(default_factory=list)
    filtered_classes: list[int] = field(default_factory=list)
    selected_points: int = 0
    infilled_points: int = 0

    def to_dict(self) -> dict:
        return {
            "class_agreement": {str(c): v for c, v in sorted(self.class_agreement.items())},
            "kept_classes": self.kept_classes,
            "filtered_classes": self.filtered_classes,
            "selected_points": self.selected_points,
            "infilled_points": self.infilled_points,
        }


def refine_labels(
    features: np.ndarray,
    raw: np.ndarray,
    base_labels: np.ndarray,
    support: PrototypeSet,
    schema: ClassSchema,
    selection_cfg: SelectionConfig | None = None,
    infill_cfg: InfillConfig | None = None,
) -> tuple[np.ndarray, RefineReport]:
    """Refine raw predictions into training labels: select, merge, infill."""
    selection_cfg = selection_cfg or SelectionConfig()
    infill_cfg = infill_cfg or InfillConfig()

    predicted = predicted_prototypes(features, raw, schema)
    agreement = prototype_agreement(predicted, support)
    filtered = select_pseudo_labels(raw, predicted, support, selection_cfg, schema)
    y_prime = merge_into_background(base_labels, filtered, schema)

    context = context_prototypes(features, y_prime, schema)
    adaptive = adaptive_set(context, support, schema)
    y_final = infill(y_prime, features, adaptive, infill_cfg)

    report = RefineReport(
        class_agreement=agreement,
        kept_classes=[c for c, s in sorted(agreement.items()) if s >= selection_cfg.tau],
        filtered_classes=[c for c, s in sorted(agreement.items()) if s < selection_cfg.tau],
        selected_points=int(((y_prime != -1) & (np.asarray(base_labels) == -1)).sum()),
        infilled_points=int((y_final != y_prime).sum()),
    )
    return y_final, report
