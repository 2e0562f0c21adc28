"""Benchmark split construction: per-class occurrence statistics,
frequency-threshold retention, and base/novel assignment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .scene import ClassSchema, PointCloudScene


@dataclass(frozen=True)
class ClassStat:
    occurrences: int
    mean_points: float


@dataclass(frozen=True)
class ClassStats:
    """Per-class occurrence count and mean points per occurrence."""

    stats: dict[str, ClassStat]

    def occurrences(self, name: str) -> int:
        return self.stats[name].occurrences

    def mean_points(self, name: str) -> float:
        return self.stats[name].mean_points

    def names(self) -> list[str]:
        return sorted(self.stats)

    def to_dict(self) -> dict:
        return {
            name: {"occurrences": s.occurrences, "mean_points": s.mean_points}
            for name, s in sorted(self.stats.items())
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassStats":
        return cls({
            name: ClassStat(int(v["occurrences"]), float(v["mean_points"]))
            for name, v in d.items()
        })


@dataclass(frozen=True)
class SplitSpec:
    freq_threshold: int
    n_base: int

    def __post_init__(self):
        if self.n_base < 1:
            raise ConfigError(f"n_base must be >= 1, got {self.n_base}")
        if self.freq_threshold < 1:
            raise ConfigError(f"freq_threshold must be >= 1, got {self.freq_threshold}")


def class_stats(
    scenes: Iterable[PointCloudScene],
    schema: ClassSchema,
    count_mode: str = "scenes",
    instance_ids: Iterable[np.ndarray] | None = None,
) -> ClassStats:
    """Accumulate per-class statistics over a scene corpus.

    count_mode "scenes" counts the number of scenes where a class has at
    least one point; "instances" counts distinct instance IDs per class and
    requires a parallel iterator of per-point instance-ID arrays.
    """
    if count_mode not in ("scenes", "instances"):
        raise ConfigError(f"count_mode must be 'scenes' or 'instances', got {count_mode!r}")
    if count_mode == "instances" and instance_ids is None:
        raise ConfigError("count_mode 'instances' requires per-point instance IDs")

    n = schema.n_classes
    occ = np.zeros(n, dtype=np.int64)
    points = np.zeros(n, dtype=np.int64)
    present_in = np.zeros(n, dtype=np.int64)  # scenes with >= 1 point

    inst_iter = iter(instance_ids) if instance_ids is not None else None
    for scene in scenes:
        labels = scene.labels
        valid = labels >= 0
        counts = np.bincount(labels[valid], minlength=n)
        present = counts > 0
        present_in += present
        points += counts
        if count_mode == "scenes":
            occ += present
        else:
            inst = np.asarray(next(inst_iter))
            pairs = np.unique(np.stack([labels[valid], inst[valid]], axis=1), axis=0)
            occ += np.bincount(pairs[:, 0], minlength=n)

    stats = {}
    for c in range(n):
        name = schema.name_of(c)
        mean_pts = float(points[c] / present_in[c]) if present_in[c] else 0.0
        stats[name] = ClassStat(int(occ[c]), mean_pts)
    return ClassStats(stats)


def build_split(stats: ClassStats, spec: SplitSpec) -> ClassSchema:
    """Retain classes above the frequency threshold; the n_base most frequent
    become base classes, the remainder novel, both in descending frequency
    (ties by name, ascending)."""
    retained = [
        (name, s.occurrences)
        for name, s in stats.stats.items()
        if s.occurrences > spec.freq_threshold
    ]
    if len(retained) < spec.n_base:
        raise ConfigError(
            f"only {len(retained)} classes exceed threshold {spec.freq_threshold}; "
            f"need at least n_base = {spec.n_base}"
        )
    retained.sort(key=lambda t: (-t[1], t[0]))
    names = [name for name, _ in retained]
    return ClassSchema(tuple(names[: spec.n_base]), tuple(names[spec.n_base:]))


@dataclass(frozen=True)
class StatsSummary:
    max_occurrences: int
    min_occurrences: int
    max_mean_points: float
    min_mean_points: float
    rows: tuple[tuple[str, int, float], ...]  # (name, occurrences, mean_points)

    def to_dict(self) -> dict:
        return {
            "max_occurrences": self.max_occurrences,
            "min_occurrences": self.min_occurrences,
            "max_mean_points": self.max_mean_points,
            "min_mean_points": self.min_mean_points,
            "novel_classes": [
                {"name": n, "occurrences": f, "mean_points": p}
                for n, f, p in self.rows
            ],
        }

    def table(self) -> str:
        width = max(len(n) for n, _, _ in self.rows) if self.rows else 4
        lines = [f"{'class':<{width}}  {'occ':>8}  {'mean_pts':>12}"]
        for name, f, p in self.rows:
            lines.append(f"{name:<{width}}  {f:>8}  {p:>12.1f}")
        lines.append(
            f"max/min occ: {self.max_occurrences}/{self.min_occurrences}  "
            f"max/min mean_pts: {self.max_mean_points:.1f}/{self.min_mean_points:.1f}"
        )
        return "\n".join(lines)


def summarize(stats: ClassStats, schema: ClassSchema) -> StatsSummary:
    """Max/min occurrence and point statistics over the novel classes."""
    missing = [n for n in schema.novel_names if n not in stats.stats]
    if missing:
        raise ConfigError(f"stats missing novel classes {missing}")
    rows = tuple(
        (name, stats.occurrences(name), stats.mean_points(name))
        for name in schema.novel_names
    )
    occs = [f for _, f, _ in rows]
    pts = [p for _, _, p in rows]
    return StatsSummary(
        max_occurrences=max(occs),
        min_occurrences=min(occs),
        max_mean_points=max(pts),
        min_mean_points=min(pts),
        rows=rows,
    )
