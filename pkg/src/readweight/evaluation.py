"""Offline evaluation: valid-read AUC, relative improvement over a
baseline, and the dwell-time migration surface.

AUC is the Mann-Whitney statistic (probability a random positive outranks a
random negative, ties worth 0.5), computed by sort-and-midrank in
O(n log n); it matches the quadratic pairwise count exactly.  RelaImpr
measures improvement above the random-AUC floor:

    relaimpr = (auc - 0.5) / (base_auc - 0.5) - 1

The migration report compares two logs cell by cell over user activeness
levels (1..7, 7 most active) crossed with within-level dwell-time deciles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .events import InteractionEvent
from .profiles import WEEK_SECONDS

N_LEVELS = 7
N_DECILES = 10
NA = "NA"


class UndefinedAucError(ValueError):
    """AUC needs at least one positive and one negative."""


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Fraction of (positive, negative) pairs ranked correctly, ties 0.5."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError(
            f"need both classes, got {n_pos} positives and {n_neg} negatives"
        )
    # Midranks: tied scores share the average of their 1-based rank range.
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    start = np.cumsum(counts) - counts  # ranks before each tie group
    midrank = start + (counts + 1) / 2.0
    rank_sum = float(midrank[inverse][pos].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def relaimpr(auc_value: float, base_auc: float) -> float:
    """Relative improvement above the 0.5 random floor."""
    if base_auc <= 0.5:
        raise ValueError(f"baseline AUC must exceed 0.5, got {base_auc}")
    if auc_value < 0.5:
        raise ValueError(f"AUC below 0.5 ({auc_value}); RelaImpr undefined")
    return (auc_value - 0.5) / (base_auc - 0.5) - 1.0


@dataclass(frozen=True, slots=True)
class EvalReport:
    auc: float
    n_pos: int
    n_neg: int
    base_auc: float | None = None
    relaimpr: float | None = None

    @classmethod
    def build(
        cls, scores: Sequence[float], labels: Sequence[int], base_auc: float | None = None
    ) -> "EvalReport":
        labels_arr = np.asarray(labels)
        value = auc(scores, labels)
        rel = relaimpr(value, base_auc) if base_auc is not None else None
        return cls(
            auc=value,
            n_pos=int((labels_arr == 1).sum()),
            n_neg=int((labels_arr != 1).sum()),
            base_auc=base_auc,
            relaimpr=rel,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "auc": self.auc,
                "base_auc": self.base_auc,
                "relaimpr": self.relaimpr,
                "n_pos": self.n_pos,
                "n_neg": self.n_neg,
            },
            sort_keys=True,
        )


def weekly_click_counts(events: Iterable[InteractionEvent]) -> dict[str, int]:
    """Clicks per user in the trailing 7-day window ending at the log's last
    timestamp.  Users seen only as impressions count 0."""
    events = list(events)
    if not events:
        return {}
    horizon = max(e.timestamp for e in events)
    counts: dict[str, int] = {}
    for event in events:
        counts.setdefault(event.user_id, 0)
        if event.clicked and horizon - WEEK_SECONDS < event.timestamp <= horizon:
            counts[event.user_id] += 1
    return counts


def equal_frequency_boundaries(counts: Iterable[int], n_levels: int = N_LEVELS) -> tuple[int, ...]:
    """Septile boundaries of weekly click counts: nearest-rank cuts, forced
    strictly ascending and >= 1 so zero-click users always land at level 1."""
    values = sorted(counts)
    if len(values) < n_levels:
        raise ValueError(f"need at least {n_levels} users to cut {n_levels} levels")
    n = len(values)
    raw = [values[min(math.ceil(j * n / n_levels), n) - 1] for j in range(1, n_levels)]
    boundaries: list[int] = []
    for value in raw:
        bumped = max(int(value), 1)
        if boundaries and bumped <= boundaries[-1]:
            bumped = boundaries[-1] + 1
        boundaries.append(bumped)
    return tuple(boundaries)


def activeness_level(user_week_clicks: int, boundaries: Sequence[int]) -> int:
    """1 + number of boundaries at or below the click count; level 7 (with
    six boundaries) is the most active band."""
    bounds = list(boundaries)
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
        raise ValueError("boundaries must be strictly ascending")
    return 1 + sum(1 for b in bounds if b <= user_week_clicks)


@dataclass(frozen=True, slots=True)
class MigrationCell:
    activeness_level: int
    dt_decile: int
    mean_dt_baseline: float | None
    mean_dt_treatment: float | None

    @property
    def delta(self) -> float | None:
        if self.mean_dt_baseline is None or self.mean_dt_treatment is None:
            return None
        return self.mean_dt_treatment - self.mean_dt_baseline


def _level_means(
    events: Sequence[InteractionEvent],
    boundaries: Sequence[int],
    n_deciles: int,
) -> dict[int, list[float | None]]:
    """Per activeness level, the per-decile mean dwell time of one arm."""
    counts = weekly_click_counts(events)
    levels = {user: activeness_level(c, boundaries) for user, c in counts.items()}
    by_level: dict[int, list[float]] = {lvl: [] for lvl in range(1, len(boundaries) + 2)}
    for event in events:
        if event.clicked:
            by_level[levels[event.user_id]].append(event.dwell_time_s)
    means: dict[int, list[float | None]] = {}
    for level, dwells in by_level.items():
        dwells.sort()
        m = len(dwells)
        cell_means: list[float | None] = []
        prev = 0
        for d in range(1, n_deciles + 1):
            hi = min(math.ceil(d * m / n_deciles), m)
            if hi > prev:
                chunk = dwells[prev:hi]
                cell_means.append(sum(chunk) / len(chunk))
            else:
                cell_means.append(None)
            prev = hi
        means[level] = cell_means
    return means


def migration_report(
    baseline: Sequence[InteractionEvent],
    treatment: Sequence[InteractionEvent],
    boundaries: Sequence[int] | None = None,
    n_deciles: int = N_DECILES,
) -> list[MigrationCell]:
    """Dwell-time change per (activeness level x within-level DT decile).

    Levels come from each arm's own weekly click counts; decile cuts are
    nearest-rank and computed within each arm.  Boundaries default to
    equal-frequency septiles of the baseline arm.  Cells are ordered
    level-major, decile-minor; empty cells carry missing means.
    """
    baseline = list(baseline)
    treatment = list(treatment)
    if not any(e.clicked for e in baseline) or not any(e.clicked for e in treatment):
        raise ValueError("both logs must contain clicks")
    if boundaries is None:
        boundaries = equal_frequency_boundaries(weekly_click_counts(baseline).values())
    base_means = _level_means(baseline, boundaries, n_deciles)
    treat_means = _level_means(treatment, boundaries, n_deciles)
    cells = []
    for level in range(1, len(boundaries) + 2):
        for d in range(1, n_deciles + 1):
            cells.append(
                MigrationCell(
                    activeness_level=level,
                    dt_decile=d,
                    mean_dt_baseline=base_means[level][d - 1],
                    mean_dt_treatment=treat_means[level][d - 1],
                )
            )
    return cells


def migration_csv(cells: Sequence[MigrationCell]) -> str:
    def fmt(x: float | None) -> str:
        return NA if x is None else repr(x)

    lines = ["level,decile,mean_base,mean_treat,delta"]
    for cell in cells:
        lines.append(
            f"{cell.activeness_level},{cell.dt_decile},"
            f"{fmt(cell.mean_dt_baseline)},{fmt(cell.mean_dt_treatment)},{fmt(cell.delta)}"
        )
    return "\n".join(lines) + "\n"
