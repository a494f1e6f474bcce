"""Post-processing of run histories into forgetting summaries.

Works either on in-memory histories or on the history CSV the harness writes,
so a report can be rebuilt from artifacts alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from statistics import median

from .strategy import EvalRecord

METRICS = ("accuracy", "precision", "recall", "f1")

HISTORY_COLUMNS = ("strategy", "seed", "step", "test_partition",
                   "accuracy", "precision", "recall", "f1")


@dataclass
class ForgettingRecord:
    strategy: str
    seed: int
    test_partition: int
    scores: list[float]  # at steps j..K
    relative_drop: float | None  # None when the score at step j is 0

    @property
    def first_score(self) -> float:
        return self.scores[0]

    @property
    def final_score(self) -> float:
        return self.scores[-1]

    @property
    def absolute_drop(self) -> float:
        return self.scores[0] - self.scores[-1]


def history_from_csv(path: str | Path) -> list[EvalRecord]:
    """Parse a history CSV back into records, skipping '#' meta lines."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
             if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: no rows")
    rows = list(csv.reader(lines))
    if tuple(rows[0]) != HISTORY_COLUMNS:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    records = []
    for row in rows[1:]:
        if len(row) != len(HISTORY_COLUMNS):
            raise ValueError(f"{path}: malformed row {row}")
        records.append(EvalRecord(
            row[0], int(row[1]), int(row[2]), int(row[3]),
            float(row[4]), float(row[5]), float(row[6]), float(row[7])))
    return records


def forgetting_report(history: list[EvalRecord], metric: str = "accuracy"
                      ) -> tuple[list[ForgettingRecord], list[dict]]:
    """Per-partition forgetting for every (strategy, seed) run in a history.

    For test partition j the trajectory covers steps j..K, so the relative
    drop is (s_jj - s_jK) / s_jj. Each run contributes exactly K records.
    The second return value aggregates over seeds: per (strategy, j), the
    median first score, final score, and relative drop (runs with an
    undefined drop are left out of that median).
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric '{metric}'")
    if not history:
        raise ValueError("empty history")

    runs: dict[tuple[str, int], list[EvalRecord]] = {}
    for rec in history:
        runs.setdefault((rec.strategy, rec.seed), []).append(rec)

    records: list[ForgettingRecord] = []
    for (strategy, seed), recs in sorted(runs.items()):
        last = max(r.step for r in recs)
        by_key = {(r.test_partition, r.step): getattr(r, metric) for r in recs}
        expected = {(j, i) for i in range(1, last + 1) for j in range(1, i + 1)}
        if set(by_key) != expected:
            raise ValueError(
                f"history for {strategy}/seed {seed} is not a complete triangle")
        for j in range(1, last + 1):
            scores = [by_key[(j, i)] for i in range(j, last + 1)]
            drop = (scores[0] - scores[-1]) / scores[0] if scores[0] > 0 else None
            records.append(ForgettingRecord(strategy, seed, j, scores, drop))

    aggregates: list[dict] = []
    keys = sorted({(r.strategy, r.test_partition) for r in records})
    for strategy, j in keys:
        mine = [r for r in records if r.strategy == strategy and r.test_partition == j]
        drops = [r.relative_drop for r in mine if r.relative_drop is not None]
        aggregates.append({
            "strategy": strategy,
            "test_partition": j,
            "n_seeds": len(mine),
            "median_first": median(r.first_score for r in mine),
            "median_final": median(r.final_score for r in mine),
            "median_absolute_drop": median(r.absolute_drop for r in mine),
            "median_relative_drop": median(drops) if drops else None,
        })
    return records, aggregates
