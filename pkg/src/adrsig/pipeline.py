"""End-to-end detection: cohort -> A/B -> X/Y -> per-event statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from adrsig.featmat import (
    GroupedCounts,
    SparseFeatureMatrix,
    build_window_matrices,
    column_totals,
    group_matrix,
)
from adrsig.ingest import Cohort, RecordSet, build_cohort
from adrsig.signal import SignalReport, filter_prefix, rank_signals
from adrsig.stats import EventStats, event_stats_for_all


@dataclass(frozen=True)
class Detection:
    cohort: Cohort | None
    before: SparseFeatureMatrix
    after: SparseFeatureMatrix
    X: GroupedCounts
    Y: GroupedCounts
    stats: list[EventStats]

    @property
    def N(self) -> int:
        return self.before.n_patients

    @property
    def n_columns(self) -> int:
        return len(self.before.columns)

    @property
    def n_groups(self) -> int:
        return self.X.n_groups

    def summary(self) -> str:
        return f"cohort N={self.N} columns={self.n_columns} groups={self.n_groups}"


def detect_cohort(
    cohort: Cohort,
    level: int = 5,
    window_days: int = 60,
    group_size: int = 100,
    remainder_policy: str = "merge_last",
    variant: str = "paired",
    threads: int = 1,
    keep_terms: bool = False,
) -> Detection:
    a, b = build_window_matrices(cohort, window_days, level, keep_terms)
    return detect_matrices(a, b, group_size, remainder_policy, variant, threads, cohort=cohort)


def detect_matrices(
    before: SparseFeatureMatrix,
    after: SparseFeatureMatrix,
    group_size: int = 100,
    remainder_policy: str = "merge_last",
    variant: str = "paired",
    threads: int = 1,
    cohort: Cohort | None = None,
) -> Detection:
    """Group, test and score prebuilt before/after matrices."""
    x = group_matrix(before, group_size, remainder_policy)
    y = group_matrix(after, group_size, remainder_policy)
    n = before.n_patients
    stats = event_stats_for_all(
        x, y, n, variant, n_before=column_totals(before), n_after=column_totals(after), threads=threads
    )
    return Detection(cohort, before, after, x, y, stats)


def detect(
    records: RecordSet,
    drug_codes: Iterable[str],
    min_registration_days: int = 365,
    **options,
) -> Detection:
    cohort = build_cohort(records, drug_codes, min_registration_days)
    return detect_cohort(cohort, **options)


def make_report(
    stats: Iterable[EventStats],
    mode: str = "by_p",
    alpha: float = 0.05,
    prefix: str | None = None,
    top_k: int | None = None,
) -> SignalReport:
    # the prefix filter runs before top_k so a filtered report still has top_k rows
    report = rank_signals(stats, mode, alpha)
    if prefix:
        report = filter_prefix(report, prefix)
    if top_k is not None:
        report = SignalReport(report.mode, report.alpha, report.rows[:top_k], report.base_mode, report.prefix)
    return report
