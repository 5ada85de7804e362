"""Before/after incidence matrices and their grouped counts.

Matrix A (before) marks patient p with event c when p has at least one c
event dated in ``[index - window_days, index - 1]``; matrix B (after) uses
``[index, index + window_days - 1]``.  Patients are then folded, in cohort
order, into consecutive groups whose per-event counts form X and Y.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Literal

import numpy as np

from adrsig import kernels
from adrsig.errors import CohortTooSmall, ShapeMismatch
from adrsig.ingest import Cohort
from adrsig.readcode import ReadCode, render, truncate_to_level

Side = Literal["before", "after"]
RemainderPolicy = Literal["merge_last", "drop"]


def event_key(c: ReadCode, level: int = 5, keep_terms: bool = False) -> ReadCode:
    """Column a raw code is counted under for a given aggregation level.

    ``level=5`` is the 1-5 mode and ``level=3`` the 1-3 mode.  Term codes are
    collapsed to "00" unless ``keep_terms`` is set (only meaningful at 5).
    """
    if keep_terms and level >= 5:
        return c
    return truncate_to_level(c, level)


@dataclass(frozen=True, eq=False)
class SparseFeatureMatrix:
    """Binary patients x codes incidence stored as sorted unique (row, col) pairs."""

    n_patients: int
    columns: tuple[ReadCode, ...]
    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        if len(self.rows) != len(self.cols):
            raise ShapeMismatch("rows and cols differ in length")
        if len(self.rows):
            if self.rows.min() < 0 or self.rows.max() >= self.n_patients:
                raise ShapeMismatch("row index out of range")
            if self.cols.min() < 0 or self.cols.max() >= len(self.columns):
                raise ShapeMismatch("column index out of range")
        self.rows.setflags(write=False)
        self.cols.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_patients, len(self.columns)

    @property
    def nnz(self) -> int:
        return len(self.rows)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.int8)
        out[self.rows, self.cols] = 1
        return out

    def column_index(self) -> dict[str, int]:
        return {render(c): j for j, c in enumerate(self.columns)}


@dataclass(frozen=True, eq=False)
class GroupedCounts:
    n_groups: int
    group_sizes: tuple[int, ...]
    columns: tuple[ReadCode, ...]
    counts: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape


def _pairs_to_matrix(pairs: set, n_patients: int, col_of: dict, columns) -> SparseFeatureMatrix:
    if pairs:
        arr = np.array([(r, col_of[c]) for r, c in pairs], dtype=np.int64)
        order = np.lexsort((arr[:, 1], arr[:, 0]))
        arr = arr[order]
        rows, cols = arr[:, 0].copy(), arr[:, 1].copy()
    else:
        rows = np.zeros(0, dtype=np.int64)
        cols = np.zeros(0, dtype=np.int64)
    return SparseFeatureMatrix(n_patients, columns, rows, cols)


def build_window_matrices(
    cohort: Cohort, window_days: int = 60, level: int = 5, keep_terms: bool = False
) -> tuple[SparseFeatureMatrix, SparseFeatureMatrix]:
    """Build the before (A) and after (B) matrices over a shared column list.

    Columns are the union of the codes seen in either window, sorted by
    canonical code string.
    """
    if window_days < 1:
        raise ValueError("window_days must be >= 1")
    position = {pid: i for i, (pid, _) in enumerate(cohort.patients)}
    index_ord = [d.toordinal() for _, d in cohort.patients]
    keys: dict[ReadCode, str] = {}
    by_name: dict[str, ReadCode] = {}
    before: set = set()
    after: set = set()
    for ev in cohort.events:
        p = position.get(ev.patient_id)
        if p is None:
            continue
        offset = ev.date.toordinal() - index_ord[p]
        if -window_days <= offset < 0:
            target = before
        elif 0 <= offset < window_days:
            target = after
        else:
            continue
        key = keys.get(ev.readcode)
        if key is None:
            agg = event_key(ev.readcode, level, keep_terms)
            key = keys[ev.readcode] = render(agg)
            by_name[key] = agg
        target.add((p, key))
    names = sorted({k for _, k in before} | {k for _, k in after})
    columns = tuple(by_name[n] for n in names)
    col_of = {n: j for j, n in enumerate(names)}
    n = cohort.N
    return (
        _pairs_to_matrix(before, n, col_of, columns),
        _pairs_to_matrix(after, n, col_of, columns),
    )


def build_window_matrix(
    cohort: Cohort, side: Side, window_days: int = 60, level: int = 5, keep_terms: bool = False
) -> SparseFeatureMatrix:
    a, b = build_window_matrices(cohort, window_days, level, keep_terms)
    if side == "before":
        return a
    if side == "after":
        return b
    raise ValueError(f"side must be 'before' or 'after', got {side!r}")


def group_assignment(n_patients: int, group_size: int = 100, remainder_policy: RemainderPolicy = "merge_last"):
    """Group index per patient (-1 for dropped patients) and the group sizes."""
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    if n_patients < group_size:
        raise CohortTooSmall(f"{n_patients} patients cannot form a group of {group_size}")
    if remainder_policy not in ("merge_last", "drop"):
        raise ValueError(f"unknown remainder policy {remainder_policy!r}")
    n_groups = n_patients // group_size
    group_of = np.arange(n_patients, dtype=np.int64) // group_size
    if remainder_policy == "merge_last":
        np.minimum(group_of, n_groups - 1, out=group_of)
    else:
        group_of[group_of >= n_groups] = -1
    sizes = [group_size] * n_groups
    if remainder_policy == "merge_last":
        sizes[-1] += n_patients - n_groups * group_size
    return group_of, tuple(sizes)


def group_matrix(
    m: SparseFeatureMatrix, group_size: int = 100, remainder_policy: RemainderPolicy = "merge_last"
) -> GroupedCounts:
    """Fold consecutive runs of ``group_size`` patients into per-group counts."""
    group_of, sizes = group_assignment(m.n_patients, group_size, remainder_policy)
    counts = kernels.group_counts(m.rows, m.cols, group_of, len(sizes), len(m.columns))
    counts.setflags(write=False)
    return GroupedCounts(len(sizes), sizes, m.columns, counts)


def column_totals(m: SparseFeatureMatrix) -> np.ndarray:
    """Number of patients with each event (the N_B or N_A column)."""
    return np.bincount(m.cols, minlength=len(m.columns)).astype(np.int64)


def write_triplets(m: SparseFeatureMatrix, path, delimiter: str = "\t") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(("patient_index", "code", "value"))
        names = [render(c) for c in m.columns]
        for r, c in zip(m.rows.tolist(), m.cols.tolist()):
            w.writerow((r, names[c], 1))


def write_grouped(g: GroupedCounts, path, delimiter: str = "\t") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(("group_index", "code", "count"))
        names = [render(c) for c in g.columns]
        for gi, ci in zip(*np.nonzero(g.counts)):
            w.writerow((int(gi), names[ci], int(g.counts[gi, ci])))


def check_compatible(x: GroupedCounts, y: GroupedCounts) -> None:
    if x.counts.shape != y.counts.shape or x.group_sizes != y.group_sizes:
        raise ShapeMismatch(f"grouped shapes differ: {x.counts.shape} vs {y.counts.shape}")
    if [render(c) for c in x.columns] != [render(c) for c in y.columns]:
        raise ShapeMismatch("grouped matrices have different columns")

