"""Per-event t-tests between grouped before/after counts, and the ratio metrics.

The t distribution tail is evaluated through the regularized incomplete
beta function,

    P(T > t) = 0.5 * I_x(df/2, 1/2),   x = df / (df + t^2),   t >= 0,

with the continued fraction living in :mod:`adrsig.kernels`.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, NamedTuple, Sequence

import numpy as np

from adrsig import kernels
from adrsig.errors import InvalidDf, ShapeMismatch
from adrsig.featmat import GroupedCounts, check_compatible
from adrsig.readcode import ReadCode

Variant = Literal["paired", "two_sample"]


class TTestResult(NamedTuple):
    statistic: float
    df: float
    pvalue: float
    degenerate: bool = False


@dataclass(frozen=True)
class EventStats:
    code: ReadCode
    N_B: int
    N_A: int
    t_stat: float
    df: float
    p_value: float
    R1: float
    R2: float
    degenerate: bool = False


def _check_df(df):
    if not (isinstance(df, (int, float, np.integer, np.floating)) and math.isfinite(df) and df > 0):
        raise InvalidDf(f"degrees of freedom must be finite and positive, got {df!r}")


def t_survival(t: float, df: float) -> float:
    """Upper tail probability P(T > t) of Student's t distribution."""
    _check_df(df)
    return kernels.t_sf(float(t), float(df))


def two_tailed_p(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    return min(1.0, 2.0 * t_survival(abs(t), df))


def _as_pair(x, y, same_length):
    x = np.asarray(x)
    y = np.asarray(y)
    if x.ndim != 1 or y.ndim != 1:
        raise ShapeMismatch("samples must be one-dimensional")
    if same_length and len(x) != len(y):
        raise ShapeMismatch(f"paired samples differ in length: {len(x)} vs {len(y)}")
    if len(x) < 2 or len(y) < 2:
        raise ShapeMismatch("each sample needs at least two observations")
    return x, y


def paired_t(x: Sequence[float], y: Sequence[float]) -> TTestResult:
    """Paired t-test on the differences ``y - x``.

    When every difference is equal the statistic is 0 (p = 1) if that
    constant is 0, otherwise signed infinity with p = 0 and ``degenerate``.
    """
    x, y = _as_pair(x, y, same_length=True)
    t, df, degenerate = _paired_columns(x[:, None], y[:, None])
    return _result(t[0], df[0], degenerate[0])


def two_sample_t(x: Sequence[float], y: Sequence[float]) -> TTestResult:
    """Pooled-variance two-sample t-test of ``y`` against ``x``."""
    x, y = _as_pair(x, y, same_length=False)
    t, df, degenerate = _two_sample_columns(x[:, None], y[:, None])
    return _result(t[0], df[0], degenerate[0])


def _result(t, df, degenerate):
    t, df = float(t), float(df)
    if degenerate:
        return TTestResult(t, df, 0.0, True)
    return TTestResult(t, df, two_tailed_p(t, df))


# Inputs are (groups, columns); each column is reduced as a contiguous row of
# the transpose so the arithmetic does not depend on how columns are chunked.


def _paired_columns(x, y):
    d = np.ascontiguousarray((y - x).T)
    g = d.shape[1]
    constant = np.all(d == d[:, :1], axis=1)
    mean = d.mean(axis=1)
    sd = d.std(axis=1, ddof=1)
    t = np.zeros(d.shape[0])
    ok = ~constant
    t[ok] = mean[ok] / (sd[ok] / math.sqrt(g))
    first = d[:, 0].astype(np.float64)
    degenerate = constant & (first != 0)
    t[degenerate] = np.copysign(np.inf, first[degenerate])
    return t, np.full(d.shape[0], float(g - 1)), degenerate


def _two_sample_columns(x, y):
    xt = np.ascontiguousarray(x.T)
    yt = np.ascontiguousarray(y.T)
    nx, ny = xt.shape[1], yt.shape[1]
    mx = xt.mean(axis=1)
    my = yt.mean(axis=1)
    constant = np.all(xt == xt[:, :1], axis=1) & np.all(yt == yt[:, :1], axis=1)
    pooled = ((nx - 1) * xt.var(axis=1, ddof=1) + (ny - 1) * yt.var(axis=1, ddof=1)) / (nx + ny - 2)
    t = np.zeros(xt.shape[0])
    ok = ~constant
    t[ok] = (my[ok] - mx[ok]) / np.sqrt(pooled[ok] * (1.0 / nx + 1.0 / ny))
    diff = (yt[:, 0] - xt[:, 0]).astype(np.float64)
    degenerate = constant & (diff != 0)
    t[degenerate] = np.copysign(np.inf, diff[degenerate])
    return t, np.full(xt.shape[0], float(nx + ny - 2)), degenerate


def column_tests(x: np.ndarray, y: np.ndarray, variant: Variant = "paired"):
    """Column-wise t statistics, df, two-tailed p and degeneracy flags."""
    if variant == "paired":
        t, df, degenerate = _paired_columns(x, y)
    elif variant == "two_sample":
        t, df, degenerate = _two_sample_columns(x, y)
    else:
        raise ValueError(f"unknown test variant {variant!r}")
    finite = np.isfinite(t)
    p = np.zeros_like(t)
    if finite.any():
        p[finite] = np.minimum(1.0, 2.0 * kernels.t_sf_many(np.abs(t[finite]), df[finite]))
    return t, df, p, degenerate


def compute_ratios(n_before: int, n_after: int, N: int) -> tuple[float, float]:
    """R1 = N_A / N_B (N_A when N_B is 0) and R2 = 100 * N_A / N."""
    if N < 1:
        raise ValueError("cohort size must be >= 1")
    if n_before < 0 or n_after < 0:
        raise ValueError("patient counts must be non-negative")
    r1 = n_after / n_before if n_before else float(n_after)
    return r1, 100.0 * n_after / N


def event_stats_for_all(
    X: GroupedCounts,
    Y: GroupedCounts,
    N: int,
    variant: Variant = "paired",
    n_before: Sequence[int] | None = None,
    n_after: Sequence[int] | None = None,
    threads: int = 1,
) -> list[EventStats]:
    """One EventStats per column of the grouped before (X) / after (Y) counts.

    ``n_before``/``n_after`` are the ungrouped column totals; they default to
    the grouped sums, which differ only when a remainder was dropped.
    """
    check_compatible(X, Y)
    n_cols = len(X.columns)
    nb = np.asarray(X.counts.sum(axis=0) if n_before is None else n_before, dtype=np.int64)
    na = np.asarray(Y.counts.sum(axis=0) if n_after is None else n_after, dtype=np.int64)
    if nb.shape != (n_cols,) or na.shape != (n_cols,):
        raise ShapeMismatch("column totals do not match the grouped columns")
    if variant == "two_sample" and X.n_groups < 2:
        raise ShapeMismatch("two-sample test needs at least two groups")
    if variant == "paired" and X.n_groups < 2:
        raise ShapeMismatch("paired test needs at least two groups")

    bounds = _chunks(n_cols, max(1, threads))
    if len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
            parts = list(
                pool.map(lambda b: column_tests(X.counts[:, b[0]:b[1]], Y.counts[:, b[0]:b[1]], variant), bounds)
            )
    else:
        parts = [column_tests(X.counts, Y.counts, variant)]
    t = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0)
    df = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0)
    pv = np.concatenate([p[2] for p in parts]) if parts else np.zeros(0)
    degenerate = np.concatenate([p[3] for p in parts]) if parts else np.zeros(0, dtype=bool)

    out = []
    for j, code in enumerate(X.columns):
        b, a = int(nb[j]), int(na[j])
        r1, r2 = compute_ratios(b, a, N)
        out.append(EventStats(code, b, a, float(t[j]), float(df[j]), float(pv[j]), r1, r2, bool(degenerate[j])))
    return out


def _chunks(n, parts):
    if n == 0:
        return []
    parts = min(parts, n)
    step = -(-n // parts)
    return [(lo, min(n, lo + step)) for lo in range(0, n, step)]
