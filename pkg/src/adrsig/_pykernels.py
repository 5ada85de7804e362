"""Pure Python implementations of the numeric kernels.

Same algorithms and constants as ``_ckernels.pyx``; used when the compiled
extension is unavailable or ADRSIG_PURE_PYTHON is set.
"""
import math

import numpy as np

from adrsig.errors import ConvergenceError

MAXIT = 300
EPS = 1e-14
FPMIN = 1e-300


def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return h
    raise ConvergenceError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def betainc(a, b, x, y=-1.0):
    """Regularized incomplete beta I_x(a, b).

    ``y`` may carry an accurately computed ``1 - x``; a negative value means
    "derive it from x".
    """
    if y < 0.0:
        y = 1.0 - x
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    logx = math.log1p(-y) if x > 0.5 else math.log(x)
    logy = math.log1p(-x) if y > 0.5 else math.log(y)
    lbt = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * logx + b * logy
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(lbt) * _betacf(a, b, x) / a
    return 1.0 - math.exp(lbt) * _betacf(b, a, y) / b


def t_sf(t, df):
    """P(T > t) for Student's t with ``df`` degrees of freedom."""
    if math.isnan(t):
        return math.nan
    if t < 0.0:
        return 1.0 - t_sf(-t, df)
    if math.isinf(t):
        return 0.0
    t2 = t * t
    s = df + t2
    return 0.5 * betainc(0.5 * df, 0.5, df / s, t2 / s)


def t_sf_many(t, df):
    t = np.asarray(t, dtype=np.float64)
    df = np.broadcast_to(np.asarray(df, dtype=np.float64), t.shape)
    out = np.empty(t.shape, dtype=np.float64)
    flat_t, flat_df, flat_out = t.ravel(), df.ravel(), out.reshape(-1)
    for i in range(flat_t.shape[0]):
        flat_out[i] = t_sf(float(flat_t[i]), float(flat_df[i]))
    return out


def group_counts(rows, cols, group_of_row, n_groups, n_cols):
    """Count cells per (group, column); rows mapped to group -1 are skipped."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    groups = np.asarray(group_of_row, dtype=np.int64)[rows]
    keep = groups >= 0
    flat = groups[keep] * n_cols + cols[keep]
    counts = np.bincount(flat, minlength=n_groups * n_cols)
    return counts.astype(np.int64).reshape(n_groups, n_cols)
