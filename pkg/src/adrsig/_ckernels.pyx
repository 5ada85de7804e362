# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numeric kernels; see _pykernels.py for the reference versions."""
import numpy as np

from libc.math cimport exp, fabs, isinf, isnan, lgamma, log, log1p, NAN

from adrsig.errors import ConvergenceError

cdef int MAXIT = 300
cdef double EPS = 1e-14
cdef double FPMIN = 1e-300


cdef inline double _guard(double v) noexcept nogil:
    if fabs(v) < FPMIN:
        return FPMIN
    return v


cdef int _betacf(double a, double b, double x, double* out) noexcept nogil:
    cdef double qab = a + b
    cdef double qap = a + 1.0
    cdef double qam = a - 1.0
    cdef double c = 1.0
    cdef double d = _guard(1.0 - qab * x / qap)
    cdef double h, aa, delta
    cdef int m, m2
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = _guard(1.0 + aa * d)
        c = _guard(1.0 + aa / c)
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = _guard(1.0 + aa * d)
        c = _guard(1.0 + aa / c)
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < EPS:
            out[0] = h
            return 0
    return -1


cdef int _betainc(double a, double b, double x, double y, double* out) noexcept nogil:
    cdef double logx, logy, lbt, cf
    cdef int status
    if y < 0.0:
        y = 1.0 - x
    if x <= 0.0:
        out[0] = 0.0
        return 0
    if y <= 0.0:
        out[0] = 1.0
        return 0
    logx = log1p(-y) if x > 0.5 else log(x)
    logy = log1p(-x) if y > 0.5 else log(y)
    lbt = lgamma(a + b) - lgamma(a) - lgamma(b) + a * logx + b * logy
    if x < (a + 1.0) / (a + b + 2.0):
        status = _betacf(a, b, x, &cf)
        out[0] = exp(lbt) * cf / a
    else:
        status = _betacf(b, a, y, &cf)
        out[0] = 1.0 - exp(lbt) * cf / b
    return status


cdef int _t_sf(double t, double df, double* out) noexcept nogil:
    cdef double t2, s, v
    cdef int status
    if isnan(t):
        out[0] = NAN
        return 0
    if t < 0.0:
        status = _t_sf(-t, df, &v)
        out[0] = 1.0 - v
        return status
    if isinf(t):
        out[0] = 0.0
        return 0
    t2 = t * t
    s = df + t2
    status = _betainc(0.5 * df, 0.5, df / s, t2 / s, &v)
    out[0] = 0.5 * v
    return status


def betainc(double a, double b, double x, double y=-1.0):
    cdef double v
    if _betainc(a, b, x, y, &v) != 0:
        raise ConvergenceError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")
    return v


def t_sf(double t, double df):
    cdef double v
    if _t_sf(t, df, &v) != 0:
        raise ConvergenceError(f"incomplete beta did not converge for t={t}, df={df}")
    return v


def t_sf_many(t, df):
    t_arr = np.ascontiguousarray(t, dtype=np.float64)
    df_arr = np.ascontiguousarray(np.broadcast_to(np.asarray(df, dtype=np.float64), t_arr.shape))
    out = np.empty(t_arr.shape, dtype=np.float64)
    cdef const double[::1] tv = t_arr.reshape(-1)
    cdef const double[::1] dv = df_arr.reshape(-1)
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = tv.shape[0]
    cdef Py_ssize_t bad = -1
    with nogil:
        for i in range(n):
            if _t_sf(tv[i], dv[i], &ov[i]) != 0:
                bad = i
                break
    if bad >= 0:
        raise ConvergenceError(
            f"incomplete beta did not converge for t={tv[bad]}, df={dv[bad]}"
        )
    return out


def group_counts(rows, cols, group_of_row, Py_ssize_t n_groups, Py_ssize_t n_cols):
    cdef const long long[::1] rv = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const long long[::1] cv = np.ascontiguousarray(cols, dtype=np.int64)
    cdef const long long[::1] gv = np.ascontiguousarray(group_of_row, dtype=np.int64)
    counts = np.zeros((n_groups, n_cols), dtype=np.int64)
    cdef long long[:, ::1] out = counts
    cdef Py_ssize_t i, n = rv.shape[0]
    cdef long long g
    with nogil:
        for i in range(n):
            g = gv[rv[i]]
            if g >= 0:
                out[g, cv[i]] += 1
    return counts
