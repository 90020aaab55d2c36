# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels.  Mirrors ``_kernels_py`` function for function."""

import numpy as np
from libc.math cimport exp, sqrt, log2, isfinite, NAN, INFINITY

from ._kernels_py import stream_key

ctypedef unsigned long long u64

cdef u64 GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline u64 _mix(u64 z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def uniforms(seed, stream, start, Py_ssize_t count):
    cdef u64 key = <u64>stream_key(seed, stream)
    cdef u64 first = <u64>start
    out = np.empty(count, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t k
    with nogil:
        for k in range(count):
            o[k] = (<double>(_mix(key + (first + <u64>k + 1ULL) * GOLDEN) >> 11) + 0.5) * 1.1102230246251565e-16
    return out


def diversity_fidelity(T, weights, split, gains, int mode, double n_th, double rescale, double x, double p):
    cdef const double[:, ::1] t = np.ascontiguousarray(T, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] s = np.ascontiguousarray(split, dtype=np.float64)
    cdef const double[::1] g = np.ascontiguousarray(gains, dtype=np.float64)
    cdef Py_ssize_t M = t.shape[0], N = t.shape[1], k, i
    if mode < 0 or mode > 2:
        raise ValueError(f"unknown amplification mode {mode}")
    if w.shape[0] != N or s.shape[0] != N or g.shape[0] != N:
        raise ValueError("per-arm arrays must match the number of arms")
    out = np.empty(M, dtype=np.float64)
    cdef double[::1] o = out
    cdef double env = n_th + 0.5, amp2 = x * x + p * p
    cdef double V, m, Ti, B, a, S
    with nogil:
        for k in range(M):
            V = 0.0
            m = 0.0
            for i in range(N):
                Ti = t[k, i]
                if mode == 0:
                    B = 0.5 * Ti + (1.0 - Ti) * env
                    a = sqrt(Ti)
                elif mode == 1:
                    B = g[i] * (0.5 * Ti + (1.0 - Ti) * env) + 0.5 * (g[i] - 1.0)
                    a = sqrt(g[i] * Ti)
                else:
                    B = (g[i] - 0.5) * Ti + (1.0 - Ti) * env
                    a = sqrt(g[i] * Ti)
                V += w[i] * w[i] * B
                m += a * w[i] * s[i]
            m *= rescale
            S = V + 0.5
            o[k] = exp(-0.5 * (m - 1.0) * (m - 1.0) * amp2 / S) / S
    return out


cdef inline double _g(double x) nogil:
    if x <= 0.0:
        return 0.0
    return (x + 1.0) * log2(x + 1.0) - x * log2(x)


def key_rates(t_eff, double v_in, double n_th, double beta, int nu, bint paper_units):
    cdef const double[::1] t = np.ascontiguousarray(np.ravel(t_eff), dtype=np.float64)
    cdef Py_ssize_t M = t.shape[0], k
    out = np.empty(M, dtype=np.float64)
    cdef double[::1] o = out
    cdef double W, vac, scale
    if paper_units:
        W, vac, scale = n_th + 0.5, 0.5, 1.0
    else:
        W, vac, scale = 2.0 * n_th + 1.0, 1.0, 0.5
    cdef double T, denom, info, a, b = W, c2, disc, z, nu_p, nu_m, h, g2, nu_c, cond, ex, K
    cdef double min_excess = INFINITY
    with nogil:
        for k in range(M):
            T = t[k]
            denom = 1.0 + (1.0 / nu) * (1.0 - T) * (2.0 * n_th - 1.0)
            c2 = T * (W * W - 1.0)
            h = T * (v_in - 1.0) + (W - 1.0) * (1.0 - T) + 1.0
            if denom <= 0.0 or c2 < 0.0 or h <= 0.0:
                o[k] = NAN
                continue
            info = 0.5 * nu * log2(1.0 + nu * T * (v_in - 1.0) / denom)
            a = (1.0 - T) * v_in + T * W
            disc = (a + b) * (a + b) - 4.0 * c2
            if disc < 0.0:
                o[k] = NAN
                continue
            z = sqrt(disc)
            nu_p = 0.5 * (z + (b - a))
            nu_m = 0.5 * (z - (b - a))
            g2 = T * (v_in * v_in - 1.0)
            if nu == 2:
                nu_c = v_in - g2 / (h + 1.0)
            else:
                cond = v_in * (v_in - g2 / h)
                if cond < 0.0:
                    o[k] = NAN
                    continue
                nu_c = sqrt(cond)
            ex = nu_p
            if nu_m < ex:
                ex = nu_m
            if nu_c < ex:
                ex = nu_c
            ex -= vac
            K = beta * info - (_g(max(nu_p - vac, 0.0) * scale) + _g(max(nu_m - vac, 0.0) * scale)
                               - _g(max(nu_c - vac, 0.0) * scale))
            if not isfinite(K):
                o[k] = NAN
                continue
            o[k] = K
            if ex < min_excess:
                min_excess = ex
    return out, min_excess
