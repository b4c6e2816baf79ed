# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled coordinate-descent sweep kernels.

Drop-in replacement for ``_cd_py``: identical call contract and sweep
order; the per-coordinate loops run in C.
"""

import numpy as np

BACKEND = "compiled"


def primal_sweeps(list weights, list colsq, list zs, list es, int passes):
    cdef int n_hidden = len(zs)
    cdef int n_res = len(es)
    cdef int p, i, j, k, rows, n
    cdef double g, z_new, delta
    cdef double[:, ::1] W_down
    cdef double[::1] z, e_up, e_down, c
    for p in range(passes):
        for i in range(n_hidden):
            z = zs[i]
            e_up = es[i]
            n = z.shape[0]
            if i + 1 < n_res:
                W_down = weights[i + 1]
                e_down = es[i + 1]
                c = colsq[i + 1]
                rows = W_down.shape[0]
                for j in range(n):
                    g = 0.0
                    for k in range(rows):
                        g += W_down[k, j] * e_down[k]
                    g = e_up[j] - g
                    z_new = z[j] - g / (1.0 + c[j])
                    if z_new < 0.0:
                        z_new = 0.0
                    delta = z_new - z[j]
                    if delta != 0.0:
                        z[j] = z_new
                        e_up[j] = e_up[j] + delta
                        for k in range(rows):
                            e_down[k] = e_down[k] - W_down[k, j] * delta
            else:
                for j in range(n):
                    z_new = z[j] - e_up[j]
                    if z_new < 0.0:
                        z_new = 0.0
                    delta = z_new - z[j]
                    if delta != 0.0:
                        z[j] = z_new
                        e_up[j] = e_up[j] + delta


def dual_sweeps(list slacks, double[::1] gstack, list dstacks, list qs,
                long[::1] offsets, int top_level, int passes):
    cdef int n_levels = offsets.shape[0] - 1
    cdef int p, b, t, j, k, rows, cols
    cdef double step, s_new, delta, g
    cdef double[:, ::1] D
    cdef double[::1] q, s
    for p in range(passes):
        for b in range(n_levels):
            t = n_levels - 1 - b
            D = dstacks[b]
            q = qs[b]
            rows = <int> offsets[t + 1]
            cols = D.shape[1]
            if t == top_level:
                for j in range(cols):
                    g = 0.0
                    for k in range(rows):
                        g += D[k, j] * gstack[k]
                    step = g / q[j]
                    if step != 0.0:
                        for k in range(rows):
                            gstack[k] = gstack[k] - D[k, j] * step
            else:
                s = slacks[t]
                for j in range(cols):
                    g = 0.0
                    for k in range(rows):
                        g += D[k, j] * gstack[k]
                    step = g / q[j]
                    s_new = s[j] + step
                    if s_new < 0.0:
                        s_new = 0.0
                    delta = s_new - s[j]
                    if delta != 0.0:
                        s[j] = s_new
                        for k in range(rows):
                            gstack[k] = gstack[k] - D[k, j] * delta
