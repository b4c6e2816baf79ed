"""Pure-Python coordinate-descent sweep kernels (fallback backend).

Same call contract as the compiled backend in ``_cd_cy``: all arrays are
contiguous float64, updated in place, and the sweep order is fixed (primal:
layers bottom-up, units ascending; dual: top block first, then slack layers
top-down, units ascending).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def primal_sweeps(weights, colsq, zs, es, passes):
    """Gauss-Seidel sweeps of exact 1-D minimization over the hidden units.

    es[i] are the residuals (es[i+1], when present, is downstream of zs[i]
    through weights[i+1]); both zs and es are maintained in place.
    """
    n_hidden = len(zs)
    n_res = len(es)
    for _ in range(passes):
        for i in range(n_hidden):
            z = zs[i]
            e_up = es[i]
            if i + 1 < n_res:
                W_down = weights[i + 1]
                e_down = es[i + 1]
                c = colsq[i + 1]
                for j in range(z.shape[0]):
                    col = W_down[:, j]
                    g = e_up[j] - float(col @ e_down)
                    z_new = z[j] - g / (1.0 + c[j])
                    if z_new < 0.0:
                        z_new = 0.0
                    delta = z_new - z[j]
                    if delta != 0.0:
                        z[j] = z_new
                        e_up[j] += delta
                        e_down -= col * delta
            else:
                for j in range(z.shape[0]):
                    z_new = z[j] - e_up[j]
                    if z_new < 0.0:
                        z_new = 0.0
                    delta = z_new - z[j]
                    if delta != 0.0:
                        z[j] = z_new
                        e_up[j] += delta


def dual_sweeps(slacks, gstack, dstacks, qs, offsets, top_level, passes):
    """Sweeps of exact 1-D concave maximization over dual coordinates.

    gstack concatenates the dual-value gradients of all active levels;
    dstacks[b] is the (constant) stacked direction matrix of block b, whose
    rows cover the level prefix 0..t, and qs[b] the per-unit curvatures.
    ``top_level`` is the level index of the unclamped top block (-1 when
    absent, i.e. the free phase). Blocks run top-down.
    """
    n_levels = len(offsets) - 1
    for _ in range(passes):
        for b, t in enumerate(range(n_levels - 1, -1, -1)):
            D = dstacks[b]
            q = qs[b]
            g_active = gstack[:offsets[t + 1]]
            if t == top_level:
                for j in range(D.shape[1]):
                    col = D[:, j]
                    step = float(col @ g_active) / q[j]
                    if step != 0.0:
                        g_active -= col * step
            else:
                s = slacks[t]
                for j in range(D.shape[1]):
                    col = D[:, j]
                    step = float(col @ g_active) / q[j]
                    s_new = s[j] + step
                    if s_new < 0.0:
                        s_new = 0.0
                    delta = s_new - s[j]
                    if delta != 0.0:
                        s[j] = s_new
                        g_active -= col * delta
