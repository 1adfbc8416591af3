"""Numba inner loops for the grid backward induction.

All kernels assume a uniform asset grid (lo + i*step) and do linear
interpolation in the asset coordinate with linear extrapolation from the
boundary segment.  Parallel chunks own disjoint output slices and each
output element is accumulated in a fixed order, so results are bit-identical
regardless of the thread count.
"""

import numpy as np
from numba import njit, prange

CALL, PUT = 0, 1


@njit(cache=True, parallel=True)
def rs_step_sums(s_lo, s_step, c_col, scales, ys, weights):
    """Per-node quadrature sums against one next-period value column.

    out0[i] = sum_m weights[m] * C(s_i * scales[m])
    outy[i] = sum_m weights[m] * ys[m] * C(s_i * scales[m])
    """
    n_s = c_col.size
    m_atoms = scales.size
    base = s_lo * (scales - 1.0) / s_step
    wy = weights * ys
    out0 = np.zeros(n_s)
    outy = np.zeros(n_s)
    for i in prange(n_s):
        acc0 = 0.0
        accy = 0.0
        for m in range(m_atoms):
            x = base[m] + i * scales[m]
            if x <= 0.0:
                idx = 0
            elif x >= n_s - 1:
                idx = n_s - 2
            else:
                idx = int(x)
            u = x - idx
            v = c_col[idx] + u * (c_col[idx + 1] - c_col[idx])
            acc0 += weights[m] * v
            accy += wy[m] * v
        out0[i] = acc0
        outy[i] = accy
    return out0, outy


@njit(cache=True, parallel=True)
def rs_terminal_sums(s_lo, s_step, n_s, scales, ys, weights, strike, kind):
    """Terminal variant: the payoff is evaluated exactly at the transformed
    points instead of interpolated, which keeps the strike kink sharp."""
    m_atoms = scales.size
    wy = weights * ys
    out0 = np.zeros(n_s)
    outy = np.zeros(n_s)
    for i in prange(n_s):
        s_i = s_lo + i * s_step
        acc0 = 0.0
        accy = 0.0
        for m in range(m_atoms):
            q = s_i * scales[m]
            if kind == CALL:
                v = q - strike
            else:
                v = strike - q
            if v < 0.0:
                v = 0.0
            acc0 += weights[m] * v
            accy += wy[m] * v
        out0[i] = acc0
        outy[i] = accy
    return out0, outy


@njit(cache=True, parallel=True)
def garch_step_sums(s_lo, s_step, c_tab, jh, th, scales, w0, wg):
    """Quadrature sums for the 2-D (asset, variance) state space.

    c_tab[j, i] holds next-period values at (s_i, h_j).  For variance node j
    and atom m, the reached variance interpolates columns jh[j, m] and
    jh[j, m] + 1 with fraction th[j, m] (th outside [0, 1] extrapolates).

    out0[j, i] = sum_m w0[j, m] * Cq,  outg[j, i] = sum_m wg[j, m] * Cq.
    """
    n_h, n_s = c_tab.shape
    m_atoms = scales.shape[1]
    out0 = np.zeros((n_h, n_s))
    outg = np.zeros((n_h, n_s))
    for j in prange(n_h):
        for m in range(m_atoms):
            col = jh[j, m]
            t = th[j, m]
            sc = scales[j, m]
            a0 = w0[j, m]
            ag = wg[j, m]
            x0 = s_lo * (sc - 1.0) / s_step
            for i in range(n_s):
                x = x0 + i * sc
                if x <= 0.0:
                    idx = 0
                elif x >= n_s - 1:
                    idx = n_s - 2
                else:
                    idx = int(x)
                u = x - idx
                vlo = c_tab[col, idx] + u * (c_tab[col, idx + 1] - c_tab[col, idx])
                vhi = c_tab[col + 1, idx] + u * (c_tab[col + 1, idx + 1] - c_tab[col + 1, idx])
                v = vlo + t * (vhi - vlo)
                out0[j, i] += a0 * v
                outg[j, i] += ag * v
    return out0, outg


@njit(cache=True, parallel=True)
def garch_terminal_sums(s_lo, s_step, n_s, scales, w0, wg, strike, kind):
    """Terminal variant for the 2-D solver: exact payoff, no variance
    dependence in the terminal condition."""
    n_h, m_atoms = scales.shape
    out0 = np.zeros((n_h, n_s))
    outg = np.zeros((n_h, n_s))
    for j in prange(n_h):
        for m in range(m_atoms):
            sc = scales[j, m]
            a0 = w0[j, m]
            ag = wg[j, m]
            for i in range(n_s):
                q = (s_lo + i * s_step) * sc
                if kind == CALL:
                    v = q - strike
                else:
                    v = strike - q
                if v < 0.0:
                    v = 0.0
                out0[j, i] += a0 * v
                outg[j, i] += ag * v
    return out0, outg
