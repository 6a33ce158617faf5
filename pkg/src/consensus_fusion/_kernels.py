"""Compiled inner loops for the sequential object sweep."""

import numba
import numpy as np


@numba.njit(cache=True)
def gauss_seidel_dense(f_obj, k_co, base, denom, coef):
    # f_obj is updated in place, row by row, reading the freshest rows
    n, l = f_obj.shape
    acc = np.empty(l)
    for i in range(n):
        acc[:] = 0.0
        for j in range(n):
            if j != i:
                w = k_co[i, j]
                if w != 0.0:
                    for c in range(l):
                        acc[c] += w * f_obj[j, c]
        for c in range(l):
            f_obj[i, c] = (base[i, c] + coef * acc[c]) / denom[i]


@numba.njit(cache=True)
def gauss_seidel_gram(f_obj, factor, base, denom, coef):
    # kernel is factor @ factor.T; proj = factor.T @ f_obj is kept current
    n, l = f_obj.shape
    g = factor.shape[1]
    proj = np.zeros((g, l))
    for i in range(n):
        for k in range(g):
            u = factor[i, k]
            if u != 0.0:
                for c in range(l):
                    proj[k, c] += u * f_obj[i, c]
    acc = np.empty(l)
    new = np.empty(l)
    for i in range(n):
        self_w = 0.0
        for k in range(g):
            self_w += factor[i, k] * factor[i, k]
        acc[:] = 0.0
        for k in range(g):
            u = factor[i, k]
            if u != 0.0:
                for c in range(l):
                    acc[c] += u * proj[k, c]
        for c in range(l):
            off = acc[c] - self_w * f_obj[i, c]
            if off < 0.0:
                off = 0.0
            new[c] = (base[i, c] + coef * off) / denom[i]
        for k in range(g):
            u = factor[i, k]
            if u != 0.0:
                for c in range(l):
                    proj[k, c] += u * (new[c] - f_obj[i, c])
        for c in range(l):
            f_obj[i, c] = new[c]
