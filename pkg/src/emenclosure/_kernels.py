"""Numba-compiled Yee-lattice update kernels.

Scalar-coefficient variants serve homogeneous-background runs without
allocating full coefficient arrays; array variants handle obstacle runs.
All kernels are single passes over memory (the runs here are bandwidth
bound on one core).
"""

from __future__ import annotations

import numpy as np
from numba import njit

_OPTS = dict(cache=True, fastmath=True)


# -- magnetic half-step: H -= ch * curl(E) ---------------------------------


@njit(**_OPTS)
def update_h_scalar(Hx, Hy, Hz, Ex, Ey, Ez, ch, inv_h):
    nxp, ny, nz = Hx.shape
    for i in range(nxp):
        for j in range(ny):
            for k in range(nz):
                Hx[i, j, k] -= ch * inv_h * (
                    (Ez[i, j + 1, k] - Ez[i, j, k]) - (Ey[i, j, k + 1] - Ey[i, j, k]))
    nx, nyp, nz2 = Hy.shape
    for i in range(nx):
        for j in range(nyp):
            for k in range(nz2):
                Hy[i, j, k] -= ch * inv_h * (
                    (Ex[i, j, k + 1] - Ex[i, j, k]) - (Ez[i + 1, j, k] - Ez[i, j, k]))
    nx2, ny2, nzp = Hz.shape
    for i in range(nx2):
        for j in range(ny2):
            for k in range(nzp):
                Hz[i, j, k] -= ch * inv_h * (
                    (Ey[i + 1, j, k] - Ey[i, j, k]) - (Ex[i, j + 1, k] - Ex[i, j, k]))


@njit(**_OPTS)
def update_h_array(Hx, Hy, Hz, Ex, Ey, Ez, chx, chy, chz, inv_h):
    nxp, ny, nz = Hx.shape
    for i in range(nxp):
        for j in range(ny):
            for k in range(nz):
                Hx[i, j, k] -= chx[i, j, k] * inv_h * (
                    (Ez[i, j + 1, k] - Ez[i, j, k]) - (Ey[i, j, k + 1] - Ey[i, j, k]))
    nx, nyp, nz2 = Hy.shape
    for i in range(nx):
        for j in range(nyp):
            for k in range(nz2):
                Hy[i, j, k] -= chy[i, j, k] * inv_h * (
                    (Ex[i, j, k + 1] - Ex[i, j, k]) - (Ez[i + 1, j, k] - Ez[i, j, k]))
    nx2, ny2, nzp = Hz.shape
    for i in range(nx2):
        for j in range(ny2):
            for k in range(nzp):
                Hz[i, j, k] -= chz[i, j, k] * inv_h * (
                    (Ey[i + 1, j, k] - Ey[i, j, k]) - (Ex[i, j + 1, k] - Ex[i, j, k]))


# -- electric full step (interior sites; tangential boundary E untouched) --


@njit(**_OPTS)
def update_e_scalar(Ex, Ey, Ez, Hx, Hy, Hz, ca, cb, inv_h):
    nx, nyp, nzp = Ex.shape
    for i in range(nx):
        for j in range(1, nyp - 1):
            for k in range(1, nzp - 1):
                curl = ((Hz[i, j, k] - Hz[i, j - 1, k])
                        - (Hy[i, j, k] - Hy[i, j, k - 1])) * inv_h
                Ex[i, j, k] = ca * Ex[i, j, k] + cb * curl
    nxp, ny, nzp2 = Ey.shape
    for i in range(1, nxp - 1):
        for j in range(ny):
            for k in range(1, nzp2 - 1):
                curl = ((Hx[i, j, k] - Hx[i, j, k - 1])
                        - (Hz[i, j, k] - Hz[i - 1, j, k])) * inv_h
                Ey[i, j, k] = ca * Ey[i, j, k] + cb * curl
    nxp2, nyp2, nz = Ez.shape
    for i in range(1, nxp2 - 1):
        for j in range(1, nyp2 - 1):
            for k in range(nz):
                curl = ((Hy[i, j, k] - Hy[i - 1, j, k])
                        - (Hx[i, j, k] - Hx[i, j - 1, k])) * inv_h
                Ez[i, j, k] = ca * Ez[i, j, k] + cb * curl


@njit(**_OPTS)
def update_e_array(Ex, Ey, Ez, Hx, Hy, Hz, cax, cbx, cay, cby, caz, cbz, inv_h):
    nx, nyp, nzp = Ex.shape
    for i in range(nx):
        for j in range(1, nyp - 1):
            for k in range(1, nzp - 1):
                curl = ((Hz[i, j, k] - Hz[i, j - 1, k])
                        - (Hy[i, j, k] - Hy[i, j, k - 1])) * inv_h
                Ex[i, j, k] = cax[i, j, k] * Ex[i, j, k] + cbx[i, j, k] * curl
    nxp, ny, nzp2 = Ey.shape
    for i in range(1, nxp - 1):
        for j in range(ny):
            for k in range(1, nzp2 - 1):
                curl = ((Hx[i, j, k] - Hx[i, j, k - 1])
                        - (Hz[i, j, k] - Hz[i - 1, j, k])) * inv_h
                Ey[i, j, k] = cay[i, j, k] * Ey[i, j, k] + cby[i, j, k] * curl
    nxp2, nyp2, nz = Ez.shape
    for i in range(1, nxp2 - 1):
        for j in range(1, nyp2 - 1):
            for k in range(nz):
                curl = ((Hy[i, j, k] - Hy[i - 1, j, k])
                        - (Hx[i, j, k] - Hx[i, j - 1, k])) * inv_h
                Ez[i, j, k] = caz[i, j, k] * Ez[i, j, k] + cbz[i, j, k] * curl


@njit(**_OPTS)
def energy_quadratic(arr, coef_arr, use_array, coef_scalar):
    total = 0.0
    flat = arr.ravel()
    if use_array:
        cf = coef_arr.ravel()
        for i in range(flat.size):
            total += cf[i] * flat[i] * flat[i]
    else:
        for i in range(flat.size):
            total += coef_scalar * flat[i] * flat[i]
    return total


@njit(**_OPTS)
def energy_bilinear(arr1, arr2, coef_arr, use_array, coef_scalar):
    total = 0.0
    f1 = arr1.ravel()
    f2 = arr2.ravel()
    if use_array:
        cf = coef_arr.ravel()
        for i in range(f1.size):
            total += cf[i] * f1[i] * f2[i]
    else:
        for i in range(f1.size):
            total += coef_scalar * f1[i] * f2[i]
    return total
