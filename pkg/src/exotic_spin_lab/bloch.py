"""Compiled fixed-step RK4 kernels for the coupled Rb-Xe Bloch equations.

State layout per trajectory: ``[Pe_x, Pe_y, Pe_z, Pn_x, Pn_y, Pn_z]``.
Parameter vector ``par``::

    0 gamma_e / Q      1 gamma_n        2 B_z0
    3 beta * M0n       4 beta * M0e     5 P0e     6 P0n
    7 1 / (Te Q)       8 1 / T1n        9 1 / T2n

The external drive acts on the nuclear spins only.
"""
import math

import numpy as np
from numba import njit

N_PAR = 10


@njit(cache=True, fastmath=True)
def _deriv(y, bx, by, bz_drive, out, par):
    ge, gn, bz = par[0], par[1], par[2]
    bmn, bme, p0e, p0n = par[3], par[4], par[5], par[6]
    r_e, r_1, r_2 = par[7], par[8], par[9]
    for m in range(y.shape[0]):
        # field seen by the electrons
        Ex = bmn * y[m, 3]
        Ey = bmn * y[m, 4]
        Ez = bz + bmn * y[m, 5]
        out[m, 0] = ge * (Ey * y[m, 2] - Ez * y[m, 1]) - r_e * y[m, 0]
        out[m, 1] = ge * (Ez * y[m, 0] - Ex * y[m, 2]) - r_e * y[m, 1]
        out[m, 2] = ge * (Ex * y[m, 1] - Ey * y[m, 0]) + r_e * (p0e - y[m, 2])
        # field seen by the nuclei
        Nx = bx[m] + bme * y[m, 0]
        Ny = by[m] + bme * y[m, 1]
        Nz = bz + bz_drive[m] + bme * y[m, 2]
        out[m, 3] = gn * (Ny * y[m, 5] - Nz * y[m, 4]) - r_2 * y[m, 3]
        out[m, 4] = gn * (Nz * y[m, 3] - Nx * y[m, 5]) - r_2 * y[m, 4]
        out[m, 5] = gn * (Nx * y[m, 4] - Ny * y[m, 3]) + r_1 * (p0n - y[m, 5])


@njit(cache=True, fastmath=True)
def _stage(out, y, h, k):
    for m in range(y.shape[0]):
        for j in range(6):
            out[m, j] = y[m, j] + h * k[m, j]


@njit(cache=True, fastmath=True)
def _finish(y, dt, k1, k2, k3, k4):
    h = dt / 6.0
    for m in range(y.shape[0]):
        for j in range(6):
            y[m, j] += h * (k1[m, j] + 2.0 * k2[m, j] + 2.0 * k3[m, j] + k4[m, j])


@njit(cache=True, fastmath=True)
def _tones(amp, C, S, out_x, out_y, out_z):
    for m in range(amp.shape[0]):
        sx = 0.0
        sy = 0.0
        sz = 0.0
        for k in range(amp.shape[1]):
            sx += amp[m, k, 0] * C[m, k]
            sy += amp[m, k, 1] * C[m, k]
            sz += amp[m, k, 2] * C[m, k]
        out_x[m] = sx
        out_y[m] = sy
        out_z[m] = sz


@njit(cache=True, fastmath=True)
def rk4_harmonic(y, t0, dt, nsteps, amp, omega, phase, par):
    """Advance ``y`` (M, 6) in place by ``nsteps`` steps.

    The drive on trajectory ``m`` is ``sum_k amp[m, k] cos(omega[m, k] t + phase[m, k])``;
    cosines are propagated by rotation over each half step and re-anchored
    exactly on entry, so callers should keep ``nsteps`` moderate.
    """
    M = y.shape[0]
    K = amp.shape[1]
    k1 = np.empty_like(y)
    k2 = np.empty_like(y)
    k3 = np.empty_like(y)
    k4 = np.empty_like(y)
    tmp = np.empty_like(y)
    C = np.empty((M, K))
    S = np.empty((M, K))
    ch = np.empty((M, K))
    sh = np.empty((M, K))
    for m in range(M):
        for k in range(K):
            arg = omega[m, k] * t0 + phase[m, k]
            C[m, k] = math.cos(arg)
            S[m, k] = math.sin(arg)
            ch[m, k] = math.cos(0.5 * omega[m, k] * dt)
            sh[m, k] = math.sin(0.5 * omega[m, k] * dt)
    b0x = np.empty(M)
    b0y = np.empty(M)
    b0z = np.empty(M)
    bhx = np.empty(M)
    bhy = np.empty(M)
    bhz = np.empty(M)
    _tones(amp, C, S, b0x, b0y, b0z)
    for i in range(nsteps):
        for m in range(M):
            for k in range(K):
                c = C[m, k] * ch[m, k] - S[m, k] * sh[m, k]
                S[m, k] = S[m, k] * ch[m, k] + C[m, k] * sh[m, k]
                C[m, k] = c
        _tones(amp, C, S, bhx, bhy, bhz)
        _deriv(y, b0x, b0y, b0z, k1, par)
        _stage(tmp, y, 0.5 * dt, k1)
        _deriv(tmp, bhx, bhy, bhz, k2, par)
        _stage(tmp, y, 0.5 * dt, k2)
        _deriv(tmp, bhx, bhy, bhz, k3, par)
        _stage(tmp, y, dt, k3)
        for m in range(M):
            for k in range(K):
                c = C[m, k] * ch[m, k] - S[m, k] * sh[m, k]
                S[m, k] = S[m, k] * ch[m, k] + C[m, k] * sh[m, k]
                C[m, k] = c
        _tones(amp, C, S, b0x, b0y, b0z)
        _deriv(tmp, b0x, b0y, b0z, k4, par)
        _finish(y, dt, k1, k2, k3, k4)


@njit(cache=True, fastmath=True)
def rk4_tabulated(y, dt, drive, par):
    """Advance ``y`` (M, 6) by ``(drive.shape[1] - 1) // 2`` steps.

    ``drive[m, j]`` is the drive field at ``t0 + j * dt / 2``.
    """
    M = y.shape[0]
    nsteps = (drive.shape[1] - 1) // 2
    k1 = np.empty_like(y)
    k2 = np.empty_like(y)
    k3 = np.empty_like(y)
    k4 = np.empty_like(y)
    tmp = np.empty_like(y)
    b0 = np.empty((3, M))
    bh = np.empty((3, M))
    b1 = np.empty((3, M))
    for i in range(nsteps):
        for m in range(M):
            for c in range(3):
                b0[c, m] = drive[m, 2 * i, c]
                bh[c, m] = drive[m, 2 * i + 1, c]
                b1[c, m] = drive[m, 2 * i + 2, c]
        _deriv(y, b0[0], b0[1], b0[2], k1, par)
        _stage(tmp, y, 0.5 * dt, k1)
        _deriv(tmp, bh[0], bh[1], bh[2], k2, par)
        _stage(tmp, y, 0.5 * dt, k2)
        _deriv(tmp, bh[0], bh[1], bh[2], k3, par)
        _stage(tmp, y, dt, k3)
        _deriv(tmp, b1[0], b1[1], b1[2], k4, par)
        _finish(y, dt, k1, k2, k3, k4)
