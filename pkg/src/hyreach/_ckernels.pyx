# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled re-entry kernels. Same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, M_PI

cnp.import_array()

cdef double RAD2DEG = 180.0 / M_PI


cdef struct Params:
    double G, rho0, Re, hr, S, m, a0, a1, b0, b1, b2


cdef Params _unpack(pvec):
    cdef Params p
    p.G = pvec[0]; p.rho0 = pvec[1]; p.Re = pvec[2]; p.hr = pvec[3]
    p.S = pvec[4]; p.m = pvec[5]; p.a0 = pvec[6]; p.a1 = pvec[7]
    p.b0 = pvec[8]; p.b1 = pvec[9]; p.b2 = pvec[10]
    return p


cdef inline void _rates(const double* x, double alpha, double beta, Params* p, double* out) noexcept nogil:
    cdef double h = x[0], v = x[1], gam = x[2], th = x[3], psi = x[4]
    cdef double r = p.Re + h
    cdef double rho = p.rho0 * exp(-h / p.hr)
    cdef double g = p.G / (r * r)
    cdef double ad = alpha * RAD2DEG
    cdef double cl = p.a0 + p.a1 * ad
    cdef double cd = p.b0 + p.b1 * ad + p.b2 * ad * ad
    cdef double q = 0.5 * p.S * rho * v * v
    cdef double L = q * cl
    cdef double D = q * cd
    cdef double sg = sin(gam), cg = cos(gam)
    cdef double st = sin(th), ct = cos(th)
    cdef double sp = sin(psi), cp = cos(psi)
    cdef double sb = sin(beta), cb = cos(beta)
    cdef double vr = v / r
    out[0] = v * sg
    out[1] = -D / p.m - g * sg
    out[2] = L / (p.m * v) * cb + cg * (vr - g / v)
    out[3] = vr * cg * sp
    out[4] = L / (p.m * v) * sb / cg - vr * cg * cp * st / ct
    out[5] = vr * cg * cp / ct


cdef void _jacobian(const double* x, double alpha, double beta, Params* p, double* J) noexcept nogil:
    # J is row-major 6x8
    cdef int i
    for i in range(48):
        J[i] = 0.0
    cdef double h = x[0], v = x[1], gam = x[2], th = x[3], psi = x[4]
    cdef double r = p.Re + h
    cdef double rho = p.rho0 * exp(-h / p.hr)
    cdef double g = p.G / (r * r)
    cdef double ad = alpha * RAD2DEG
    cdef double cl = p.a0 + p.a1 * ad
    cdef double cd = p.b0 + p.b1 * ad + p.b2 * ad * ad
    cdef double q = 0.5 * p.S * rho * v * v
    cdef double D = q * cd
    cdef double dD_da = q * (p.b1 + 2.0 * p.b2 * ad) * RAD2DEG
    cdef double P = q * cl / (p.m * v)
    cdef double dP_da = q * p.a1 * RAD2DEG / (p.m * v)
    cdef double sg = sin(gam), cg = cos(gam)
    cdef double st = sin(th), ct = cos(th)
    cdef double tt = st / ct
    cdef double sp = sin(psi), cp = cos(psi)
    cdef double sb = sin(beta), cb = cos(beta)
    cdef double vr = v / r
    cdef double f5 = vr * cg * cp / ct
    J[0 * 8 + 1] = sg
    J[0 * 8 + 2] = v * cg
    J[1 * 8 + 0] = D / (p.m * p.hr) + 2.0 * g * sg / r
    J[1 * 8 + 1] = -2.0 * D / (p.m * v)
    J[1 * 8 + 2] = -g * cg
    J[1 * 8 + 6] = -dD_da / p.m
    J[2 * 8 + 0] = -P * cb / p.hr + cg * (-v / (r * r) + 2.0 * g / (r * v))
    J[2 * 8 + 1] = P * cb / v + cg * (1.0 / r + g / (v * v))
    J[2 * 8 + 2] = -sg * (vr - g / v)
    J[2 * 8 + 6] = dP_da * cb
    J[2 * 8 + 7] = -P * sb
    J[3 * 8 + 0] = -vr * cg * sp / r
    J[3 * 8 + 1] = cg * sp / r
    J[3 * 8 + 2] = -vr * sg * sp
    J[3 * 8 + 4] = vr * cg * cp
    J[4 * 8 + 0] = -P * sb / (p.hr * cg) + vr / r * cg * cp * tt
    J[4 * 8 + 1] = P * sb / (v * cg) - cg * cp * tt / r
    J[4 * 8 + 2] = P * sb * sg / (cg * cg) + vr * sg * cp * tt
    J[4 * 8 + 3] = -vr * cg * cp / (ct * ct)
    J[4 * 8 + 4] = vr * cg * sp * tt
    J[4 * 8 + 6] = dP_da * sb / cg
    J[4 * 8 + 7] = P * cb / cg
    J[5 * 8 + 0] = -f5 / r
    J[5 * 8 + 1] = f5 / v
    J[5 * 8 + 2] = -vr * sg * cp / ct
    J[5 * 8 + 3] = f5 * tt
    J[5 * 8 + 4] = -vr * cg * sp / ct


def rates(x, u, pvec):
    cdef Params p = _unpack(pvec)
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(6)
    cdef double[::1] ov = out
    _rates(&xv[0], float(u[0]), float(u[1]), &p, &ov[0])
    return out


def rates_batch(X, U, pvec):
    cdef Params p = _unpack(pvec)
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], i
    out = np.empty((n, 6))
    cdef double[:, ::1] ov = out
    with nogil:
        for i in range(n):
            _rates(&Xv[i, 0], Uv[i, 0], Uv[i, 1], &p, &ov[i, 0])
    return out


def jacobian(x, u, pvec):
    cdef Params p = _unpack(pvec)
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty((6, 8))
    cdef double[:, ::1] ov = out
    _jacobian(&xv[0], float(u[0]), float(u[1]), &p, &ov[0, 0])
    return out


def rk4_batch(X0, U, double dt_seg, int substeps, pvec):
    cdef Params p = _unpack(pvec)
    cdef double[:, ::1] X0v = np.ascontiguousarray(X0, dtype=np.float64)
    cdef double[:, :, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef Py_ssize_t n = Uv.shape[0], nseg = Uv.shape[1]
    out = np.empty((n, nseg + 1, 6))
    cdef double[:, :, ::1] ov = out
    cdef double x[6]
    cdef double tmp[6]
    cdef double k1[6]
    cdef double k2[6]
    cdef double k3[6]
    cdef double k4[6]
    cdef double hstep = dt_seg / substeps
    cdef double a, b
    cdef Py_ssize_t i, k, s, j
    with nogil:
        for i in range(n):
            for j in range(6):
                x[j] = X0v[i, j]
                ov[i, 0, j] = x[j]
            for k in range(nseg):
                a = Uv[i, k, 0]
                b = Uv[i, k, 1]
                for s in range(substeps):
                    _rates(x, a, b, &p, k1)
                    for j in range(6):
                        tmp[j] = x[j] + 0.5 * hstep * k1[j]
                    _rates(tmp, a, b, &p, k2)
                    for j in range(6):
                        tmp[j] = x[j] + 0.5 * hstep * k2[j]
                    _rates(tmp, a, b, &p, k3)
                    for j in range(6):
                        tmp[j] = x[j] + hstep * k3[j]
                    _rates(tmp, a, b, &p, k4)
                    for j in range(6):
                        x[j] = x[j] + (hstep / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                for j in range(6):
                    ov[i, k + 1, j] = x[j]
    return out


def euler_rollout(x0, U, double Ts, pvec):
    cdef Params p = _unpack(pvec)
    cdef double[:, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef Py_ssize_t N = Uv.shape[0], j, i, c
    X = np.empty((N + 1, 6))
    Jx = np.empty((N, 6, 6))
    Ju = np.empty((N, 6, 2))
    cdef double[:, ::1] Xv = X
    cdef double[:, :, ::1] Jxv = Jx
    cdef double[:, :, ::1] Juv = Ju
    cdef double J[48]
    cdef double f[6]
    cdef double[::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    for i in range(6):
        Xv[0, i] = x0v[i]
    with nogil:
        for j in range(N):
            _jacobian(&Xv[j, 0], Uv[j, 0], Uv[j, 1], &p, J)
            for i in range(6):
                for c in range(6):
                    Jxv[j, i, c] = J[i * 8 + c]
                Juv[j, i, 0] = J[i * 8 + 6]
                Juv[j, i, 1] = J[i * 8 + 7]
            _rates(&Xv[j, 0], Uv[j, 0], Uv[j, 1], &p, f)
            for i in range(6):
                Xv[j + 1, i] = Xv[j, i] + Ts * f[i]
    return X, Jx, Ju
