"""Pure-Python (numpy) implementation of the hot re-entry kernels.

This module mirrors ``_ckernels.pyx`` function for function and is used when
the compiled extension is unavailable or ``HYREACH_PURE_PYTHON=1`` is set.

Parameter vector layout (``pvec``)::

    [G, rho0, Re, hr, S, m, a0, a1, b0, b1, b2]

The aerodynamic polynomials take the angle of attack in degrees.
"""

import math

import numpy as np

RAD2DEG = 180.0 / math.pi


def rates_batch(X, U, pvec):
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    G, rho0, Re, hr, S, m, a0, a1, b0, b1, b2 = pvec
    h, v, gam, th, psi = X[:, 0], X[:, 1], X[:, 2], X[:, 3], X[:, 4]
    alpha, beta = U[:, 0], U[:, 1]
    r = Re + h
    rho = rho0 * np.exp(-h / hr)
    g = G / (r * r)
    ad = alpha * RAD2DEG
    cl = a0 + a1 * ad
    cd = b0 + b1 * ad + b2 * ad * ad
    q = 0.5 * S * rho * v * v
    L = q * cl
    D = q * cd
    sg, cg = np.sin(gam), np.cos(gam)
    st, ct = np.sin(th), np.cos(th)
    sp, cp = np.sin(psi), np.cos(psi)
    sb, cb = np.sin(beta), np.cos(beta)
    vr = v / r
    out = np.empty((X.shape[0], 6))
    out[:, 0] = v * sg
    out[:, 1] = -D / m - g * sg
    out[:, 2] = L / (m * v) * cb + cg * (vr - g / v)
    out[:, 3] = vr * cg * sp
    out[:, 4] = L / (m * v) * sb / cg - vr * cg * cp * st / ct
    out[:, 5] = vr * cg * cp / ct
    return out


def rates(x, u, pvec):
    return rates_batch(np.asarray(x, dtype=float)[None, :], np.asarray(u, dtype=float)[None, :], pvec)[0]


def jacobian(x, u, pvec):
    """Analytic 6x8 Jacobian of the rates w.r.t. (state, control)."""
    G, rho0, Re, hr, S, m, a0, a1, b0, b1, b2 = pvec
    h, v, gam, th, psi = (float(x[0]), float(x[1]), float(x[2]), float(x[3]), float(x[4]))
    alpha, beta = float(u[0]), float(u[1])
    r = Re + h
    rho = rho0 * math.exp(-h / hr)
    g = G / (r * r)
    ad = alpha * RAD2DEG
    cl = a0 + a1 * ad
    cd = b0 + b1 * ad + b2 * ad * ad
    q = 0.5 * S * rho * v * v
    D = q * cd
    dD_da = q * (b1 + 2.0 * b2 * ad) * RAD2DEG
    P = q * cl / (m * v)
    dP_da = q * a1 * RAD2DEG / (m * v)
    sg, cg = math.sin(gam), math.cos(gam)
    st, ct = math.sin(th), math.cos(th)
    tt = st / ct
    sp, cp = math.sin(psi), math.cos(psi)
    sb, cb = math.sin(beta), math.cos(beta)
    vr = v / r
    J = np.zeros((6, 8))
    # hdot = v sin(gam)
    J[0, 1] = sg
    J[0, 2] = v * cg
    # vdot = -D/m - g sin(gam)
    J[1, 0] = D / (m * hr) + 2.0 * g * sg / r
    J[1, 1] = -2.0 * D / (m * v)
    J[1, 2] = -g * cg
    J[1, 6] = -dD_da / m
    # gamdot = P cos(beta) + cos(gam) (v/r - g/v)
    J[2, 0] = -P * cb / hr + cg * (-v / (r * r) + 2.0 * g / (r * v))
    J[2, 1] = P * cb / v + cg * (1.0 / r + g / (v * v))
    J[2, 2] = -sg * (vr - g / v)
    J[2, 6] = dP_da * cb
    J[2, 7] = -P * sb
    # thdot = v cos(gam) sin(psi) / r
    J[3, 0] = -vr * cg * sp / r
    J[3, 1] = cg * sp / r
    J[3, 2] = -vr * sg * sp
    J[3, 4] = vr * cg * cp
    # psidot = P sin(beta)/cos(gam) - v/r cos(gam) cos(psi) tan(th)
    J[4, 0] = -P * sb / (hr * cg) + vr / r * cg * cp * tt
    J[4, 1] = P * sb / (v * cg) - cg * cp * tt / r
    J[4, 2] = P * sb * sg / (cg * cg) + vr * sg * cp * tt
    J[4, 3] = -vr * cg * cp / (ct * ct)
    J[4, 4] = vr * cg * sp * tt
    J[4, 6] = dP_da * sb / cg
    J[4, 7] = P * cb / cg
    # phidot = v cos(gam) cos(psi) / (r cos(th))
    f5 = vr * cg * cp / ct
    J[5, 0] = -f5 / r
    J[5, 1] = f5 / v
    J[5, 2] = -vr * sg * cp / ct
    J[5, 3] = f5 * tt
    J[5, 4] = -vr * cg * sp / ct
    return J


def rk4_batch(X0, U, dt_seg, substeps, pvec):
    """Integrate many trajectories under piecewise-constant controls.

    ``U`` has shape (n, nseg, 2); control ``U[:, k]`` is held over segment k
    of length ``dt_seg``, which is split into ``substeps`` RK4 steps.
    Returns states at the segment boundaries, shape (n, nseg + 1, 6).
    """
    X = np.array(X0, dtype=float)
    U = np.asarray(U, dtype=float)
    n, nseg = U.shape[0], U.shape[1]
    out = np.empty((n, nseg + 1, 6))
    out[:, 0] = X
    h = dt_seg / substeps
    for k in range(nseg):
        u = U[:, k]
        for _ in range(substeps):
            k1 = rates_batch(X, u, pvec)
            k2 = rates_batch(X + 0.5 * h * k1, u, pvec)
            k3 = rates_batch(X + 0.5 * h * k2, u, pvec)
            k4 = rates_batch(X + h * k3, u, pvec)
            X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[:, k + 1] = X
    return out


def euler_rollout(x0, U, Ts, pvec):
    """Forward-Euler rollout with the Jacobians needed for sensitivities.

    Returns (X, Jx, Ju): X is (N+1, 6); Jx[j], Ju[j] are the continuous-time
    Jacobians at (X[j], U[j]).
    """
    U = np.asarray(U, dtype=float)
    N = U.shape[0]
    X = np.empty((N + 1, 6))
    Jx = np.empty((N, 6, 6))
    Ju = np.empty((N, 6, 2))
    X[0] = x0
    for j in range(N):
        J = jacobian(X[j], U[j], pvec)
        Jx[j] = J[:, :6]
        Ju[j] = J[:, 6:]
        X[j + 1] = X[j] + Ts * rates(X[j], U[j], pvec)
    return X, Jx, Ju
