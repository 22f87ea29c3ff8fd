"""Compiled per-environment kernels for the integrator hot path.

State rows are packed as 21 floats:
``x_Q(0:3) v_Q(3:6) x_P(6:9) v_P(9:12) q(12:15) omega(15:18) Omega(18:21)``.
Parameter rows hold ``m_Q, m_P, l, k_c, c_c, g, has_payload, m_body``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

TAUT = 0
SLACK = 1
NO_PAYLOAD = 2

IDEAL = 0
COMPLIANT = 1

P_MQ, P_MP, P_L, P_K, P_C, P_G, P_PAYLOAD, P_MBODY = range(8)
L_RIGID = 1e-3


@njit(cache=True)
def cross3(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@njit(cache=True)
def mv3(A, v):
    out = np.empty(3)
    for i in range(3):
        out[i] = A[i, 0] * v[0] + A[i, 1] * v[1] + A[i, 2] * v[2]
    return out


@njit(cache=True)
def mm3(A, B):
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
    return out


@njit(cache=True)
def exp3(w):
    th2 = dot3(w, w)
    th = np.sqrt(th2)
    if th < 1e-8:
        a = 1.0 - th2 / 6.0
        b = 0.5 - th2 / 24.0
    else:
        a = np.sin(th) / th
        b = (1.0 - np.cos(th)) / th2
    K = np.zeros((3, 3))
    K[0, 1] = -w[2]
    K[0, 2] = w[1]
    K[1, 0] = w[2]
    K[1, 2] = -w[0]
    K[2, 0] = -w[1]
    K[2, 1] = w[0]
    K2 = mm3(K, K)
    out = np.eye(3)
    for i in range(3):
        for j in range(3):
            out[i, j] += a * K[i, j] + b * K2[i, j]
    return out


@njit(cache=True)
def polar_step(R):
    RtR = mm3(R.T.copy(), R)
    C = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            C[i, j] = -0.5 * RtR[i, j]
        C[i, i] += 1.5
    return mm3(R, C)


@njit(cache=True)
def compliant_force(y, p):
    """Cable force on the quadrotor for the compliant link."""
    out = np.zeros(3)
    if p[P_PAYLOAD] == 0.0:
        return out
    rel = y[6:9] - y[0:3]
    d = np.sqrt(dot3(rel, rel))
    l = p[P_L]
    if d <= 0.0 or d < l:
        return out
    u = rel / d
    ddot = dot3(u, y[9:12] - y[3:6])
    T = p[P_K] * (d - l) + p[P_C] * ddot
    if T <= 0.0:
        return out
    return T * u


@njit(cache=True)
def taut_tension(y, R, f, p):
    q = y[12:15]
    om = y[15:18]
    qdot = cross3(om, q)
    fRe3 = f * R[:, 2]
    m_tot = p[P_MQ] + p[P_MP]
    return -p[P_MP] / m_tot * (dot3(q, fRe3) - p[P_MQ] * p[P_L] * dot3(qdot, qdot))


@njit(cache=True)
def deriv(y, R, mode, f, M, wF, wM, p, J, Jinv, model):
    out = np.zeros(21)
    g = p[P_G]
    m_Q = p[P_MQ]
    m_P = p[P_MP]
    fRe3 = f * R[:, 2]
    aQ = np.empty(3)
    aP = np.empty(3)
    if p[P_PAYLOAD] == 0.0:
        for k in range(3):
            aQ[k] = (fRe3[k] + wF[k]) / p[P_MBODY]
        aQ[2] -= g
        aP[:] = aQ
    elif model == COMPLIANT:
        Tv = compliant_force(y, p)
        taut = dot3(Tv, Tv) > 0.0
        m_tot = m_Q + m_P
        for k in range(3):
            wq = wF[k] * m_Q / m_tot if taut else wF[k]
            wp = wF[k] * m_P / m_tot if taut else 0.0
            aQ[k] = (fRe3[k] + Tv[k] + wq) / m_Q
            aP[k] = (-Tv[k] + wp) / m_P
        aQ[2] -= g
        aP[2] -= g
    elif mode == TAUT:
        l = p[P_L]
        q = y[12:15]
        om = y[15:18]
        qdot = cross3(om, q)
        m_tot = m_Q + m_P
        s = dot3(q, fRe3) - m_Q * l * dot3(qdot, qdot)
        for k in range(3):
            aP[k] = (s * q[k] + wF[k]) / m_tot
        aP[2] -= g
        omd = -cross3(q, fRe3) / (m_Q * l)
        qdd = cross3(omd, q) + cross3(om, qdot)
        for k in range(3):
            aQ[k] = aP[k] - l * qdd[k]
        out[12:15] = qdot
        out[15:18] = omd
    else:
        for k in range(3):
            aQ[k] = (fRe3[k] + wF[k]) / m_Q
            aP[k] = 0.0
        aQ[2] -= g
        aP[2] = -g
    Om = y[18:21]
    rhs = M + wM - cross3(Om, mv3(J, Om))
    out[0:3] = y[3:6]
    out[3:6] = aQ
    out[6:9] = y[9:12]
    out[9:12] = aP
    out[18:21] = mv3(Jinv, rhs)
    return out


@njit(cache=True)
def sync(y, mode, p, model):
    """Re-derive redundant coordinates in place."""
    l = p[P_L]
    if p[P_PAYLOAD] == 0.0:
        y[6:12] = y[0:6]
        y[12] = 0.0
        y[13] = 0.0
        y[14] = -1.0
        y[15:18] = 0.0
        return
    if model == IDEAL and mode == TAUT:
        q = y[12:15]
        nq = np.sqrt(dot3(q, q))
        q = q / nq
        om = y[15:18]
        om = om - dot3(om, q) * q
        y[12:15] = q
        y[15:18] = om
        y[0:3] = y[6:9] - l * q
        y[3:6] = y[9:12] - l * cross3(om, q)
        return
    rel = y[6:9] - y[0:3]
    d = np.sqrt(dot3(rel, rel))
    if d > 1e-12:
        q = rel / d
    else:
        q = y[12:15].copy()
    ls = l if l > L_RIGID else L_RIGID
    y[12:15] = q
    y[15:18] = cross3(q, (y[9:12] - y[3:6]) / ls)


@njit(cache=True)
def impact(y, p):
    """Plastic radial impact onto the taut constraint (in place)."""
    m_Q = p[P_MQ]
    m_P = p[P_MP]
    m_tot = m_Q + m_P
    l = p[P_L]
    rel = y[6:9] - y[0:3]
    d = np.sqrt(dot3(rel, rel))
    u = rel / d
    vq_r = dot3(y[3:6], u)
    vp_r = dot3(y[9:12], u)
    if vp_r - vq_r > 0.0:
        v_c = (m_Q * vq_r + m_P * vp_r) / m_tot
        y[3:6] += (v_c - vq_r) * u
        y[9:12] += (v_c - vp_r) * u
    excess = d - l
    y[0:3] += m_P / m_tot * excess * u
    y[6:9] -= m_Q / m_tot * excess * u
    y[12:15] = u
    y[15:18] = cross3(u, (y[9:12] - y[3:6]) / l)


@njit(cache=True)
def guard(y, R, mode, f, p, check_slack):
    """Return the post-guard mode; applies the impact map in place."""
    if p[P_PAYLOAD] == 0.0:
        return NO_PAYLOAD
    if mode == SLACK:
        rel = y[6:9] - y[0:3]
        d = np.sqrt(dot3(rel, rel))
        if d >= p[P_L]:
            impact(y, p)
            sync(y, TAUT, p, IDEAL)
            return TAUT
        return SLACK
    if check_slack and taut_tension(y, R, f, p) <= 0.0:
        sync(y, SLACK, p, IDEAL)
        return SLACK
    return mode


@njit(cache=True)
def step_batch(Y, Rs, modes, f, M, wF, wM, P, J, Jinv, dt, model):
    """One RK4 step for every row, followed by sync and mode update (in place)."""
    n = Y.shape[0]
    for i in range(n):
        y0 = Y[i].copy()
        R0 = Rs[i].copy()
        mode = modes[i]
        p = P[i]
        k1 = deriv(y0, R0, mode, f[i], M[i], wF[i], wM[i], p, J[i], Jinv[i], model)
        y2 = y0 + 0.5 * dt * k1
        R2 = mm3(R0, exp3(0.5 * dt * y0[18:21]))
        k2 = deriv(y2, R2, mode, f[i], M[i], wF[i], wM[i], p, J[i], Jinv[i], model)
        y3 = y0 + 0.5 * dt * k2
        R3 = mm3(R0, exp3(0.5 * dt * y2[18:21]))
        k3 = deriv(y3, R3, mode, f[i], M[i], wF[i], wM[i], p, J[i], Jinv[i], model)
        y4 = y0 + dt * k3
        R4 = mm3(R0, exp3(dt * y3[18:21]))
        k4 = deriv(y4, R4, mode, f[i], M[i], wF[i], wM[i], p, J[i], Jinv[i], model)
        y = y0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        om_avg = (y0[18:21] + 2.0 * y2[18:21] + 2.0 * y3[18:21] + y4[18:21]) / 6.0
        Rn = polar_step(mm3(R0, exp3(dt * om_avg)))
        sync(y, mode, p, model)
        if model == IDEAL:
            mode = guard(y, Rn, mode, f[i], p, True)
        elif p[P_PAYLOAD] != 0.0:
            Tv = compliant_force(y, p)
            mode = TAUT if dot3(Tv, Tv) > 0.0 else SLACK
        else:
            mode = NO_PAYLOAD
        Y[i] = y
        Rs[i] = Rn
        modes[i] = mode


@njit(cache=True)
def deriv_batch(Y, Rs, modes, f, M, wF, wM, P, J, Jinv, model):
    n = Y.shape[0]
    out = np.empty_like(Y)
    for i in range(n):
        out[i] = deriv(Y[i], Rs[i], modes[i], f[i], M[i], wF[i], wM[i], P[i], J[i], Jinv[i], model)
    return out


@njit(cache=True)
def guard_batch(Y, Rs, modes, f, P, check_slack):
    n = Y.shape[0]
    for i in range(n):
        modes[i] = guard(Y[i], Rs[i], modes[i], f[i], P[i], check_slack)


@njit(cache=True)
def sync_batch(Y, modes, P, model):
    for i in range(Y.shape[0]):
        sync(Y[i], modes[i], P[i], model)
