"""Compiled fixed-step kernels for long-horizon integrations.

These loops are the only performance-critical part of the package: drift
scans run up to 1e7 steps per cell. Kernels cover action-independent
Fourier modes (the splitting methods require that anyway) with power-law or
quadratic integrable parts; everything else goes through the general NumPy
steppers in :mod:`nekhlab.integrators`.

State layout is (theta[n], action[n], x, y) for the slow-time extension;
the direct midpoint path uses the same tau accumulation so direct and
extended runs see identical arithmetic for the shared coordinates.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# integrable-part kinds understood by the kernels
H_POWER = 0
H_QUADRATIC = 1

# status codes
OK = 0
OVERFLOW = 1
NO_CONVERGENCE = 2

_GUARD = 1.0e12


@njit(cache=True, inline="always")
def _env_value(kind, param, tau):
    if kind == 0:
        return 1.0
    if kind == 1:
        return math.cos(2.0 * math.pi * param * tau)
    if kind == 2:
        return 1.0 / math.cosh(tau / param)
    return math.tanh(param * tau)


@njit(cache=True, inline="always")
def _env_derivative(kind, param, tau):
    if kind == 0:
        return 0.0
    if kind == 1:
        return -2.0 * math.pi * param * math.sin(2.0 * math.pi * param * tau)
    if kind == 2:
        u = tau / param
        return -math.tanh(u) / (math.cosh(u) * param)
    u = param * tau
    return param / (math.cosh(u) * math.cosh(u))


@njit(cache=True)
def _grad_h(out, action, h_kind, h_p, h_matrix):
    n = action.shape[0]
    if h_kind == H_POWER:
        for i in range(n):
            g = action[i]
            acc = h_p * 1.0
            # action**(p-1) via repeated multiply (p is a small integer)
            v = 1.0
            for _ in range(h_p - 1):
                v *= g
            out[i] = acc * v
    else:
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += h_matrix[i, j] * action[j]
            out[i] = 2.0 * s


@njit(cache=True)
def yoshida_extended(
    theta,
    action,
    x0,
    y0,
    dt,
    n_steps,
    kvec,
    amp,
    phase,
    env_kind,
    env_param,
    eps,
    epsc,
    h_kind,
    h_p,
    h_matrix,
    a_coeffs,
    b_coeffs,
    stride,
    threshold,
    stop_at_threshold,
    samp_theta,
    samp_action,
    samp_x,
    samp_y,
    samp_drift,
    samp_step,
    act_min,
    act_max,
    action0,
):
    """Splitting integrator for the slow-time extension; mutates its buffers.

    Returns (status, n_samples, last_step, drift_sup, exit_step, x, y).
    ``exit_step`` is the first step index whose running drift exceeded
    ``threshold`` (-1 if never).
    """
    two_pi = 2.0 * math.pi
    n = theta.shape[0]
    m = amp.shape[0]
    n_stages = b_coeffs.shape[0]

    x = x0
    x_comp = 0.0  # Kahan compensation for x
    y = y0
    y_comp = 0.0
    grad = np.empty(n)

    for i in range(n):
        act_min[i] = action[i]
        act_max[i] = action[i]
    drift_sup = 0.0
    exit_step = -1

    n_samples = 0
    # sample at step 0
    for i in range(n):
        samp_theta[0, i] = theta[i]
        samp_action[0, i] = action[i]
    samp_x[0] = x
    samp_y[0] = y
    samp_drift[0] = 0.0
    samp_step[0] = 0
    n_samples = 1

    step = 0
    status = OK
    while step < n_steps:
        for s in range(n_stages):
            # A-substage: free drift of (theta, x) under h + eps**c * y
            ah = a_coeffs[s] * dt
            _grad_h(grad, action, h_kind, h_p, h_matrix)
            for i in range(n):
                theta[i] += ah * grad[i]
                theta[i] -= math.floor(theta[i])
            inc = ah * epsc
            t_ = x + (inc - x_comp)
            x_comp = (t_ - x) - (inc - x_comp)
            x = t_
            # B-substage: kick of (action, y) by eps * f
            bh = b_coeffs[s] * dt
            for j in range(m):
                ev = _env_value(env_kind[j], env_param[j], x)
                ed = _env_derivative(env_kind[j], env_param[j], x)
                ps = phase[j]
                for i in range(n):
                    ps += kvec[j, i] * theta[i]
                arg = two_pi * ps
                sin_a = math.sin(arg)
                cos_a = math.cos(arg)
                coef = bh * eps * amp[j]
                for i in range(n):
                    action[i] += coef * two_pi * kvec[j, i] * ev * sin_a
                incy = -coef * ed * cos_a
                ty = y + (incy - y_comp)
                y_comp = (ty - y) - (incy - y_comp)
                y = ty
        # trailing A-substage
        ah = a_coeffs[n_stages] * dt
        _grad_h(grad, action, h_kind, h_p, h_matrix)
        for i in range(n):
            theta[i] += ah * grad[i]
            theta[i] -= math.floor(theta[i])
        inc = ah * epsc
        t_ = x + (inc - x_comp)
        x_comp = (t_ - x) - (inc - x_comp)
        x = t_

        step += 1

        big = 0.0
        for i in range(n):
            if action[i] < act_min[i]:
                act_min[i] = action[i]
            if action[i] > act_max[i]:
                act_max[i] = action[i]
            d = abs(action[i] - action0[i])
            if d > drift_sup:
                drift_sup = d
            a = abs(action[i])
            if a > big:
                big = a
        if big > _GUARD or abs(x) > _GUARD or abs(y) > _GUARD:
            status = OVERFLOW
            break
        if exit_step < 0 and drift_sup > threshold:
            exit_step = step
            if stop_at_threshold:
                break
        if step % stride == 0 or step == n_steps:
            for i in range(n):
                samp_theta[n_samples, i] = theta[i]
                samp_action[n_samples, i] = action[i]
            samp_x[n_samples] = x
            samp_y[n_samples] = y
            samp_drift[n_samples] = drift_sup
            samp_step[n_samples] = step
            n_samples += 1

    return status, n_samples, step, drift_sup, exit_step, x, y


@njit(cache=True)
def midpoint_extended(
    theta,
    action,
    x0,
    y0,
    dt,
    n_steps,
    kvec,
    amp,
    phase,
    env_kind,
    env_param,
    eps,
    epsc,
    h_kind,
    h_p,
    h_matrix,
    newton_tol,
    max_iters,
    track_xy,
    stride,
    threshold,
    stop_at_threshold,
    samp_theta,
    samp_action,
    samp_x,
    samp_y,
    samp_drift,
    samp_step,
    act_min,
    act_max,
    action0,
):
    """Implicit midpoint for action-independent modes; mutates its buffers.

    With ``track_xy`` false this is the direct non-autonomous stepper: the
    slow argument is accumulated exactly like x, so direct and extended
    integrations produce identical (theta, action) iterates. Returns the
    same tuple as :func:`yoshida_extended`.
    """
    two_pi = 2.0 * math.pi
    n = theta.shape[0]
    m = amp.shape[0]

    x = x0
    x_comp = 0.0
    y = y0

    u_th = np.empty(n)
    u_ac = np.empty(n)
    new_th = np.empty(n)
    new_ac = np.empty(n)
    grad = np.empty(n)
    fth = np.empty(n)

    for i in range(n):
        act_min[i] = action[i]
        act_max[i] = action[i]
    drift_sup = 0.0
    exit_step = -1

    for i in range(n):
        samp_theta[0, i] = theta[i]
        samp_action[0, i] = action[i]
    samp_x[0] = x
    samp_y[0] = y
    samp_drift[0] = 0.0
    samp_step[0] = 0
    n_samples = 1

    status = OK
    step = 0
    half = 0.5 * dt
    while step < n_steps:
        x_mid = x + half * epsc
        for i in range(n):
            u_th[i] = theta[i]
            u_ac[i] = action[i]
        converged = False
        for _ in range(max_iters):
            # F evaluated at the midpoint iterate
            _grad_h(grad, u_ac, h_kind, h_p, h_matrix)
            for i in range(n):
                fth[i] = 0.0
            for j in range(m):
                ev = _env_value(env_kind[j], env_param[j], x_mid)
                ps = phase[j]
                for i in range(n):
                    ps += kvec[j, i] * u_th[i]
                sin_a = math.sin(two_pi * ps)
                for i in range(n):
                    fth[i] += -two_pi * kvec[j, i] * amp[j] * ev * sin_a
            resid = 0.0
            for i in range(n):
                new_th[i] = theta[i] + half * grad[i]
                new_ac[i] = action[i] + half * (-eps * fth[i])
                r = abs(new_th[i] - u_th[i])
                if r > resid:
                    resid = r
                r = abs(new_ac[i] - u_ac[i])
                if r > resid:
                    resid = r
                u_th[i] = new_th[i]
                u_ac[i] = new_ac[i]
            if resid < newton_tol:
                converged = True
                break
        if not converged:
            status = NO_CONVERGENCE
            break
        # z_{k+1} = 2*u - z_k; then reduce angles
        for i in range(n):
            theta[i] = 2.0 * u_th[i] - theta[i]
            theta[i] -= math.floor(theta[i])
            action[i] = 2.0 * u_ac[i] - action[i]
        if track_xy:
            dy = 0.0
            for j in range(m):
                ed = _env_derivative(env_kind[j], env_param[j], x_mid)
                ps = phase[j]
                for i in range(n):
                    ps += kvec[j, i] * u_th[i]
                dy += -eps * amp[j] * ed * math.cos(two_pi * ps)
            y += dt * dy
        inc = dt * epsc
        t_ = x + (inc - x_comp)
        x_comp = (t_ - x) - (inc - x_comp)
        x = t_

        step += 1

        big = 0.0
        for i in range(n):
            if action[i] < act_min[i]:
                act_min[i] = action[i]
            if action[i] > act_max[i]:
                act_max[i] = action[i]
            d = abs(action[i] - action0[i])
            if d > drift_sup:
                drift_sup = d
            a = abs(action[i])
            if a > big:
                big = a
        if big > _GUARD:
            status = OVERFLOW
            break
        if exit_step < 0 and drift_sup > threshold:
            exit_step = step
            if stop_at_threshold:
                break
        if step % stride == 0 or step == n_steps:
            for i in range(n):
                samp_theta[n_samples, i] = theta[i]
                samp_action[n_samples, i] = action[i]
            samp_x[n_samples] = x
            samp_y[n_samples] = y
            samp_drift[n_samples] = drift_sup
            samp_step[n_samples] = step
            n_samples += 1

    return status, n_samples, step, drift_sup, exit_step, x, y
