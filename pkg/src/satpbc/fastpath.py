"""Compiled fixed-step integrators for the built-in closed loops.

The published coupling-device gains demand integration steps in the
microsecond range over tens of seconds (millions of steps), which is far too
slow for the generic callable-based integrator. These kernels inline the
plant and controller equations for each built-in family and run the identical
classical fourth-order scheme; the scenario runner falls back to the generic
path whenever a kernel does not apply. Recorded rows match the generic
integrator's stride convention so the two paths are directly comparable.
"""

from __future__ import annotations

import math

import numpy as np

from .controllers import (
    DynamicExtensionController,
    FilteredController,
    FullyActuatedController,
    NaturalDampingController,
)
from .errors import DivergenceError

try:
    from numba import njit

    AVAILABLE = True
except Exception:  # pragma: no cover - exercised only without numba
    AVAILABLE = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return deco


@njit(cache=True)
def _coupling_kernel(z0, n_steps, dt, stride,
                     r1, r2, cap, m1, m2, a0, a1, a2, a3, spring,
                     ac, bc, al, bl, kc, rc, kl, rl, ups,
                     gamma_star, eta_star, kappa, bias):
    d = 7
    z = z0.copy()
    n_rec = n_steps // stride + 1 + (1 if n_steps % stride else 0)
    out = np.empty((n_rec, d))
    out[0] = z
    m = 1
    k1 = np.empty(d); k2 = np.empty(d); k3 = np.empty(d); k4 = np.empty(d)
    tmp = np.empty(d)
    c1 = r2 / (r1 + r2)
    c2 = 1.0 / (a0 * (r1 + r2))
    for step in range(n_steps):
        for stage in range(4):
            if stage == 0:
                src = z
            else:
                src = tmp
            gam = c1 * src[0] + c2 * src[1]
            zc = gam - gamma_star + src[5]
            zl = ups * (src[2] - eta_star) + kl * src[6]
            sc = ac * math.tanh(bc * zc)
            sl = al * math.tanh(bl * zl)
            u = -kappa - sc - sl + bias
            rho = src[0] / cap
            if stage == 0:
                dst = k1
            elif stage == 1:
                dst = k2
            elif stage == 2:
                dst = k3
            else:
                dst = k4
            dst[0] = -(1.0 / r1 + 1.0 / r2) * rho + src[3] / (a0 * m1 * r2) + u / r1
            dst[1] = src[3] / m1
            dst[2] = src[4] / m2
            dst[3] = -spring * (src[1] - src[2]) + (rho - src[3] / (a0 * m1)) / (a0 * r2)
            dst[4] = spring * (src[1] - src[2]) - a1 / m2 * src[4] - a2 * math.tanh(a3 * src[4])
            dst[5] = -rc * (sc + kc * src[5])
            dst[6] = -rl * sl
            if stage == 0:
                for i in range(d):
                    tmp[i] = z[i] + 0.5 * dt * k1[i]
            elif stage == 1:
                for i in range(d):
                    tmp[i] = z[i] + 0.5 * dt * k2[i]
            elif stage == 2:
                for i in range(d):
                    tmp[i] = z[i] + dt * k3[i]
        finite = True
        for i in range(d):
            z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(z[i]):
                finite = False
        if not finite:
            return out[:m], step + 1, False
        if (step + 1) % stride == 0 or step == n_steps - 1:
            out[m] = z
            m += 1
    return out[:m], n_steps, True


@njit(cache=True)
def _rlc_kernel(z0, n_steps, dt, stride,
                r, l1, l2, cap, a, b,
                ac, bc, kc, rc, gamma_star, kappa, bias):
    d = 4
    z = z0.copy()
    n_rec = n_steps // stride + 1 + (1 if n_steps % stride else 0)
    out = np.empty((n_rec, d))
    out[0] = z
    m = 1
    k1 = np.empty(d); k2 = np.empty(d); k3 = np.empty(d); k4 = np.empty(d)
    tmp = np.empty(d)
    for step in range(n_steps):
        for stage in range(4):
            src = z if stage == 0 else tmp
            i_load = a * (math.exp(src[2] / b) - 1.0)
            zc = src[2] / l1 - gamma_star + src[3]
            sc = ac * math.tanh(bc * zc)
            u = -kappa - sc + bias
            if stage == 0:
                dst = k1
            elif stage == 1:
                dst = k2
            elif stage == 2:
                dst = k3
            else:
                dst = k4
            dst[0] = (-src[2] + u) / l1
            dst[1] = (src[2] - r * src[1]) / l2
            dst[2] = (src[0] - src[1] - i_load) / cap
            dst[3] = -rc * (sc + kc * src[3])
            if stage == 0:
                for i in range(d):
                    tmp[i] = z[i] + 0.5 * dt * k1[i]
            elif stage == 1:
                for i in range(d):
                    tmp[i] = z[i] + 0.5 * dt * k2[i]
            elif stage == 2:
                for i in range(d):
                    tmp[i] = z[i] + dt * k3[i]
        finite = True
        for i in range(d):
            z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(z[i]):
                finite = False
        if not finite:
            return out[:m], step + 1, False
        if (step + 1) % stride == 0 or step == n_steps - 1:
            out[m] = z
            m += 1
    return out[:m], n_steps, True


@njit(cache=True)
def _pera_kernel(z0, n_steps, dt, stride,
                 g_r, d_c2, m3, i1, i2, i3,
                 ac, bc, kc, rc, q_star,
                 has_filter, constant_gravity, aps, bps, rps, grav_star, bias):
    d = z0.shape[0]
    z = z0.copy()
    n_rec = n_steps // stride + 1 + (1 if n_steps % stride else 0)
    out = np.empty((n_rec, d))
    out[0] = z
    m = 1
    k1 = np.empty(d); k2 = np.empty(d); k3 = np.empty(d); k4 = np.empty(d)
    tmp = np.empty(d)
    for step in range(n_steps):
        for stage in range(4):
            src = z if stage == 0 else tmp
            s2 = math.sin(src[1])
            c2 = math.cos(src[1])
            m11 = i1 + i2 + i3 + m3 * d_c2 * d_c2 * s2 * s2
            m22 = i2 + i3 + m3 * d_c2 * d_c2
            m13 = i3 * c2
            det = m11 * i3 - m13 * m13
            v0 = (i3 * src[3] - m13 * src[5]) / det
            v1 = src[4] / m22
            v2 = (m11 * src[5] - m13 * src[3]) / det
            dm11 = 2.0 * m3 * d_c2 * d_c2 * s2 * c2
            dm13 = -i3 * s2
            kin_g1 = -0.5 * (v0 * v0 * dm11 + 2.0 * v0 * v2 * dm13)
            grav1 = m3 * g_r * d_c2 * s2
            if stage == 0:
                dst = k1
            elif stage == 1:
                dst = k2
            elif stage == 2:
                dst = k3
            else:
                dst = k4
            dst[0] = v0
            dst[1] = v1
            dst[2] = v2
            for i in range(3):
                zc = src[i] - q_star[i] + src[6 + i]
                sc = ac[i] * math.tanh(bc[i] * zc)
                if constant_gravity:
                    u = grav_star[i] - sc
                else:
                    u = (grav1 if i == 1 else 0.0) - sc
                if has_filter:
                    u = u - aps[i] * math.tanh(bps[i] * src[9 + i])
                drift = -(grav1 + kin_g1) if i == 1 else 0.0
                dst[3 + i] = drift + u + bias[i]
                dst[6 + i] = -rc[i] * (sc + kc[i] * src[6 + i])
                if has_filter:
                    psi = src[9 + i]
                    dst[9 + i] = -rps[i] * psi + aps[i] * bps[i] / math.cosh(bps[i] * psi) * (src[i] - q_star[i])
            if stage == 0:
                for i in range(d):
                    tmp[i] = z[i] + 0.5 * dt * k1[i]
            elif stage == 1:
                for i in range(d):
                    tmp[i] = z[i] + 0.5 * dt * k2[i]
            elif stage == 2:
                for i in range(d):
                    tmp[i] = z[i] + dt * k3[i]
        finite = True
        for i in range(d):
            z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(z[i]):
                finite = False
        if not finite:
            return out[:m], step + 1, False
        if (step + 1) % stride == 0 or step == n_steps - 1:
            out[m] = z
            m += 1
    return out[:m], n_steps, True


def _recorded_times(t0, dt, n_steps, stride, n_rows, tf):
    idx = [0] + [j for j in range(stride, n_steps + 1, stride)]
    if idx[-1] != n_steps:
        idx.append(n_steps)
    times = t0 + dt * np.asarray(idx[:n_rows], dtype=float)
    times[-1] = tf
    return times


def run(scn, loop, z0):
    """Dispatch a scenario to its compiled kernel.

    Returns (times, states) or None when no kernel applies (non-integral step
    count, unexpected family, or a mechanical drift that is not the built-in
    arm). Raises :class:`DivergenceError` exactly like the generic path.
    """
    t0, tf = float(scn.t_span[0]), float(scn.t_span[1])
    dt = float(scn.dt)
    span = tf - t0
    n_steps_f = span / dt
    n_steps = int(round(n_steps_f))
    if abs(n_steps_f - n_steps) > 1e-9 or n_steps < 1:
        return None
    stride = int(scn.record_stride)
    kind = scn.model.get("kind")
    ctrl = loop.controller
    bias = loop.bias

    if kind == "coupling_device" and isinstance(ctrl, NaturalDampingController) and ctrl.m == 1:
        p = loop.plant.meta["params"]
        states, last, ok = _coupling_kernel(
            z0, n_steps, dt, stride,
            p.r1, p.r2, p.cap, p.m1, p.m2, p.a0, p.a1, p.a2, p.a3, p.k,
            float(ctrl.shape_c.alpha[0]), float(ctrl.shape_c.beta[0]),
            float(ctrl.shape_l.alpha[0]), float(ctrl.shape_l.beta[0]),
            float(ctrl.k_c[0, 0]), float(ctrl.r_c[0, 0]),
            float(ctrl.k_l[0, 0]), float(ctrl.r_l[0, 0]), float(ctrl.upsilon[0, 0]),
            float(ctrl.gamma_star[0]), float(ctrl.eta_star[0]), float(ctrl.kappa[0]),
            float(bias[0]))
    elif kind == "rlc" and isinstance(ctrl, DynamicExtensionController) and ctrl.m == 1:
        p = loop.plant.meta["params"]
        states, last, ok = _rlc_kernel(
            z0, n_steps, dt, stride,
            p.r, p.l1, p.l2, p.cap, p.a, p.b,
            float(ctrl.shape_c.alpha[0]), float(ctrl.shape_c.beta[0]),
            float(ctrl.k_c[0, 0]), float(ctrl.r_c[0, 0]),
            float(ctrl.gamma_star[0]), float(ctrl.kappa[0]), float(bias[0]))
    elif kind == "pera" and isinstance(ctrl, (FullyActuatedController, FilteredController)):
        p = loop.plant.meta["params"]
        if isinstance(ctrl, FilteredController):
            base = ctrl.base
            has_filter = True
            constant_gravity = True
            aps = ctrl.filt.shape_psi.alpha
            bps = ctrl.filt.shape_psi.beta
            rps = np.diag(ctrl.filt.r_psi).copy()
            grav_star = ctrl.grad_potential_star
            if ctrl.filt.gain != "sech":
                return None
        else:
            base = ctrl
            has_filter = False
            constant_gravity = False
            aps = np.zeros(3)
            bps = np.ones(3)
            rps = np.zeros(3)
            grav_star = np.zeros(3)
        if (np.any(base.k_c != np.diag(np.diag(base.k_c)))
                or np.any(base.r_c != np.diag(np.diag(base.r_c)))):
            return None
        states, last, ok = _pera_kernel(
            z0, n_steps, dt, stride,
            p.g_r, p.d_c2, p.m3, p.i1, p.i2, p.i3,
            base.shape_c.alpha, base.shape_c.beta,
            np.diag(base.k_c).copy(), np.diag(base.r_c).copy(), base.q_star,
            has_filter, constant_gravity, aps, bps, rps, grav_star, bias)
    else:
        return None

    if not ok:
        t_blow = t0 + last * dt
        raise DivergenceError(f"state became non-finite at t={t_blow!r}", time=t_blow)
    times = _recorded_times(t0, dt, n_steps, stride, states.shape[0], tf)
    return times, states
