"""Compiled fixed-step RK4 kernels.

Two state layouts are supported: a dense complex amplitude vector evolving
under H = -b h0 + hc, and an (M, 2) array of BdG pair amplitudes (U_k, V_k).
The cavity amplitude ``a`` obeys da/dt = i D a - kappa/2 a + i (eps - g X)
and sets b = b_x - 2 g Re(a).

The ``*_coupled`` kernels advance at most ``n_steps`` steps. A step whose end
point has b < ``stop_level`` is not committed; the kernel returns the state at
the start of that step with flag 1. Flag 2 signals a non-finite state.
``xint`` and ``bint`` are RK4 quadratures of X and b over the committed steps.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _dense_deriv(psi, b, h0, hc):
    h0psi = h0 @ psi
    hpsi = -b * h0psi + hc @ psi
    x = np.real(np.vdot(psi, h0psi))
    return -1j * hpsi, x


@njit(cache=True)
def dense_rates(psi, a, b_x, g, h0, hc, eps, dc, kappa):
    b = b_x - 2.0 * g * a.real
    dpsi, x = _dense_deriv(psi, b, h0, hc)
    da = 1j * dc * a - 0.5 * kappa * a + 1j * (eps - g * x)
    return dpsi, da, x


@njit(cache=True)
def dense_coupled(psi, a, n_steps, dt, b_x, g, h0, hc, eps, dc, kappa, stop_level):
    xint = 0.0
    bint = 0.0
    for i in range(n_steps):
        k1, l1, x1 = dense_rates(psi, a, b_x, g, h0, hc, eps, dc, kappa)
        k2, l2, x2 = dense_rates(psi + 0.5 * dt * k1, a + 0.5 * dt * l1, b_x, g, h0, hc, eps, dc, kappa)
        k3, l3, x3 = dense_rates(psi + 0.5 * dt * k2, a + 0.5 * dt * l2, b_x, g, h0, hc, eps, dc, kappa)
        k4, l4, x4 = dense_rates(psi + dt * k3, a + dt * l3, b_x, g, h0, hc, eps, dc, kappa)
        new_psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        new_a = a + (dt / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
        if not (np.isfinite(new_a.real) and np.isfinite(new_a.imag) and np.all(np.isfinite(new_psi))):
            return psi, a, i, xint, bint, 2
        if b_x - 2.0 * g * new_a.real < stop_level:
            return psi, a, i, xint, bint, 1
        xint += (dt / 6.0) * (x1 + 2.0 * x2 + 2.0 * x3 + x4)
        ar = a.real + 2.0 * (a + 0.5 * dt * l1).real + 2.0 * (a + 0.5 * dt * l2).real + (a + dt * l3).real
        bint += dt * b_x - (dt / 3.0) * g * ar
        psi = new_psi
        a = new_a
    return psi, a, n_steps, xint, bint, 0


@njit(cache=True)
def dense_driven(psi, t0, n_steps, dt, h0, hc, tt, bb):
    t = t0
    for _ in range(n_steps):
        b1 = np.interp(t, tt, bb)
        bm = np.interp(t + 0.5 * dt, tt, bb)
        b4 = np.interp(t + dt, tt, bb)
        k1, _x = _dense_deriv(psi, b1, h0, hc)
        k2, _x = _dense_deriv(psi + 0.5 * dt * k1, bm, h0, hc)
        k3, _x = _dense_deriv(psi + 0.5 * dt * k2, bm, h0, hc)
        k4, _x = _dense_deriv(psi + dt * k3, b4, h0, hc)
        psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
    return psi


@njit(cache=True)
def _bdg_deriv(s, b, j0, cosk, sink):
    n = s.shape[0]
    out = np.empty_like(s)
    vv = 0.0
    for m in range(n):
        d = 2.0 * (b - j0 * cosk[m])
        o = 2.0 * j0 * sink[m]
        u = s[m, 0]
        v = s[m, 1]
        out[m, 0] = 1j * (d * u + o * v)
        out[m, 1] = 1j * (o * u - d * v)
        vv += v.real * v.real + v.imag * v.imag
    return out, vv


@njit(cache=True)
def bdg_rates(s, a, n_sites, b_x, g, j0, cosk, sink, eps, dc, kappa):
    b = b_x - 2.0 * g * a.real
    ds, vv = _bdg_deriv(s, b, j0, cosk, sink)
    x = n_sites - 4.0 * vv
    da = 1j * dc * a - 0.5 * kappa * a + 1j * (eps - g * x)
    return ds, da, x


@njit(cache=True)
def bdg_coupled(s, a, n_steps, dt, n_sites, b_x, g, j0, cosk, sink, eps, dc, kappa, stop_level):
    xint = 0.0
    bint = 0.0
    for i in range(n_steps):
        k1, l1, x1 = bdg_rates(s, a, n_sites, b_x, g, j0, cosk, sink, eps, dc, kappa)
        k2, l2, x2 = bdg_rates(s + 0.5 * dt * k1, a + 0.5 * dt * l1, n_sites, b_x, g, j0, cosk, sink, eps, dc, kappa)
        k3, l3, x3 = bdg_rates(s + 0.5 * dt * k2, a + 0.5 * dt * l2, n_sites, b_x, g, j0, cosk, sink, eps, dc, kappa)
        k4, l4, x4 = bdg_rates(s + dt * k3, a + dt * l3, n_sites, b_x, g, j0, cosk, sink, eps, dc, kappa)
        new_s = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        new_a = a + (dt / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
        if not (np.isfinite(new_a.real) and np.isfinite(new_a.imag) and np.all(np.isfinite(new_s))):
            return s, a, i, xint, bint, 2
        if b_x - 2.0 * g * new_a.real < stop_level:
            return s, a, i, xint, bint, 1
        xint += (dt / 6.0) * (x1 + 2.0 * x2 + 2.0 * x3 + x4)
        ar = a.real + 2.0 * (a + 0.5 * dt * l1).real + 2.0 * (a + 0.5 * dt * l2).real + (a + dt * l3).real
        bint += dt * b_x - (dt / 3.0) * g * ar
        s = new_s
        a = new_a
    return s, a, n_steps, xint, bint, 0


@njit(cache=True)
def bdg_driven(s, t0, n_steps, dt, j0, cosk, sink, tt, bb):
    t = t0
    for _ in range(n_steps):
        b1 = np.interp(t, tt, bb)
        bm = np.interp(t + 0.5 * dt, tt, bb)
        b4 = np.interp(t + dt, tt, bb)
        k1, _v = _bdg_deriv(s, b1, j0, cosk, sink)
        k2, _v = _bdg_deriv(s + 0.5 * dt * k1, bm, j0, cosk, sink)
        k3, _v = _bdg_deriv(s + 0.5 * dt * k2, bm, j0, cosk, sink)
        k4, _v = _bdg_deriv(s + dt * k3, b4, j0, cosk, sink)
        s = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
    return s
