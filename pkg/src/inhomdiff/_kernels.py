"""Compiled inner loop of the explicit finite-volume march."""
import numpy as np
from numba import njit

OK = 0
STIFF = 1
UNDERSHOOT = 2
EXTEND = 3
MAX_STEPS = 4

UNDERSHOOT_TOL = 1e-12


@njit(cache=True)
def edge_fluxes(u, area, dcen, q, kappa, p, eps_grad, F, c, s):
    """Fill interface fluxes F (outward, +r) and the secant coefficients c*s.

    F_e = -kappa A_e |g_e|^{p-2} g_e with g_e = (w_e - w_{e-1}) / d_e and
    w = u^q.  Boundary edges 0 and K carry zero flux.
    """
    K = u.size
    F[0] = 0.0
    F[K] = 0.0
    c[0] = 0.0
    c[K] = 0.0
    s[0] = 0.0
    s[K] = 0.0
    wl = u[0] * u[0] if q == 2.0 else u[0] ** q
    for e in range(1, K):
        ul = u[e - 1]
        ur = u[e]
        wr = ur * ur if q == 2.0 else ur ** q
        dw = wr - wl
        coef = kappa * area[e] / dcen[e]
        if p != 2.0:
            g = dw / dcen[e]
            coef *= (g * g + eps_grad * eps_grad) ** (0.5 * (p - 2.0))
        du = ur - ul
        umax = ur if ur > ul else ul
        if du != 0.0 and abs(du) > 1e-13 * umax:
            sec = dw / du
        else:
            sec = q * umax ** (q - 1.0)
        c[e] = coef
        s[e] = sec
        F[e] = -coef * dw
        wl = wr


@njit(cache=True)
def march(u, wrho, area, dcen, q, kappa, p, cfl, eps_grad, t, t_stop,
          max_steps, eps_supp, ext_index, check_every):
    """Advance u in place from t towards t_stop.

    Returns (t, steps, status, worst_undershoot) where worst_undershoot is the
    largest pre-clamp negative value relative to the current sup.
    """
    K = u.size
    F = np.empty(K + 1)
    c = np.empty(K + 1)
    s = np.empty(K + 1)
    steps = 0
    status = OK
    worst = 0.0
    while t < t_stop:
        if steps >= max_steps:
            status = MAX_STEPS
            break
        edge_fluxes(u, area, dcen, q, kappa, p, eps_grad, F, c, s)
        sup = 0.0
        inv_dt = 0.0
        for i in range(K):
            if u[i] > sup:
                sup = u[i]
            a = (c[i] * s[i] + c[i + 1] * s[i + 1]) / wrho[i]
            if a > inv_dt:
                inv_dt = a
        if inv_dt == 0.0:
            t = t_stop
            break
        dt = cfl / inv_dt
        last = False
        if t + dt >= t_stop:
            dt = t_stop - t
            last = True
        if dt < 1e-15 * t:
            status = STIFF
            break
        for i in range(K):
            v = u[i] + dt * (F[i] - F[i + 1]) / wrho[i]
            if v < 0.0:
                rel = -v / sup
                if rel > worst:
                    worst = rel
                if rel > UNDERSHOOT_TOL:
                    status = UNDERSHOOT
                v = 0.0
            u[i] = v
        t = t_stop if last else t + dt
        steps += 1
        if status != OK:
            break
        if ext_index >= 0 and steps % check_every == 0:
            thr = eps_supp * sup
            idx = -1
            for i in range(K - 1, -1, -1):
                if u[i] > thr:
                    idx = i
                    break
            if idx >= ext_index:
                status = EXTEND
                break
    return t, steps, status, worst


@njit(cache=True)
def support_index(u, eps_rel):
    sup = 0.0
    for i in range(u.size):
        if u[i] > sup:
            sup = u[i]
    if sup == 0.0:
        return -1
    thr = eps_rel * sup
    for i in range(u.size - 1, -1, -1):
        if u[i] > thr:
            return i
    return -1


def kappa_and_power(p, m):
    """Exponent q of w = u^q and the flux prefactor kappa = q^{-(p-1)}."""
    q = (p + m - 2.0) / (p - 1.0)
    return q, q ** (-(p - 1.0))

