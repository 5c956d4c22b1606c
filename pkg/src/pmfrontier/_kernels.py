"""Numba kernels for the explicit scheme.

Models are passed as a flat code: 0 tumor, 1 Fisher-KPP, 2 table, 3 no
reaction (pure porous medium).  Every function here mirrors a numpy
reference in :mod:`pmfrontier.solver`; tests compare the two.
"""
import numba
import numpy as np

TUMOR, FISHER, TABLE, NONE = 0, 1, 2, 3


@numba.njit(cache=True, inline="always")
def pow_m(x, m):
    if m == 2.0:
        return x * x
    return x**m


@numba.njit(cache=True, inline="always")
def pow_m1(x, m):
    if m == 2.0:
        return x
    return x ** (m - 1.0)


@numba.njit(cache=True, inline="always")
def table_index(x, ps):
    # segment j with ps[j] <= x < ps[j+1], clamped to the table
    lo = 0
    hi = ps.size - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ps[mid] <= x:
            lo = mid
        else:
            hi = mid
    return lo


@numba.njit(cache=True, inline="always")
def table_eval(x, ps, gs):
    if x <= ps[0]:
        return gs[0]
    if x >= ps[ps.size - 1]:
        return gs[gs.size - 1]
    j = table_index(x, ps)
    w = (x - ps[j]) / (ps[j + 1] - ps[j])
    return gs[j] + w * (gs[j + 1] - gs[j])


@numba.njit(cache=True, inline="always")
def g_scalar(rho, code, m, rho_m, ps, gs):
    if code == TUMOR:
        return m / (m - 1.0) * (pow_m1(rho_m, m) - pow_m1(rho, m))
    if code == FISHER:
        return 1.0 - rho
    if code == TABLE:
        return table_eval(m / (m - 1.0) * pow_m1(rho, m), ps, gs)
    return 0.0


@numba.njit(cache=True, inline="always")
def rate_scalar(rho, code, m, rho_m, ps, gs):
    # |g(rho)| + |rho g'(rho)|
    if code == NONE:
        return 0.0
    g = g_scalar(rho, code, m, rho_m, ps, gs)
    if code == FISHER:
        return abs(g) + rho
    P = m / (m - 1.0) * pow_m1(rho, m)
    if code == TUMOR:
        return abs(g) + (m - 1.0) * P
    j = table_index(P, ps)
    slope = (gs[j + 1] - gs[j]) / (ps[j + 1] - ps[j])
    return abs(g) + (m - 1.0) * P * abs(slope)


@numba.njit(cache=True)
def stable_dt_flat(rho, h, dim_factor, m, safety, code, rho_m, ps, gs):
    dmax = 0.0
    rmax = 0.0
    positive = False
    for i in range(rho.size):
        x = rho[i]
        if x > 0.0:
            positive = True
            d = m * pow_m1(x, m)
            if d > dmax:
                dmax = d
        r = rate_scalar(x, code, m, rho_m, ps, gs)
        if r > rmax:
            rmax = r
    if not positive:
        return safety * h * h
    dt = h * h / (2.0 * dim_factor * dmax)
    if rmax > 0.0 and 1.0 / rmax < dt:
        dt = 1.0 / rmax
    return safety * dt


@numba.njit(cache=True)
def radial_weights(cells, h, n):
    wl = np.zeros(cells)
    wr = np.zeros(cells)
    for i in range(cells):
        ri = (i + 0.5) * h
        denom = ri ** (n - 1) * h * h
        wl[i] = (i * h) ** (n - 1) / denom
        if i < cells - 1:
            wr[i] = ((i + 1) * h) ** (n - 1) / denom
    return wl, wr


@numba.njit(cache=True)
def radial_step_into(rho, out, u, wl, wr, dt, m, code, rho_m, ps, gs, hi):
    """Forward-Euler update of cells ``0..hi``; returns the most negative value."""
    cells = rho.size
    top = hi + 1 if hi + 1 < cells else cells - 1
    for i in range(top + 1):
        u[i] = pow_m(rho[i], m)
    worst = 0.0
    for i in range(hi + 1):
        lap = 0.0
        if i < cells - 1:
            lap += wr[i] * (u[i + 1] - u[i])
        if i > 0:
            lap -= wl[i] * (u[i] - u[i - 1])
        v = rho[i] + dt * (lap + rho[i] * g_scalar(rho[i], code, m, rho_m, ps, gs))
        if not (v >= -1e-13):
            if v != v:
                return -np.inf
            if v < worst:
                worst = v
        out[i] = v if v > 0.0 else 0.0
    return worst


@numba.njit(cache=True)
def advance_radial(rho, t, t_stop, h, n, m, safety, code, rho_m, ps, gs, guard):
    """Step ``rho`` in place from ``t`` to exactly ``t_stop``.

    Returns ``(t, steps, status)`` with status 0 ok, 1 instability,
    2 guard band reached.
    """
    cells = rho.size
    wl, wr = radial_weights(cells, h, n)
    out = rho.copy()
    u = np.zeros(cells)
    steps = 0
    while t < t_stop:
        last = -1
        for i in range(cells - 1, -1, -1):
            if rho[i] > 0.0:
                last = i
                break
        if last < 0:
            # vacuum stays vacuum; only the clock moves
            return t_stop, steps, 0
        if guard > 0 and last >= cells - guard:
            return t, steps, 2
        dt = stable_dt_flat(rho, h, n, m, safety, code, rho_m, ps, gs)
        if t + dt >= t_stop:
            dt = t_stop - t
        hi = last + 1 if last + 1 < cells else cells - 1
        worst = radial_step_into(rho, out, u, wl, wr, dt, m, code, rho_m, ps, gs, hi)
        if worst < 0.0:
            return t, steps, 1
        for i in range(hi + 1):
            rho[i] = out[i]
        if t + dt >= t_stop:
            t = t_stop
        else:
            t += dt
        steps += 1
    return t, steps, 0
