"""Compiled inner loops.

Everything here is scalar/loop code decorated with :func:`cgchain.backend.njit`.
Noise is always passed in as pre-generated arrays so that the numba and
numpy backends produce bit-identical trajectories.
"""

import math

import numpy as np

from .backend import njit

# pair potential codes
PAIR_QUADRATIC = 0
PAIR_QUARTIC_W1 = 1
PAIR_QUARTIC_W2 = 2
PAIR_POLYNOMIAL = 3


@njit
def pair_eval(code, params, y):
    """Value and derivative of a pair potential at scalar y."""
    if code == PAIR_QUADRATIC:
        a = params[0]
        return 0.5 * (y - a) ** 2, y - a
    elif code == PAIR_QUARTIC_W1:
        t = y - 1.0
        return 0.5 * t**4 + 0.5 * y * y, 2.0 * t**3 + y
    elif code == PAIR_QUARTIC_W2:
        t = y - 2.1
        return 0.25 * t**4, t**3
    else:
        # polynomial, ascending coefficients, Horner
        v = 0.0
        for i in range(params.shape[0] - 1, -1, -1):
            v = v * y + params[i]
        d = 0.0
        for i in range(params.shape[0] - 1, 0, -1):
            d = d * y + i * params[i]
        return v, d


# ---------------------------------------------------------------------------
# molecular systems: energy/gradient in reduced coordinates
# ---------------------------------------------------------------------------


@njit
def toy2d_energy_grad(q, g, p):
    """V(x,y) = (x^2-1)^2 + (k/2)(y-x)^2."""
    k = p[0]
    x, y = q[0], q[1]
    dxy = y - x
    g[0] = 4.0 * x * (x * x - 1.0) - k * dxy
    g[1] = k * dxy
    return (x * x - 1.0) ** 2 + 0.5 * k * dxy * dxy


@njit
def three_atom_energy_grad(q, g, p):
    """Three 2D atoms, reduced coords (qA_x, qC_x, qC_y); qB=0, qA_y=0.

    p = (eps, k_theta, l_eq, theta_saddle, delta_theta)
    """
    eps, kth, leq, ths, dth = p[0], p[1], p[2], p[3], p[4]
    ax = q[0]
    cx, cy = q[1], q[2]
    rab = abs(ax)
    rbc = math.sqrt(cx * cx + cy * cy)
    # angle at B between qA and qC
    dot = ax * cx
    c = dot / (rab * rbc)
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    theta = math.acos(c)
    s = math.sqrt(1.0 - c * c)
    if s < 1e-12:
        s = 1e-12
    # dtheta/d(qA) and dtheta/d(qC), x-components of qA only
    inv = 1.0 / (rab * rbc)
    dth_dax = (c * ax / (rab * rab) - cx * inv) / s
    dth_dcx = (c * cx / (rbc * rbc) - ax * inv) / s
    dth_dcy = (c * cy / (rbc * rbc)) / s
    t = (theta - ths) ** 2 - dth * dth
    w3 = 0.5 * kth * t * t
    dw3 = 2.0 * kth * t * (theta - ths)
    fab = (rab - leq) / eps
    fbc = (rbc - leq) / eps
    g[0] = fab * (ax / rab) + dw3 * dth_dax
    g[1] = fbc * (cx / rbc) + dw3 * dth_dcx
    g[2] = fbc * (cy / rbc) + dw3 * dth_dcy
    return 0.5 * fab * (rab - leq) + 0.5 * fbc * (rbc - leq) + w3


@njit
def three_atom_xi_angle(q, gxi, p):
    """xi_1 = theta_ABC; laplacian unavailable (returned as nan)."""
    ax = q[0]
    cx, cy = q[1], q[2]
    rab = abs(ax)
    rbc = math.sqrt(cx * cx + cy * cy)
    c = ax * cx / (rab * rbc)
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    theta = math.acos(c)
    s = math.sqrt(1.0 - c * c)
    if s < 1e-12:
        s = 1e-12
    inv = 1.0 / (rab * rbc)
    gxi[0] = (c * ax / (rab * rab) - cx * inv) / s
    gxi[1] = (c * cx / (rbc * rbc) - ax * inv) / s
    gxi[2] = (c * cy / (rbc * rbc)) / s
    return theta, math.nan


@njit
def three_atom_xi_dist2(q, gxi, p):
    """xi_2 = |qA - qC|^2; laplacian is exactly 6."""
    ax = q[0]
    cx, cy = q[1], q[2]
    d = ax - cx
    gxi[0] = 2.0 * d
    gxi[1] = -2.0 * d
    gxi[2] = 2.0 * cy
    return d * d + cy * cy, 6.0


@njit
def toy2d_xi_x(q, gxi, p):
    gxi[0] = 1.0
    gxi[1] = 0.0
    return q[0], 0.0


@njit
def _dihedral(p1, p2, p3, p4, g1, g2, g3, g4):
    """Dihedral angle and its gradient w.r.t. the four 3D positions."""
    b1 = np.empty(3)
    b2 = np.empty(3)
    b3 = np.empty(3)
    for i in range(3):
        b1[i] = p2[i] - p1[i]
        b2[i] = p3[i] - p2[i]
        b3[i] = p4[i] - p3[i]
    n1 = np.empty(3)
    n2 = np.empty(3)
    n1[0] = b1[1] * b2[2] - b1[2] * b2[1]
    n1[1] = b1[2] * b2[0] - b1[0] * b2[2]
    n1[2] = b1[0] * b2[1] - b1[1] * b2[0]
    n2[0] = b2[1] * b3[2] - b2[2] * b3[1]
    n2[1] = b2[2] * b3[0] - b2[0] * b3[2]
    n2[2] = b2[0] * b3[1] - b2[1] * b3[0]
    nb2 = math.sqrt(b2[0] ** 2 + b2[1] ** 2 + b2[2] ** 2)
    m0 = n1[1] * b2[2] - n1[2] * b2[1]
    m1 = n1[2] * b2[0] - n1[0] * b2[2]
    m2 = n1[0] * b2[1] - n1[1] * b2[0]
    ynum = (m0 * n2[0] + m1 * n2[1] + m2 * n2[2]) / nb2
    xnum = n1[0] * n2[0] + n1[1] * n2[1] + n1[2] * n2[2]
    phi = math.atan2(ynum, xnum)
    n1sq = n1[0] ** 2 + n1[1] ** 2 + n1[2] ** 2
    n2sq = n2[0] ** 2 + n2[1] ** 2 + n2[2] ** 2
    a = (b1[0] * b2[0] + b1[1] * b2[1] + b1[2] * b2[2]) / (nb2 * nb2)
    c = (b3[0] * b2[0] + b3[1] * b2[1] + b3[2] * b2[2]) / (nb2 * nb2)
    for i in range(3):
        g1[i] = nb2 / n1sq * n1[i]
        g4[i] = -nb2 / n2sq * n2[i]
    for i in range(3):
        g2[i] = (a - 1.0) * g1[i] - c * g4[i]
        g3[i] = (c - 1.0) * g4[i] - a * g1[i]
    return phi


@njit
def _angle3d(u, v, gu, gv):
    """Angle between 3D vectors u, v and gradients w.r.t. u and v."""
    nu = math.sqrt(u[0] ** 2 + u[1] ** 2 + u[2] ** 2)
    nv = math.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2)
    c = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (nu * nv)
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    th = math.acos(c)
    s = math.sqrt(1.0 - c * c)
    if s < 1e-12:
        s = 1e-12
    for i in range(3):
        gu[i] = (c * u[i] / (nu * nu) - v[i] / (nu * nv)) / s
        gv[i] = (c * v[i] / (nv * nv) - u[i] / (nu * nv)) / s
    return th


@njit
def butane_positions(q):
    """Reduced coords (q1x, q1y, q3y, q4x, q4y, q4z) -> four 3D positions."""
    p1 = np.empty(3)
    p2 = np.zeros(3)
    p3 = np.empty(3)
    p4 = np.empty(3)
    p1[0], p1[1], p1[2] = q[0], q[1], 0.0
    p3[0], p3[1], p3[2] = 0.0, q[2], 0.0
    p4[0], p4[1], p4[2] = q[3], q[4], q[5]
    return p1, p2, p3, p4


@njit
def butane_energy_grad(q, g, p):
    """United-atom butane; p = (k2, k3, l_eq, theta_eq, c1, c2, c3)."""
    k2, k3, leq, theq, c1, c2, c3 = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
    p1, p2, p3, p4 = butane_positions(q)
    G1 = np.zeros(3)
    G3 = np.zeros(3)
    G4 = np.zeros(3)
    V = 0.0
    # bonds 1-2, 2-3, 3-4
    l1 = math.sqrt(p1[0] ** 2 + p1[1] ** 2 + p1[2] ** 2)
    V += 0.5 * k2 * (l1 - leq) ** 2
    for i in range(3):
        G1[i] += k2 * (l1 - leq) * p1[i] / l1
    l2 = math.sqrt(p3[0] ** 2 + p3[1] ** 2 + p3[2] ** 2)
    V += 0.5 * k2 * (l2 - leq) ** 2
    for i in range(3):
        G3[i] += k2 * (l2 - leq) * p3[i] / l2
    d34 = np.empty(3)
    for i in range(3):
        d34[i] = p4[i] - p3[i]
    l3 = math.sqrt(d34[0] ** 2 + d34[1] ** 2 + d34[2] ** 2)
    V += 0.5 * k2 * (l3 - leq) ** 2
    for i in range(3):
        G4[i] += k2 * (l3 - leq) * d34[i] / l3
        G3[i] -= k2 * (l3 - leq) * d34[i] / l3
    # bond angles at p2 (between p1-p2 and p3-p2) and at p3
    u = np.empty(3)
    v = np.empty(3)
    gu = np.empty(3)
    gv = np.empty(3)
    for i in range(3):
        u[i] = p1[i] - p2[i]
        v[i] = p3[i] - p2[i]
    th1 = _angle3d(u, v, gu, gv)
    V += 0.5 * k3 * (th1 - theq) ** 2
    for i in range(3):
        G1[i] += k3 * (th1 - theq) * gu[i]
        G3[i] += k3 * (th1 - theq) * gv[i]
    for i in range(3):
        u[i] = p2[i] - p3[i]
        v[i] = p4[i] - p3[i]
    th2 = _angle3d(u, v, gu, gv)
    V += 0.5 * k3 * (th2 - theq) ** 2
    for i in range(3):
        G3[i] -= k3 * (th2 - theq) * (gu[i] + gv[i])
        G4[i] += k3 * (th2 - theq) * gv[i]
    # torsion
    g1 = np.empty(3)
    g2 = np.empty(3)
    g3 = np.empty(3)
    g4 = np.empty(3)
    phi = _dihedral(p1, p2, p3, p4, g1, g2, g3, g4)
    cphi = math.cos(phi)
    sphi = math.sin(phi)
    V += c1 * (1.0 - cphi) + 2.0 * c2 * (1.0 - cphi * cphi) + c3 * (1.0 + 3.0 * cphi - 4.0 * cphi**3)
    dtors = sphi * (c1 + 4.0 * c2 * cphi - 3.0 * c3 + 12.0 * c3 * cphi * cphi)
    for i in range(3):
        G1[i] += dtors * g1[i]
        G3[i] += dtors * g3[i]
        G4[i] += dtors * g4[i]
    g[0], g[1] = G1[0], G1[1]
    g[2] = G3[1]
    g[3], g[4], g[5] = G4[0], G4[1], G4[2]
    return V


@njit
def butane_xi_dihedral(q, gxi, p):
    """Dihedral angle reaction coordinate; laplacian unavailable."""
    p1, p2, p3, p4 = butane_positions(q)
    g1 = np.empty(3)
    g2 = np.empty(3)
    g3 = np.empty(3)
    g4 = np.empty(3)
    phi = _dihedral(p1, p2, p3, p4, g1, g2, g3, g4)
    gxi[0], gxi[1] = g1[0], g1[1]
    gxi[2] = g3[1]
    gxi[3], gxi[4], gxi[5] = g4[0], g4[1], g4[2]
    return phi, math.nan


# ---------------------------------------------------------------------------
# driver factories
# ---------------------------------------------------------------------------

_DRIVER_CACHE = {}


def nd_drivers(energy_grad):
    """Euler-Maruyama chunk drivers for an n-dof system."""
    key = ("nd", energy_grad)
    if key in _DRIVER_CACHE:
        return _DRIVER_CACHE[key]

    @njit
    def advance(q, p, noise, dt, amp, guard):
        g = np.empty_like(q)
        n = q.shape[0]
        for j in range(noise.shape[0]):
            energy_grad(q, g, p)
            for i in range(n):
                q[i] += -dt * g[i] + amp * noise[j, i]
                if abs(q[i]) > guard:
                    return j + 1, False
        return noise.shape[0], True

    _DRIVER_CACHE[key] = advance
    return advance


def xi_drivers(energy_grad, xi_eval):
    """Drivers that track a reaction coordinate along the trajectory."""
    key = ("xi", energy_grad, xi_eval)
    if key in _DRIVER_CACHE:
        return _DRIVER_CACHE[key]

    @njit
    def advance_xi(q, p, pxi, noise, dt, amp, guard, xi_out):
        g = np.empty_like(q)
        gxi = np.empty_like(q)
        n = q.shape[0]
        for j in range(noise.shape[0]):
            energy_grad(q, g, p)
            for i in range(n):
                q[i] += -dt * g[i] + amp * noise[j, i]
                if abs(q[i]) > guard:
                    return j + 1, False
            xi_out[j], _ = xi_eval(q, gxi, pxi)
        return noise.shape[0], True

    @njit
    def first_passage(q, p, pxi, noise, dt, amp, guard, targets, period):
        """Step until xi enters one of the target intervals.

        targets is an (m, 2) array of [lo, hi] intervals; for periodic
        coordinates the xi value is wrapped into (-period/2, period/2]
        relative convention before testing.  Returns (steps, hit, ok).
        """
        g = np.empty_like(q)
        gxi = np.empty_like(q)
        n = q.shape[0]
        for j in range(noise.shape[0]):
            energy_grad(q, g, p)
            for i in range(n):
                q[i] += -dt * g[i] + amp * noise[j, i]
                if abs(q[i]) > guard:
                    return j + 1, False, False
            xi, _ = xi_eval(q, gxi, pxi)
            for m in range(targets.shape[0]):
                lo = targets[m, 0]
                hi = targets[m, 1]
                val = xi
                if period > 0.0:
                    # wrapped distance to interval midpoint
                    mid = 0.5 * (lo + hi)
                    d = val - mid
                    while d > 0.5 * period:
                        d -= period
                    while d <= -0.5 * period:
                        d += period
                    val = mid + d
                if lo <= val <= hi:
                    return j + 1, True, True
        return noise.shape[0], False, True

    @njit
    def accumulate_coeffs(
        q, p, pxi, noise, dt, amp, guard, beta,
        zlo, dz, nbins, periodic, period,
        counts, s_gxi2, s_gxi2_sq, s_b, s_b_sq,
    ):
        """Per-bin sums of |grad xi|^2 and the direct drift observable."""
        g = np.empty_like(q)
        gxi = np.empty_like(q)
        n = q.shape[0]
        for j in range(noise.shape[0]):
            energy_grad(q, g, p)
            xi, lap = xi_eval(q, gxi, pxi)
            if periodic:
                while xi >= zlo + period:
                    xi -= period
                while xi < zlo:
                    xi += period
            k = int((xi - zlo) / dz)
            if 0 <= k < nbins:
                gxi2 = 0.0
                gdot = 0.0
                for i in range(n):
                    gxi2 += gxi[i] * gxi[i]
                    gdot += g[i] * gxi[i]
                counts[k] += 1
                s_gxi2[k] += gxi2
                s_gxi2_sq[k] += gxi2 * gxi2
                b_obs = -gdot + lap / beta
                s_b[k] += b_obs
                s_b_sq[k] += b_obs * b_obs
            for i in range(n):
                q[i] += -dt * g[i] + amp * noise[j, i]
                if abs(q[i]) > guard:
                    return j + 1, False
        return noise.shape[0], True

    out = (advance_xi, first_passage, accumulate_coeffs)
    _DRIVER_CACHE[key] = out
    return out


# ---------------------------------------------------------------------------
# 1D SDE drivers (grid coefficients with linear interpolation)
# ---------------------------------------------------------------------------


@njit
def _interp(zlo, dz, vals, z, periodic, period):
    n = vals.shape[0]
    if periodic:
        while z >= zlo + period:
            z -= period
        while z < zlo:
            z += period
        t = (z - zlo) / dz
        k = int(t)
        frac = t - k
        k2 = k + 1
        if k2 >= n:
            k2 = 0
        return vals[k] * (1.0 - frac) + vals[k2] * frac
    if z <= zlo:
        return vals[0]
    zhi = zlo + dz * (n - 1)
    if z >= zhi:
        return vals[n - 1]
    t = (z - zlo) / dz
    k = int(t)
    frac = t - k
    return vals[k] * (1.0 - frac) + vals[k + 1] * frac


@njit
def sde1d_advance(z, zlo, dz, drift, sigma, periodic, period, noise, dt, amp, record):
    """Advance the 1D SDE, optionally recording every step.

    Non-periodic trajectories are reflected at the grid edges.
    """
    zhi = zlo + dz * (drift.shape[0] - 1)
    for j in range(noise.shape[0]):
        b = _interp(zlo, dz, drift, z, periodic, period)
        s = _interp(zlo, dz, sigma, z, periodic, period)
        z = z + dt * b + amp * s * noise[j]
        if not periodic:
            if z < zlo:
                z = 2.0 * zlo - z
            elif z > zhi:
                z = 2.0 * zhi - z
        record[j] = z
    return z


@njit
def sde1d_first_passage(z, zlo, dz, drift, sigma, periodic, period, noise, dt, amp, targets):
    zhi = zlo + dz * (drift.shape[0] - 1)
    for j in range(noise.shape[0]):
        b = _interp(zlo, dz, drift, z, periodic, period)
        s = _interp(zlo, dz, sigma, z, periodic, period)
        z = z + dt * b + amp * s * noise[j]
        if not periodic:
            if z < zlo:
                z = 2.0 * zlo - z
            elif z > zhi:
                z = 2.0 * zhi - z
        for m in range(targets.shape[0]):
            lo = targets[m, 0]
            hi = targets[m, 1]
            val = z
            if periodic:
                mid = 0.5 * (lo + hi)
                d = val - mid
                while d > 0.5 * period:
                    d -= period
                while d <= -0.5 * period:
                    d += period
                val = mid + d
            if lo <= val <= hi:
                return j + 1, True, z
    return noise.shape[0], False, z


# ---------------------------------------------------------------------------
# chain Monte Carlo (constrained overdamped Langevin on E_0)
# ---------------------------------------------------------------------------


@njit
def chain_advance(
    u, x, code1, p1, code2, p2, has_w2, hard_wall,
    noise, dt, amp, guard, obs_out,
):
    """Euler-Maruyama on the chain energy with u0=0, uN=x fixed.

    u holds the N-1 free (rescaled) positions.  Records the end-bond force
    observable each step.  With hard_wall, steps breaking the ordering
    u0 <= u1 <= ... <= x are rejected wholesale.
    """
    nm1 = u.shape[0]
    N = nm1 + 1
    scale = float(N)
    grad = np.empty(nm1)
    trial = np.empty(nm1)
    for j in range(noise.shape[0]):
        for i in range(nm1):
            left = u[i - 1] if i > 0 else 0.0
            right = u[i + 1] if i < nm1 - 1 else x
            _, d1l = pair_eval(code1, p1, (u[i] - left) * scale)
            _, d1r = pair_eval(code1, p1, (right - u[i]) * scale)
            gi = scale * (d1l - d1r)
            if has_w2:
                # W2 terms: v_m = (u_{m+1}-u_{m-1})*N for m=1..N-1;
                # du^j affects v_{j-1} (+) and v_{j+1} (-) (1-indexed atoms)
                atom = i + 1
                if atom - 1 >= 1:
                    lo = u[atom - 3] if atom - 3 >= 0 else 0.0
                    _, d2 = pair_eval(code2, p2, (u[i] - lo) * scale)
                    gi += scale * d2
                if atom + 1 <= N - 1:
                    hi = u[atom + 1] if atom + 1 <= nm1 - 1 else x
                    _, d2 = pair_eval(code2, p2, (hi - u[i]) * scale)
                    gi -= scale * d2
            grad[i] = gi
        ok = True
        for i in range(nm1):
            trial[i] = u[i] - dt * grad[i] + amp * noise[j, i]
            if abs(trial[i]) > guard:
                return j + 1, False
        if hard_wall:
            prev = 0.0
            for i in range(nm1):
                if trial[i] < prev:
                    ok = False
                    break
                prev = trial[i]
            if ok and x < trial[nm1 - 1]:
                ok = False
        if ok:
            for i in range(nm1):
                u[i] = trial[i]
        _, dend = pair_eval(code1, p1, (x - u[nm1 - 1]) * scale)
        obs = dend
        if has_w2:
            lo = u[nm1 - 2] if nm1 >= 2 else 0.0
            _, d2 = pair_eval(code2, p2, (x - lo) * scale)
            obs += d2
        obs_out[j] = obs
    return noise.shape[0], True


@njit
def chain_neumann_advance(u, f, code1, p1, noise, dt, amp, guard, bond_sums):
    """NN chain with a free right end pulled by force f; u holds u1..uN.

    Accumulates the per-bond force W'((u_i-u_{i-1})N) into bond_sums.
    """
    N = u.shape[0]
    scale = float(N)
    grad = np.empty(N)
    for j in range(noise.shape[0]):
        for i in range(N):
            left = u[i - 1] if i > 0 else 0.0
            _, dl = pair_eval(code1, p1, (u[i] - left) * scale)
            gi = scale * dl
            if i < N - 1:
                _, dr = pair_eval(code1, p1, (u[i + 1] - u[i]) * scale)
                gi -= scale * dr
            else:
                gi -= f * scale
            grad[i] = gi
        for i in range(N):
            u[i] += -dt * grad[i] + amp * noise[j, i]
            if abs(u[i]) > guard:
                return j + 1, False
        for i in range(N):
            left = u[i - 1] if i > 0 else 0.0
            _, d = pair_eval(code1, p1, (u[i] - left) * scale)
            bond_sums[i] += d
    return noise.shape[0], True


@njit
def markov_chain_path(cdf_rows, start_idx, uniforms, idx_out):
    """Sample a path of the grid Markov chain from per-row CDFs."""
    k = start_idx
    for j in range(uniforms.shape[0]):
        row = cdf_rows[k]
        u = uniforms[j]
        lo = 0
        hi = row.shape[0] - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if row[mid] < u:
                lo = mid + 1
            else:
                hi = mid
        k = lo
        idx_out[j] = k
    return k
