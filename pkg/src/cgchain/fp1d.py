"""1D Fokker-Planck solver and entropy diagnostics.

Solves the forward equation of the tabulated 1D SDE,

    d phi / dt = d/dz ( -b phi + (1/beta) d/dz (sigma^2 phi) ),

with a conservative finite-volume discretization: fluxes on cell faces
use Chang-Cooper exponential weighting (which reproduces the stationary
density exactly for the discrete fluxes), Crank-Nicolson in time, and
zero-flux (reflecting) or periodic boundaries matching the SDE.  Mass is
conserved to round-off by construction.

Also provides relative entropy between grid densities and the three-way
stationarity cross-check between (i) the histogram of the reaction
coordinate over a full-dynamics trajectory, (ii) the long-time FP
solution of the effective SDE, and (iii) the Boltzmann density
exp(-beta*A)/Z from the coefficient table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .cg_dynamics import CoefficientTable, make_sde
from .potentials import MolecularSystem, ReactionCoordinate
from .sde import Sde1d, TrajectoryConfig
from . import kernels, rng

_CHUNK = 65536


@dataclass(frozen=True)
class DensityGrid:
    """Probability density sampled on a uniform grid (trapezoid mass 1)."""

    z_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v < 0):
            raise ValueError("density values must be nonnegative")

    @property
    def mass(self) -> float:
        return float(np.trapezoid(self.values, self.z_grid))

    def normalized(self) -> "DensityGrid":
        return DensityGrid(self.z_grid, self.values / self.mass)

    def mean(self) -> float:
        return float(np.trapezoid(self.z_grid * self.values, self.z_grid))

    def variance(self) -> float:
        m = self.mean()
        return float(np.trapezoid((self.z_grid - m) ** 2 * self.values,
                                  self.z_grid))


def _chang_cooper_delta(w: np.ndarray) -> np.ndarray:
    """Flux weighting delta(w) = 1/w - 1/(e^w - 1), delta(0) = 1/2."""
    out = np.full_like(w, 0.5)
    nz = np.abs(w) > 1e-12
    wn = w[nz]
    out[nz] = 1.0 / wn - 1.0 / np.expm1(wn)
    return out


def _face_operator(sde: Sde1d):
    """Per-face transport coefficients of the finite-volume scheme.

    Writing the flux as J = B*phi - D*dphi/dz with B = b - (1/beta)(s^2)'
    and D = s^2/beta, the face flux between cells k and k+1 is

        J_k = B_k [ (1-d_k) phi_{k+1} + d_k phi_k ] - D_k (phi_{k+1}-phi_k)/dz

    with the Chang-Cooper weight d_k = delta(B_k dz / D_k), which makes
    the discrete stationary state follow the exact exponential of the
    drift/diffusion ratio.  Returns (lower, diag, upper) contributions of
    d phi/dt = L phi and the grid spacing.
    """
    z = np.asarray(sde.z_grid, dtype=float)
    b = np.asarray(sde.drift, dtype=float)
    s2 = np.asarray(sde.diffusion_sigma, dtype=float) ** 2
    dz = float(z[1] - z[0])
    n = len(z)
    beta = sde.beta

    if sde.periodic:
        nb = np.roll(b, -1)
        ns2 = np.roll(s2, -1)
        bf = 0.5 * (b + nb)
        s2f = 0.5 * (s2 + ns2)
        Bf = bf - (ns2 - s2) / (beta * dz)
        Df = s2f / beta
        faces = n
    else:
        bf = 0.5 * (b[:-1] + b[1:])
        s2f = 0.5 * (s2[:-1] + s2[1:])
        Bf = bf - (s2[1:] - s2[:-1]) / (beta * dz)
        Df = s2f / beta
        faces = n - 1
    d = _chang_cooper_delta(Bf * dz / Df)
    # J_k = a_k phi_k + c_k phi_{k+1}; the weighting makes the zero-flux
    # ratio phi_{k+1}/phi_k equal exp(B dz / D) exactly
    a = Bf * (1.0 - d) + Df / dz
    c = Bf * d - Df / dz
    return a, c, dz, faces


def _generator_tridiag(sde: Sde1d):
    """Tridiagonal parts (sub, diag, super) of d phi/dt = L phi.

    For periodic systems the wrap-around face adds corner entries,
    returned separately as (corner_lo = L[0, n-1], corner_hi = L[n-1, 0]).
    """
    a, c, dz, faces = _face_operator(sde)
    n = len(sde.z_grid)
    diag = np.zeros(n)
    sub = np.zeros(n - 1)
    sup = np.zeros(n - 1)
    corner_lo = corner_hi = 0.0  # L[n-1, 0] and L[0, n-1]
    for k in range(faces):
        if k + 1 < n:
            # d phi_k/dt -= J_k/dz ; d phi_{k+1}/dt += J_k/dz
            diag[k] -= a[k] / dz
            sup[k] -= c[k] / dz
            sub[k] += a[k] / dz
            diag[k + 1] += c[k] / dz
        else:  # periodic wrap: face between cells n-1 and 0
            diag[n - 1] -= a[k] / dz
            corner_lo = -c[k] / dz
            corner_hi = a[k] / dz
            diag[0] += c[k] / dz
    return sub, diag, sup, corner_lo, corner_hi, dz


def _cn_step_factory(sde: Sde1d, dt: float):
    """Build a Crank-Nicolson stepper phi -> phi_next."""
    sub, diag, sup, c_lo, c_hi, _ = _generator_tridiag(sde)
    n = len(diag)
    # explicit half: (I + dt/2 L)
    ed = 1.0 + 0.5 * dt * diag
    es = 0.5 * dt * sub
    eu = 0.5 * dt * sup
    e_lo = 0.5 * dt * c_lo
    e_hi = 0.5 * dt * c_hi
    # implicit half: (I - dt/2 L) as banded matrix for solve_banded
    ab = np.zeros((3, n))
    ab[0, 1:] = -0.5 * dt * sup
    ab[1, :] = 1.0 - 0.5 * dt * diag
    ab[2, :-1] = -0.5 * dt * sub

    if c_lo == 0.0 and c_hi == 0.0:
        def step(phi):
            rhs = ed * phi
            rhs[:-1] += eu * phi[1:]
            rhs[1:] += es * phi[:-1]
            return solve_banded((1, 1), ab, rhs,
                                overwrite_b=True, check_finite=False)
        return step

    # periodic: Sherman-Morrison correction for the two corner entries
    i_lo = -0.5 * dt * c_lo   # A[n-1, 0]... corner of the implicit matrix
    i_hi = -0.5 * dt * c_hi   # A[0, n-1]
    # A = T + u v^T with u = (gamma e_0 + e_{n-1}), chosen standard form
    gamma = -ab[1, 0]
    u = np.zeros(n)
    v = np.zeros(n)
    u[0] = gamma
    u[-1] = i_lo
    v[0] = 1.0
    v[-1] = i_hi / gamma
    abp = ab.copy()
    abp[1, 0] -= gamma
    abp[1, -1] -= i_lo * i_hi / gamma

    def step(phi):
        rhs = ed * phi
        rhs[:-1] += eu * phi[1:]
        rhs[1:] += es * phi[:-1]
        rhs[0] += e_hi * phi[-1]
        rhs[-1] += e_lo * phi[0]
        y = solve_banded((1, 1), abp, rhs, check_finite=False)
        q = solve_banded((1, 1), abp, u, check_finite=False)
        return y - q * (v @ y) / (1.0 + v @ q)

    return step


def solve_fp(sde: Sde1d, init: DensityGrid, dt: float, t_final: float,
             n_snapshots: int = 0):
    """Evolve the density to ``t_final``; returns (final, snapshots).

    ``snapshots`` is a list of (t, DensityGrid) including t=0 and the
    final time, with ``n_snapshots`` interior saves when requested.

    Raises
    ------
    ValueError
        If the init grid does not match the SDE grid.
    FloatingPointError
        If the solution develops values below -1e-10 (suggests a smaller
        dt).
    """
    z = np.asarray(sde.z_grid, dtype=float)
    if len(init.z_grid) != len(z) or not np.allclose(init.z_grid, z):
        raise ValueError("init density grid does not match the sde grid")
    steps = max(1, int(round(t_final / dt)))
    step = _cn_step_factory(sde, dt)
    phi = np.asarray(init.values, dtype=float).copy()
    snaps = [(0.0, DensityGrid(z, phi.copy()))]
    save_at = set()
    if n_snapshots > 0:
        save_at = {int(round(k * steps / (n_snapshots + 1)))
                   for k in range(1, n_snapshots + 1)}
    mass = phi.sum()
    for j in range(1, steps + 1):
        phi = step(phi)
        if phi.min() < -1e-10:
            raise FloatingPointError(
                "density went negative (min %.3e) at t=%.4g; reduce dt "
                "below %.3g" % (phi.min(), j * dt, dt / 4))
        new_mass = phi.sum()
        if abs(new_mass - mass) > 1e-12 * max(1.0, abs(mass)):
            raise FloatingPointError("mass drifted beyond 1e-12 in one step")
        mass = new_mass
        if j in save_at:
            snaps.append((j * dt, DensityGrid(z, np.clip(phi, 0.0, None))))
    final = DensityGrid(z, np.clip(phi, 0.0, None))
    snaps.append((steps * dt, final))
    return final, snaps


def relative_entropy(p: DensityGrid, q: DensityGrid) -> float:
    """H(p|q) = int p ln(p/q), trapezoid rule, 0*ln 0 = 0.

    Returns +inf when p puts mass where q vanishes.
    """
    if len(p.z_grid) != len(q.z_grid) or not np.allclose(p.z_grid, q.z_grid):
        raise ValueError("density grids do not match")
    pv = np.asarray(p.values, dtype=float)
    qv = np.asarray(q.values, dtype=float)
    if np.any((pv > 0) & (qv == 0)):
        return np.inf
    integrand = np.zeros_like(pv)
    pos = pv > 0
    integrand[pos] = pv[pos] * np.log(pv[pos] / qv[pos])
    return float(np.trapezoid(integrand, p.z_grid))


def total_variation(p: DensityGrid, q: DensityGrid) -> float:
    """TV(p, q) = (1/2) int |p - q|."""
    return 0.5 * float(np.trapezoid(np.abs(p.values - q.values), p.z_grid))


def boltzmann_density(table: CoefficientTable) -> DensityGrid:
    """Normalized exp(-beta A) on the table's largest valid range."""
    lo_i, hi_i = table.contiguous_valid_range()
    sel = slice(lo_i, hi_i + 1)
    z = table.z_grid[sel]
    a = table.A[sel]
    vals = np.exp(-table.beta * (a - np.nanmin(a)))
    return DensityGrid(z, vals).normalized()


def marginal_stationarity_check(s: MolecularSystem, rc: ReactionCoordinate,
                                beta: float, table: CoefficientTable,
                                cfg: TrajectoryConfig,
                                fp_t_final: float = 50.0,
                                fp_dt: float = 1e-3) -> dict:
    """Three-way check that the closures share the stationary marginal.

    Computes pairwise total-variation distances between (i) the
    reaction-coordinate histogram of a long full-dynamics trajectory,
    (ii) the long-time Fokker-Planck solution of the effective SDE, and
    (iii) exp(-beta A)/Z from the table.  Returns a dict with keys
    ``tv_hist_fp``, ``tv_hist_boltzmann``, ``tv_fp_boltzmann``.
    """
    ref = boltzmann_density(table)
    z = ref.z_grid
    dz = z[1] - z[0]

    # (i) histogram of xi over a fresh full-dynamics run
    advance_xi, _, _ = kernels.xi_drivers(s.energy_grad, rc.xi_eval)
    amp = np.sqrt(2.0 * cfg.dt / beta)
    # offset the master seed so the check trajectory is independent of the
    # trajectory that produced the coefficient table under the same config
    gen = rng.stream(cfg.seed + 1, 0)
    q = s.equilibrium().copy()
    edges = np.concatenate([z - dz / 2, [z[-1] + dz / 2]])
    hist = np.zeros(len(z))
    left = cfg.burn_in + cfg.steps
    skipped = 0
    period = rc.period if rc.period is not None else 0.0
    while left > 0:
        nsteps = min(_CHUNK, left)
        noise = gen.standard_normal((nsteps, s.dof_count))
        xi_out = np.empty(nsteps)
        _, ok = advance_xi(q, s.params, rc.params, noise, cfg.dt, amp,
                           cfg.overflow_guard, xi_out)
        if not ok:
            raise FloatingPointError("trajectory overflow")
        if skipped < cfg.burn_in:
            take = xi_out[max(0, cfg.burn_in - skipped):]
            skipped += nsteps
        else:
            take = xi_out
        if len(take):
            if period > 0.0:
                mid = 0.5 * (z[0] + z[-1])
                take = mid + (take - mid + period / 2) % period - period / 2
            hist += np.histogram(take, bins=edges)[0]
        left -= nsteps
    hist_density = DensityGrid(z, hist / (hist.sum() * dz)).normalized()

    # (ii) long-time FP solution of the effective closure
    sde = make_sde(table, kind="effective")
    zs = np.asarray(sde.z_grid, dtype=float)
    init = DensityGrid(zs, np.ones(len(zs))).normalized()
    final, _ = solve_fp(sde, init, fp_dt, fp_t_final)
    fp_density = DensityGrid(
        z, np.interp(z, zs, final.normalized().values)).normalized()

    return {
        "tv_hist_fp": total_variation(hist_density, fp_density),
        "tv_hist_boltzmann": total_variation(hist_density, ref),
        "tv_fp_boltzmann": total_variation(fp_density, ref),
    }
