"""Coefficient estimation and closure assembly for coarse-grained dynamics.

From a long equilibrium trajectory of the full system, estimates on a grid
of the reaction coordinate xi:

* the free energy A(z) = -(1/beta) ln (marginal density of xi),
* its derivative A'(z) (the mean force),
* the local diffusion factor sigma^2(z) = E[|grad xi|^2 | xi = z],
* the drift b(z) = E[-grad V . grad xi + (1/beta) Lap xi | xi = z],

either by accumulating the drift observable directly (``direct`` path,
requires the Laplacian of xi) or from the one-dimensional detailed-balance
identity b = (1/beta) (sigma^2)' - sigma^2 A' (``identity`` path, needs
only gradients and the histogram).

Also provides the residence-time side of the analysis: Kramers-type
predictions tau = tau0 * exp(beta * deltaA) with curvature prefactors from
local quadratic fits, weighted Arrhenius fits of measured times, and the
coordinate rescaling h(xi) = int_0^xi 1/sigma that turns the effective
dynamics into a unit-diffusion one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels, rng
from .potentials import MolecularSystem, ReactionCoordinate
from .sde import Sde1d, TrajectoryConfig

_CHUNK = 65536


@dataclass(frozen=True)
class CoefficientTable:
    """Binned coefficient estimates on a uniform xi grid.

    ``z_grid`` holds bin centers.  Bins with fewer than ``min_count``
    samples are masked: their entries are NaN and ``valid`` is False.
    ``provenance`` records how b was obtained (``direct`` accumulation of
    the drift observable, or the detailed-balance ``identity``).
    """

    z_grid: np.ndarray
    A: np.ndarray
    A_prime: np.ndarray
    b: np.ndarray
    sigma2: np.ndarray
    counts: np.ndarray
    beta: float
    provenance: str
    period: float | None = None
    min_count: int = 100
    b_se: np.ndarray | None = field(default=None, repr=False)
    sigma2_se: np.ndarray | None = field(default=None, repr=False)

    @property
    def valid(self) -> np.ndarray:
        return self.counts >= self.min_count

    @property
    def periodic(self) -> bool:
        return self.period is not None

    def contiguous_valid_range(self):
        """Largest contiguous run of valid bins (indices lo, hi inclusive)."""
        v = self.valid
        best = (0, -1)
        start = None
        for i, ok in enumerate(v):
            if ok and start is None:
                start = i
            if (not ok or i == len(v) - 1) and start is not None:
                end = i if ok else i - 1
                if end - start > best[1] - best[0]:
                    best = (start, end)
                start = None
        return best


@dataclass(frozen=True)
class KramersEstimate:
    """Low-temperature residence-time prediction tau0 * exp(beta deltaA)."""

    delta_A: float
    omega_sp: float
    omega_well: float
    tau0: float

    def predict(self, beta: float) -> float:
        return self.tau0 * np.exp(beta * self.delta_A)


def _grid_edges(lo: float, hi: float, nbins: int):
    edges = np.linspace(lo, hi, nbins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return edges, centers


def _finite_diff(vals: np.ndarray, dz: float, periodic: bool) -> np.ndarray:
    out = np.full_like(vals, np.nan)
    good = np.isfinite(vals)
    if periodic:
        v = vals
        out = (np.roll(v, -1) - np.roll(v, 1)) / (2.0 * dz)
        bad = ~(good & np.roll(good, 1) & np.roll(good, -1))
        out[bad] = np.nan
        return out
    n = len(vals)
    for i in range(n):
        if not good[i]:
            continue
        if 0 < i < n - 1 and good[i - 1] and good[i + 1]:
            out[i] = (vals[i + 1] - vals[i - 1]) / (2.0 * dz)
        elif i + 2 < n and good[i + 1] and good[i + 2]:
            # second-order forward stencil at the left boundary of a
            # valid run (grid end or masked neighbor)
            out[i] = (-1.5 * vals[i] + 2.0 * vals[i + 1]
                      - 0.5 * vals[i + 2]) / dz
        elif i - 2 >= 0 and good[i - 1] and good[i - 2]:
            out[i] = (1.5 * vals[i] - 2.0 * vals[i - 1]
                      + 0.5 * vals[i - 2]) / dz
    return out


def estimate_coefficients(s: MolecularSystem, rc: ReactionCoordinate,
                          beta: float, cfg: TrajectoryConfig,
                          nbins: int = 256, path: str = "identity",
                          z_range: tuple[float, float] | None = None,
                          min_count: int = 100, replicas: int = 1,
                          q0: np.ndarray | None = None) -> CoefficientTable:
    """Estimate A, A', b, sigma^2 from equilibrium trajectories.

    Runs ``replicas`` independent trajectories of ``cfg.steps`` raw steps
    each (after ``cfg.burn_in``); every step contributes to its bin.
    Point estimates pool all replicas; when ``replicas >= 2`` the reported
    standard errors are the across-replica spread of the per-bin means,
    which is honest in the presence of autocorrelation (the within-run
    spread is not).  ``z_range`` defaults to the full period for periodic
    coordinates and is otherwise determined from the [0.1%, 99.9%]
    quantile range of xi over the first burn-in.

    Raises
    ------
    ValueError
        If ``path='direct'`` but the coordinate has no Laplacian.
    """
    if path not in ("direct", "identity"):
        raise ValueError("path must be 'direct' or 'identity'")
    if path == "direct" and not rc.has_laplacian:
        raise ValueError(
            "direct drift estimation needs the Laplacian of xi; use the "
            "'identity' path for this coordinate")
    if not beta > 0:
        raise ValueError("beta must be positive")

    advance_xi, _, accumulate = kernels.xi_drivers(s.energy_grad, rc.xi_eval)
    amp = np.sqrt(2.0 * cfg.dt / beta)
    q_start = (s.equilibrium() if q0 is None
               else np.asarray(q0, dtype=float))
    periodic = rc.period is not None
    period = rc.period if periodic else 0.0

    lo = hi = None
    if z_range is not None:
        lo, hi = z_range
    elif periodic:
        lo, hi = -period / 2.0, period / 2.0
    edges = centers = None
    dz = 0.0

    counts = np.zeros((replicas, nbins), dtype=np.int64)
    s_g2 = np.zeros((replicas, nbins))
    s_g2_sq = np.zeros((replicas, nbins))
    s_b = np.zeros((replicas, nbins))
    s_b_sq = np.zeros((replicas, nbins))
    for r in range(replicas):
        gen = rng.stream(cfg.seed, r)
        q = q_start.copy()
        pilot = []
        left = cfg.burn_in
        while left > 0:
            nsteps = min(_CHUNK, left)
            noise = gen.standard_normal((nsteps, s.dof_count))
            xi_out = np.empty(nsteps)
            _, ok = advance_xi(q, s.params, rc.params, noise, cfg.dt, amp,
                               cfg.overflow_guard, xi_out)
            if not ok:
                raise FloatingPointError("trajectory overflow during burn-in")
            pilot.append(xi_out)
            left -= nsteps
        if lo is None:
            xs = np.concatenate(pilot)
            qlo, qhi = np.quantile(xs, [0.001, 0.999])
            pad = 0.05 * (qhi - qlo)
            lo, hi = qlo - pad, qhi + pad
        if edges is None:
            edges, centers = _grid_edges(lo, hi, nbins)
            dz = edges[1] - edges[0]
        left = cfg.steps
        while left > 0:
            nsteps = min(_CHUNK, left)
            noise = gen.standard_normal((nsteps, s.dof_count))
            _, ok = accumulate(q, s.params, rc.params, noise, cfg.dt, amp,
                               cfg.overflow_guard, beta, lo, dz, nbins,
                               periodic, period, counts[r], s_g2[r],
                               s_g2_sq[r], s_b[r], s_b_sq[r])
            if not ok:
                raise FloatingPointError("trajectory overflow")
            left -= nsteps

    tot = counts.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma2 = s_g2.sum(axis=0) / tot
        density = tot / (tot.sum() * dz)
        A = -np.log(density) / beta
        if replicas >= 2:
            per_rep_s2 = np.where(counts > 0, s_g2 / counts, np.nan)
            sigma2_se = (np.nanstd(per_rep_s2, axis=0, ddof=1)
                         / np.sqrt(replicas))
        else:
            s2_var = s_g2_sq.sum(axis=0) / tot - sigma2 ** 2
            sigma2_se = np.sqrt(np.maximum(s2_var, 0.0) / tot)
    mask = tot < min_count
    A = np.where(mask, np.nan, A)
    sigma2 = np.where(mask, np.nan, sigma2)
    A_prime = _finite_diff(A, dz, periodic)

    if path == "direct":
        with np.errstate(divide="ignore", invalid="ignore"):
            b = s_b.sum(axis=0) / tot
            if replicas >= 2:
                per_rep_b = np.where(counts > 0, s_b / counts, np.nan)
                b_se = (np.nanstd(per_rep_b, axis=0, ddof=1)
                        / np.sqrt(replicas))
            else:
                b_var = s_b_sq.sum(axis=0) / tot - b ** 2
                b_se = np.sqrt(np.maximum(b_var, 0.0) / tot)
        b = np.where(mask, np.nan, b)
    else:
        ds2 = _finite_diff(sigma2, dz, periodic)
        b = ds2 / beta - sigma2 * A_prime
        b_se = None

    return CoefficientTable(z_grid=centers, A=A, A_prime=A_prime, b=b,
                            sigma2=sigma2, counts=tot, beta=beta,
                            provenance=path,
                            period=period if periodic else None,
                            min_count=min_count, b_se=b_se,
                            sigma2_se=sigma2_se)


def table_from_profiles(z_grid: np.ndarray, A_vals: np.ndarray,
                        beta: float, sigma2_vals: np.ndarray | None = None,
                        period: float | None = None) -> CoefficientTable:
    """Build a table from closed-form profiles instead of a trajectory.

    ``b`` is filled via the detailed-balance identity, so the effective
    and free-energy closures built from the result are mutually
    consistent.  Counts are set above ``min_count`` everywhere.
    """
    z_grid = np.asarray(z_grid, dtype=float)
    A_vals = np.asarray(A_vals, dtype=float)
    if sigma2_vals is None:
        sigma2_vals = np.ones_like(z_grid)
    sigma2_vals = np.asarray(sigma2_vals, dtype=float)
    dz = z_grid[1] - z_grid[0]
    periodic = period is not None
    A_prime = _finite_diff(A_vals, dz, periodic)
    ds2 = _finite_diff(sigma2_vals, dz, periodic)
    b = ds2 / beta - sigma2_vals * A_prime
    counts = np.full(len(z_grid), 10 ** 9, dtype=np.int64)
    return CoefficientTable(z_grid=z_grid, A=A_vals, A_prime=A_prime, b=b,
                            sigma2=sigma2_vals, counts=counts, beta=beta,
                            provenance="identity", period=period)


def make_sde(table: CoefficientTable, kind: str = "effective") -> Sde1d:
    """Assemble the 1D closure from a coefficient table.

    ``effective``: drift b, diffusion sigma.  ``free-energy``: drift -A',
    unit diffusion.  Uses the largest contiguous run of valid bins;
    raises if masked bins split the dynamical range in two comparable
    pieces (coefficients would be silently interpolated over a gap).
    """
    if kind not in ("effective", "free-energy"):
        raise ValueError("kind must be 'effective' or 'free-energy'")
    lo_i, hi_i = table.contiguous_valid_range()
    n_valid = int(np.sum(table.valid))
    if hi_i < lo_i:
        raise ValueError("no valid bins")
    if hi_i - lo_i + 1 < n_valid:
        raise ValueError("masked gap inside the dynamical range; refine the "
                         "sampling or shrink z_range")
    sel = slice(lo_i, hi_i + 1)
    z = table.z_grid[sel]
    if kind == "effective":
        drift = table.b[sel]
        sigma = np.sqrt(table.sigma2[sel])
    else:
        drift = -table.A_prime[sel]
        sigma = np.ones(hi_i - lo_i + 1)
    good = np.isfinite(drift)
    if not np.all(good):
        # finite differences at the edges of the valid run can be NaN;
        # clamp them to the nearest defined value
        idx = np.flatnonzero(good)
        drift = np.interp(np.arange(len(drift)), idx, drift[idx])
    period = table.period if (table.periodic
                              and hi_i - lo_i + 1 == len(table.z_grid)) else None
    return Sde1d(z_grid=z, drift=drift, diffusion_sigma=sigma,
                 beta=table.beta, period=period)


def _refine_extremum(z: np.ndarray, vals: np.ndarray, i: int,
                     window: int = 7):
    """Quadratic fit around index i: returns (z*, value*, second_deriv)."""
    half = window // 2
    lo = max(0, i - half)
    hi = min(len(z), i + half + 1)
    if hi - lo < 3:
        raise ValueError("extremum too close to the grid edge")
    c = np.polyfit(z[lo:hi] - z[i], vals[lo:hi], 2)
    z_star = z[i] - c[1] / (2.0 * c[0])
    v_star = np.polyval(c, z_star - z[i])
    return z_star, v_star, 2.0 * c[0]


def kramers_time(z_grid: np.ndarray, A_vals: np.ndarray, z_min: float,
                 z_sp: float, sigma_profile: np.ndarray | None = None,
                 window: int = 7) -> KramersEstimate:
    """Residence-time prefactor and barrier from a free-energy profile.

    tau0 = 2 pi / (omega_sp * omega_well) with omega = sqrt(|A''|) at the
    saddle and the starting well, both from local quadratic fits around
    the grid points nearest ``z_sp`` and ``z_min``.  When
    ``sigma_profile`` is given (values of sigma on ``z_grid``), each
    curvature is multiplied by sigma at the corresponding point,
    dividing tau0 by sigma(z_sp) * sigma(z_min).

    Raises
    ------
    ValueError
        If the curvature signs do not match a well/saddle pair.
    """
    z_grid = np.asarray(z_grid, dtype=float)
    A_vals = np.asarray(A_vals, dtype=float)
    i_min = int(np.argmin(np.abs(z_grid - z_min)))
    i_sp = int(np.argmin(np.abs(z_grid - z_sp)))
    zw, aw, cw = _refine_extremum(z_grid, A_vals, i_min, window)
    zs, asp, cs = _refine_extremum(z_grid, A_vals, i_sp, window)
    if cw <= 0:
        raise ValueError("z_min is not a local minimum (A'' = %.3g)" % cw)
    if cs >= 0:
        raise ValueError("z_sp is not a local maximum (A'' = %.3g)" % cs)
    delta_A = asp - aw
    if delta_A <= 0:
        raise ValueError("no barrier: A(saddle) <= A(well)")
    omega_w = np.sqrt(cw)
    omega_sp = np.sqrt(-cs)
    if sigma_profile is not None:
        sig = np.asarray(sigma_profile, dtype=float)
        omega_w = omega_w * float(np.interp(zw, z_grid, sig))
        omega_sp = omega_sp * float(np.interp(zs, z_grid, sig))
    tau0 = 2.0 * np.pi / (omega_sp * omega_w)
    return KramersEstimate(delta_A=float(delta_A),
                           omega_sp=float(omega_sp),
                           omega_well=float(omega_w), tau0=float(tau0))


def fit_arrhenius(points) -> tuple[float, float, np.ndarray]:
    """Weighted least squares of ln tau = ln tau0 + s * beta.

    ``points`` is a sequence of (beta, tau, tau_error); weights are the
    inverse squared relative errors (zero errors give equal weights).
    Returns (tau0, s, residuals of ln tau).
    """
    pts = np.asarray([(b, t, e) for (b, t, e) in points], dtype=float)
    if len(pts) < 2:
        raise ValueError("need at least 2 points")
    betas, taus, errs = pts.T
    if np.any(taus <= 0):
        raise ValueError("tau must be positive")
    if np.ptp(betas) == 0:
        raise ValueError("degenerate beta values")
    y = np.log(taus)
    w = np.ones_like(y) if np.all(errs == 0) else (taus / errs) ** 2
    X = np.column_stack([np.ones_like(betas), betas])
    WX = X * w[:, None]
    coef = np.linalg.solve(X.T @ WX, WX.T @ y)
    resid = y - X @ coef
    return float(np.exp(coef[0])), float(coef[1]), resid


def rescale_by_sigma(table: CoefficientTable):
    """Coordinate change h(xi) = int_0^xi 1/sigma with unit diffusion.

    Returns ``(h_values, rescaled)`` where ``h_values`` are the images of
    the table's bin centers (anchored so that h(0) = 0 when 0 is inside
    the grid, else h(z_grid[0]) = 0) and ``rescaled`` is a new table on
    the uniform h-grid carrying the transformed free energy
    A~(h(z)) = A(z) and unit sigma^2.
    """
    lo_i, hi_i = table.contiguous_valid_range()
    sel = slice(lo_i, hi_i + 1)
    z = table.z_grid[sel]
    sig = np.sqrt(table.sigma2[sel])
    A = table.A[sel]
    inv = 1.0 / sig
    h = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1])
                                         * np.diff(z))])
    if z[0] <= 0.0 <= z[-1]:
        h -= np.interp(0.0, z, h)
    if np.any(np.diff(h) <= 0):
        raise ValueError("rescaling map is not strictly increasing")
    h_uniform = np.linspace(h[0], h[-1], len(h))
    A_resc = np.interp(h_uniform, h, A)
    rescaled = table_from_profiles(h_uniform, A_resc, table.beta)
    return h, rescaled


def entropy_bound_constants(s: MolecularSystem, rc: ReactionCoordinate,
                            samples: np.ndarray,
                            table: CoefficientTable | None = None) -> dict:
    """Empirical constants entering the coarse-graining error bound.

    Over the given configuration samples, computes

    * ``m``, ``M``: min and max of |grad xi|,
    * ``kappa``: bound on the coupling between xi and the transverse
      directions (the system's declared mixed-partial bound when
      available, else the sample maximum of the component of grad V
      orthogonal to grad xi),
    * ``lambda``: max of |(|grad xi|^2 - sigma^2(xi)) / sigma^2(xi)|,
      using ``table`` for sigma^2 (unit sigma^2 when no table is given).

    All values are maxima/minima over the sample set, i.e. empirical
    bounds from below on the true suprema.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    gnorms = np.empty(len(samples))
    lam = 0.0
    kappa_emp = 0.0
    for i, q in enumerate(samples):
        val, grad = rc.eval(q)
        g2 = float(grad @ grad)
        gnorms[i] = np.sqrt(g2)
        if table is not None:
            s2 = float(np.interp(val, table.z_grid[table.valid],
                                 table.sigma2[table.valid]))
        else:
            s2 = 1.0
        lam = max(lam, abs(g2 - s2) / s2)
        _, gv = s.eval(q)
        # component of the force transverse to xi
        trans = gv - (gv @ grad) / g2 * grad
        kappa_emp = max(kappa_emp, float(np.linalg.norm(trans)))
    kappa = (s.mixed_partial_bound if s.mixed_partial_bound is not None
             else kappa_emp)
    return {"m": float(gnorms.min()), "M": float(gnorms.max()),
            "kappa": float(kappa), "lambda": float(lam)}
