"""Statics of chains with first- and second-neighbour interactions.

A chain of N+1 atoms at positions 0 = u^0, u^1, ..., u^N = x*N*h (h = 1/N)
with energy

    E_f = sum_i W1(y_i) + sum_i W2(v_i) - f * u^N / h,

where y_i are the first-neighbour bond lengths and v_i = y_i + y_{i+1} the
second-neighbour distances.  In the thermodynamic limit the stress-strain
relation and the free energy per atom are controlled by the leading
eigenpair of the tilted transfer kernel (see :mod:`.transfer_operator`):

* at prescribed stress f, the average bond length is the first moment of
  the squared leading eigenfunction at tilt beta*f;
* at prescribed strain x, the stress is the maximizer of
  xi*x - ln Lambda(xi), divided by beta;
* the large-N fluctuations of the average bond length follow a central
  limit theorem whose asymptotic variance is estimated by simulating the
  normalized Markov chain induced by the kernel.

The zero-temperature limit of the free energy is phi(x) = W1(x) + W2(2x);
for finite N the ground-state energy per bond J_N is computed by direct
minimization and satisfies J_N <= W1(x) + ((N-1)/N) W2(2x).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import kernels
from .potentials import PairPotential
from .rng import stream
from .stats import batch_means_ci
from .transfer_operator import (SpectralTable, UniformGrid, auto_grid,
                                build_kernel, leading_eigenpair,
                                log_lambda_curve, default_xi_grid)

_CHUNK = 65536


@dataclass(frozen=True)
class ChainModelNNN:
    """First- plus second-neighbour chain model.

    Attributes
    ----------
    W1, W2 : PairPotential
        First- and second-neighbour pair potentials.
    beta : float
        Inverse temperature, > 0.
    """

    W1: PairPotential
    W2: PairPotential
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def spectral_table(self, xi_max: float = 12.0, step: float = 0.05,
                      y_grid: UniformGrid | None = None,
                      n: int = 400) -> SpectralTable:
        """Tabulate the log leading-eigenvalue curve for this model."""
        if y_grid is None:
            y_grid = auto_grid(self.W1, self.beta, xi_max, n=n)
        return log_lambda_curve(self.W1, self.W2, self.beta,
                                default_xi_grid(xi_max, step), y_grid=y_grid)


@dataclass(frozen=True)
class ZeroTResult:
    """Zero-temperature energy and stress at strain x.

    Attributes
    ----------
    phi : float
        Limiting energy per bond, W1(x) + W2(2x).
    phi_prime : float
        Limiting stress, W1'(x) + 2 W2'(2x).
    J_N : float or None
        Ground-state energy per bond of the finite chain, if requested.
    minimizer : ndarray or None
        Interior atom positions of the finite-chain minimizer.
    """

    phi: float
    phi_prime: float
    J_N: float | None = None
    minimizer: np.ndarray | None = None


def _eigenpair_at_tilt(m: ChainModelNNN, xi: float,
                       y_grid: UniformGrid | None, n: int):
    if y_grid is None:
        y_grid = auto_grid(m.W1, m.beta, max(abs(xi), 1.0), n=n)
    K = build_kernel(m.W1, m.W2, m.beta, xi, y_grid)
    lam, psi = leading_eigenpair(K)
    return y_grid, K, lam, psi


def strain_for_stress_nnn(m: ChainModelNNN, f: float,
                          y_grid: UniformGrid | None = None,
                          n: int = 400) -> float:
    """Average bond length at prescribed stress f in the large-N limit.

    Computes the leading eigenfunction psi of the kernel tilted by
    xi = beta*f and returns the quadrature first moment of psi**2.
    """
    y_grid, _, _, psi = _eigenpair_at_tilt(m, m.beta * f, y_grid, n)
    w = y_grid.weights
    return float(np.sum(w * y_grid.nodes * psi ** 2))


def free_energy_limit_nnn(m: ChainModelNNN, x: float,
                          table: SpectralTable) -> tuple[float, float]:
    """Stress at prescribed strain x from the tabulated eigenvalue curve.

    Maximizes xi*x - ln Lambda(xi) over the table by solving
    (ln Lambda)'(xi) = x on a cubic spline of the table (the curve is
    convex, so its derivative is monotone).  Returns ``(F_prime, xi_star)``
    with F_prime = xi_star / beta.

    Raises
    ------
    ValueError
        If x lies outside the strain range representable by the table.
    """
    xi = np.asarray(table.xi_values, dtype=float)
    spline = CubicSpline(xi, table.log_lambda0Lambda)
    dspline = spline.derivative()
    lo, hi = float(xi[0]), float(xi[-1])
    if not (dspline(lo) <= x <= dspline(hi)):
        raise ValueError(
            "strain %g outside representable range [%g, %g]"
            % (x, dspline(lo), dspline(hi)))
    xi_star = brentq(lambda t: dspline(t) - x, lo, hi, xtol=1e-12)
    return xi_star / m.beta, xi_star


def _sample_inverse_cdf(weights: np.ndarray, u: float) -> int:
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    return int(np.searchsorted(cdf, u))


def asymptotic_variance_nnn(m: ChainModelNNN, f: float, chain_samples: int,
                            seed: int = 0, y_grid: UniformGrid | None = None,
                            n: int = 400, n_batches: int = 64):
    """CLT variance of the average bond length at stress f.

    Simulates the normalized Markov chain whose transition density is
    proportional to psi(y) K(x, y) (discretized row-wise on the grid),
    started from the stationary density psi**2, and estimates
    sigma^2 = lim N * Var(mean of y_1..y_N) by batch means.

    Returns
    -------
    sigma2 : float
        Estimated asymptotic variance.
    half_width : float
        95% half-width from the batch-means spread.
    unstable : bool
        True when the two halves of the run disagree by more than 20%,
        indicating too few samples.
    """
    xi = m.beta * f
    y_grid, K, lam, psi = _eigenpair_at_tilt(m, xi, y_grid, n)
    w = y_grid.weights
    y = y_grid.nodes
    # transition matrix rows: P[i, j] ∝ psi_j K(y_i, y_j) w_j.  Built in
    # log space and normalized per row by its own maximum, so rows deep in
    # the tail of the kernel (whose entries underflow in linear space)
    # still normalize to proper distributions.
    v1, _ = m.W1(y)
    v2, _ = m.W2(y[:, None] + y[None, :])
    with np.errstate(divide="ignore"):
        log_col = (xi * y / 2.0 - (m.beta / 2.0) * v1
                   + np.log(np.maximum(psi, 0.0)) + np.log(w))
        log_row = xi * y / 2.0 - (m.beta / 2.0) * v1
    log_p = log_row[:, None] + log_col[None, :] - m.beta * v2
    log_p -= log_p.max(axis=1, keepdims=True)
    P = np.exp(log_p)
    P /= P.sum(axis=1, keepdims=True)
    cdf_rows = np.cumsum(P, axis=1)
    cdf_rows /= cdf_rows[:, -1:]

    rng = stream(seed, 0)
    start = _sample_inverse_cdf(w * psi ** 2, rng.random())
    states = np.empty(chain_samples, dtype=np.int64)
    kernels.markov_chain_path(cdf_rows, start, rng.random(chain_samples),
                              states)
    ybar_series = y[states]
    mean_y = float(np.sum(w * y * psi ** 2))

    def sigma2_of(series):
        n_s = len(series)
        m_b = min(max(n_batches, 8), n_s)
        b = n_s // m_b
        batch_means = series[:m_b * b].reshape(m_b, b).mean(axis=1)
        return b * float(np.var(batch_means, ddof=1)), batch_means

    sigma2, batch_means = sigma2_of(ybar_series)
    half = len(ybar_series) // 2
    s_a, _ = sigma2_of(ybar_series[:half])
    s_b, _ = sigma2_of(ybar_series[half:])
    unstable = abs(s_a - s_b) > 0.2 * max(s_a, s_b)
    # the batch sigma2 estimates are ~chi^2 with n_batches-1 dof
    m_b = len(batch_means)
    half_width = 1.96 * sigma2 * np.sqrt(2.0 / (m_b - 1))
    return sigma2, half_width, unstable, mean_y


def reference_force_mc_nnn(m: ChainModelNNN, x: float, N: int, *,
                           steps: int, seed: int = 0,
                           dt: float | None = None,
                           burn_in: int | None = None,
                           overflow_guard: float = 1e6):
    """Monte Carlo estimate of the average force in a finite chain.

    Simulates the interior atoms of the pinned chain (u^0 = 0, u^N = x)
    by overdamped Langevin dynamics and averages the end-of-chain force
    observable W1'((x - u^{N-1})N) + W2'((x - u^{N-2})N).

    Returns ``(estimate, half_width_95)`` via batch means.
    """
    if N < 3:
        raise ValueError("need N >= 3 for a second-neighbour observable")
    if dt is None:
        # the second-neighbour coupling roughly doubles the stiffness of
        # the bond energies, so the stable step is smaller than for a
        # first-neighbour chain of the same length
        dt = 0.01 / N ** 2
    if burn_in is None:
        burn_in = steps // 10
    code1, p1, hard = m.W1.kernel_spec()
    code2, p2, _ = m.W2.kernel_spec()
    u = x * np.arange(1, N) / N
    amp = np.sqrt(2.0 * dt / m.beta)
    gen = stream(seed, 0)
    obs = np.empty(steps)
    done = 0
    total = burn_in + steps
    while done < total:
        nsteps = min(_CHUNK, total - done)
        noise = gen.standard_normal((nsteps, N - 1))
        out = np.empty(nsteps)
        did, ok = kernels.chain_advance(u, x, code1, p1, code2, p2, True,
                                        hard, noise, dt, amp, overflow_guard,
                                        out)
        if not ok:
            raise FloatingPointError("chain trajectory diverged; reduce dt")
        lo = done - burn_in
        src0 = max(0, -lo)
        if src0 < did:
            obs[lo + src0 : lo + did] = out[src0:did]
        done += did
    return batch_means_ci(obs)


def zero_temperature(m: ChainModelNNN, x: float,
                     N: int | None = None) -> ZeroTResult:
    """Zero-temperature energy phi(x) = W1(x) + W2(2x) and stress phi'(x).

    When ``N`` is given, also minimizes the finite-chain energy per bond

        J_N = min (1/N) [ sum W1(y_i) + sum W2(v_i) ]

    over interior atoms by steepest descent with backtracking line search
    from the affine configuration, to gradient norm < 1e-10.  A warning is
    attached when W1 or phi fail a numerical convexity check near x.
    """
    v1, d1 = m.W1(np.array([x]))
    v2, d2 = m.W2(np.array([2.0 * x]))
    phi = float(v1[0] + v2[0])
    phi_prime = float(d1[0] + 2.0 * d2[0])
    if N is None:
        return ZeroTResult(phi=phi, phi_prime=phi_prime)
    if N < 3:
        raise ValueError("need N >= 3")

    def energy_grad(u):
        # u: interior scaled positions u^1..u^{N-1}; with u^0=0, u^N=x
        full = np.concatenate(([0.0], u, [x]))
        yb = np.diff(full) * N           # first-neighbour bond lengths
        vb = yb[:-1] + yb[1:]            # second-neighbour distances
        w1, dw1 = m.W1(yb)
        w2, dw2 = m.W2(vb)
        e = (np.sum(w1) + np.sum(w2)) / N
        # dE/du^j = W1'(y_j) - W1'(y_{j+1}) + W2'(v_{j-1}) - W2'(v_{j+1}),
        # each bond derivative carrying a factor N that cancels the 1/N of e
        g = dw1[:-1] - dw1[1:]
        g[1:] += dw2[:-1]
        g[:-1] -= dw2[1:]
        return e, g

    u = x * np.arange(1, N) / N
    e, g = energy_grad(u)
    step = 1.0 / N ** 2
    prev_u = prev_g = None
    for _ in range(500000):
        gn = np.linalg.norm(g)
        if gn < 1e-10:
            break
        if prev_u is not None:
            # Barzilai-Borwein step length; the stiffness of the bond
            # energies scales like N^2, which fixed steps handle poorly
            s = u - prev_u
            dg = g - prev_g
            denom = float(dg @ dg)
            if denom > 0:
                step = abs(float(s @ dg)) / denom
        step = min(max(step, 1e-18), 1.0)
        while True:
            trial = u - step * g
            e_t, g_t = energy_grad(trial)
            if e_t <= e + 1e-12 * abs(e):
                break
            step *= 0.5
            if step < 1e-18:
                raise RuntimeError("line search failed at |g| = %.3e" % gn)
        prev_u, prev_g = u, g
        u, e, g = trial, e_t, g_t
    else:
        raise RuntimeError("descent did not converge: |g| = %.3e"
                           % np.linalg.norm(g))
    upper = float(m.W1(np.array([x]))[0][0]
                  + (N - 1) / N * m.W2(np.array([2.0 * x]))[0][0])
    if e > upper + 1e-12:
        raise RuntimeError("minimizer above the analytic upper bound")
    return ZeroTResult(phi=phi, phi_prime=phi_prime, J_N=e, minimizer=u)
