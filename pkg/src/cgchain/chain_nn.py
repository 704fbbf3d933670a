"""Nearest-neighbour chain statics.

Thermodynamic-limit strain/stress relations by 1D quadrature and
Legendre transform, with finite-N Monte Carlo references sampled by
constrained overdamped Langevin dynamics.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, quadrature, rng, stats
from .potentials import PairPotential
from .quadrature import QuadratureSpec, auto_window, tilted_stats


@dataclass(frozen=True)
class ChainModelNN:
    W: PairPotential
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


def _log_boltzmann(m: ChainModelNN, f: float):
    def g(y):
        v, _ = m.W(y)
        return -m.beta * (v - f * y)

    return g


def default_window(m: ChainModelNN, f: float = 0.0, n: int = 2001) -> QuadratureSpec:
    c = m.W.argmin()
    return auto_window(_log_boltzmann(m, f), c, 6.0 / np.sqrt(m.beta), n)


def strain_for_stress_nn(m: ChainModelNN, f: float, quad: QuadratureSpec | None = None) -> float:
    """Macroscopic elongation for a prescribed force: the mean of the
    tilted single-bond Boltzmann density."""
    g = _log_boltzmann(m, f)
    if quad is None:
        quad = default_window(m, f)
    _, mean, _ = tilted_stats(g, quad)
    return float(mean)


def free_energy_limit_nn(m: ChainModelNN, x: float, quad: QuadratureSpec | None = None,
                         tol: float = 1e-10):
    """Thermodynamic-limit free energy and force at prescribed elongation.

    Maximizes xi*x - ln of the tilted partition function over xi
    (safeguarded Newton on the concave objective).  Returns
    (F_inf, F_inf_prime) with F_inf_prime = xi*/beta.
    """
    beta = m.beta
    c = m.W.argmin()

    def stats_at(xi):
        def g(y):
            v, _ = m.W(y)
            return xi * y - beta * v

        q = quad if quad is not None else auto_window(g, c + xi / max(beta, 1e-12), 6.0 / np.sqrt(beta))
        return tilted_stats(g, q)

    # Gaussian initial guess xi0 = beta W''(x_min) (x - x_min)
    h = 1e-5
    wpp = float((m.W.derivative(c + h) - m.W.derivative(c - h)) / (2 * h))
    xi = beta * wpp * (x - c)
    lo, hi = None, None  # bracket on xi: mean(lo) < x < mean(hi)
    for _ in range(200):
        _, mean, var = stats_at(xi)
        r = x - mean
        if abs(r) < 1e-15 and var > 0:
            break
        if r > 0:
            lo = xi
        else:
            hi = xi
        step = r / var
        nxt = xi + step
        if lo is not None and hi is not None and not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        elif lo is None and nxt < xi - 10.0:
            nxt = xi - 10.0
        elif hi is None and nxt > xi + 10.0:
            nxt = xi + 10.0
        if abs(nxt - xi) < tol:
            xi = nxt
            break
        xi = nxt
    else:
        raise RuntimeError("Legendre maximizer did not converge")

    def g(y):
        v, _ = m.W(y)
        return xi * y - beta * v

    q = quad if quad is not None else auto_window(g, c + xi / beta, 6.0 / np.sqrt(beta))
    logzq = quadrature.log_integral(g, q)
    logz = quadrature.log_integral(_log_boltzmann(m, 0.0),
                                   quad if quad is not None else default_window(m))
    f_inf = (xi * x - (logzq - logz)) / beta
    return float(f_inf), float(xi / beta)


def reference_force_mc_nn(m: ChainModelNN, x: float, N: int, *, steps: int, seed: int = 0,
                          dt: float | None = None, burn_in: int | None = None,
                          overflow_guard: float = 1e6):
    """Finite-N Monte Carlo estimate of the force at prescribed elongation.

    Samples u^1..u^{N-1} (endpoints pinned) by Euler-Maruyama and averages
    the end-bond force observable.  Returns (estimate, half_width_95).
    """
    if N < 2:
        raise ValueError("need N >= 2")
    if dt is None:
        # stability is limited by the stiffest bond excursions (quartic
        # potentials reach W'' ~ 25 at ordinary thermal fluctuations)
        dt = 0.01 / N**2
    if burn_in is None:
        burn_in = steps // 10
    code1, p1, hard = m.W.kernel_spec()
    code2, p2 = kernels.PAIR_QUADRATIC, np.zeros(1)
    u = np.linspace(0.0, x, N + 1)[1:-1].copy()
    amp = np.sqrt(2.0 * dt / m.beta)
    gen = rng.stream(seed, 0)
    obs = np.empty(steps)
    done = 0
    chunk = 65536
    total = burn_in + steps
    while done < total:
        nsteps = min(chunk, total - done)
        noise = gen.standard_normal((nsteps, N - 1))
        out = np.empty(nsteps)
        did, ok = kernels.chain_advance(u, x, code1, p1, code2, p2, False, hard,
                                        noise, dt, amp, overflow_guard, out)
        if not ok:
            raise FloatingPointError("chain trajectory diverged; reduce dt")
        lo = done - burn_in
        src0 = max(0, -lo)
        if src0 < did:
            obs[lo + src0 : lo + did] = out[src0:did]
        done += did
    return stats.batch_means_ci(obs)


def reference_force_mc_nn_neumann(m: ChainModelNN, f: float, N: int, *, steps: int,
                                  seed: int = 0, dt: float | None = None,
                                  burn_in: int | None = None,
                                  overflow_guard: float = 1e6):
    """NN chain with a free right end pulled by force f.

    Returns the vector of per-bond average forces (one per bond), for the
    homogeneous-stress check.
    """
    if dt is None:
        dt = 0.01 / N**2
    if burn_in is None:
        burn_in = steps // 10
    code1, p1, _ = m.W.kernel_spec()
    a = m.W.argmin()
    u = np.arange(1, N + 1) * a / N
    amp = np.sqrt(2.0 * dt / m.beta)
    gen = rng.stream(seed, 0)
    chunk = 65536
    # burn-in
    junk = np.zeros(N)
    done = 0
    while done < burn_in:
        nsteps = min(chunk, burn_in - done)
        noise = gen.standard_normal((nsteps, N))
        did, ok = kernels.chain_neumann_advance(u, f, code1, p1, noise, dt, amp,
                                                overflow_guard, junk)
        if not ok:
            raise FloatingPointError("chain trajectory diverged; reduce dt")
        done += did
    bond_sums = np.zeros(N)
    done = 0
    while done < steps:
        nsteps = min(chunk, steps - done)
        noise = gen.standard_normal((nsteps, N))
        did, ok = kernels.chain_neumann_advance(u, f, code1, p1, noise, dt, amp,
                                                overflow_guard, bond_sums)
        if not ok:
            raise FloatingPointError("chain trajectory diverged; reduce dt")
        done += did
    return bond_sums / steps
