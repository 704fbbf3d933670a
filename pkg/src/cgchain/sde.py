"""Overdamped Langevin simulation and residence-time measurement.

Provides the Euler-Maruyama engine for n-dimensional molecular systems

    X_{j+1} = X_j - dt * grad V(X_j) + sqrt(2 dt / beta) G_j,

a 1D engine for effective dynamics with tabulated drift and diffusion,
equilibrium harvesting of well-restricted initial conditions, and
first-passage (residence time) experiments for both kinds of dynamics.

All randomness is drawn from counter-based streams keyed by
(master seed, realization index), so realizations are independent and
reproducible regardless of execution order, and the compiled and
pure-python backends follow the same sample path (equal up to the ulp
rounding of transcendental functions).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels, rng
from .potentials import MolecularSystem, ReactionCoordinate

_CHUNK = 65536

#: Per-realization step cap for first-passage runs; realizations that do not
#: exit within the cap are reported as censored, never silently averaged.
STEP_CAP = 10 ** 9


@dataclass(frozen=True)
class TrajectoryConfig:
    """Simulation parameters for a single stochastic trajectory.

    Attributes
    ----------
    dt : float
        Euler-Maruyama time step.
    steps : int
        Number of recorded (post burn-in, thinned) states for sampling
        runs; ignored by first-passage runs.
    seed : int
        Master seed; realization i uses the substream (seed, i).
    burn_in : int
        Steps discarded before recording starts.
    thinning : int
        Keep every thinning-th state.
    overflow_guard : float
        Abort when any coordinate exceeds this magnitude.
    """

    dt: float = 1e-3
    steps: int = 10 ** 6
    seed: int = 0
    burn_in: int = 10 ** 6
    thinning: int = 10 ** 3
    overflow_guard: float = 1e6

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")

    def with_seed(self, seed: int) -> "TrajectoryConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class Sde1d:
    """1D SDE dz = drift(z) dt + sqrt(2/beta) * sigma(z) dB.

    Drift and diffusion are tabulated on a uniform grid and evaluated by
    linear interpolation; outside the grid they are clamped to the end
    values and the trajectory reflects at the grid edges (periodic
    coordinates wrap instead).
    """

    z_grid: np.ndarray
    drift: np.ndarray
    diffusion_sigma: np.ndarray
    beta: float
    period: float | None = None

    def __post_init__(self):
        if np.any(np.asarray(self.diffusion_sigma) <= 0):
            raise ValueError("diffusion_sigma must be positive on the grid")

    @property
    def periodic(self) -> bool:
        return self.period is not None

    @property
    def _grid_spec(self):
        z = np.asarray(self.z_grid, dtype=float)
        return float(z[0]), float(z[1] - z[0])


@dataclass(frozen=True)
class ResidenceTimeReport:
    """Aggregated first-passage times of independent realizations.

    ``half_width_95`` is 1.96 * stddev / sqrt(n); realizations hitting the
    step cap are counted in ``censored`` and excluded from the mean.
    """

    dynamics_kind: str
    n_realizations: int
    mean: float
    half_width_95: float
    thresholds: np.ndarray
    dt: float
    seed: int
    censored: int = 0
    times: np.ndarray = field(default=None, repr=False)


def _beta_of(s: MolecularSystem, beta: float | None) -> float:
    if beta is None:
        raise ValueError("beta must be provided")
    if not beta > 0:
        raise ValueError("beta must be positive")
    return beta


def simulate_overdamped(s: MolecularSystem, beta: float,
                        cfg: TrajectoryConfig,
                        q0: np.ndarray | None = None) -> np.ndarray:
    """Sample an equilibrium trajectory of the full system.

    Returns an array of shape (cfg.steps, dof) holding every
    ``cfg.thinning``-th state after ``cfg.burn_in`` raw steps.
    """
    beta = _beta_of(s, beta)
    q = (s.equilibrium() if q0 is None else np.asarray(q0, dtype=float)).copy()
    if q.shape != (s.dof_count,):
        raise ValueError("q0 has wrong dimension")
    advance = kernels.nd_drivers(s.energy_grad)
    amp = np.sqrt(2.0 * cfg.dt / beta)
    gen = rng.stream(cfg.seed, 0)
    out = np.empty((cfg.steps, s.dof_count))

    # burn-in
    left = cfg.burn_in
    while left > 0:
        nsteps = min(_CHUNK, left)
        noise = gen.standard_normal((nsteps, s.dof_count))
        _, ok = advance(q, s.params, noise, cfg.dt, amp, cfg.overflow_guard)
        if not ok:
            raise FloatingPointError("trajectory overflow during burn-in")
        left -= nsteps

    recorded = 0
    while recorded < cfg.steps:
        batch = min(_CHUNK // cfg.thinning + 1, cfg.steps - recorded)
        noise = gen.standard_normal((batch * cfg.thinning, s.dof_count))
        for k in range(batch):
            sl = noise[k * cfg.thinning:(k + 1) * cfg.thinning]
            _, ok = advance(q, s.params, sl, cfg.dt, amp, cfg.overflow_guard)
            if not ok:
                raise FloatingPointError("trajectory overflow")
            out[recorded] = q
            recorded += 1
    return out


def harvest_well_samples(s: MolecularSystem, rc: ReactionCoordinate,
                         beta: float, well: tuple[float, float], count: int,
                         cfg: TrajectoryConfig,
                         q0: np.ndarray | None = None):
    """Collect equilibrium configurations whose xi lies inside ``well``.

    ``well`` is an (lo, hi) interval; for periodic coordinates the value is
    compared after wrapping relative to the interval midpoint.  Runs the
    full dynamics, looks at every ``cfg.thinning``-th state, and keeps it
    when the constraint holds, until ``count`` configurations are stored.

    Returns
    -------
    samples : ndarray, shape (count, dof)
    acceptance : float
        Fraction of inspected states that satisfied the constraint.

    Raises
    ------
    RuntimeError
        If the acceptance fraction drops below 1e-4 (the well definition
        is then likely wrong for this system).
    """
    beta = _beta_of(s, beta)
    lo, hi = well
    q = (s.equilibrium() if q0 is None else np.asarray(q0, dtype=float)).copy()
    advance = kernels.nd_drivers(s.energy_grad)
    amp = np.sqrt(2.0 * cfg.dt / beta)
    gen = rng.stream(cfg.seed, 0)

    left = cfg.burn_in
    while left > 0:
        nsteps = min(_CHUNK, left)
        noise = gen.standard_normal((nsteps, s.dof_count))
        _, ok = advance(q, s.params, noise, cfg.dt, amp, cfg.overflow_guard)
        if not ok:
            raise FloatingPointError("trajectory overflow during burn-in")
        left -= nsteps

    samples = np.empty((count, s.dof_count))
    stored = 0
    inspected = 0
    period = rc.period if rc.period is not None else 0.0
    mid = 0.5 * (lo + hi)
    while stored < count:
        noise = gen.standard_normal((cfg.thinning, s.dof_count))
        _, ok = advance(q, s.params, noise, cfg.dt, amp, cfg.overflow_guard)
        if not ok:
            raise FloatingPointError("trajectory overflow")
        inspected += 1
        val = rc.eval(q)[0]
        if period > 0.0:
            val = mid + (val - mid + period / 2.0) % period - period / 2.0
        if lo <= val <= hi:
            samples[stored] = q
            stored += 1
        if inspected >= 10000 and stored < inspected * 1e-4:
            raise RuntimeError(
                "well acceptance %.2e below 1e-4 after %d states; check the "
                "well definition" % (stored / inspected, inspected))
    return samples, stored / inspected


def _aggregate(times, censored, kind, thresholds, dt, seed):
    times = np.asarray(times, dtype=float)
    n = len(times)
    if n < 2:
        raise ValueError("need at least 2 uncensored realizations")
    mean = float(np.mean(times))
    half = 1.96 * float(np.std(times, ddof=1)) / np.sqrt(n)
    return ResidenceTimeReport(dynamics_kind=kind, n_realizations=n,
                               mean=mean, half_width_95=half,
                               thresholds=np.asarray(thresholds, dtype=float),
                               dt=dt, seed=seed, censored=censored,
                               times=times)


def residence_times_full(s: MolecularSystem, rc: ReactionCoordinate,
                         beta: float, initials: np.ndarray,
                         targets, cfg: TrajectoryConfig,
                         kind: str = "full") -> ResidenceTimeReport:
    """First-passage times of the full dynamics to any target interval.

    ``initials`` holds one starting configuration per realization
    (typically from :func:`harvest_well_samples`); ``targets`` is a list of
    (lo, hi) intervals in xi defining the exit test.
    """
    beta = _beta_of(s, beta)
    _, first_passage, _ = kernels.xi_drivers(s.energy_grad, rc.xi_eval)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    amp = np.sqrt(2.0 * cfg.dt / beta)
    period = rc.period if rc.period is not None else 0.0
    times = []
    censored = 0
    for i in range(len(initials)):
        q = np.asarray(initials[i], dtype=float).copy()
        gen = rng.stream(cfg.seed, i + 1)
        steps_done = 0
        hit = False
        while steps_done < STEP_CAP:
            nsteps = min(_CHUNK, STEP_CAP - steps_done)
            noise = gen.standard_normal((nsteps, s.dof_count))
            did, hit, ok = first_passage(q, s.params, rc.params, noise,
                                         cfg.dt, amp, cfg.overflow_guard,
                                         targets, period)
            if not ok:
                raise FloatingPointError("trajectory overflow in realization "
                                         "%d" % i)
            steps_done += did
            if hit:
                break
        if hit:
            times.append(steps_done * cfg.dt)
        else:
            censored += 1
    return _aggregate(times, censored, kind, targets, cfg.dt, cfg.seed)


def residence_times_1d(sde: Sde1d, initials: np.ndarray, targets,
                       cfg: TrajectoryConfig,
                       kind: str = "effective") -> ResidenceTimeReport:
    """First-passage times of the tabulated 1D SDE.

    ``initials`` holds one starting value of the coarse variable per
    realization.
    """
    zlo, dz = sde._grid_spec
    drift = np.asarray(sde.drift, dtype=float)
    sigma = np.asarray(sde.diffusion_sigma, dtype=float)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    amp = np.sqrt(2.0 * cfg.dt / sde.beta)
    period = sde.period if sde.period is not None else 0.0
    times = []
    censored = 0
    for i in range(len(initials)):
        z = float(initials[i])
        gen = rng.stream(cfg.seed, i + 1)
        steps_done = 0
        hit = False
        while steps_done < STEP_CAP:
            nsteps = min(_CHUNK, STEP_CAP - steps_done)
            noise = gen.standard_normal(nsteps)
            did, hit, z = kernels.sde1d_first_passage(
                z, zlo, dz, drift, sigma, sde.periodic, period, noise,
                cfg.dt, amp, targets)
            steps_done += did
            if hit:
                break
        if hit:
            times.append(steps_done * cfg.dt)
        else:
            censored += 1
    return _aggregate(times, censored, kind, targets, cfg.dt, cfg.seed)


def simulate_sde1d(sde: Sde1d, z0: float, cfg: TrajectoryConfig) -> np.ndarray:
    """Sample a trajectory of the 1D SDE, thinned like the full engine."""
    zlo, dz = sde._grid_spec
    drift = np.asarray(sde.drift, dtype=float)
    sigma = np.asarray(sde.diffusion_sigma, dtype=float)
    amp = np.sqrt(2.0 * cfg.dt / sde.beta)
    period = sde.period if sde.period is not None else 0.0
    gen = rng.stream(cfg.seed, 0)
    z = float(z0)

    left = cfg.burn_in
    rec = np.empty(_CHUNK)
    while left > 0:
        nsteps = min(_CHUNK, left)
        noise = gen.standard_normal(nsteps)
        z = kernels.sde1d_advance(z, zlo, dz, drift, sigma, sde.periodic,
                                  period, noise, cfg.dt, amp, rec[:nsteps])
        left -= nsteps

    out = np.empty(cfg.steps)
    recorded = 0
    while recorded < cfg.steps:
        batch = min((_CHUNK // cfg.thinning) + 1, cfg.steps - recorded)
        nsteps = batch * cfg.thinning
        noise = gen.standard_normal(nsteps)
        rec2 = np.empty(nsteps)
        z = kernels.sde1d_advance(z, zlo, dz, drift, sigma, sde.periodic,
                                  period, noise, cfg.dt, amp, rec2)
        out[recorded:recorded + batch] = rec2[cfg.thinning - 1::cfg.thinning]
        recorded += batch
    return out
