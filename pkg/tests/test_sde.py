"""Langevin engines: full systems, 1D effective dynamics, first passage."""

import numpy as np
import pytest
from scipy import integrate

import cgchain.sde as sde_mod
from cgchain.potentials import make_reaction_coordinate, make_system
from cgchain.sde import (
    Sde1d,
    TrajectoryConfig,
    harvest_well_samples,
    residence_times_1d,
    residence_times_full,
    simulate_overdamped,
    simulate_sde1d,
)


class TestTrajectoryConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            TrajectoryConfig(dt=0.0)
        with pytest.raises(ValueError):
            TrajectoryConfig(thinning=0)

    def test_with_seed(self):
        cfg = TrajectoryConfig(seed=1)
        assert cfg.with_seed(7).seed == 7
        assert cfg.with_seed(7).dt == cfg.dt


class TestFullDynamics:
    def test_toy2d_moments_match_quadrature(self):
        s = make_system("toy2d")
        V = lambda x, y: s.eval(np.array([x, y]))[0]
        f = lambda y, x: np.exp(-V(x, y))
        z, _ = integrate.dblquad(f, -3, 3, -4, 6, epsabs=1e-11)
        mx2, _ = integrate.dblquad(lambda y, x: x * x * np.exp(-V(x, y)),
                                   -3, 3, -4, 6, epsabs=1e-11)
        cfg = TrajectoryConfig(dt=1e-3, steps=300_000, burn_in=50_000,
                               thinning=10, seed=3)
        out = simulate_overdamped(s, 1.0, cfg)
        assert out.shape == (300_000, 2)
        # double-well hopping decorrelates slowly; the tolerance reflects it
        assert np.mean(out[:, 0]) == pytest.approx(0.0, abs=0.15)
        assert np.mean(out[:, 0] ** 2) == pytest.approx(mx2 / z, abs=0.06)

    def test_seed_reproducibility(self):
        s = make_system("three-atom")
        cfg = TrajectoryConfig(dt=1e-3, steps=2_000, burn_in=1_000,
                               thinning=2, seed=5)
        a = simulate_overdamped(s, 1.0, cfg)
        b = simulate_overdamped(s, 1.0, cfg)
        c = simulate_overdamped(s, 1.0, cfg.with_seed(6))
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_overflow_raises(self):
        s = make_system("toy2d")
        cfg = TrajectoryConfig(dt=5.0, steps=1_000, burn_in=100, seed=0)
        with pytest.raises(FloatingPointError):
            simulate_overdamped(s, 1.0, cfg)


class TestHarvesting:
    def test_samples_satisfy_constraint(self):
        s = make_system("toy2d")
        rc = make_reaction_coordinate("toy2d", "x")
        cfg = TrajectoryConfig(dt=1e-3, burn_in=20_000, thinning=20, seed=2)
        samples, acceptance = harvest_well_samples(
            s, rc, 1.0, (0.5, 10.0), 200, cfg)
        assert samples.shape == (200, 2)
        assert np.all((samples[:, 0] >= 0.5) & (samples[:, 0] <= 10.0))
        assert 0.1 < acceptance <= 1.0

    def test_unreachable_well_raises(self):
        s = make_system("toy2d")
        rc = make_reaction_coordinate("toy2d", "x")
        cfg = TrajectoryConfig(dt=1e-3, burn_in=1_000, thinning=1, seed=2)
        with pytest.raises(RuntimeError):
            harvest_well_samples(s, rc, 1.0, (50.0, 51.0), 10, cfg)


class TestSde1d:
    def grid(self, lo, hi, n):
        return np.linspace(lo, hi, n)

    def test_validation(self):
        z = self.grid(-1, 1, 11)
        with pytest.raises(ValueError):
            Sde1d(z, np.zeros(11), np.zeros(11), 1.0)

    def test_ou_stationary_variance(self):
        # dz = -z dt + sqrt(2/beta) dB has stationary variance 1/beta
        beta = 2.0
        z = self.grid(-6, 6, 601)
        sde = Sde1d(z, -z, np.ones_like(z), beta)
        cfg = TrajectoryConfig(dt=1e-3, steps=400_000, burn_in=100_000,
                               thinning=5, seed=4)
        traj = simulate_sde1d(sde, 0.0, cfg)
        assert np.mean(traj) == pytest.approx(0.0, abs=0.02)
        assert np.var(traj) == pytest.approx(1.0 / beta, abs=0.02)

    def test_reflecting_edges_give_uniform_density(self):
        z = self.grid(0.0, 1.0, 101)
        sde = Sde1d(z, np.zeros_like(z), np.ones_like(z), 1.0)
        cfg = TrajectoryConfig(dt=1e-4, steps=400_000, burn_in=50_000,
                               thinning=5, seed=6)
        traj = simulate_sde1d(sde, 0.5, cfg)
        assert np.all((traj >= 0.0) & (traj <= 1.0))
        assert np.mean(traj) == pytest.approx(0.5, abs=0.02)
        assert np.var(traj) == pytest.approx(1.0 / 12.0, abs=0.01)

    def test_periodic_coordinate_transports_unwrapped(self):
        # periodic coordinates are never reflected: a constant drift keeps
        # winding, and the trajectory is reported unwrapped
        z = self.grid(-np.pi, np.pi, 129)
        sde = Sde1d(z, np.full_like(z, 3.0), np.ones_like(z), 1.0,
                    period=2 * np.pi)
        cfg = TrajectoryConfig(dt=1e-3, steps=50_000, burn_in=0,
                               thinning=1, seed=7)
        traj = simulate_sde1d(sde, 0.0, cfg)
        t_final = cfg.steps * cfg.dt
        assert traj[-1] == pytest.approx(3.0 * t_final, abs=0.05 * 3.0 * t_final)


class TestFirstPassage:
    def test_pure_diffusion_exit_time(self):
        # symmetric exit from (-a, a) started at 0: E tau = beta a^2 / 2
        beta, a = 1.0, 0.5
        z = np.linspace(-2, 2, 201)
        sde = Sde1d(z, np.zeros_like(z), np.ones_like(z), beta)
        cfg = TrajectoryConfig(dt=1e-4, seed=8)
        rep = residence_times_1d(sde, np.zeros(400),
                                 [(-10.0, -a), (a, 10.0)], cfg)
        expected = beta * a**2 / 2.0
        assert rep.n_realizations == 400
        assert rep.censored == 0
        assert abs(rep.mean - expected) < 3 * rep.half_width_95
        assert rep.dynamics_kind == "effective"

    def test_full_first_passage_reproducible(self):
        s = make_system("three-atom")
        rc = make_reaction_coordinate("three-atom", "angle")
        th = s.parameters["theta_saddle"] + s.parameters["delta_theta"]
        from cgchain.potentials import three_atom_config
        initials = np.array([three_atom_config(th + 0.01 * k) for k in range(4)])
        cfg = TrajectoryConfig(dt=1e-3, seed=11)
        targets = [(-10.0, s.parameters["theta_saddle"] - 0.15)]
        full = residence_times_full(s, rc, 1.0, initials, targets, cfg)
        other = residence_times_full(s, rc, 1.0, initials, targets,
                                     cfg.with_seed(12))
        assert full.n_realizations == 4
        assert np.all(full.times > 0)
        assert not np.array_equal(full.times, other.times)
        again = residence_times_full(s, rc, 1.0, initials, targets, cfg)
        assert np.array_equal(full.times, again.times)

    def test_censoring_is_reported(self, monkeypatch):
        monkeypatch.setattr(sde_mod, "STEP_CAP", 500)
        z = np.linspace(-2, 2, 201)
        sde = Sde1d(z, np.zeros_like(z), np.ones_like(z), 1.0)
        cfg = TrajectoryConfig(dt=1e-6, seed=9)
        # at dt=1e-6 a 500-step cap cannot reach the targets
        with pytest.raises(ValueError):
            residence_times_1d(sde, np.zeros(4), [(1.0, 10.0)], cfg)
