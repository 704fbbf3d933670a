"""Fokker-Planck evolution, conservation laws, and entropy diagnostics."""

import numpy as np
import pytest

from cgchain.cg_dynamics import table_from_profiles, make_sde
from cgchain.fp1d import (
    DensityGrid,
    boltzmann_density,
    relative_entropy,
    solve_fp,
    total_variation,
)
from cgchain.sde import Sde1d


def gaussian_density(z, mu, var):
    v = np.exp(-((z - mu) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)
    return DensityGrid(z, v).normalized()


@pytest.fixture
def ou_sde():
    # dz = -z dt + sqrt(2/beta) dB, beta = 1: stationary N(0, 1)
    z = np.linspace(-6.0, 6.0, 241)
    return Sde1d(z, -z, np.ones_like(z), 1.0)


class TestDensityGrid:
    def test_mass_and_moments(self):
        z = np.linspace(-8, 8, 801)
        p = gaussian_density(z, 0.5, 0.25)
        assert p.mass == pytest.approx(1.0, abs=1e-10)
        assert p.mean() == pytest.approx(0.5, abs=1e-10)
        assert p.variance() == pytest.approx(0.25, abs=1e-8)

    def test_rejects_negative_values(self):
        with pytest.raises(ValueError):
            DensityGrid(np.linspace(0, 1, 5), np.array([1, -1, 1, 1, 1.0]))


class TestEntropyAndDistance:
    def test_gaussian_relative_entropy_closed_form(self):
        # H(N(m1,v) | N(m2,v)) = (m1-m2)^2 / (2 v)
        z = np.linspace(-10, 10, 2001)
        p = gaussian_density(z, 0.0, 1.0)
        q = gaussian_density(z, 0.8, 1.0)
        assert relative_entropy(p, q) == pytest.approx(0.32, abs=1e-6)
        assert relative_entropy(p, p) == pytest.approx(0.0, abs=1e-12)

    def test_infinite_when_support_mismatch(self):
        z = np.linspace(0, 1, 101)
        p = DensityGrid(z, np.ones_like(z)).normalized()
        qv = np.ones_like(z)
        qv[:50] = 0.0
        q = DensityGrid(z, qv).normalized()
        assert relative_entropy(p, q) == np.inf

    def test_csiszar_kullback_inequality(self):
        # TV^2 <= H/2 for several density pairs
        z = np.linspace(-10, 10, 2001)
        gen = np.random.default_rng(3)
        for _ in range(5):
            p = gaussian_density(z, gen.uniform(-1, 1), gen.uniform(0.5, 2))
            q = gaussian_density(z, gen.uniform(-1, 1), gen.uniform(0.5, 2))
            tv = total_variation(p, q)
            h = relative_entropy(p, q)
            assert tv**2 <= h / 2 + 1e-12


class TestFokkerPlanck:
    def test_ou_mean_and_variance_laws(self, ou_sde):
        # exact: mean(t) = m0 e^-t, var(t) = 1 + (v0 - 1) e^-2t
        z = ou_sde.z_grid
        init = gaussian_density(z, 1.5, 0.2)
        t_final = 0.7
        final, _ = solve_fp(ou_sde, init, dt=1e-3, t_final=t_final)
        final = final.normalized()
        assert final.mean() == pytest.approx(1.5 * np.exp(-t_final), abs=2e-3)
        assert final.variance() == pytest.approx(
            1.0 + (0.2 - 1.0) * np.exp(-2 * t_final), abs=5e-3)

    def test_mass_conserved_and_stationary_state(self, ou_sde):
        z = ou_sde.z_grid
        init = gaussian_density(z, -2.0, 0.5)
        final, snaps = solve_fp(ou_sde, init, dt=1e-3, t_final=12.0,
                                n_snapshots=4)
        assert final.mass == pytest.approx(1.0, abs=1e-7)
        target = gaussian_density(z, 0.0, 1.0)
        assert total_variation(final.normalized(), target) < 1e-3
        assert len(snaps) == 6  # t=0, four interior, final

    def test_entropy_decays_monotonically(self, ou_sde):
        z = ou_sde.z_grid
        init = gaussian_density(z, 1.0, 0.3)
        target = gaussian_density(z, 0.0, 1.0)
        _, snaps = solve_fp(ou_sde, init, dt=1e-3, t_final=3.0,
                            n_snapshots=8)
        hs = [relative_entropy(p.normalized(), target) for _, p in snaps]
        assert all(b <= a + 1e-9 for a, b in zip(hs, hs[1:]))

    def test_grid_mismatch_raises(self, ou_sde):
        bad = gaussian_density(np.linspace(-5, 5, 241), 0.0, 1.0)
        with pytest.raises(ValueError):
            solve_fp(ou_sde, bad, dt=1e-3, t_final=0.1)

    def test_periodic_transport_conserves_mass(self):
        # periodic grids carry n distinct cells: no duplicated endpoint
        n = 128
        dz = 2 * np.pi / n
        z = -np.pi + dz * np.arange(n)
        sde = Sde1d(z, np.full_like(z, 1.0), np.ones_like(z), 4.0,
                    period=2 * np.pi)
        vals = 1.0 + 0.5 * np.cos(z)
        vals /= np.sum(vals) * dz
        init = DensityGrid(z, vals)
        # the cosine mode decays like exp(-D t) with D = sigma^2/beta = 1/4
        final, _ = solve_fp(sde, init, dt=5e-4, t_final=16.0)
        assert np.sum(final.values) * dz == pytest.approx(1.0, abs=1e-8)
        assert np.ptp(final.values) < 0.05 * np.mean(final.values)

    def test_double_well_converges_to_boltzmann(self):
        beta = 1.0
        z = np.linspace(-2.0, 2.0, 161)
        A = (z**2 - 1) ** 2
        table = table_from_profiles(z, A, beta)
        sde = make_sde(table, "effective")
        init = gaussian_density(z, -1.0, 0.05)
        final, _ = solve_fp(sde, init, dt=5e-4, t_final=60.0)
        assert total_variation(final.normalized(),
                               boltzmann_density(table)) < 1e-3

    def test_negative_overshoot_raises(self, ou_sde):
        # a needle-sharp initial condition with a large CN step oscillates
        z = ou_sde.z_grid
        v = np.zeros_like(z)
        v[len(z) // 2] = 1.0
        init = DensityGrid(z, v).normalized()
        with pytest.raises(FloatingPointError):
            solve_fp(ou_sde, init, dt=0.5, t_final=5.0)


class TestBoltzmannDensity:
    def test_matches_profile(self):
        z = np.linspace(-2, 2, 201)
        A = z**4 / 4
        table = table_from_profiles(z, A, 2.0)
        p = boltzmann_density(table)
        ref = np.exp(-2.0 * A)
        ref /= np.trapezoid(ref, z)
        assert p.values == pytest.approx(ref, abs=1e-12)
        assert p.mass == pytest.approx(1.0, abs=1e-12)
