"""Nearest-neighbour chain statics and the quadrature layer."""

import numpy as np
import pytest
from scipy.integrate import quad as scipy_quad

from cgchain import quadrature
from cgchain.chain_nn import (
    ChainModelNN,
    free_energy_limit_nn,
    reference_force_mc_nn,
    reference_force_mc_nn_neumann,
    strain_for_stress_nn,
)
from cgchain.potentials import PairPotential
from cgchain.quadrature import NonIntegrableError, QuadratureSpec, auto_window, tilted_stats


class TestQuadrature:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            QuadratureSpec(1.0, 0.0, 101)
        with pytest.raises(ValueError):
            QuadratureSpec(0.0, 1.0, 100)  # even node count

    def test_log_integral_gaussian(self):
        # integral of exp(-y^2 / (2 s^2)) = s sqrt(2 pi)
        s = 0.7
        spec = auto_window(lambda y: -y**2 / (2 * s**2), 0.0, 1.0)
        val = quadrature.log_integral(lambda y: -y**2 / (2 * s**2), spec)
        assert val == pytest.approx(np.log(s * np.sqrt(2 * np.pi)), abs=1e-12)

    def test_tilted_stats_gaussian(self):
        mu, s = 1.3, 0.4
        g = lambda y: -((y - mu) ** 2) / (2 * s**2)
        _, mean, var = tilted_stats(g, auto_window(g, 0.0, 1.0))
        assert mean == pytest.approx(mu, abs=1e-12)
        assert var == pytest.approx(s**2, abs=1e-12)

    def test_log_integral_matches_adaptive_oracle(self):
        g = lambda y: -0.5 * (y - 1) ** 4 - 0.3 * y**2 + 0.8 * y
        spec = auto_window(g, 1.0, 2.0)
        val = quadrature.log_integral(g, spec)
        oracle, _ = scipy_quad(lambda y: np.exp(g(y)), -30, 30, epsabs=1e-13)
        assert val == pytest.approx(np.log(oracle), abs=1e-10)

    def test_auto_window_rejects_growing_integrand(self):
        with pytest.raises(NonIntegrableError):
            auto_window(lambda y: +np.asarray(y) ** 2, 0.0, 1.0)

    def test_auto_window_covers_shifted_mass(self):
        # strongly tilted Gaussian: mass sits far from the initial center
        g = lambda y: -0.5 * (y - 40.0) ** 2
        spec = auto_window(g, 0.0, 1.0)
        assert spec.lo < 30.0 < 50.0 < spec.hi


class TestGaussianChain:
    """Quadratic bonds: everything is available in closed form."""

    def test_strain_for_stress_is_affine(self):
        m = ChainModelNN(PairPotential.quadratic(1.2), beta=2.5)
        for f in (-1.0, 0.0, 0.7, 3.0):
            assert strain_for_stress_nn(m, f) == pytest.approx(1.2 + f, abs=1e-10)

    def test_free_energy_is_quadratic(self):
        a = 0.8
        m = ChainModelNN(PairPotential.quadratic(a), beta=1.5)
        for x in (0.3, 1.0, 2.2):
            F, Fp = free_energy_limit_nn(m, x)
            assert Fp == pytest.approx(x - a, abs=1e-10)
            assert F == pytest.approx(0.5 * (x - a) ** 2, abs=1e-10)

    def test_temperature_independence(self):
        # for quadratic bonds the stress-strain relation has no beta dependence
        for beta in (0.5, 1.0, 4.0):
            m = ChainModelNN(PairPotential.quadratic(1.0), beta=beta)
            assert strain_for_stress_nn(m, 0.9) == pytest.approx(1.9, abs=1e-10)


class TestQuarticChain:
    def model(self, beta=1.0):
        return ChainModelNN(PairPotential.quartic_w1(), beta)

    def test_strain_monotone_in_stress(self):
        m = self.model()
        fs = np.linspace(-2.0, 4.0, 13)
        xs = [strain_for_stress_nn(m, f) for f in fs]
        assert np.all(np.diff(xs) > 0)

    def test_duality_roundtrip(self):
        m = self.model()
        for x in (0.6, 1.0, 1.4, 1.7):
            _, Fp = free_energy_limit_nn(m, x)
            assert strain_for_stress_nn(m, Fp) == pytest.approx(x, abs=1e-8)

    def test_force_convex_in_strain(self):
        m = self.model()
        xs = np.linspace(0.3, 1.8, 16)
        F = np.array([free_energy_limit_nn(m, x)[0] for x in xs])
        assert np.all(np.diff(F, 2) > -1e-12)


class TestMonteCarloReference:
    def test_two_bond_chain_matches_quadrature_oracle(self):
        # N=2 with pinned ends: the remaining dof is a plain 1D integral
        m = ChainModelNN(PairPotential.quartic_w1(), 1.0)
        x = 1.2
        w = m.W
        weight = lambda y: np.exp(-(w.value(y) + w.value(2 * x - y)))
        z, _ = scipy_quad(weight, -20, 20)
        oracle, _ = scipy_quad(lambda y: w.derivative(2 * x - y) * weight(y), -20, 20)
        oracle /= z
        est, hw = reference_force_mc_nn(m, x, 2, steps=400_000, seed=3)
        assert abs(est - oracle) < 4 * hw
        assert hw < 0.1

    def test_gaussian_chain_force_is_exact_mean(self):
        # quadratic bonds, pinned ends: every bond averages to x - a
        m = ChainModelNN(PairPotential.quadratic(1.0), 1.0)
        est, hw = reference_force_mc_nn(m, 1.5, 8, steps=300_000, seed=1)
        assert abs(est - 0.5) < 4 * hw

    def test_seed_reproducibility(self):
        m = ChainModelNN(PairPotential.quartic_w1(), 1.0)
        a = reference_force_mc_nn(m, 1.2, 4, steps=50_000, seed=11)
        b = reference_force_mc_nn(m, 1.2, 4, steps=50_000, seed=11)
        c = reference_force_mc_nn(m, 1.2, 4, steps=50_000, seed=12)
        assert a == b
        assert a != c

    def test_divergence_raises(self):
        m = ChainModelNN(PairPotential.quartic_w1(), 1.0)
        with pytest.raises(FloatingPointError):
            reference_force_mc_nn(m, 1.2, 4, steps=50_000, dt=10.0, seed=0)

    def test_free_end_stress_is_homogeneous(self):
        # quadratic bonds pulled at the free end: each bond force equals f
        m = ChainModelNN(PairPotential.quadratic(1.0), 1.0)
        bonds = reference_force_mc_nn_neumann(m, 0.8, 6, steps=2_000_000, seed=5)
        assert np.max(np.abs(bonds - 0.8)) < 0.03

    def test_input_validation(self):
        m = ChainModelNN(PairPotential.quartic_w1(), 1.0)
        with pytest.raises(ValueError):
            reference_force_mc_nn(m, 1.2, 1, steps=100)
        with pytest.raises(ValueError):
            ChainModelNN(PairPotential.quartic_w1(), -1.0)
