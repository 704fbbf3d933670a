"""Second-neighbour chain: spectra, duality, variance, references, zero-T."""

import numpy as np
import pytest
from scipy import integrate, optimize

from cgchain.chain_nn import ChainModelNN, strain_for_stress_nn
from cgchain.chain_nnn import (
    ChainModelNNN,
    asymptotic_variance_nnn,
    free_energy_limit_nnn,
    reference_force_mc_nnn,
    strain_for_stress_nnn,
    zero_temperature,
)
from cgchain.potentials import PairPotential

W1 = PairPotential.quartic_w1()
W2 = PairPotential.quartic_w2()
ZERO = PairPotential.polynomial([0.0])


@pytest.fixture(scope="module")
def quartic_model():
    return ChainModelNNN(W1, W2, 1.0)


@pytest.fixture(scope="module")
def quartic_table(quartic_model):
    return quartic_model.spectral_table(xi_max=10.0, step=0.1, n=300)


class TestStressStrain:
    def test_reduces_to_first_neighbour_when_w2_vanishes(self):
        m2 = ChainModelNNN(W1, ZERO, 1.0)
        m1 = ChainModelNN(W1, 1.0)
        for f in (-0.5, 0.0, 1.0, 2.0):
            assert strain_for_stress_nnn(m2, f) == pytest.approx(
                strain_for_stress_nn(m1, f), abs=1e-7)

    def test_strain_monotone_in_stress(self, quartic_model):
        fs = np.linspace(-1.0, 4.0, 11)
        xs = [strain_for_stress_nnn(quartic_model, f) for f in fs]
        assert np.all(np.diff(xs) > 0)

    def test_duality_roundtrip(self, quartic_model, quartic_table):
        for x in (1.0, 1.4, 1.7):
            Fp, xi_star = free_energy_limit_nnn(quartic_model, x, quartic_table)
            assert xi_star == pytest.approx(quartic_model.beta * Fp)
            assert strain_for_stress_nnn(quartic_model, Fp) == pytest.approx(
                x, abs=1e-6)

    def test_out_of_range_strain_raises(self, quartic_model, quartic_table):
        with pytest.raises(ValueError):
            free_energy_limit_nnn(quartic_model, 50.0, quartic_table)


class TestAsymptoticVariance:
    def test_iid_case_matches_single_bond_variance(self):
        # with W2 == 0 the chain is a product measure and the asymptotic
        # variance is the plain tilted single-bond variance
        m = ChainModelNNN(W1, ZERO, 1.0)
        f = 1.0
        weight = lambda y: np.exp(f * y - W1.value(y))
        z, _ = integrate.quad(weight, -15, 15)
        mu, _ = integrate.quad(lambda y: y * weight(y), -15, 15)
        mu /= z
        m2, _ = integrate.quad(lambda y: y * y * weight(y), -15, 15)
        var = m2 / z - mu**2
        s2, hw, unstable, mean_y = asymptotic_variance_nnn(
            m, f, 400_000, seed=2, n_batches=2000)
        assert mean_y == pytest.approx(mu, abs=1e-6)
        assert not unstable
        assert abs(s2 - var) < 4 * hw

    def test_correlated_case_matches_transition_matrix_oracle(self):
        # deterministic oracle: sigma^2 = Var(y) + 2 sum_k Cov(y_0, y_k)
        # computed by iterating the transition matrix on the observable
        from cgchain.transfer_operator import auto_grid, build_kernel, leading_eigenpair

        m = ChainModelNNN(W1, W2, 1.0)
        f = 1.5
        xi = m.beta * f
        grid = auto_grid(W1, m.beta, max(abs(xi), 1.0), n=400)
        K = build_kernel(W1, W2, m.beta, xi, grid)
        lam, psi = leading_eigenpair(K)
        y, w = grid.nodes, grid.weights
        # P[i, j] proportional to psi_j K(y_i, y_j) w_j, rows normalized;
        # restrict to the support (kernel tails underflow to zero rows)
        raw = K.entries / np.sqrt(w)[:, None] / np.sqrt(w)[None, :]
        s = (raw @ (psi * w) > 0) & (psi > 0)
        raw, y, w, psi = raw[np.ix_(s, s)], y[s], w[s], psi[s]
        P = raw * (psi * w)[None, :]
        P /= P.sum(axis=1, keepdims=True)
        pi = w * psi**2
        pi /= pi.sum()
        mu = float(pi @ y)
        v = y.copy()
        sigma2 = float(pi @ (y * y)) - mu**2
        c0 = sigma2
        for _ in range(10000):
            v = P @ v
            c = float(pi @ (y * v)) - mu**2
            sigma2 += 2 * c
            if abs(c) < 1e-14 * c0:
                break
        s2, hw, unstable, _ = asymptotic_variance_nnn(
            m, f, 400_000, seed=3, n_batches=400)
        assert not unstable
        assert abs(s2 - sigma2) < 4 * hw


class TestMonteCarloReference:
    def test_three_bond_chain_matches_quadrature_oracle(self, quartic_model):
        x, N = 1.3, 3

        def logw(u1, u2):
            y = np.array([u1, u2 - u1, x - u2]) * N
            v = y[:-1] + y[1:]
            return -(W1.value(y).sum() + W2.value(v).sum())

        def obs(u1, u2):
            return W1.derivative((x - u2) * N) + W2.derivative((x - u1) * N)

        z, _ = integrate.dblquad(lambda b, a: np.exp(logw(a, b)),
                                 -2, 3, -2, 3, epsabs=1e-12)
        o, _ = integrate.dblquad(lambda b, a: obs(a, b) * np.exp(logw(a, b)),
                                 -2, 3, -2, 3, epsabs=1e-12)
        est, hw = reference_force_mc_nnn(quartic_model, x, N,
                                         steps=2_000_000, seed=4)
        assert abs(est - o / z) < 4 * hw
        assert hw < 0.05

    def test_seed_reproducibility(self, quartic_model):
        a = reference_force_mc_nnn(quartic_model, 1.3, 4, steps=50_000, seed=9)
        b = reference_force_mc_nnn(quartic_model, 1.3, 4, steps=50_000, seed=9)
        assert a == b

    def test_validation(self, quartic_model):
        with pytest.raises(ValueError):
            reference_force_mc_nnn(quartic_model, 1.3, 2, steps=100)


class TestZeroTemperature:
    def test_limit_energy_and_stress(self, quartic_model):
        r = zero_temperature(quartic_model, 1.4)
        assert r.phi == pytest.approx(W1.value(1.4) + W2.value(2.8), abs=1e-14)
        assert r.phi_prime == pytest.approx(
            W1.derivative(1.4) + 2 * W2.derivative(2.8), abs=1e-14)

    def test_affine_chain_is_exact_without_second_neighbours(self):
        m = ChainModelNNN(W1, ZERO, 1.0)
        r = zero_temperature(m, 1.4, N=12)
        assert r.J_N == pytest.approx(W1.value(1.4), abs=1e-12)

    def test_upper_bound_and_small_chain_oracle(self, quartic_model):
        x, N = 1.4, 6
        r = zero_temperature(quartic_model, x, N=N)
        bound = W1.value(x) + (N - 1) / N * W2.value(2 * x)
        assert r.J_N <= bound + 1e-12

        def energy(u):
            full = np.concatenate(([0.0], u, [x]))
            y = np.diff(full) * N
            v = y[:-1] + y[1:]
            return (W1.value(y).sum() + W2.value(v).sum()) / N

        res = optimize.minimize(energy, x * np.arange(1, N) / N,
                                method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-14,
                                         "maxiter": 40000, "maxfev": 40000})
        assert r.J_N == pytest.approx(res.fun, abs=1e-9)

    def test_validation(self, quartic_model):
        with pytest.raises(ValueError):
            zero_temperature(quartic_model, 1.4, N=2)
