"""Command-line interface: wiring, file formats, exit codes."""

import numpy as np
import pytest

from cgchain.cli import (
    CONFIG_ERROR,
    NUMERICAL_ERROR,
    _load_table,
    main_cgchain,
    main_cgdyn,
)


def read_csv(path):
    header = {}
    columns = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                header[key] = val
            elif columns is None:
                columns = line.split(",")
            else:
                rows.append(line.split(","))
    return header, columns, rows


def write_profile_csv(path, z, A, sigma2=None, counts=None):
    sigma2 = np.ones_like(z) if sigma2 is None else sigma2
    counts = np.full(len(z), 10**6) if counts is None else counts
    Ap = np.gradient(A, z)
    b = np.gradient(sigma2, z) - sigma2 * Ap
    with open(path, "w") as fh:
        fh.write("# period=None\n")
        fh.write("z,A,A_prime,b,sigma2,count\n")
        for row in zip(z, A, Ap, b, sigma2, counts):
            fh.write(",".join("%.12g" % v for v in row) + "\n")


class TestChainCli:
    def test_nn_force_writes_resolved_config(self, tmp_path, capsys):
        out = tmp_path / "force.csv"
        rc = main_cgchain(["nn", "force", "--x", "1.4", "--beta", "1.0",
                           "--out", str(out)])
        assert rc == 0
        header, columns, rows = read_csv(out)
        assert columns == ["x", "F_prime", "F"]
        assert header["beta"] == "1.0"
        assert "seed" in header
        assert float(rows[0][1]) == pytest.approx(2.146, abs=5e-3)

    def test_svg_is_rendered_for_curves(self, tmp_path):
        out = tmp_path / "stress.csv"
        rc = main_cgchain(["nn", "stress", "--f", "0,0.5,1.0,1.5",
                           "--out", str(out), "--svg"])
        assert rc == 0
        svg = (tmp_path / "stress.svg").read_text()
        assert svg.startswith("<svg")
        assert "polyline" in svg

    def test_config_file_is_injected_and_echoed(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("beta = 2.0\nf = 0.0,1.0  # two stresses\n")
        out = tmp_path / "s.csv"
        rc = main_cgchain(["nn", "stress", "--config", str(cfg),
                           "--out", str(out)])
        assert rc == 0
        header, _, rows = read_csv(out)
        assert header["beta"] == "2.0"
        assert len(rows) == 2

    def test_explicit_flag_overrides_config_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("beta = 2.0\n")
        out = tmp_path / "s.csv"
        rc = main_cgchain(["nn", "stress", "--config", str(cfg),
                           "--beta", "3.0", "--out", str(out)])
        assert rc == 0
        header, _, _ = read_csv(out)
        assert header["beta"] == "3.0"

    def test_unknown_config_key_is_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus-key = 1\n")
        rc = main_cgchain(["nn", "stress", "--config", str(cfg)])
        assert rc == CONFIG_ERROR

    def test_missing_subcommand_is_config_error(self):
        assert main_cgchain(["nn"]) == CONFIG_ERROR
        assert main_cgchain(["bogus"]) == CONFIG_ERROR

    def test_divergent_reference_is_numerical_error(self, tmp_path):
        rc = main_cgchain(["nn", "reference", "--N", "4", "--steps", "2e4",
                           "--dt", "10.0",
                           "--out", str(tmp_path / "r.csv")])
        assert rc == NUMERICAL_ERROR

    def test_cg_seed_env_overrides_flag(self, tmp_path, monkeypatch):
        out_a = tmp_path / "a.csv"
        out_b = tmp_path / "b.csv"
        out_c = tmp_path / "c.csv"
        args = ["nn", "reference", "--N", "3", "--steps", "3e4", "--x", "1.2"]
        monkeypatch.setenv("CG_SEED", "5")
        assert main_cgchain(args + ["--seed", "7", "--out", str(out_a)]) == 0
        assert main_cgchain(args + ["--seed", "9", "--out", str(out_b)]) == 0
        monkeypatch.delenv("CG_SEED")
        assert main_cgchain(args + ["--seed", "5", "--out", str(out_c)]) == 0
        ha, _, ra = read_csv(out_a)
        hb, _, rb = read_csv(out_b)
        hc, _, rc_rows = read_csv(out_c)
        assert ha["seed"] == hb["seed"] == hc["seed"] == "5"
        assert ra == rb == rc_rows

    def test_zero_t_and_spectrum_emit_tables(self, tmp_path):
        out = tmp_path / "zt.csv"
        assert main_cgchain(["nnn", "zero-t", "--x", "0.8,1.4", "--N", "12",
                             "--out", str(out)]) == 0
        _, columns, rows = read_csv(out)
        assert columns == ["x", "phi", "phi_prime", "J_N"]
        assert len(rows) == 2
        out2 = tmp_path / "sp.csv"
        assert main_cgchain(["nnn", "spectrum", "--xi-max", "2",
                             "--xi-step", "0.5", "--grid-n", "120",
                             "--out", str(out2)]) == 0
        _, columns, rows = read_csv(out2)
        assert columns == ["xi", "log_lambda"]
        assert len(rows) == 9


class TestDynCli:
    def test_simulate_includes_xi_column(self, tmp_path):
        out = tmp_path / "traj.csv"
        rc = main_cgdyn(["simulate", "--system", "toy2d", "--rc", "x",
                         "--steps", "50", "--burn-in", "100",
                         "--thinning", "2", "--out", str(out)])
        assert rc == 0
        _, columns, rows = read_csv(out)
        assert columns == ["step", "time", "q0", "q1", "xi"]
        assert len(rows) == 50
        # for this coordinate xi is the first degree of freedom
        assert float(rows[0][2]) == pytest.approx(float(rows[0][4]))

    def test_harvest_requires_rc(self, tmp_path):
        rc = main_cgdyn(["harvest", "--system", "toy2d",
                         "--out", str(tmp_path / "h.csv")])
        assert rc == CONFIG_ERROR

    def test_coeffs_roundtrip_through_csv(self, tmp_path):
        out = tmp_path / "coeffs.csv"
        rc = main_cgdyn(["coeffs", "--system", "toy2d", "--rc", "x",
                         "--steps", "3e5", "--burn-in", "2e4",
                         "--thinning", "1", "--bins", "32",
                         "--out", str(out)])
        assert rc == 0
        table = _load_table(str(out), 1.0)
        assert len(table.z_grid) == 32
        assert np.any(table.valid)
        assert np.nanmax(np.abs(table.sigma2[table.valid] - 1.0)) < 0.1

    def test_residence_effective_needs_coeffs_file(self, tmp_path):
        rc = main_cgdyn(["residence", "--system", "toy2d", "--rc", "x",
                         "--dynamics", "effective", "--realizations", "3",
                         "--out", str(tmp_path / "r.csv")])
        assert rc == CONFIG_ERROR

    def test_residence_effective_runs_from_profile(self, tmp_path):
        z = np.linspace(-1.6, 1.6, 81)
        A = 2.0 * (z**2 - 1) ** 2
        coeffs = tmp_path / "table.csv"
        write_profile_csv(str(coeffs), z, A)
        out = tmp_path / "r.csv"
        rc = main_cgdyn(["residence", "--system", "toy2d", "--rc", "x",
                         "--dynamics", "effective", "--realizations", "8",
                         "--coeffs-file", str(coeffs),
                         "--burn-in", "2e4", "--thinning", "20",
                         "--out", str(out)])
        assert rc == 0
        header, columns, rows = read_csv(out)
        assert rows[0][0] == "effective"
        assert float(rows[0][2]) > 0
        assert header["thresholds"]

    def test_kramers_closed_form_profile(self, tmp_path):
        out = tmp_path / "k.csv"
        rc = main_cgdyn(["kramers", "--system", "three-atom", "--rc",
                         "angle", "--beta", "1.0", "--out", str(out)])
        assert rc == 0
        _, columns, rows = read_csv(out)
        assert columns[:4] == ["delta_A", "omega_sp", "omega_well", "tau0"]
        assert float(rows[0][0]) > 0

    def test_kramers_without_barrier_is_config_error(self, tmp_path):
        z = np.linspace(-1, 1, 101)
        coeffs = tmp_path / "flat.csv"
        write_profile_csv(str(coeffs), z, z**2)
        rc = main_cgdyn(["kramers", "--coeffs-file", str(coeffs),
                         "--well", "0:0", "--saddle", "0.5:0.5",
                         "--out", str(tmp_path / "k.csv")])
        assert rc == CONFIG_ERROR

    def test_fit_recovers_exact_law(self, tmp_path, capsys):
        out = tmp_path / "fit.csv"
        pts = ",".join("%g:%g" % (b, 0.07 * np.exp(2.25 * b))
                       for b in (1.0, 1.5, 2.0, 3.0))
        rc = main_cgdyn(["fit", "--points", pts, "--out", str(out)])
        assert rc == 0
        header, _, rows = read_csv(out)
        # points pass through a %g format with 6 significant digits
        assert float(header["tau0"]) == pytest.approx(0.07, rel=1e-4)
        assert float(header["s"]) == pytest.approx(2.25, rel=1e-4)
        assert len(rows) == 4

    def test_fit_rejects_malformed_points(self, tmp_path):
        assert main_cgdyn(["fit", "--points", "1.0"]) == CONFIG_ERROR

    def test_fp_relaxes_to_boltzmann(self, tmp_path):
        z = np.linspace(-1.5, 1.5, 121)
        A = (z**2 - 1) ** 2
        coeffs = tmp_path / "table.csv"
        write_profile_csv(str(coeffs), z, A)
        out = tmp_path / "fp.csv"
        rc = main_cgdyn(["fp", "--coeffs-file", str(coeffs),
                         "--kind", "free-energy", "--fp-dt", "2e-4",
                         "--t-final", "40", "--out", str(out)])
        assert rc == 0
        header, _, rows = read_csv(out)
        assert float(header["tv_vs_boltzmann"]) < 1e-3
        dens = np.array([[float(a), float(b)] for a, b in rows])
        assert np.trapezoid(dens[:, 1], dens[:, 0]) == pytest.approx(
            1.0, abs=1e-6)
