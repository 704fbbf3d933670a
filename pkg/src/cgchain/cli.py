"""Command-line interface.

Two entry points:

``cgchain``
    Chain statics: stress-strain relations, thermodynamic-limit forces,
    fluctuation variance, finite-chain Monte Carlo references, the
    zero-temperature limit, and the transfer-operator spectrum.

``cgdyn``
    Coarse-grained dynamics: full-system simulation, well harvesting,
    coefficient estimation, residence-time experiments, Kramers
    predictions, Arrhenius fits, Fokker-Planck solves, and stationarity
    checks.

Outputs are CSV files whose leading '#' comment lines echo the fully
resolved configuration (including the seed), so every artifact can be
replayed.  ``--svg`` additionally renders any two-column output as a
minimal polyline plot.  Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import chain_nn, chain_nnn, cg_dynamics, fp1d, sde, transfer_operator
from .potentials import (PairPotential, make_reaction_coordinate,
                         make_system)

CONFIG_ERROR = 2
NUMERICAL_ERROR = 3

#: Default well/target intervals per (system, rc): (start_well, targets).
WELLS = {
    ("three-atom", "angle"): lambda s: (
        (s.parameters["theta_saddle"] + 0.15, 10.0),
        [(-10.0, s.parameters["theta_saddle"] - 0.15)]),
    ("three-atom", "dist2"): lambda s: ((2.4, 100.0), [(0.0, 1.6)]),
    ("butane", "dihedral"): lambda s: (
        (-0.5, 0.5),
        [(2 * np.pi / 3 - 0.5, 2 * np.pi / 3 + 0.5),
         (-2 * np.pi / 3 - 0.5, -2 * np.pi / 3 + 0.5)]),
    ("toy2d", "x"): lambda s: ((0.8, 100.0), [(-100.0, -0.8)]),
}


class CliError(Exception):
    """Configuration problem; maps to exit code 2."""


def _parse_interval(text: str):
    parts = text.split(":")
    if len(parts) != 2:
        raise CliError("interval must be lo:hi, got %r" % text)
    return float(parts[0]), float(parts[1])


def _load_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path) as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliError("%s:%d: expected key=value" % (path, line_no))
                key, val = line.split("=", 1)
                out[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise CliError("cannot read config file: %s" % exc)
    return out


def _inject_config(argv: list) -> list:
    """Expand --config FILE into flags placed before the explicit ones.

    File entries become ``--key value`` flags injected right after the
    subcommand words, so flags given on the command line override them.
    Unknown keys are rejected by the argument parser itself.  Boolean
    entries use ``key=true`` / ``key=false``.
    """
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise CliError("--config needs a file path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    head = []
    while rest and not rest[0].startswith("-"):
        head.append(rest.pop(0))
    injected = []
    for key, val in _load_config_file(path).items():
        flag = "--" + key.replace("_", "-")
        if val.lower() == "true":
            injected.append(flag)
        elif val.lower() == "false":
            pass
        else:
            injected.extend([flag, val])
    return head + injected + rest


def _resolved_seed(args) -> int:
    env = os.environ.get("CG_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError("CG_SEED must be an integer, got %r" % env)
    return int(getattr(args, "seed", 0))


def _write_csv(path: str, columns, rows, config: dict):
    with open(path, "w") as fh:
        for key in sorted(config):
            fh.write("# %s=%s\n" % (key, config[key]))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(
                "%.12g" % v if isinstance(v, float) else str(v)
                for v in row) + "\n")
    print("wrote %s" % path)


def _write_svg(path: str, xs, ys, xlabel: str, ylabel: str):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    w, h, pad = 640, 420, 50
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    px = pad + (xs - x0) / (x1 - x0) * (w - 2 * pad)
    py = h - pad - (ys - y0) / (y1 - y0) * (h - 2 * pad)
    pts = " ".join("%.2f,%.2f" % (a, b) for a, b in zip(px, py))
    with open(path, "w") as fh:
        fh.write('<svg xmlns="http://www.w3.org/2000/svg" width="%d" '
                 'height="%d">\n' % (w, h))
        fh.write('<rect width="%d" height="%d" fill="white"/>\n' % (w, h))
        fh.write('<polyline points="%s" fill="none" stroke="black" '
                 'stroke-width="1"/>\n' % pts)
        fh.write('<text x="%d" y="%d" font-size="12">%s</text>\n'
                 % (w // 2, h - 12, xlabel))
        fh.write('<text x="12" y="%d" font-size="12" '
                 'transform="rotate(-90 12,%d)">%s</text>\n'
                 % (h // 2, h // 2, ylabel))
        fh.write('<text x="%d" y="20" font-size="10">[%.4g, %.4g] x '
                 '[%.4g, %.4g]</text>\n' % (pad, x0, x1, y0, y1))
        fh.write("</svg>\n")
    print("wrote %s" % path)


def _emit(args, stem: str, columns, rows, config: dict):
    out = getattr(args, "out", None) or (stem + ".csv")
    _write_csv(out, columns, rows, config)
    if getattr(args, "svg", False) and len(columns) >= 2 and len(rows) >= 2:
        svg_path = os.path.splitext(out)[0] + ".svg"
        _write_svg(svg_path, [r[0] for r in rows], [r[1] for r in rows],
                   columns[0], columns[1])


def _config_of(args, parser) -> dict:
    skip = {"config", "out", "svg", "func"}
    out = {k: v for k, v in vars(args).items()
           if k not in skip and not k.startswith("_")}
    if "seed" in out:
        # echo the seed actually used, honoring the CG_SEED override
        out["seed"] = _resolved_seed(args)
    return out


def _add_common(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--svg", action="store_true",
                   help="also render a polyline SVG of the first two columns")
    p.add_argument("--seed", type=int, default=0)


def _floats(text: str):
    return [float(t) for t in text.split(",") if t.strip()]


# ---------------------------------------------------------------------------
# cgchain
# ---------------------------------------------------------------------------

def _nn_model(args):
    return chain_nn.ChainModelNN(PairPotential.from_name(args.potential),
                                 args.beta)


def _nnn_model(args):
    return chain_nnn.ChainModelNNN(PairPotential.from_name(args.w1),
                                   PairPotential.from_name(args.w2),
                                   args.beta)


def cmd_nn_stress(args, parser):
    m = _nn_model(args)
    rows = [(f, chain_nn.strain_for_stress_nn(m, f)) for f in _floats(args.f)]
    _emit(args, "nn_stress", ["f", "y_star"], rows, _config_of(args, parser))


def cmd_nn_force(args, parser):
    m = _nn_model(args)
    rows = []
    for x in _floats(args.x):
        F, Fp = chain_nn.free_energy_limit_nn(m, x)
        rows.append((x, Fp, F))
        print("F'(%g) = %.10g" % (x, Fp))
    _emit(args, "nn_force", ["x", "F_prime", "F"], rows,
          _config_of(args, parser))


def cmd_nn_reference(args, parser):
    m = _nn_model(args)
    est, hw = chain_nn.reference_force_mc_nn(
        m, args.x, args.N, steps=int(args.steps), seed=_resolved_seed(args),
        dt=args.dt)
    print("F'_N(%g) = %.6g +- %.2g (N=%d)" % (args.x, est, hw, args.N))
    _emit(args, "nn_reference", ["x", "N", "estimate", "half_width_95"],
          [(args.x, args.N, est, hw)], _config_of(args, parser))


def cmd_nnn_stress(args, parser):
    m = _nnn_model(args)
    rows = [(f, chain_nnn.strain_for_stress_nnn(m, f, n=args.grid_n))
            for f in _floats(args.f)]
    _emit(args, "nnn_stress", ["f", "y_star"], rows, _config_of(args, parser))


def cmd_nnn_force(args, parser):
    m = _nnn_model(args)
    table = m.spectral_table(xi_max=args.xi_max, step=args.xi_step,
                             n=args.grid_n)
    rows = []
    for x in _floats(args.x):
        Fp, xi_star = chain_nnn.free_energy_limit_nnn(m, x, table)
        rows.append((x, Fp, xi_star))
        print("F'(%g) = %.10g" % (x, Fp))
    _emit(args, "nnn_force", ["x", "F_prime", "xi_star"], rows,
          _config_of(args, parser))


def cmd_nnn_variance(args, parser):
    m = _nnn_model(args)
    s2, hw, unstable, mean_y = chain_nnn.asymptotic_variance_nnn(
        m, args.f, int(args.samples), seed=_resolved_seed(args),
        n=args.grid_n)
    if unstable:
        print("warning: batch variance unstable; increase --samples")
    print("sigma2(%g) = %.6g +- %.2g" % (args.f, s2, hw))
    _emit(args, "nnn_variance",
          ["f", "sigma2", "half_width_95", "unstable", "mean_y"],
          [(args.f, s2, hw, int(unstable), mean_y)],
          _config_of(args, parser))


def cmd_nnn_reference(args, parser):
    m = _nnn_model(args)
    est, hw = chain_nnn.reference_force_mc_nnn(
        m, args.x, args.N, steps=int(args.steps), seed=_resolved_seed(args),
        dt=args.dt)
    print("F'_N(%g) = %.6g +- %.2g (N=%d)" % (args.x, est, hw, args.N))
    _emit(args, "nnn_reference", ["x", "N", "estimate", "half_width_95"],
          [(args.x, args.N, est, hw)], _config_of(args, parser))


def cmd_nnn_zero_t(args, parser):
    m = _nnn_model(args)
    rows = []
    for x in _floats(args.x):
        res = chain_nnn.zero_temperature(m, x, N=args.N)
        rows.append((x, res.phi, res.phi_prime,
                     res.J_N if res.J_N is not None else float("nan")))
        print("phi(%g) = %.8g, phi'(%g) = %.8g%s"
              % (x, res.phi, x, res.phi_prime,
                 "" if res.J_N is None else ", J_%d = %.8g"
                 % (args.N, res.J_N)))
    _emit(args, "nnn_zero_t", ["x", "phi", "phi_prime", "J_N"], rows,
          _config_of(args, parser))


def cmd_nnn_spectrum(args, parser):
    m = _nnn_model(args)
    table = m.spectral_table(xi_max=args.xi_max, step=args.xi_step,
                             n=args.grid_n)
    rows = list(zip(table.xi_values.tolist(),
                    table.log_lambda0Lambda.tolist()))
    _emit(args, "nnn_spectrum", ["xi", "log_lambda"], rows,
          _config_of(args, parser))


def build_cgchain_parser():
    parser = argparse.ArgumentParser(
        prog="cgchain",
        description="Thermodynamic-limit statics of atom chains")
    sub = parser.add_subparsers(dest="family", required=True)

    nn = sub.add_parser("nn", help="first-neighbour chain")
    nn_sub = nn.add_subparsers(dest="op", required=True)
    p = nn_sub.add_parser("stress")
    _add_common(p)
    p.add_argument("--potential", default="paper-quartic-W1")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--f", default="0.0", help="comma-separated stresses")
    p.set_defaults(func=cmd_nn_stress)
    p = nn_sub.add_parser("force")
    _add_common(p)
    p.add_argument("--potential", default="paper-quartic-W1")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--x", default="1.4", help="comma-separated strains")
    p.set_defaults(func=cmd_nn_force)
    p = nn_sub.add_parser("reference")
    _add_common(p)
    p.add_argument("--potential", default="paper-quartic-W1")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--x", type=float, default=1.4)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--steps", type=float, default=1e7)
    p.add_argument("--dt", type=float, default=None)
    p.set_defaults(func=cmd_nn_reference)

    nnn = sub.add_parser("nnn", help="first- plus second-neighbour chain")
    nnn_sub = nnn.add_subparsers(dest="op", required=True)

    def nnn_common(p, **extra):
        _add_common(p)
        p.add_argument("--w1", default="paper-quartic-W1")
        p.add_argument("--w2", default="paper-quartic-W2")
        p.add_argument("--beta", type=float, default=1.0)
        p.add_argument("--grid-n", type=int, default=400)

    p = nnn_sub.add_parser("stress")
    nnn_common(p)
    p.add_argument("--f", default="0.0")
    p.set_defaults(func=cmd_nnn_stress)
    p = nnn_sub.add_parser("force")
    nnn_common(p)
    p.add_argument("--x", default="1.4")
    p.add_argument("--xi-max", type=float, default=12.0)
    p.add_argument("--xi-step", type=float, default=0.05)
    p.set_defaults(func=cmd_nnn_force)
    p = nnn_sub.add_parser("variance")
    nnn_common(p)
    p.add_argument("--f", type=float, default=0.0)
    p.add_argument("--samples", type=float, default=1e6)
    p.set_defaults(func=cmd_nnn_variance)
    p = nnn_sub.add_parser("reference")
    nnn_common(p)
    p.add_argument("--x", type=float, default=1.4)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--steps", type=float, default=1e7)
    p.add_argument("--dt", type=float, default=None)
    p.set_defaults(func=cmd_nnn_reference)
    p = nnn_sub.add_parser("zero-t")
    nnn_common(p)
    p.add_argument("--x", default="1.4")
    p.add_argument("--N", type=int, default=None)
    p.set_defaults(func=cmd_nnn_zero_t)
    p = nnn_sub.add_parser("spectrum")
    nnn_common(p)
    p.add_argument("--xi-max", type=float, default=12.0)
    p.add_argument("--xi-step", type=float, default=0.05)
    p.set_defaults(func=cmd_nnn_spectrum)
    return parser


# ---------------------------------------------------------------------------
# cgdyn
# ---------------------------------------------------------------------------

def _system_rc(args):
    s = make_system(args.system)
    rc = make_reaction_coordinate(args.system, args.rc) if args.rc else None
    return s, rc


def _traj_config(args, **overrides):
    kw = dict(dt=args.dt, steps=int(args.steps),
              seed=_resolved_seed(args), burn_in=int(args.burn_in),
              thinning=int(args.thinning))
    kw.update(overrides)
    return sde.TrajectoryConfig(**kw)


def _load_table(path: str, beta: float) -> cg_dynamics.CoefficientTable:
    """Read a coefficient CSV written by `cgdyn coeffs` back into a table."""
    period = None
    with open(path) as fh:
        rows = []
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                if "period=" in line:
                    val = line.split("period=", 1)[1].strip()
                    if val not in ("", "None"):
                        period = float(val)
                continue
            if not line or line[0].isalpha() or line[0] == "z":
                continue
            rows.append([float(t) if t != "nan" else np.nan
                         for t in line.split(",")])
    data = np.asarray(rows)
    if data.shape[1] < 6:
        raise CliError("coefficient file %s has %d columns, expected 6"
                       % (path, data.shape[1]))
    return cg_dynamics.CoefficientTable(
        z_grid=data[:, 0], A=data[:, 1], A_prime=data[:, 2], b=data[:, 3],
        sigma2=data[:, 4], counts=data[:, 5].astype(np.int64), beta=beta,
        provenance="file", period=period)


def _default_wells(args, s):
    key = (args.system, args.rc)
    if key not in WELLS:
        raise CliError("no default wells for %s/%s; pass --well and "
                       "--targets" % key)
    return WELLS[key](s)


def cmd_simulate(args, parser):
    s, rc = _system_rc(args)
    cfg = _traj_config(args)
    traj = sde.simulate_overdamped(s, args.beta, cfg)
    columns = (["step", "time"] + ["q%d" % i for i in range(s.dof_count)]
               + (["xi"] if rc else []))
    rows = []
    for k in range(len(traj)):
        step = (k + 1) * cfg.thinning
        row = [step, step * cfg.dt] + [float(v) for v in traj[k]]
        if rc:
            row.append(float(rc.eval(traj[k])[0]))
        rows.append(tuple(row))
    _emit(args, "trajectory", columns, rows, _config_of(args, parser))


def cmd_harvest(args, parser):
    s, rc = _system_rc(args)
    if rc is None:
        raise CliError("--rc is required")
    well = (_parse_interval(args.well) if args.well
            else _default_wells(args, s)[0])
    cfg = _traj_config(args)
    samples, acceptance = sde.harvest_well_samples(
        s, rc, args.beta, well, int(args.count), cfg)
    print("acceptance fraction %.3f" % acceptance)
    columns = ["q%d" % i for i in range(s.dof_count)]
    config = _config_of(args, parser)
    config["acceptance"] = "%.6g" % acceptance
    _emit(args, "harvest", columns,
          [tuple(float(v) for v in q) for q in samples], config)


def cmd_coeffs(args, parser):
    s, rc = _system_rc(args)
    if rc is None:
        raise CliError("--rc is required")
    cfg = _traj_config(args)
    table = cg_dynamics.estimate_coefficients(
        s, rc, args.beta, cfg, nbins=args.bins, path=args.path,
        replicas=args.replicas)
    config = _config_of(args, parser)
    config["period"] = table.period if table.period is not None else "None"
    rows = [tuple(np.nan_to_num(v, nan=np.nan) for v in row)
            for row in zip(table.z_grid, table.A, table.A_prime, table.b,
                           table.sigma2, table.counts.astype(float))]
    sig = np.sqrt(table.sigma2[table.valid])
    if len(sig):
        print("sigma: mean %.4f, min %.4f, max %.4f"
              % (sig.mean(), sig.min(), sig.max()))
    _emit(args, "coeffs", ["z", "A", "A_prime", "b", "sigma2", "count"],
          rows, config)


def cmd_residence(args, parser):
    s, rc = _system_rc(args)
    if rc is None:
        raise CliError("--rc is required")
    well_default, targets_default = _default_wells(args, s)
    well = _parse_interval(args.well) if args.well else well_default
    targets = ([_parse_interval(t) for t in args.targets.split(",")]
               if args.targets else targets_default)
    seed = _resolved_seed(args)
    n = int(args.realizations)
    harvest_cfg = sde.TrajectoryConfig(
        dt=args.dt, seed=seed + 1, burn_in=int(args.burn_in),
        thinning=int(args.thinning))
    samples, _ = sde.harvest_well_samples(s, rc, args.beta, well, n,
                                          harvest_cfg)
    run_cfg = sde.TrajectoryConfig(dt=args.dt, seed=seed,
                                   burn_in=0, thinning=1)
    if args.dynamics == "full":
        report = sde.residence_times_full(s, rc, args.beta, samples, targets,
                                          run_cfg, kind="full")
    else:
        if not args.coeffs_file:
            raise CliError("--coeffs-file is required for 1D dynamics")
        table = _load_table(args.coeffs_file, args.beta)
        sde1 = cg_dynamics.make_sde(table, kind=args.dynamics)
        z0 = np.array([rc.eval(q)[0] for q in samples])
        report = sde.residence_times_1d(sde1, z0, targets, run_cfg,
                                        kind=args.dynamics)
    print("%s dynamics: mean residence %.5g +- %.3g (n=%d, censored %d)"
          % (report.dynamics_kind, report.mean, report.half_width_95,
             report.n_realizations, report.censored))
    config = _config_of(args, parser)
    config["thresholds"] = ";".join("%g:%g" % (a, b)
                                    for a, b in report.thresholds)
    _emit(args, "residence",
          ["dynamics", "n", "mean", "half_width_95", "censored", "dt",
           "seed"],
          [(report.dynamics_kind, report.n_realizations, report.mean,
            report.half_width_95, report.censored, report.dt, report.seed)],
          config)


def cmd_kramers(args, parser):
    if args.coeffs_file:
        table = _load_table(args.coeffs_file, args.beta)
        sel = table.valid & np.isfinite(table.A)
        z, A = table.z_grid[sel], table.A[sel]
        sigma = (np.sqrt(table.sigma2[sel])
                 if args.sigma_corrected else None)
    elif args.system == "three-atom" and args.rc == "angle":
        s = make_system("three-atom")
        ths = s.parameters["theta_saddle"]
        dth = s.parameters["delta_theta"]
        kth = s.parameters["k_theta"]
        z = np.linspace(ths - 2 * dth, ths + 2 * dth, 2001)
        A = 0.5 * kth * ((z - ths) ** 2 - dth ** 2) ** 2
        sigma = None
        if args.well is None:
            args.well = "%g:%g" % (ths + dth, ths + dth)
        if args.saddle is None:
            args.saddle = "%g:%g" % (ths, ths)
    else:
        raise CliError("pass --coeffs-file, or --system three-atom "
                       "--rc angle for the closed-form profile")
    if args.well is None or args.saddle is None:
        raise CliError("--well and --saddle are required with --coeffs-file")
    z_min = _parse_interval(args.well)[0]
    z_sp = _parse_interval(args.saddle)[0]
    est = cg_dynamics.kramers_time(z, A, z_min, z_sp, sigma_profile=sigma)
    print("deltaA=%.6g omega_sp=%.6g omega_well=%.6g tau0=%.6g"
          % (est.delta_A, est.omega_sp, est.omega_well, est.tau0))
    print("predicted tau(beta=%g) = %.6g"
          % (args.beta, est.predict(args.beta)))
    _emit(args, "kramers",
          ["delta_A", "omega_sp", "omega_well", "tau0", "beta",
           "tau_predicted"],
          [(est.delta_A, est.omega_sp, est.omega_well, est.tau0, args.beta,
            est.predict(args.beta))],
          _config_of(args, parser))


def cmd_fit(args, parser):
    points = []
    for chunk in args.points.split(","):
        parts = chunk.split(":")
        if len(parts) not in (2, 3):
            raise CliError("points must be beta:tau[:err], got %r" % chunk)
        beta, tau = float(parts[0]), float(parts[1])
        err = float(parts[2]) if len(parts) == 3 else 0.0
        points.append((beta, tau, err))
    tau0, slope, resid = cg_dynamics.fit_arrhenius(points)
    print("tau0 = %.6g, s = %.6g" % (tau0, slope))
    rows = [(b, t, e, float(r)) for (b, t, e), r in zip(points, resid)]
    config = _config_of(args, parser)
    config.update(tau0="%.10g" % tau0, s="%.10g" % slope)
    _emit(args, "arrhenius", ["beta", "tau", "tau_error", "residual_ln_tau"],
          rows, config)


def cmd_fp(args, parser):
    table = _load_table(args.coeffs_file, args.beta)
    sde1 = cg_dynamics.make_sde(table, kind=args.kind)
    z = np.asarray(sde1.z_grid, dtype=float)
    init = fp1d.DensityGrid(z, np.ones(len(z))).normalized()
    final, _ = fp1d.solve_fp(sde1, init, args.fp_dt, args.t_final)
    final = final.normalized()
    ref = fp1d.boltzmann_density(table)
    ref_on = fp1d.DensityGrid(z, np.interp(z, ref.z_grid,
                                           ref.values)).normalized()
    tv = fp1d.total_variation(final, ref_on)
    print("TV(final, exp(-beta A)/Z) = %.4g" % tv)
    config = _config_of(args, parser)
    config["tv_vs_boltzmann"] = "%.6g" % tv
    _emit(args, "fp_density", ["z", "density"],
          list(zip(z.tolist(), final.values.tolist())), config)


def cmd_check(args, parser):
    s, rc = _system_rc(args)
    if rc is None:
        raise CliError("--rc is required")
    cfg = _traj_config(args)
    if args.coeffs_file:
        table = _load_table(args.coeffs_file, args.beta)
    else:
        table = cg_dynamics.estimate_coefficients(s, rc, args.beta, cfg,
                                                  nbins=args.bins)
    report = fp1d.marginal_stationarity_check(s, rc, args.beta, table, cfg,
                                              fp_t_final=args.t_final,
                                              fp_dt=args.fp_dt)
    for key, val in report.items():
        print("%s = %.4g" % (key, val))
    _emit(args, "stationarity", ["pair", "tv_distance"],
          [(k, v) for k, v in report.items()], _config_of(args, parser))


def build_cgdyn_parser():
    parser = argparse.ArgumentParser(
        prog="cgdyn",
        description="Effective dynamics of reaction coordinates")
    sub = parser.add_subparsers(dest="op", required=True)

    def common(p, steps=1e6, burn_in=1e6, thinning=1e3):
        _add_common(p)
        p.add_argument("--system", default="three-atom")
        p.add_argument("--rc", default=None)
        p.add_argument("--beta", type=float, default=1.0)
        p.add_argument("--dt", type=float, default=1e-3)
        p.add_argument("--steps", type=float, default=steps)
        p.add_argument("--burn-in", type=float, default=burn_in)
        p.add_argument("--thinning", type=float, default=thinning)

    p = sub.add_parser("simulate")
    common(p, steps=1e4)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("harvest")
    common(p, burn_in=1e6, thinning=1e3)
    p.add_argument("--well", help="lo:hi interval of xi")
    p.add_argument("--count", type=float, default=1000)
    p.set_defaults(func=cmd_harvest)

    p = sub.add_parser("coeffs")
    common(p, steps=1e7, burn_in=1e6, thinning=1)
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("--path", choices=["direct", "identity"],
                   default="identity")
    p.add_argument("--replicas", type=int, default=1)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("residence")
    common(p, burn_in=1e6, thinning=1e3)
    p.add_argument("--dynamics",
                   choices=["full", "effective", "free-energy"],
                   default="full")
    p.add_argument("--realizations", type=float, default=1000)
    p.add_argument("--well", help="start well lo:hi")
    p.add_argument("--targets", help="comma-separated lo:hi intervals")
    p.add_argument("--coeffs-file", help="coefficient CSV for 1D dynamics")
    p.set_defaults(func=cmd_residence)

    p = sub.add_parser("kramers")
    _add_common(p)
    p.add_argument("--system", default=None)
    p.add_argument("--rc", default=None)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--coeffs-file")
    p.add_argument("--well", help="z:z location of the starting minimum")
    p.add_argument("--saddle", help="z:z location of the barrier top")
    p.add_argument("--sigma-corrected", action="store_true")
    p.set_defaults(func=cmd_kramers)

    p = sub.add_parser("fit")
    _add_common(p)
    p.add_argument("--points", required=True,
                   help="comma-separated beta:tau[:err] triples")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("fp")
    _add_common(p)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--coeffs-file", required=True)
    p.add_argument("--kind", choices=["effective", "free-energy"],
                   default="free-energy")
    p.add_argument("--fp-dt", type=float, default=1e-4)
    p.add_argument("--t-final", type=float, default=20.0)
    p.set_defaults(func=cmd_fp)

    p = sub.add_parser("check")
    common(p, steps=1e7, burn_in=1e6, thinning=1)
    p.add_argument("--bins", type=int, default=128)
    p.add_argument("--coeffs-file")
    p.add_argument("--fp-dt", type=float, default=1e-4)
    p.add_argument("--t-final", type=float, default=30.0)
    p.set_defaults(func=cmd_check)
    return parser


def _run(parser, argv):
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = parser.parse_args(_inject_config(list(argv)))
        args.func(args, parser)
        return 0
    except SystemExit as exc:
        return CONFIG_ERROR if exc.code else 0
    except CliError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return CONFIG_ERROR
    except (ValueError, KeyError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return CONFIG_ERROR
    except (FloatingPointError, RuntimeError,
            np.linalg.LinAlgError) as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return NUMERICAL_ERROR


def main_cgchain(argv=None):
    return _run(build_cgchain_parser(), argv)


def main_cgdyn(argv=None):
    return _run(build_cgdyn_parser(), argv)


if __name__ == "__main__":
    sys.exit(main_cgchain())
