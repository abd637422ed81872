"""Command-line entry point wiring the computational modules.

Subcommands: norms, evolve, periodic-linear, periodic-nonlinear, stability,
verify-estimates.  Every run reads one JSON config, writes CSV/field
artifacts plus a manifest into its output directory, and is bit-reproducible
for a fixed config and seed (the manifest, which records wall time, is the
one exception).

Exit codes: 0 success, 2 invalid config, 3 hypothesis violated,
4 convergence failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .config import build_initial, load_config
from .duhamel import evolve
from .errors import ConfigError, ConvergenceError, DiagnosticsError, FieldIOError, HypothesisError
from .fileio import read_field, write_field
from .grid import spectral_divergence_residual
from .norms import NormContext, NormParams, morrey_lorentz_table, state_norm
from .periodic import (
    PeriodicProblem,
    cesaro_periodic_datum,
    nonlinear_periodic,
    resolvent_periodic_datum,
)
from .presets import random_div_free
from .report import write_csv, write_manifest
from .stability import (
    StabilityParams,
    fit_decay_exponent,
    perturb_and_compare,
    smallness_report,
    weighted_bilinear_constants,
)
from .suite import refinement_comparison

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_CONVERGENCE = 4
EXIT_IO = 5


def _parser():
    ap = argparse.ArgumentParser(prog="bqbox", description=__doc__)
    ap.add_argument("subcommand", choices=[
        "norms", "evolve", "periodic-linear", "periodic-nonlinear", "stability", "verify-estimates",
    ])
    env_seed = os.environ.get("BQBOX_SEED")
    ap.add_argument("--config", default=os.environ.get("BQBOX_CONFIG"))
    ap.add_argument("--output", default=os.environ.get("BQBOX_OUTPUT", "."))
    ap.add_argument("--seed", type=int, default=int(env_seed) if env_seed else None)
    ap.add_argument("--threads", type=int,
                    default=int(os.environ.get("BQBOX_THREADS", "1")))
    return ap


def _state_norm_columns(cfg):
    cols = []
    for params in cfg.norms:
        label = f"xnorm_p{params.p:g}_lam{params.lam:g}"
        cols.append((label, NormContext(params, cfg.sampler)))
    return cols


def _cmd_norms(cfg, outdir):
    if not cfg.options.get("field_file"):
        raise ConfigError("norms subcommand needs config field_file")
    loaded = read_field(cfg.options["field_file"])
    if not cfg.norms:
        raise ConfigError("norms subcommand needs at least one entry in norms[]")
    if hasattr(loaded, "u"):  # a state file: norm both parts
        parts = [("u", loaded.u), ("theta", loaded.theta)]
    else:
        parts = [("field", loaded)]
    rows = []
    for params in cfg.norms:
        for label, fld in parts:
            table = morrey_lorentz_table(fld, params, cfg.sampler)
            sup = max(r.local_norm for r in table)
            for r in table:
                center = ";".join(format(c, ".17g") for c in r.center)
                rows.append((label, params.p, params.lam, center, r.radius, r.local_norm, 0))
            rows.append((label, params.p, params.lam, "sup", math.nan, sup, 1))
    path = write_csv(outdir / "norms.csv",
                     ["part", "p", "lam", "center", "radius", "local_norm", "is_summary"], rows)
    return [path]


def _cmd_evolve(cfg, outdir):
    if cfg.solve is None or cfg.t_end is None:
        raise ConfigError("evolve needs solve{} and t_end")
    initial = build_initial(cfg.raw, cfg.grid, cfg.seed)
    traj = evolve(initial, cfg.forcing, cfg.t_end, cfg.solve, mode=cfg.mode)
    norm_cols = _state_norm_columns(cfg)
    header = ["time", "energy", "divergence_residual"] + [c[0] for c in norm_cols]
    rows = []
    for i, t in enumerate(traj.times):
        s = traj.states[i]
        row = [t, traj.energy(i), spectral_divergence_residual(s.u)]
        for _, ctx in norm_cols:
            row.append(state_norm(s, ctx))
        rows.append(row)
    outputs = [write_csv(outdir / "trajectory.csv", header, rows)]
    stride = int(cfg.options.get("snapshots") or 0)
    if stride > 0:
        for i in range(0, len(traj.states), stride):
            p = outdir / f"state_{i:05d}.bqf"
            write_field(p, traj.states[i])
            outputs.append(p)
    return outputs


def _linear_problem(cfg):
    if cfg.solve is None or cfg.forcing is None:
        raise ConfigError("periodic subcommands need solve{} and forcing{}")
    return PeriodicProblem(forcing=cfg.forcing, cfg=cfg.solve, mode="linearized", grid=cfg.grid)


def _cmd_periodic_linear(cfg, outdir):
    problem = _linear_problem(cfg)
    opts = cfg.options.get("periodic", {})
    n_max = int(opts.get("n_max", 256))
    tol = float(opts.get("tol", 1e-9))
    reference = resolvent_periodic_datum(problem)
    sol = cesaro_periodic_datum(problem, n_max=n_max, tol=tol, reference=reference)
    cross = max(
        float(np.max(np.abs(sol.initial.u.values - reference.u.values))),
        float(np.max(np.abs(sol.initial.theta.values - reference.theta.values))),
    )
    outputs = []
    write_field(outdir / "datum.bqf", sol.initial)
    outputs.append(outdir / "datum.bqf")
    outputs.append(write_csv(
        outdir / "residual.csv",
        ["route", "residual_max", "residual_norm", "cross_check_max_diff"],
        [("cesaro", sol.residual_max, sol.residual_norm, cross)],
    ))
    hist_rows = []
    prev = None
    for (nit, inc, err) in sol.history:
        ratio = inc / prev if prev and prev > 0 else math.nan
        hist_rows.append((nit, inc, err, ratio))
        prev = inc
    outputs.append(write_csv(outdir / "history.csv",
                             ["iteration", "increment_norm", "error_vs_resolvent", "ratio"],
                             hist_rows))
    return outputs


def _nonlinear_mode(cfg):
    return cfg.mode if cfg.mode in ("full", "navier-stokes") else "full"


def _cmd_periodic_nonlinear(cfg, outdir):
    if cfg.solve is None or cfg.forcing is None:
        raise ConfigError("periodic-nonlinear needs solve{} and forcing{}")
    n = cfg.grid.n
    p = float(cfg.options.get("norm_p") or (cfg.norms[0].p if cfg.norms else 3.0))
    if not (2.0 < p <= n):
        raise HypothesisError(
            f'hypothesis "2 < p <= n" violated (p = {p:g}, n = {n}); '
            "the nonlinear periodic construction needs the critical pairing"
        )
    problem = PeriodicProblem(forcing=cfg.forcing, cfg=cfg.solve, mode=_nonlinear_mode(cfg),
                              grid=cfg.grid)
    opts = cfg.options.get("periodic", {})
    ctx = NormContext(NormParams(p=p, q=math.inf, lam=n - p), cfg.sampler, time_stride=4)
    sol = nonlinear_periodic(
        problem,
        outer_tol=float(opts.get("outer_tol", 1e-8)),
        outer_max=int(opts.get("outer_max", 16)),
        ctx=ctx,
    )
    outputs = []
    write_field(outdir / "datum.bqf", sol.initial)
    outputs.append(outdir / "datum.bqf")
    outputs.append(write_csv(outdir / "residual.csv",
                             ["residual_max", "residual_norm", "solution_h_norm"],
                             [(sol.residual_max, sol.residual_norm, sol.meta["solution_h_norm"])]))
    outputs.append(write_csv(outdir / "contraction_history.csv",
                             ["iteration", "increment_norm", "ratio"],
                             [(m, d, r) for (m, d, r) in sol.history]))
    return outputs


def _cmd_stability(cfg, outdir):
    if cfg.stability is None:
        raise ConfigError("stability subcommand needs stability{}")
    if cfg.solve is None or cfg.forcing is None:
        raise ConfigError("stability subcommand needs solve{} and forcing{}")
    st = cfg.stability
    params = StabilityParams(p=st["p"], q=st["q"], r=st["r"], b=st["b"])
    n = cfg.grid.n
    params.lam(n)  # p <= n hypothesis
    if not (2.0 < params.p <= n):
        raise HypothesisError(f'hypothesis "2 < p <= n" violated (p = {params.p:g}, n = {n})')
    problem = PeriodicProblem(forcing=cfg.forcing, cfg=cfg.solve, mode=_nonlinear_mode(cfg),
                              grid=cfg.grid)
    ctx = NormContext(NormParams(p=params.p, q=math.inf, lam=n - params.p), cfg.sampler,
                      time_stride=4)
    base = nonlinear_periodic(problem, ctx=ctx)
    gap = random_div_free(cfg.grid, seed=cfg.seed + 99, exponent=2.0,
                          amplitude=st["initial_gap"])
    perturbed = type(base.initial)(
        u=type(base.initial.u)(cfg.grid, base.initial.u.values + gap.values),
        theta=base.initial.theta,
    )
    T = cfg.forcing.period
    t_max = st["t_max_periods"] * T
    t_grid = np.geomspace(cfg.solve.dt, t_max, st["num_times"])
    table = perturb_and_compare(base, perturbed, None, params, t_grid, sampler=cfg.sampler)
    rows = table.rows
    csv_rows = [
        (t, wu, wth, t ** (params.alpha / 2.0), t ** (params.gamma / 2.0), d)
        for (t, wu, wth, d) in rows
    ]
    outputs = [write_csv(
        outdir / "stability.csv",
        ["t", "weighted_velocity_gap", "weighted_temperature_gap",
         "velocity_weight", "temperature_weight", "D"],
        csv_rows,
    )]
    gaps = [(t, d) for (t, _, _, d) in rows]
    fit_row = (math.nan, math.nan, 0)
    try:
        fit = fit_decay_exponent(gaps, window=(t_max / 6.0, t_max))
        fit_row = (fit.slope, fit.width, fit.npoints)
    except DiagnosticsError:
        pass
    outputs.append(write_csv(outdir / "summary.csv",
                             ["fitted_slope", "slope_halfwidth", "points", "sup_D", "alpha_half"],
                             [fit_row + (table.sup_d, params.alpha / 2.0)]))
    c1, c2 = weighted_bilinear_constants(params.p, params.q, params.r)
    rep = smallness_report(**_smallness_inputs(cfg, params, base))
    text = rep.text() + f"\nprinted weighted constants C1 = {c1:.6g}, C2 = {c2:.6g}\n"
    (outdir / "smallness.txt").write_text(text, encoding="utf-8")
    outputs.append(outdir / "smallness.txt")
    return outputs


def _smallness_inputs(cfg, params, base):
    """Empirical inputs for the assembled contraction expressions."""
    from .norms import morrey_lorentz_norm, weighted_time_sup
    from .norms import TimeWeightParams

    forcing = cfg.forcing
    grid = cfg.grid
    lam = grid.n - params.p
    T = forcing.period
    ts = [T / 8, T / 4, T / 2, 3 * T / 4, T]
    g_norm = 0.0
    if forcing.g is not None:
        g_norm = weighted_time_sup(
            [(t, forcing.g.value(t)) for t in ts],
            TimeWeightParams(p=params.p, b=params.b), lam, cfg.sampler,
        )
    eta_sup = max(
        morrey_lorentz_norm(s.theta, NormParams(p=params.p, q=math.inf, lam=lam), cfg.sampler)
        for s in base.trajectory.states[:: max(1, len(base.trajectory.states) // 4)]
    )
    half = NormParams(p=params.p / 2.0, q=math.inf, lam=lam) if params.p > 2 else None
    ff_norm = 0.0
    if half is not None:
        for t in ts:
            total = 0.0
            if forcing.F is not None:
                total += morrey_lorentz_norm(forcing.F.value(t), half, cfg.sampler)
            if forcing.f is not None:
                total += morrey_lorentz_norm(forcing.f.value(t), half, cfg.sampler)
            ff_norm = max(ff_norm, total)
    K = float(cfg.options.get("estimates", {}).get("K_emp", 1.0))
    return dict(
        p=params.p, b=params.b, kappa=forcing.kappa, K=K,
        rho=base.meta["solution_h_norm"], g_norm=g_norm, eta_sup=eta_sup, Ff_norm=ff_norm,
    )


def _cmd_verify_estimates(cfg, outdir):
    opts = cfg.options.get("estimates", {})
    ensemble = int(opts.get("ensemble", 4))
    p = float(opts.get("p", 3.0))
    rows = refinement_comparison(cfg.grid, cfg.seed, ensemble=ensemble, p=p)
    outputs = [write_csv(outdir / "estimates.csv",
                         ["check", "value", "value_refined", "rel_change"], rows)]
    # per-time decay ratio table for one representative field
    from .operators import verify_dispersive
    from .presets import random_smooth_scalar

    phi = random_smooth_scalar(cfg.grid, seed=cfg.seed, exponent=2.0)
    rep = verify_dispersive(
        phi, NormParams(p=p, q=math.inf, lam=0.0), NormParams(p=2 * p, q=math.inf, lam=0.0),
        m=1, t_grid=np.geomspace(1e-3, 1.0, 12), sampler=cfg.sampler,
    )
    outputs.append(write_csv(outdir / "dispersive.csv",
                             ["t", "lhs_norm", "weight", "ratio"], rep.csv_rows()))
    return outputs


_COMMANDS = {
    "norms": _cmd_norms,
    "evolve": _cmd_evolve,
    "periodic-linear": _cmd_periodic_linear,
    "periodic-nonlinear": _cmd_periodic_nonlinear,
    "stability": _cmd_stability,
    "verify-estimates": _cmd_verify_estimates,
}


def main(argv=None):
    args = _parser().parse_args(argv)
    started = time.monotonic()
    try:
        if not args.config:
            raise ConfigError("--config (or BQBOX_CONFIG) is required")
        cfg = load_config(args.config)
        if args.seed is not None and args.seed != cfg.seed:
            cfg.seed = args.seed
            from .config import build_forcing

            cfg.forcing = build_forcing(cfg.raw, cfg.grid, cfg.seed)
        outdir = Path(args.output)
        try:
            outdir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise FieldIOError(f"cannot create output directory {outdir}: {exc}") from exc
        outputs = _COMMANDS[args.subcommand](cfg, outdir)
        write_manifest(outdir, args.subcommand, cfg.text, cfg.seed,
                       [Path(o).name for o in outputs], time.monotonic() - started,
                       extras={"threads": args.threads})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisError as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (FieldIOError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DiagnosticsError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
