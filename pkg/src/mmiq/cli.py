"""Command-line front end.

``mmiq analyze|simulate|figure <name> --config <path> [--out <dir>]
[--threads <n>] [--downscale]``

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical or
statistical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import model1, model2
from .asymptotics import limit_cov
from .config import ExperimentConfig, load_config
from .errors import ConfigError, InsufficientReplications, NumericalError, StatisticalError
from .simulator import (
    SimConfig,
    default_t_star,
    fclt_diagnostics,
    simulate,
    variance_scaling_sweep,
)
from .simulator.diagnostics import MIN_REPLICATIONS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def fmt(x) -> str:
    """Round-trip-safe float text with 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _out_dir(cfg: ExperimentConfig, config_path: Path, override) -> Path:
    if override is not None:
        out = Path(override)
    else:
        out = Path(cfg.outputs.directory)
        if not out.is_absolute():
            out = config_path.parent / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _lags(cfg: ExperimentConfig) -> list[float]:
    return [0.0] if cfg.lag == 0.0 else [0.0, float(cfg.lag)]


def analyze_tables(cfg: ExperimentConfig):
    """Rows of ``mean.csv``, ``cov.csv`` and ``limits.csv``."""
    spec = cfg.queue_spec()
    scaling = cfg.scaling_params()
    scaled = scaling.apply(spec)
    grid = np.asarray(cfg.times.values(), dtype=float)
    if cfg.model == "I":
        means = model1.mean_trajectory(spec, scaling, grid, method="auto").sum(axis=1)
    else:
        means = np.atleast_1d(model2.mean_m2(scaled, grid))
    mean_rows = [(t, m) for t, m in zip(grid, means)]
    cov_rows = []
    for u in _lags(cfg):
        if cfg.model == "I":
            covs = model1.covariance(scaled, grid, u, method="auto")
        else:
            covs = [model2.covariance_m2(scaled, t, u) for t in grid]
        cov_rows.extend((t, u, c) for t, c in zip(grid, covs))
    alpha = scaling.alpha
    limit_rows = []
    if alpha > 0:
        for u in _lags(cfg):
            limit_rows.extend((t, u, alpha, limit_cov(spec, cfg.model, alpha, t, u))
                              for t in grid)
    return mean_rows, cov_rows, limit_rows


def cmd_analyze(cfg: ExperimentConfig, out: Path, args) -> list[Path]:
    mean_rows, cov_rows, limit_rows = analyze_tables(cfg)
    files = [out / "mean.csv", out / "cov.csv", out / "limits.csv"]
    write_csv(files[0], ("t", "mean"), mean_rows)
    write_csv(files[1], ("t", "u", "cov"), cov_rows)
    write_csv(files[2], ("t", "u", "alpha", "v"), limit_rows)
    return files


def sim_config(cfg: ExperimentConfig, threads=None) -> SimConfig:
    grid = np.asarray(cfg.times.values(), dtype=float)
    return SimConfig(
        spec=cfg.queue_spec(), scaling=cfg.scaling_params(),
        horizon=float(grid[-1] + cfg.lag), sample_times=grid, lag=cfg.lag,
        replications=cfg.sim.replications, seed=cfg.sim.seed, engine=cfg.sim.engine,
        threads=threads,
    )


def cmd_simulate(cfg: ExperimentConfig, out: Path, args) -> list[Path]:
    if cfg.sim.replications < MIN_REPLICATIONS:
        raise InsufficientReplications(
            f"{cfg.sim.replications} replications, at least {MIN_REPLICATIONS} required "
            "for the fluctuation report"
        )
    scfg = sim_config(cfg, args.threads)
    batch = simulate(scfg, cfg.model)
    report = fclt_diagnostics(batch, scfg, cfg.model)
    files = [out / "sim_moments.csv", out / "fclt_report.csv"]
    write_csv(files[0], ("t", "est_mean", "se_mean", "est_var", "se_var", "est_cov", "se_cov"),
              zip(batch.times, batch.est_mean, batch.se_mean, batch.est_var, batch.se_var,
                  batch.est_cov, batch.se_cov))
    header = ("t", "mean", "se_mean", "var", "se_var", "limit_var", "var_rel_err", "cov",
              "se_cov", "limit_cov", "skew", "excess_kurtosis", "pass_mean", "pass_var",
              "pass_cov", "pass_skew", "pass_kurtosis")
    write_csv(files[1], header, [tuple(getattr(r, h) for h in header) for r in report.rows])
    return files


def fig2_table(cfg: ExperimentConfig):
    """Stationary covariance against the lag for the two service-rate orderings."""
    f2 = cfg.figure.fig2
    if len(f2.mu_orderings) != 2:
        raise ConfigError("figure.fig2.mu_orderings: exactly two orderings required")
    scaling = cfg.scaling_params()
    specs = [scaling.apply(cfg.queue_spec(mu=m)) for m in f2.mu_orderings]
    us = np.linspace(0.0, f2.u_max, f2.num_u)
    cols = []
    for spec in specs:
        if cfg.model == "I":
            cols.append([model1.stationary_covariance(spec, u, method="auto") for u in us])
        else:
            cols.append([model2.stationary_covariance_m2(spec, u) for u in us])
    return [(u, a, b) for u, a, b in zip(us, cols[0], cols[1])]


_FIG2_GP = """# gnuplot script: stationary covariance against the lag
set datafile separator ','
set key top right
set xlabel 'u'
set ylabel 'Cov(M(t), M(t+u))'
set terminal pngcairo size 800,600
set output 'fig2.png'
plot 'fig2.csv' using 1:2 skip 1 with lines title 'mu = {mu_a}', \\
     'fig2.csv' using 1:3 skip 1 with lines title 'mu = {mu_b}'
"""

_FIG3_GP = """# gnuplot script: normalised variance against alpha
set datafile separator ','
set key top right
set xlabel 'alpha'
set ylabel 'Var M(t*) / N^(2 beta)'
set terminal pngcairo size 800,600
set output 'fig3.png'
plot 'fig3.csv' using 1:2 skip 1 with linespoints title 'N = {n1}', \\
     'fig3.csv' using 1:3 skip 1 with linespoints title 'N = {n2}', \\
     'fig3.csv' using 1:4 skip 1 with lines lc rgb 'gray' title 'limit'
"""


def _fmt_list(xs) -> str:
    return "[" + ", ".join(f"{x:g}" for x in xs) + "]"


def fig3_scales(cfg: ExperimentConfig, downscale: bool):
    requested = [float(n) for n in cfg.figure.fig3.Ns]
    if not downscale:
        return requested, requested
    cap = cfg.figure.fig3.downscale_to
    return requested, [min(n, cap) for n in requested]


def cmd_figure(cfg: ExperimentConfig, out: Path, args) -> list[Path]:
    gnuplot = "gnuplot" in cfg.outputs.formats
    files = []
    if args.name == "fig2":
        path = out / "fig2.csv"
        write_csv(path, ("u", "cov_mu_21", "cov_mu_12"), fig2_table(cfg))
        files.append(path)
        if gnuplot:
            mus = cfg.figure.fig2.mu_orderings
            gp = out / "fig2.gp"
            gp.write_text(_FIG2_GP.format(mu_a=_fmt_list(mus[0]), mu_b=_fmt_list(mus[1])))
            files.append(gp)
        return files
    if args.name == "fig3":
        spec = cfg.queue_spec()
        f3 = cfg.figure.fig3
        requested, Ns = fig3_scales(cfg, args.downscale)
        t_star = f3.t_star if f3.t_star is not None else default_t_star(spec)
        table = variance_scaling_sweep(spec, f3.alphas, Ns, t_star=t_star,
                                       R=cfg.sim.replications, seed=cfg.sim.seed,
                                       model=cfg.model, engine=cfg.sim.engine,
                                       threads=args.threads, with_exact=True)
        path = out / "fig3.csv"
        write_csv(path, ("alpha", "ratio_N1", "ratio_N2", "limit"),
                  zip(table.alphas, table.ratios[:, 0], table.ratios[:, 1], table.limit))
        files.append(path)
        meta = {
            "model": cfg.model,
            "t_star": t_star,
            "replications": cfg.sim.replications,
            "seed": cfg.sim.seed,
            "requested_Ns": requested,
            "Ns": Ns,
            "downscaled": Ns != requested,
            "growth_exponent": "2 * beta with beta = max(1, 2 - alpha) / 2",
            "engines": [list(e) for e in table.engines],
            "closer_at_alpha": [bool(x) for x in table.pointwise_closer],
            "sup_distance": [float(x) for x in table.sup_distance],
            "exact_ratio_N1": [float(x) for x in table.exact[:, 0]],
            "exact_ratio_N2": [float(x) for x in table.exact[:, 1]],
        }
        mpath = out / "fig3_meta.json"
        mpath.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        files.append(mpath)
        if gnuplot:
            gp = out / "fig3.gp"
            gp.write_text(_FIG3_GP.format(n1=f"{Ns[0]:g}", n2=f"{Ns[1]:g}"))
            files.append(gp)
        return files
    raise ConfigError(f"unknown figure {args.name!r}; expected 'fig2' or 'fig3'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmiq", description="Moments, limits and simulation of modulated infinite-server queues.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON experiment configuration")
        p.add_argument("--out", default=None, help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, default=None,
                       help="simulation threads (default: MMIQ_THREADS or CPU count)")
        p.add_argument("--downscale", action="store_true",
                       help="cap large N at figure.fig3.downscale_to for desk-scale runs")

    common(sub.add_parser("analyze", help="exact means, covariances and limit curves"))
    common(sub.add_parser("simulate", help="Monte Carlo moments and fluctuation report"))
    fig = sub.add_parser("figure", help="figure data and gnuplot scripts")
    fig.add_argument("name", choices=("fig2", "fig3"))
    common(fig)
    return parser


_COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "figure": cmd_figure}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    what = args.command if args.command != "figure" else f"figure {args.name}"
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        config_path = Path(args.config)
        cfg = load_config(config_path)
        out = _out_dir(cfg, config_path, args.out)
        files = _COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"mmiq {what}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, StatisticalError) as exc:
        print(f"mmiq {what}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
