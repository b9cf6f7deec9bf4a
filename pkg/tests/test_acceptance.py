"""Acceptance suite.

Each test carries ``@pytest.mark.criterion(n, title)``; the terminal summary
prints one PASS/FAIL line per criterion with the measured figures.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
import pytest

from _helpers import random_spec
from _oracles import (
    deviation_oracle,
    kernel_oracles,
    random_generator,
    random_sparse_generator,
)
from mmiq import asymptotics as A
from mmiq import model1 as m1
from mmiq import model2 as m2
from mmiq.chain_core import Generator, QueueSpec, analyze_chain
from mmiq.cli import main
from mmiq.config import load_config
from mmiq.model1 import ScalingParams
from mmiq.simulator import SimConfig, fclt_diagnostics, simulate, variance_scaling_sweep

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _two_state() -> QueueSpec:
    return QueueSpec.from_arrays([[-5.0, 5.0], [5.0, -5.0]], [20.0, 10.0], [1.0, 2.0])


def _cov(spec, model, t, u):
    if model == "I":
        return m1.covariance(spec, t, u, method="auto")
    return m2.covariance_m2(spec, t, u)


def _mean(spec, model, t):
    if model == "I":
        return m1.first_moments(spec, [t])[0][0].sum()
    return m2.mean_m2(spec, t)


# ------------------------------------------------------------------------ 1


@pytest.mark.criterion(1, "algebraic identities of the chain matrices")
def test_chain_identities(record_property):
    rng = np.random.default_rng(1001)
    worst_id = worst_d = 0.0
    lib_time = 0.0
    for k in range(50):
        d = (2, 3, 4, 6)[k % 4]
        Q = random_generator(rng, d) if k % 2 == 0 else random_sparse_generator(rng, d)
        start = time.perf_counter()
        gen = Generator(Q)
        ch = analyze_chain(gen)
        lib_time += time.perf_counter() - start
        Qm, F, Pi, D, pi = gen.rates, ch.F, ch.Pi, ch.D, ch.pi
        I, one = np.eye(d), np.ones(d)
        residuals = [Qm @ F - (Pi - I), F @ Qm - (Pi - I), Pi @ F - Pi, F @ Pi - Pi,
                     F @ one - one, D @ one, pi @ D]
        worst_id = max(worst_id, max(np.abs(r).max() for r in residuals))
        worst_d = max(worst_d, np.abs(D - deviation_oracle(Q)).max())
    record_property("detail", f"identities {worst_id:.1e}, D vs quadrature {worst_d:.1e}, "
                              f"library time {lib_time:.2f} s")
    assert worst_id <= 1e-8
    assert worst_d <= 1e-6
    assert lib_time < 10.0


# ------------------------------------------------------------------------ 2


@pytest.mark.criterion(2, "single-state exactness")
def test_single_state_exactness(record_property):
    lam, mu, u = 3.0, 2.0, 0.7
    spec = QueueSpec.from_arrays([[0.0]], [lam], [mu])
    ts = np.linspace(0.0, 5.0, 50)
    mean = lam / mu * (1 - np.exp(-mu * ts))
    start = time.perf_counter()
    m1_mean = m1.first_moments(spec, ts)[0].sum(axis=1)
    m1_var = m1.covariance(spec, ts, 0.0)
    m1_cov = m1.covariance(spec, ts, u)
    m2_mean = m2.mean_m2(spec, ts)
    m2_var = np.array([m2.covariance_m2(spec, t, 0.0) for t in ts])
    m2_cov = np.array([m2.covariance_m2(spec, t, u) for t in ts])
    elapsed = time.perf_counter() - start
    refs = (mean, mean, np.exp(-mu * u) * mean)
    err = max(np.abs(got - ref).max()
              for got, ref in zip((m1_mean, m1_var, m1_cov, m2_mean, m2_var, m2_cov), refs * 2))
    record_property("detail", f"max error {err:.1e}, {elapsed:.2f} s")
    assert err <= 1e-8
    assert elapsed < 5.0


# ------------------------------------------------------------------------ 3


@pytest.mark.criterion(3, "models coincide for equal service rates")
def test_equal_service_rates(record_property):
    rng = np.random.default_rng(1003)
    pairs = [(t, u) for t in (0.3, 1.5, 4.0) for u in (0.0, 0.6, 2.0)]
    worst = worst_limit = 0.0
    start = time.perf_counter()
    for _ in range(20):
        spec = random_spec(rng, 2, equal_mu=True)
        for t, u in pairs:
            worst = max(worst, abs(m1.covariance(spec, t, u) - m2.covariance_m2(spec, t, u)))
            for alpha in (0.5, 1.0, 2.0):
                worst_limit = max(worst_limit,
                                  abs(A.v1(spec, alpha, t, u) - A.v2(spec, alpha, t, u)))
    elapsed = time.perf_counter() - start
    record_property("detail", f"covariance gap {worst:.1e}, limit gap {worst_limit:.1e}, "
                              f"{elapsed:.1f} s")
    assert worst <= 1e-6
    assert worst_limit <= 1e-9
    assert elapsed < 60.0


# ------------------------------------------------------------------------ 4


@pytest.mark.criterion(4, "covariance kernels against double integrals")
def test_kernels_against_double_integrals(record_property):
    rng = np.random.default_rng(1004)
    points = [(0.5, 0.0), (1.2, 0.4), (2.5, 1.5), (0.7, 3.0)]
    worst = 0.0
    start = time.perf_counter()
    for k in range(10):
        spec = random_spec(rng, (2, 3, 4)[k % 3])
        for t, u in points:
            K, L1, L2 = kernel_oracles(spec.Q, spec.lam, spec.mu, t, u)
            ker = m2.cov_kernel(spec, t, u)
            worst = max(worst, np.abs(ker.K_mat - K).max(), np.abs(ker.L_mat - (L1 + L2)).max())
    elapsed = time.perf_counter() - start
    record_property("detail", f"max kernel error {worst:.1e}, {elapsed:.1f} s")
    assert worst <= 1e-7
    assert elapsed < 60.0


# ------------------------------------------------------------------------ 5


@pytest.mark.criterion(5, "late transient equals stationary")
def test_transient_reaches_stationary(record_property):
    rng = np.random.default_rng(1005)
    specs = [_two_state()] + [random_spec(rng, (2, 3, 4)[k % 3]) for k in range(10)]
    worst = 0.0
    start = time.perf_counter()
    for spec in specs:
        t = 40.0 / min(spec.mu.min(), spec.chain.gap)
        for u in (0.0, 0.5, 2.0):
            pairs = [(m1.covariance(spec, t, u, method="auto"),
                      m1.stationary_covariance(spec, u, method="auto")),
                     (m2.covariance_m2(spec, t, u), m2.stationary_covariance_m2(spec, u))]
            if u == 0.0:
                pairs += [(pairs[0][0], m1.stationary_variance(spec)),
                          (pairs[1][0], m2.stationary_variance_m2(spec))]
            worst = max(worst, max(abs(a - b) / abs(b) for a, b in pairs))
    elapsed = time.perf_counter() - start
    record_property("detail", f"max relative gap {worst:.1e}, {elapsed:.1f} s")
    assert worst <= 1e-5
    assert elapsed < 60.0


# ------------------------------------------------------------------------ 6


@pytest.mark.criterion(6, "simulation regression at unit scale")
def test_simulation_regression(record_property):
    spec = _two_state()
    start = time.perf_counter()
    worst = 0.0
    for model in ("I", "II"):
        # (2, 0) is the variance at t = 2
        for t, lag in ((2.0, 0.5), (30.0, 1.0)):
            cfg = SimConfig(spec, ScalingParams(1.0, 1.0), horizon=t + lag, sample_times=[t],
                            lag=lag, replications=100_000, seed=20240601, engine="gillespie")
            batch = simulate(cfg, model)
            checks = [(batch.est_mean[0], batch.se_mean[0], _mean(spec, model, t)),
                      (batch.est_var[0], batch.se_var[0], _cov(spec, model, t, 0.0)),
                      (batch.est_cov[0], batch.se_cov[0], _cov(spec, model, t, lag))]
            for est, se, ref in checks:
                worst = max(worst, abs(est - ref) / se)
    elapsed = time.perf_counter() - start
    record_property("detail", f"largest deviation {worst:.2f} SE, {elapsed:.0f} s")
    assert worst <= 3.0
    assert elapsed < 300.0


# ------------------------------------------------------------------------ 7


@pytest.mark.criterion(7, "variance dichotomy at two population sizes")
@pytest.mark.parametrize("model", ["I", "II"])
def test_dichotomy(record_property, model):
    spec = _two_state()
    start = time.perf_counter()
    table = variance_scaling_sweep(spec, [0.25, 0.5, 1.0, 1.5, 2.0], [1e2, 1e4], t_star=40.0,
                                   R=10_000, seed=20240602, model=model)
    elapsed = time.perf_counter() - start
    sup = table.sup_distance
    band = {a: abs(table.ratios[i, -1] - table.limit[i]) / table.limit[i]
            for i, a in enumerate(table.alphas) if a in (0.5, 2.0)}
    record_property("detail", (
        f"model {model}: sup distance {sup[0]:.3f} -> {sup[1]:.3f}, "
        f"flagged alphas {[float(a) for a in table.flagged_alphas]}, "
        f"band " + ", ".join(f"{a}: {r:.3f}" for a, r in band.items())
        + f", {elapsed:.0f} s"))
    assert table.sup_closer
    assert not table.significant_reversal.any()
    assert table.exact_closer.all()
    assert all(r <= 0.10 for r in band.values())
    assert elapsed < 1800.0


# ------------------------------------------------------------------------ 8


@pytest.mark.criterion(8, "Gaussian marginals of the scaled counts")
def test_fclt_marginals(record_property):
    spec = _two_state()
    start = time.perf_counter()
    parts, ok = [], True
    for model in ("I", "II"):
        for alpha in (0.5, 2.0):
            cfg = SimConfig(spec, ScalingParams(1e4, alpha), horizon=2.5, sample_times=[2.0],
                            lag=0.5, replications=10_000, seed=20240603)
            batch = simulate(cfg, model)
            row = fclt_diagnostics(batch, cfg, model).rows[0]
            ok &= row.pass_skew and row.pass_kurtosis and row.pass_var
            parts.append(f"{model}/{alpha}: skew {row.skew:+.3f} kurt {row.excess_kurtosis:+.3f} "
                         f"var {row.var_rel_err:+.3f} ({batch.engine})")
    elapsed = time.perf_counter() - start
    record_property("detail", "; ".join(parts) + f"; {elapsed:.0f} s")
    assert ok
    assert elapsed < 900.0


# ------------------------------------------------------------------------ 9


@pytest.mark.criterion(9, "refined mean approaches the exact mean")
def test_refined_mean_scaling(record_property):
    spec = _two_state()
    alpha = 0.5
    Ns = np.array([1e2, 1e3, 1e4])
    ts = np.linspace(0.25, 6.0, 24)
    start = time.perf_counter()
    rel, absolute = [], []
    for N in Ns:
        sc = ScalingParams(float(N), alpha)
        exact = m1.mean_trajectory(spec, sc, ts, method="auto").sum(axis=1)
        gap = np.abs(exact - m1.refined_mean(spec, sc, ts))
        rel.append((gap / exact).max())
        absolute.append(gap.max())
    elapsed = time.perf_counter() - start
    slope = np.polyfit(np.log(Ns), np.log(rel), 1)[0]
    abs_slope = np.polyfit(np.log(Ns), np.log(absolute), 1)[0]
    bound = -min(alpha, 1.0) + 0.15
    record_property("detail", f"relative-gap slope {slope:.3f} (bound {bound:.2f}), "
                              f"absolute-gap slope {abs_slope:.3f}, {elapsed:.1f} s")
    assert slope <= bound
    assert elapsed < 120.0


# ----------------------------------------------------------------------- 10


@pytest.mark.criterion(10, "command-line determinism and exact figure values")
def test_cli_determinism(record_property, tmp_path):
    start = time.perf_counter()
    cfg_path = CONFIGS / "two_state_model1.json"
    runs = []
    for k in range(2):
        out = tmp_path / f"sim{k}"
        assert main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    identical = runs[0] == runs[1] and len(runs[0]) == 2

    fig_path = CONFIGS / "fig2.json"
    assert main(["figure", "fig2", "--config", str(fig_path), "--out", str(tmp_path / "f")]) == 0
    lines = (tmp_path / "f" / "fig2.csv").read_text().splitlines()[1:]
    cfg = load_config(fig_path)
    specs = [cfg.queue_spec(mu=m) for m in cfg.figure.fig2.mu_orderings]
    mismatches = 0
    for line in lines:
        u, a, b = (float(x) for x in line.split(","))
        for spec, val in zip(specs, (a, b)):
            mismatches += val != m1.stationary_covariance(spec, u, method="auto")
    elapsed = time.perf_counter() - start
    record_property("detail", f"identical reruns {identical}, fig2 mismatches {mismatches} "
                              f"of {2 * len(lines)}, {elapsed:.0f} s")
    assert identical
    assert mismatches == 0 and len(lines) == cfg.figure.fig2.num_u
    assert elapsed < 300.0
