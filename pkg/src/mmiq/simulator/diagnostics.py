"""Comparison of simulated fluctuations with their Gaussian limits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .. import model1, model2
from ..asymptotics import limit_cov
from ..chain_core import QueueSpec
from ..errors import ConfigError, InsufficientReplications
from ..model1 import ScalingParams
from .core import SimBatch, SimConfig, choose_engine, simulate

MIN_REPLICATIONS = 1000


@dataclass(frozen=True)
class FcltRow:
    """Diagnostics of the normalised count at one grid time."""

    t: float
    mean: float
    se_mean: float
    var: float
    se_var: float
    limit_var: float
    var_rel_err: float
    cov: float
    se_cov: float
    limit_cov: float
    skew: float
    excess_kurtosis: float
    pass_mean: bool
    pass_var: bool
    pass_cov: bool
    pass_skew: bool
    pass_kurtosis: bool

    @property
    def passed(self) -> bool:
        return (self.pass_mean and self.pass_var and self.pass_cov
                and self.pass_skew and self.pass_kurtosis)


@dataclass(frozen=True)
class FcltReport:
    model: str
    alpha: float
    N: float
    lag: float
    replications: int
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def fclt_diagnostics(batch: SimBatch, cfg: SimConfig, model: str, *, var_tol: float = 0.10,
                     skew_tol: float = 0.1, kurtosis_tol: float = 0.3,
                     mean_tol: float = 0.1) -> FcltReport:
    """Compare the normalised counts of ``batch`` with the limiting Gaussian process.

    For each grid time the report gives:

    * the mean of the normalised count. It passes when within
      ``3 SE + mean_tol * sqrt(v(t, 0))``, because at finite ``N`` the centring
      leaves a bias of order ``N**(1 - alpha - beta)``;
    * the variance, which passes when within ``var_tol`` relative error of
      ``v(t, 0)``;
    * the lagged covariance, which passes when within ``var_tol * v(t, 0)``
      of ``v(t, u)``;
    * the skewness and excess kurtosis, which must stay below ``skew_tol``
      and ``kurtosis_tol`` in absolute value.

    Where the limit variance is zero (``t = 0``), the normalised count is
    degenerate and the shape flags pass trivially.

    Raises
    ------
    InsufficientReplications
        If the batch has fewer than 1000 replications.
    ConfigError
        If the batch does not come from ``cfg`` and ``model``.
    """
    R = batch.replications
    if R < MIN_REPLICATIONS:
        raise InsufficientReplications(
            f"fclt_diagnostics: {R} replications, at least {MIN_REPLICATIONS} required"
        )
    if batch.model != model or not np.array_equal(batch.times, cfg.sample_times) \
            or batch.lag != cfg.lag:
        raise ConfigError("fclt_diagnostics: batch does not match configuration")
    alpha = cfg.scaling.alpha
    rows = []
    root = np.sqrt(R)
    for k, t in enumerate(cfg.sample_times):
        x = batch.normalized[:, k]
        y = batch.normalized_lag[:, k]
        mean = float(x.mean())
        se_mean = float(x.std(ddof=1) / root)
        dx = x - mean
        dy = y - y.mean()
        var = float((dx * dx).sum() / (R - 1))
        se_var = float((dx * dx).std(ddof=1) / root)
        cov = float((dx * dy).sum() / (R - 1))
        se_cov = float((dx * dy).std(ddof=1) / root)
        lv = limit_cov(cfg.spec, model, alpha, t, 0.0)
        lc = limit_cov(cfg.spec, model, alpha, t, cfg.lag)
        degenerate = lv == 0.0 and var == 0.0
        if degenerate:
            skew = kurt = 0.0
            rel = 0.0
        else:
            skew = float(stats.skew(x))
            kurt = float(stats.kurtosis(x, fisher=True))
            rel = (var - lv) / lv if lv > 0 else np.inf
        rows.append(FcltRow(
            t=float(t), mean=mean, se_mean=se_mean, var=var, se_var=se_var,
            limit_var=lv, var_rel_err=float(rel), cov=cov, se_cov=se_cov, limit_cov=lc,
            skew=skew, excess_kurtosis=kurt,
            pass_mean=bool(abs(mean) <= 3 * se_mean + mean_tol * np.sqrt(lv)),
            pass_var=bool(abs(rel) <= var_tol),
            pass_cov=bool(abs(cov - lc) <= var_tol * lv + 3 * se_cov if not degenerate else True),
            pass_skew=bool(abs(skew) < skew_tol),
            pass_kurtosis=bool(abs(kurt) < kurtosis_tol),
        ))
    return FcltReport(model=model, alpha=alpha, N=cfg.scaling.N, lag=cfg.lag,
                      replications=R, rows=tuple(rows))


def default_t_star(spec: QueueSpec) -> float:
    """``40 / min(mu_min, mu_inf)``: queue relaxation is ``O(mu)`` whatever ``N``."""
    return 40.0 / min(float(spec.mu.min()), spec.mu_inf)


# Transients decay at least like exp(-mu_min t); past this exponent they are
# below double precision and the stationary formulas are used instead.
STATIONARY_EXPONENT = 37.0


def exact_variance(spec: QueueSpec, model: str, scaling: ScalingParams, t: float) -> float:
    """Exact ``Var M(t)`` of the scaled system, by the model's moment formulas.

    When ``mu_min * t >= 37`` the transient part is below ``1e-16`` of the
    variance and the cancellation-free stationary formulas are returned.
    """
    sc = scaling.apply(spec)
    stationary = float(spec.mu.min()) * float(t) >= STATIONARY_EXPONENT
    if model == "I":
        if stationary:
            return model1.stationary_variance(sc)
        return float(model1.covariance(sc, t, 0.0, method="auto"))
    if stationary:
        return model2.stationary_variance_m2(sc)
    return model2.covariance_m2(sc, t, 0.0)


@dataclass(frozen=True, eq=False)
class SweepTable:
    """Normalised variance ``Var M(t_star) / N**(2 beta)`` over ``alphas`` and ``Ns``.

    ``ratios[a, n]`` and ``se[a, n]`` are the simulated values and their
    standard errors, ``exact[a, n]`` the exact values from the moment
    formulas, and ``limit[a]`` the limit value ``v(t_star, 0)``. The last
    three fields compare the largest and smallest ``N``:

    ``pointwise_closer``
        Whether the largest ``N`` is nearer the limit at each ``alpha``.
    ``significant_reversal``
        Whether it is farther by more than three combined standard errors.
    ``sup_closer``
        Whether the supremum over ``alpha`` of the distance shrinks with ``N``.

    Reversals are recorded here, never hidden.
    """

    model: str
    t_star: float
    alphas: np.ndarray
    Ns: np.ndarray
    ratios: np.ndarray
    se: np.ndarray
    exact: np.ndarray
    limit: np.ndarray
    engines: tuple

    @property
    def distance(self) -> np.ndarray:
        return np.abs(self.ratios - self.limit[:, None])

    @property
    def sup_distance(self) -> np.ndarray:
        return self.distance.max(axis=0)

    @property
    def sup_closer(self) -> bool:
        return bool(np.all(np.diff(self.sup_distance) < 0))

    @property
    def pointwise_closer(self) -> np.ndarray:
        dist = self.distance
        return dist[:, -1] < dist[:, 0]

    @property
    def significant_reversal(self) -> np.ndarray:
        dist = self.distance
        comb = np.sqrt(self.se[:, -1] ** 2 + self.se[:, 0] ** 2)
        return dist[:, -1] - dist[:, 0] > 3.0 * comb

    @property
    def exact_closer(self) -> np.ndarray:
        """Pointwise ordering of the exact ratios (``nan`` cells count as failures)."""
        dist = np.abs(self.exact - self.limit[:, None])
        return dist[:, -1] < dist[:, 0]

    @property
    def flagged_alphas(self) -> np.ndarray:
        return self.alphas[~self.pointwise_closer]


def _cell_seed(seed: int, a: int, n: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(a, n))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def variance_scaling_sweep(spec: QueueSpec, alphas, Ns, t_star: float | None = None,
                           R: int = 10_000, *, seed: int = 0, model: str = "I",
                           engine: str = "auto", threads: int | None = None,
                           with_exact: bool = True) -> SweepTable:
    """Simulated ``Var M(t_star) / N**(2 beta)`` for every ``(alpha, N)``.

    ``t_star`` should be large enough for near-stationarity; the default is
    :func:`default_t_star`. Each cell uses its own seed derived from
    ``seed`` and the cell position.
    """
    alphas = np.asarray(alphas, dtype=float)
    Ns = np.asarray(Ns, dtype=float)
    if t_star is None:
        t_star = default_t_star(spec)
    ratios = np.zeros((alphas.size, Ns.size))
    se = np.zeros_like(ratios)
    exact = np.full_like(ratios, np.nan)
    limit = np.zeros(alphas.size)
    engines = []
    for a, alpha in enumerate(alphas):
        limit[a] = limit_cov(spec, model, float(alpha), t_star, 0.0)
        row = []
        for n, N in enumerate(Ns):
            sc = ScalingParams(float(N), float(alpha))
            cfg = SimConfig(spec, sc, horizon=t_star, sample_times=[t_star], lag=0.0,
                            replications=R, seed=_cell_seed(seed, a, n), engine=engine,
                            threads=threads)
            row.append(choose_engine(cfg))
            batch = simulate(cfg, model)
            growth = N ** (2.0 * sc.beta)
            ratios[a, n] = batch.est_var[0] / growth
            se[a, n] = batch.se_var[0] / growth
            if with_exact:
                exact[a, n] = exact_variance(spec, model, sc, t_star) / growth
        engines.append(tuple(row))
    return SweepTable(model=model, t_star=float(t_star), alphas=alphas, Ns=Ns, ratios=ratios,
                      se=se, exact=exact, limit=limit, engines=tuple(engines))
