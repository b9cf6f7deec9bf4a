"""Monte Carlo replications of the scaled queue, with estimators.

Replication ``r`` draws from ``Generator(Philox(key=(seed << 64) | r))``.
Results do not depend on the number of threads or the order in which
replications finish.

Three engines are available:

``"gillespie"``
    Event-by-event simulation of the full Markov process, exact.
``"poisson"``
    Simulates only the background path. Given that path, the count at
    the next recording time is a binomial thinning of the previous count
    plus a Poisson number of surviving new arrivals. This is exact in
    distribution, and the cost scales with the number of background
    switches rather than the number of jobs.
``"aggregated"``
    Replaces the background path by Gaussian occupation times over steps
    that each contain many switches, then applies the same thinning and
    Poisson updates. This is an approximation, valid when switching is
    much faster than the step.

``"auto"`` takes the first exact engine whose estimated work fits the
budget. If neither fits, it falls back to the aggregated engine when that
engine is valid.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..asymptotics import limit_mean
from ..chain_core import QueueSpec
from ..errors import ConfigError, SimulationOverflow
from ..model1 import ScalingParams
from . import _kernels as kern

ENGINES = ("auto", "gillespie", "poisson", "aggregated")
WORK_BUDGET = 5e8
# Aggregated steps must hold this many correlation times of the scaled chain.
MIN_SWITCHES_PER_STEP = 100.0
# ... and be short compared with service times.
MAX_SERVICE_FRACTION = 0.05
_SAFE_MEAN = 1e15


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Simulation settings.

    Parameters
    ----------
    spec : QueueSpec
        Unscaled queue; ``scaling`` is applied inside the simulator.
    scaling : ScalingParams
    horizon : float
        End of the simulated window ``[0, T]``.
    sample_times : array_like
        Strictly increasing times in ``[0, T]`` at which counts are recorded.
    lag : float
        Counts are also recorded at ``sample_times + lag``.
    replications : int
    seed : int
        Root seed in ``[0, 2**64)``.
    engine : str
        One of ``"auto"``, ``"gillespie"``, ``"poisson"``, ``"aggregated"``.
    threads : int, optional
        Worker threads; defaults to ``MMIQ_THREADS`` or the CPU count.
    step : float, optional
        Step of the aggregated engine. The default is
        ``MAX_SERVICE_FRACTION / max(mu)``.
    """

    spec: QueueSpec
    scaling: ScalingParams
    horizon: float
    sample_times: np.ndarray
    lag: float = 0.0
    replications: int = 1000
    seed: int = 0
    engine: str = "auto"
    threads: int | None = None
    step: float | None = None

    def __post_init__(self):
        st = np.atleast_1d(np.asarray(self.sample_times, dtype=float))
        if st.ndim != 1 or st.size == 0:
            raise ConfigError("sample_times must be a non-empty 1-D grid")
        if np.any(np.diff(st) <= 0):
            raise ConfigError("sample_times must be strictly increasing")
        if st[0] < 0:
            raise ConfigError("sample_times must be nonnegative")
        if not (self.lag >= 0):
            raise ConfigError("lag must be nonnegative")
        if st[-1] + self.lag > self.horizon + 1e-12:
            raise ConfigError("sample_times max + lag exceeds horizon")
        if int(self.replications) < 1:
            raise ConfigError("replications must be a positive integer")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must lie in [0, 2**64)")
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}")
        if self.threads is not None and int(self.threads) < 1:
            raise ConfigError("threads must be positive")
        if self.step is not None and not self.step > 0:
            raise ConfigError("step must be positive")
        st.setflags(write=False)
        object.__setattr__(self, "sample_times", st)
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "lag", float(self.lag))
        object.__setattr__(self, "replications", int(self.replications))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def scaled_spec(self) -> QueueSpec:
        return self.scaling.apply(self.spec)


def _moments(x: np.ndarray, y: np.ndarray):
    R = x.shape[0]
    root = math.sqrt(R)
    mx = x.mean(axis=0)
    my = y.mean(axis=0)
    dx = x - mx
    dy = y - my
    ddof = 1 if R > 1 else 0
    sq = dx * dx
    pr = dx * dy
    denom = max(R - 1, 1)
    return dict(
        est_mean=mx,
        se_mean=x.std(axis=0, ddof=ddof) / root,
        est_mean_lag=my,
        est_var=sq.sum(axis=0) / denom,
        se_var=sq.std(axis=0, ddof=ddof) / root,
        est_cov=pr.sum(axis=0) / denom,
        se_cov=pr.std(axis=0, ddof=ddof) / root,
    )


@dataclass(frozen=True, eq=False)
class SimBatch:
    """Replication output and estimators.

    ``counts[r, k]`` is the count at ``times[k]``, ``lagged[r, k]`` the count
    at ``times[k] + lag``. Model II batches also carry per-arrival-state
    counts with a trailing axis of length ``d``. ``occupancy[r]`` holds the
    fractions of ``[0, T]`` spent in each background state. Standard errors
    are sample standard deviations over ``sqrt(R)``. For the variance and
    covariance they are taken over the per-replication products.
    ``normalized`` is ``N**(-beta) (M(t) - N rho(t))`` with ``rho`` the fluid mean.
    """

    model: str
    engine: str
    scaling: ScalingParams
    times: np.ndarray
    lag: float
    counts: np.ndarray
    lagged: np.ndarray
    type_counts: np.ndarray | None
    lagged_type_counts: np.ndarray | None
    occupancy: np.ndarray
    est_mean: np.ndarray
    se_mean: np.ndarray
    est_mean_lag: np.ndarray
    est_var: np.ndarray
    se_var: np.ndarray
    est_cov: np.ndarray
    se_cov: np.ndarray
    normalized: np.ndarray
    normalized_lag: np.ndarray

    @property
    def replications(self) -> int:
        return self.counts.shape[0]


def _default_threads() -> int:
    env = os.environ.get("MMIQ_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"MMIQ_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError("MMIQ_THREADS must be positive")
        return n
    return os.cpu_count() or 1


def _switch_rate(spec: QueueSpec, scaling: ScalingParams) -> float:
    return scaling.N ** scaling.alpha * float(spec.pi @ spec.gen.exit_rates)


def aggregation_step(cfg: SimConfig) -> float:
    return cfg.step if cfg.step is not None else MAX_SERVICE_FRACTION / float(cfg.spec.mu.max())


def aggregation_valid(cfg: SimConfig) -> bool:
    """Whether each aggregated step spans enough correlation times of the scaled chain."""
    if cfg.spec.dim == 1:
        return True
    relax = cfg.scaling.N ** cfg.scaling.alpha * cfg.spec.chain.gap
    return relax * aggregation_step(cfg) >= MIN_SWITCHES_PER_STEP


def choose_engine(cfg: SimConfig) -> str:
    """Resolve ``cfg.engine``; ``"auto"`` picks by estimated work."""
    if cfg.engine != "auto":
        return cfg.engine
    spec, sc = cfg.spec, cfg.scaling
    switches = _switch_rate(spec, sc) * cfg.horizon * cfg.replications
    arrivals = sc.N * float(spec.lam.max()) * cfg.horizon * cfg.replications
    if switches + 2.0 * arrivals <= WORK_BUDGET:
        return "gillespie"
    if switches <= WORK_BUDGET or not aggregation_valid(cfg):
        return "poisson"
    return "aggregated"


def _stream(seed: int, r: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed << 64) | r))


def _run(cfg: SimConfig, model: str):
    spec = cfg.scaled_spec
    engine = choose_engine(cfg)
    d = spec.dim
    R = cfg.replications
    if spec.lam.max() * cfg.horizon > _SAFE_MEAN:
        raise SimulationOverflow("simulate: expected counts exceed the safe integer range")

    rec = np.unique(np.concatenate([cfg.sample_times, cfg.sample_times + cfg.lag]))
    idx_now = np.searchsorted(rec, cfg.sample_times)
    idx_lag = np.searchsorted(rec, cfg.sample_times + cfg.lag)
    K = rec.size

    q_exit = spec.gen.exit_rates.copy()
    off = spec.Q - np.diag(np.diag(spec.Q))
    jump_cum = np.cumsum(off, axis=1)
    if d == 1:
        jump_cum = np.ones((1, 1))
    pi = spec.pi.copy()
    pi_cum = np.cumsum(pi)
    lam = spec.lam.copy()
    mu = spec.mu.copy()
    horizon = cfg.horizon

    chol = None
    step = aggregation_step(cfg)
    if engine == "aggregated":
        from ..asymptotics import psd_factor
        ca = spec.chain
        pD = pi[:, None] * ca.D
        chol = psd_factor(pD + pD.T)

    counts = np.zeros((R, K), dtype=np.int64)
    types = np.zeros((R, K, d), dtype=np.int64) if model == "II" else None
    occ = np.zeros((R, d))

    def work(lo, hi):
        for r in range(lo, hi):
            rng = _stream(cfg.seed, r)
            if model == "I":
                if engine == "gillespie":
                    kern.gillespie_model1(rng, jump_cum, q_exit, lam, mu, pi_cum, rec,
                                          horizon, counts[r], occ[r])
                elif engine == "poisson":
                    kern.poisson_model1(rng, jump_cum, q_exit, lam, mu, pi_cum, rec,
                                        horizon, counts[r], occ[r])
                else:
                    kern.aggregated_model1(rng, pi, chol, lam, mu, rec, horizon, step,
                                           counts[r], occ[r])
            else:
                if engine == "gillespie":
                    kern.gillespie_model2(rng, jump_cum, q_exit, lam, mu, pi_cum, rec,
                                          horizon, counts[r], types[r], occ[r])
                elif engine == "poisson":
                    kern.poisson_model2(rng, jump_cum, q_exit, lam, mu, pi_cum, rec,
                                        horizon, counts[r], types[r], occ[r])
                else:
                    kern.aggregated_model2(rng, pi, chol, lam, mu, rec, horizon, step,
                                           counts[r], types[r], occ[r])

    threads = int(cfg.threads) if cfg.threads is not None else _default_threads()
    threads = max(1, min(threads, R))
    if threads == 1:
        work(0, R)
    else:
        bounds = np.linspace(0, R, 4 * threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(work, int(a), int(b))
                       for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            for f in futures:
                f.result()
    if np.any(counts < 0):
        raise SimulationOverflow("simulate: negative counts indicate integer overflow")
    return engine, counts, types, occ, idx_now, idx_lag


def _simulate(cfg: SimConfig, model: str) -> SimBatch:
    engine, counts, types, occ, i0, i1 = _run(cfg, model)
    x = counts[:, i0]
    y = counts[:, i1]
    stats = _moments(x.astype(float), y.astype(float))
    sc = cfg.scaling
    scale = sc.N ** (-sc.beta)
    centre_now = sc.N * np.asarray(limit_mean(cfg.spec, model, cfg.sample_times))
    centre_lag = sc.N * np.asarray(limit_mean(cfg.spec, model, cfg.sample_times + cfg.lag))
    for arr in (x, y, occ):
        arr.setflags(write=False)
    return SimBatch(
        model=model,
        engine=engine,
        scaling=sc,
        times=cfg.sample_times,
        lag=cfg.lag,
        counts=x,
        lagged=y,
        type_counts=None if types is None else types[:, i0, :],
        lagged_type_counts=None if types is None else types[:, i1, :],
        occupancy=occ / cfg.horizon,
        normalized=scale * (x - centre_now),
        normalized_lag=scale * (y - centre_lag),
        **stats,
    )


def simulate_model1(cfg: SimConfig) -> SimBatch:
    """Replicate the queue in which every job is served at the current background rate."""
    return _simulate(cfg, "I")


def simulate_model2(cfg: SimConfig) -> SimBatch:
    """Replicate the queue in which jobs keep the service rate of their arrival state."""
    return _simulate(cfg, "II")


def simulate(cfg: SimConfig, model: str) -> SimBatch:
    if model == "I":
        return simulate_model1(cfg)
    if model == "II":
        return simulate_model2(cfg)
    raise ConfigError(f"model must be 'I' or 'II', got {model!r}")
