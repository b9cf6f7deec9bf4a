"""Limit objects of the fluctuation theory under the scaling ``(N, alpha)``.

For ``alpha < 1`` the fluctuations are driven by the background chain and
live on scale ``N**(1 - alpha/2)``. For ``alpha > 1`` they are Poissonian
on scale ``N**(1/2)``. At ``alpha = 1`` both contributions are present.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain_core import QueueSpec
from .errors import NotPSD
from .quadrature import integrate

QUAD_TOL = 1e-10


def _branches(alpha: float):
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return float(alpha <= 1.0), float(alpha >= 1.0)


def rho1(spec: QueueSpec, t):
    """Fluid mean ``(lam_inf / mu_inf) (1 - e^{-mu_inf t})``."""
    t = np.asarray(t, dtype=float)
    out = spec.lam_inf / spec.mu_inf * (1.0 - np.exp(-spec.mu_inf * t))
    return float(out) if out.ndim == 0 else out


def _modulation_rate(spec: QueueSpec, s):
    """``2 pi^T (Lam - Mu rho(s)) D (Lam - Mu rho(s)) 1`` for an array of ``s``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    r = rho1(spec, s)
    x = spec.lam[None, :] - spec.mu[None, :] * np.atleast_1d(r)[:, None]
    D = spec.chain.D
    return 2.0 * np.einsum("i,ni,ij,nj->n", spec.pi, x, D, x)


def diffusion_V_prime(spec: QueueSpec, t):
    """Instantaneous variance rate of the modulation-driven noise at time ``t``."""
    out = _modulation_rate(spec, t)
    return float(out[0]) if np.ndim(t) == 0 else out


def diffusion_V(spec: QueueSpec, t) -> float:
    """Integrated variance rate ``V(t) = int_0^t V'(s) ds``."""
    t = float(t)
    return float(integrate(lambda s: _modulation_rate(spec, s), 0.0, t,
                           abs_tol=QUAD_TOL, what="asymptotics.diffusion_V"))


def varsigma1(spec: QueueSpec, t) -> float:
    """Variance of the modulation-driven OU limit at time ``t``.

    ``int_0^t e^{-2 mu_inf (t - s)} V'(s) ds``, by adaptive quadrature.
    """
    t = float(t)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if spec.dim == 1 or t == 0.0:
        return 0.0
    mu = spec.mu_inf

    def f(s):
        return np.exp(-2.0 * mu * (t - s)) * _modulation_rate(spec, s)

    return float(integrate(f, 0.0, t, abs_tol=QUAD_TOL, what="asymptotics.varsigma1"))


def v1(spec: QueueSpec, alpha: float, t, u) -> float:
    """Limit covariance ``e^{-mu_inf u} (varsigma1(t) 1{alpha<=1} + rho1(t) 1{alpha>=1})``."""
    slow, fast = _branches(alpha)
    t, u = float(t), float(u)
    val = 0.0
    if slow:
        val += varsigma1(spec, t)
    if fast:
        val += rho1(spec, t)
    return float(np.exp(-spec.mu_inf * u) * val)


def rho2_i(spec: QueueSpec, i: int, t):
    """Fluid mean of type ``i`` jobs, ``(pi_i lam_i / mu_i) (1 - e^{-mu_i t})``."""
    t = np.asarray(t, dtype=float)
    out = spec.pi[i] * spec.lam[i] / spec.mu[i] * (1.0 - np.exp(-spec.mu[i] * t))
    return float(out) if out.ndim == 0 else out


def _modulation_matrix(spec: QueueSpec) -> np.ndarray:
    """``pi_i D_ij + pi_j D_ji``."""
    pD = spec.pi[:, None] * spec.chain.D
    return pD + pD.T


def ou_cov_m2(spec: QueueSpec, i: int, j: int, t, poissonian: bool = False) -> float:
    """Covariance of the type-``i`` and type-``j`` OU limits at equal times.

    With ``poissonian=False``, the modulation-driven value
    ``lam_i lam_j / (mu_i + mu_j) (1 - e^{-(mu_i + mu_j) t}) (pi_i D_ij + pi_j D_ji)``.
    With ``poissonian=True``, the Poisson-driven value: ``rho2_i(t)`` on the
    diagonal and 0 off it.
    """
    t = float(t)
    if poissonian:
        return rho2_i(spec, i, t) if i == j else 0.0
    c = spec.mu[i] + spec.mu[j]
    return float(spec.lam[i] * spec.lam[j] / c * (1.0 - np.exp(-c * t))
                 * _modulation_matrix(spec)[i, j])


def varsigma2_i(spec: QueueSpec, i: int, t) -> float:
    """``sum_j lam_i lam_j / (mu_i + mu_j) (1 - e^{-(mu_i + mu_j) t}) (pi_j D_ji + pi_i D_ij)``."""
    return float(sum(ou_cov_m2(spec, i, j, t) for j in range(spec.dim)))


def v2(spec: QueueSpec, alpha: float, t, u) -> float:
    """Limit covariance ``sum_i e^{-mu_i u} (varsigma2_i(t) 1{alpha<=1} + rho2_i(t) 1{alpha>=1})``."""
    slow, fast = _branches(alpha)
    t, u = float(t), float(u)
    total = 0.0
    for i in range(spec.dim):
        val = 0.0
        if slow:
            val += varsigma2_i(spec, i, t)
        if fast:
            val += rho2_i(spec, i, t)
        total += np.exp(-spec.mu[i] * u) * val
    return float(total)


def limit_cov(spec: QueueSpec, model: str, alpha: float, t, u) -> float:
    """Dispatch to :func:`v1` (model ``"I"``) or :func:`v2` (model ``"II"``)."""
    if model == "I":
        return v1(spec, alpha, t, u)
    if model == "II":
        return v2(spec, alpha, t, u)
    raise ValueError(f"model must be 'I' or 'II', got {model!r}")


def limit_mean(spec: QueueSpec, model: str, t):
    """Fluid mean used to centre the count process."""
    if model == "I":
        return rho1(spec, t)
    if model == "II":
        return sum(rho2_i(spec, i, t) for i in range(spec.dim))
    raise ValueError(f"model must be 'I' or 'II', got {model!r}")


def diffusion_W(spec: QueueSpec, t):
    """Poisson clock ``W(t) = lam_inf t + lam_inf (t - (1 - e^{-mu_inf t}) / mu_inf)``."""
    t = np.asarray(t, dtype=float)
    lam, mu = spec.lam_inf, spec.mu_inf
    out = lam * t + lam * (t - (1.0 - np.exp(-mu * t)) / mu)
    return float(out) if out.ndim == 0 else out


def diffusion_W_prime(spec: QueueSpec, t):
    """``W'(t) = 2 lam_inf - lam_inf e^{-mu_inf t}``."""
    t = np.asarray(t, dtype=float)
    out = 2.0 * spec.lam_inf - spec.lam_inf * np.exp(-spec.mu_inf * t)
    return float(out) if out.ndim == 0 else out


def diffusion_w_i(spec: QueueSpec, i: int, t):
    """Type-``i`` Poisson clock ``lam_i pi_i t + pi_i lam_i (t - (1 - e^{-mu_i t}) / mu_i)``."""
    t = np.asarray(t, dtype=float)
    a = spec.lam[i] * spec.pi[i]
    out = a * t + a * (t - (1.0 - np.exp(-spec.mu[i] * t)) / spec.mu[i])
    return float(out) if out.ndim == 0 else out


def diffusion_V_matrix(spec: QueueSpec) -> np.ndarray:
    """``Lam (diag(pi) D + D^T diag(pi)) Lam``, checked for positive semidefiniteness.

    Raises
    ------
    NotPSD
        If an eigenvalue is below ``-1e-8``.
    """
    V = spec.Lam @ _modulation_matrix(spec) @ spec.Lam
    V = 0.5 * (V + V.T)
    ev = np.linalg.eigvalsh(V)
    if ev.min() < -1e-8:
        raise NotPSD(f"diffusion_V_matrix: eigenvalue {ev.min():.3g} < 0")
    return V


def psd_factor(V: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """Cholesky factor of ``V`` after clamping eigenvalues below ``floor`` to zero."""
    ev, vecs = np.linalg.eigh(0.5 * (V + V.T))
    ev = np.where(ev < floor, 0.0, ev)
    clamped = (vecs * ev) @ vecs.T
    jitter = floor * max(1.0, float(np.abs(V).max()))
    return np.linalg.cholesky(clamped + jitter * np.eye(V.shape[0]))


@dataclass(frozen=True, eq=False)
class LimitCurve:
    """Limit covariance ``v(t, u)`` tabulated on a grid; ``values[a, b] = v(t_grid[a], u_grid[b])``."""

    model: str
    alpha: float
    t_grid: np.ndarray
    u_grid: np.ndarray
    values: np.ndarray

    @property
    def beta(self) -> float:
        return max(1.0, 2.0 - self.alpha) / 2.0


def limit_curve(spec: QueueSpec, model: str, alpha: float, t_grid, u_grid) -> LimitCurve:
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    u_grid = np.atleast_1d(np.asarray(u_grid, dtype=float))
    vals = np.array([[limit_cov(spec, model, alpha, t, u) for u in u_grid] for t in t_grid])
    return LimitCurve(model=model, alpha=float(alpha), t_grid=t_grid, u_grid=u_grid, values=vals)
