"""Exact moments of the queue whose jobs keep the service rate they arrived with.

Conditionally on the background path, ``M(t)`` is Poisson and jobs of
different arrival states are independent. By the law of total covariance

``Cov(M(t), M(t+u)) = sum_i pi_i lam_i / mu_i (1 - e^{-mu_i t}) e^{-mu_i u}
                      + lam^T (K + L1 + L2) lam``.

The kernel matrices are the covariances of the conditional means, split by
the order of the two arrival epochs. Take the arrival epoch ``r`` of a job
present at ``t`` and the arrival epoch ``s`` of a job present at ``t+u``.

``K``
    ``r < s <= t``.
``L2``
    ``s < r <= t``.
``L1``
    ``r <= t < s <= t + u``. Empty when ``u = 0``.

Each is reduced to a single integral over the epoch difference ``w`` and
evaluated by adaptive Gauss-Legendre quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain_core import QueueSpec, centered_transition_matrices, weighted_deviation_matrix
from .quadrature import geometric_breakpoints, integrate

QUAD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CovKernel:
    """Kernel matrices of the covariance at ``(t, u)``."""

    t: float
    u: float
    K_mat: np.ndarray
    L1_mat: np.ndarray
    L2_mat: np.ndarray

    @property
    def L_mat(self) -> np.ndarray:
        return self.L1_mat + self.L2_mat

    def quadratic_form(self, lam) -> float:
        lam = np.asarray(lam, dtype=float)
        return float(lam @ (self.K_mat + self.L1_mat + self.L2_mat) @ lam)


def _check_tu(t, u):
    t, u = float(t), float(u)
    if t < 0 or u < 0:
        raise ValueError("t and u must be nonnegative")
    return t, u


def _panels(spec: QueueSpec, upper: float, *extra: float) -> list[float]:
    """Breakpoints resolving the relaxation scale of the chain."""
    return geometric_breakpoints(spec.chain.gap, upper) + [float(x) for x in extra]


def _centered(spec: QueueSpec, w):
    """``P(w) - Pi`` on an array of epoch differences, shape ``(n, d, d)``."""
    return centered_transition_matrices(spec.gen, w)


def mean_m2(spec: QueueSpec, t):
    """``E M(t) = sum_i pi_i lam_i / mu_i (1 - e^{-mu_i t})``."""
    t = np.asarray(t, dtype=float)
    w = spec.pi * spec.lam / spec.mu
    out = ((1.0 - np.exp(-np.multiply.outer(t, spec.mu))) * w).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def script_K(spec: QueueSpec, t, u) -> np.ndarray:
    """Kernel for ``r < s <= t`` (earlier epoch belongs to the job at ``t``).

    ``K_ij = pi_i / (mu_i + mu_j) * int_0^t
    (e^{-mu_i w - mu_j u} - e^{-mu_i t - mu_j (t + u - w)}) (p_ij(w) - pi_j) dw``.
    """
    t, u = _check_tu(t, u)
    d = spec.dim
    if d == 1 or t == 0.0:
        return np.zeros((d, d))
    mi = spec.mu[:, None]
    mj = spec.mu[None, :]

    def f(w):
        w3 = w[:, None, None]
        weight = np.exp(-mi * w3 - mj * u) - np.exp(-mi * t - mj * (t + u - w3))
        return weight * _centered(spec, w)

    val = integrate(f, 0.0, t, breakpoints=_panels(spec, t), abs_tol=QUAD_TOL,
                    what="model2.script_K")
    return spec.pi[:, None] / (mi + mj) * val


def script_L_parts(spec: QueueSpec, t, u):
    """The kernels ``(L1, L2)`` for arrivals after ``t`` and for the job at ``t + u`` arriving first.

    In both, column ``j`` is the arrival state of the earlier of the two
    arrivals and row ``i`` that of the later one. For ``L1`` the earlier
    arrival is the job present at ``t``. For ``L2`` it is the job present at
    ``t + u``.

    ``L2_ij = pi_j / (mu_i + mu_j) * int_0^t
    (e^{-mu_j (u + w)} - e^{-mu_i (t - w) - mu_j (t + u)}) (p_ji(w) - pi_i) dw``

    ``L1_ij = pi_j / (mu_i + mu_j) * int_0^{t+u} (h(w) - l(w)) (p_ji(w) - pi_i) dw``
    where ``h(w) = e^{-mu_i (u - w)}`` for ``w <= u`` and
    ``e^{-mu_j (w - u)}`` beyond, and ``l(w) = e^{-mu_i u - mu_j w}`` for
    ``w <= t`` and ``e^{-mu_j t - mu_i (t + u - w)}`` beyond.
    """
    t, u = _check_tu(t, u)
    d = spec.dim
    zero = np.zeros((d, d))
    if d == 1:
        return zero, zero.copy()
    mi = spec.mu[:, None]
    mj = spec.mu[None, :]
    pref = spec.pi[None, :] / (mi + mj)

    def centered_T(w):
        # (p_ji(w) - pi_i) laid out at position (i, j)
        return np.swapaxes(_centered(spec, w), 1, 2)

    if t > 0.0:
        def f2(w):
            w3 = w[:, None, None]
            weight = np.exp(-mj * (u + w3)) - np.exp(-mi * (t - w3) - mj * (t + u))
            return weight * centered_T(w)

        L2 = pref * integrate(f2, 0.0, t, breakpoints=_panels(spec, t), abs_tol=QUAD_TOL,
                              what="model2.script_L")
    else:
        L2 = zero.copy()

    if t > 0.0 and u > 0.0:
        def f1(w):
            w3 = w[:, None, None]
            hi = np.where(w3 <= u, np.exp(-mi * np.maximum(u - w3, 0.0)),
                          np.exp(-mj * np.maximum(w3 - u, 0.0)))
            lo = np.where(w3 <= t, np.exp(-mi * u - mj * np.minimum(w3, t)),
                          np.exp(-mj * t - mi * np.maximum(t + u - w3, 0.0)))
            return (hi - lo) * centered_T(w)

        L1 = pref * integrate(f1, 0.0, t + u, breakpoints=_panels(spec, t + u, u, t),
                              abs_tol=QUAD_TOL,
                              what="model2.script_L")
    else:
        L1 = zero.copy()
    return L1, L2


def script_L(spec: QueueSpec, t, u) -> np.ndarray:
    """``L = L1 + L2``; see :func:`script_L_parts`."""
    L1, L2 = script_L_parts(spec, t, u)
    return L1 + L2


def cov_kernel(spec: QueueSpec, t, u) -> CovKernel:
    t, u = _check_tu(t, u)
    L1, L2 = script_L_parts(spec, t, u)
    return CovKernel(t=t, u=u, K_mat=script_K(spec, t, u), L1_mat=L1, L2_mat=L2)


def covariance_m2(spec: QueueSpec, t, u) -> float:
    """``Cov(M(t), M(t+u))``.

    A negative lag is answered by symmetry: ``(t, u)`` with ``u < 0`` is
    evaluated as ``(t + u, -u)``, which requires ``t + u >= 0``.
    """
    t, u = float(t), float(u)
    if u < 0:
        t, u = t + u, -u
    t, u = _check_tu(t, u)
    ker = cov_kernel(spec, t, u)
    diag = spec.pi * spec.lam / spec.mu * (1.0 - np.exp(-spec.mu * t)) * np.exp(-spec.mu * u)
    return float(diag.sum() + ker.quadratic_form(spec.lam))


def _tail_horizon(spec: QueueSpec) -> float:
    ca = spec.chain
    return 40.0 / (ca.gap + spec.mu.min())


def stationary_covariance_m2(spec: QueueSpec, u) -> float:
    """``Cov(M(t), M(t+u))`` for a system started in stationarity.

    Sum of ``pi_i lam_i / mu_i e^{-mu_i u}``, of
    ``pi_i lam_i lam_j / (mu_i + mu_j) e^{-mu_i u} D^(mu)_ij``, and of
    ``pi_j lam_i lam_j / (mu_i + mu_j)`` times
    ``int_0^u e^{-mu_i (u - w)} (p_ji(w) - pi_i) dw
    + int_u^inf e^{-mu_j (w - u)} (p_ji(w) - pi_i) dw``.
    The infinite range is truncated where the integrand is below ``e^{-40}``
    of its scale.
    """
    u = float(u)
    if u < 0:
        raise ValueError("lag u must be nonnegative")
    lam, mu, pi = spec.lam, spec.mu, spec.pi
    out = float((pi * lam / mu * np.exp(-mu * u)).sum())
    if spec.dim == 1:
        return out
    mi = mu[:, None]
    mj = mu[None, :]
    ll = np.outer(lam, lam)
    Dmu = weighted_deviation_matrix(spec.gen, mu)
    out += float((pi[:, None] * ll / (mi + mj) * np.exp(-mi * u) * Dmu).sum())

    def centered_T(w):
        return np.swapaxes(_centered(spec, w), 1, 2)

    def f(w):
        w3 = w[:, None, None]
        weight = np.where(w3 <= u, np.exp(-mi * np.maximum(u - w3, 0.0)),
                          np.exp(-mj * np.maximum(w3 - u, 0.0)))
        return weight * centered_T(w)

    upper = u + _tail_horizon(spec)
    val = integrate(f, 0.0, upper, breakpoints=_panels(spec, upper, u), abs_tol=QUAD_TOL,
                    what="model2.stationary_covariance_m2")
    out += float((pi[None, :] * ll / (mi + mj) * val).sum())
    return out


def stationary_variance_m2(spec: QueueSpec) -> float:
    """``sum_i pi_i lam_i / mu_i + 2 sum_ij pi_i lam_i lam_j / (mu_i + mu_j) D^(mu)_ij``."""
    lam, mu, pi = spec.lam, spec.mu, spec.pi
    Dmu = weighted_deviation_matrix(spec.gen, mu)
    kern = pi[:, None] * np.outer(lam, lam) / (mu[:, None] + mu[None, :]) * Dmu
    return float((pi * lam / mu).sum() + 2.0 * kern.sum())
