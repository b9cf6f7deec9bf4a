"""Exact moments of the queue whose service rate follows the current background state.

Let ``M(t)`` be the number of jobs and ``J(t)`` the background state, with
the system empty at time 0. Second-order moments are computed in two
stages.

1. Forward in ``t``: the row vectors ``m_j(t) = E[M(t) 1{J(t)=j}]`` and
   ``s_j(t) = E[M(t)^2 1{J(t)=j}]`` solve

   ``m' = pi^T Lam - m Mu + m Q``,
   ``s' = pi^T Lam + 2 m Lam + m Mu - 2 s Mu + s Q``.

2. Forward in the lag ``tau`` in ``[0, u]``, with ``i = J(t)`` and
   ``j = J(t+tau)``, the matrices

   ``K_ij = P(J(t)=i, J(t+tau)=j)`` (with ``J(t)`` stationary),
   ``E_ij = E[M(t) 1{...}]``, ``G_ij = E[M(t+tau) 1{...}]``,
   ``C_ij = E[M(t) M(t+tau) 1{...}]``

   solve ``K' = K Q``, ``E' = E Q``, ``G' = K Lam - G Mu + G Q`` and
   ``C' = E Lam - C Mu + C Q`` from ``K = diag(pi)``,
   ``E = G = diag(m(t))`` and ``C = diag(s(t))``.

Both stages are linear with constant coefficients. The lag stage is
integrated in column-stacked form, ``vec(X Q) = (Q^T kron I) vec X``.
The covariance is ``1^T c - (1^T e)(1^T g)``.

This raw system is exposed through :func:`joint_moment_odes`. For large
counts ``E M^2`` and ``(E M)^2`` agree in most of their digits, so
:func:`covariance` by default integrates moments about the mean instead,
with every vector driven by the generator split into a multiple of ``pi``
plus a zero-sum remainder. Stationary quantities use the same centring (see
:func:`stationary_centered_moments`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._ode import ATOL, RTOL, solve_affine, solve_general
from .chain_core import QueueSpec, transition_matrix, vec
from .errors import SingularSystem

_COND_LIMIT = 1e13


@dataclass(frozen=True)
class ScalingParams:
    """Scale ``N`` and switching exponent ``alpha``.

    Arrival rates become ``N lambda`` and the generator ``N**alpha Q``.
    ``beta = max(1, 2 - alpha) / 2`` is the normalising exponent of the
    fluctuations.
    """

    N: float
    alpha: float
    beta: float = field(init=False)

    def __post_init__(self):
        if not (self.N > 0 and np.isfinite(self.N)):
            raise ValueError("N must be positive")
        if not (self.alpha >= 0 and np.isfinite(self.alpha)):
            raise ValueError("alpha must be nonnegative")
        object.__setattr__(self, "beta", max(1.0, 2.0 - self.alpha) / 2.0)

    def apply(self, spec: QueueSpec) -> QueueSpec:
        return spec.scaled(self.N, self.alpha)


@dataclass(frozen=True, eq=False)
class JointMomentState:
    """Vectorised joint moments for a fixed lag ``u`` on a grid of ``t``.

    Row ``n`` of ``e``, ``g`` and ``c`` holds ``vec E(t_n, u)``,
    ``vec G(t_n, u)`` and ``vec C(t_n, u)``. ``k`` is ``vec K(u)``.
    """

    u: float
    t_grid: np.ndarray
    e: np.ndarray
    g: np.ndarray
    c: np.ndarray
    k: np.ndarray

    @property
    def mean_t(self) -> np.ndarray:
        """``E M(t)`` on the grid."""
        return self.e.sum(axis=1)

    @property
    def mean_t_plus_u(self) -> np.ndarray:
        """``E M(t+u)`` on the grid."""
        return self.g.sum(axis=1)

    @property
    def cov(self) -> np.ndarray:
        """``Cov(M(t), M(t+u))`` on the grid."""
        return self.c.sum(axis=1) - self.mean_t * self.mean_t_plus_u


def _check_grid(t_grid) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if t.ndim != 1 or np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValueError("time grid must be nonnegative and nondecreasing")
    return t


def _first_stage_system(spec: QueueSpec):
    """Coefficients of the affine system for ``y = [m, s]`` (column form)."""
    d = spec.dim
    QT = spec.Q.T
    Lam, Mu = spec.Lam, spec.Mu
    A = np.zeros((2 * d, 2 * d))
    A[:d, :d] = QT - Mu
    A[d:, :d] = 2.0 * Lam + Mu
    A[d:, d:] = QT - 2.0 * Mu
    f = spec.lam * spec.pi
    b = np.concatenate([f, f])
    return A, b


def _lag_system(spec: QueueSpec) -> np.ndarray:
    """Generator of the lag stage acting on ``z = [k, e, g, c]``."""
    d = spec.dim
    ident = np.eye(d)
    QT = np.kron(spec.Q.T, ident)
    LamI = np.kron(spec.Lam, ident)
    decay = QT - np.kron(spec.Mu, ident)
    n = d * d
    A = np.zeros((4 * n, 4 * n))
    A[0:n, 0:n] = QT
    A[n:2 * n, n:2 * n] = QT
    A[2 * n:3 * n, 0:n] = LamI
    A[2 * n:3 * n, 2 * n:3 * n] = decay
    A[3 * n:, n:2 * n] = LamI
    A[3 * n:, 3 * n:] = decay
    return A


def _lag_initial(pi, m, s) -> np.ndarray:
    """Columns ``[vec diag(pi), vec diag(m), vec diag(m), vec diag(s)]`` per grid point."""
    d = pi.size
    npts = m.shape[0]
    diag_idx = np.arange(d) * (d + 1)
    z = np.zeros((4 * d * d, npts))
    z[diag_idx, :] = pi[:, None]
    z[d * d + diag_idx, :] = m.T
    z[2 * d * d + diag_idx, :] = m.T
    z[3 * d * d + diag_idx, :] = s.T
    return z


def _propagate_lag(spec: QueueSpec, z0: np.ndarray, u: float, method: str, what: str):
    if u == 0.0:
        return z0
    A = _lag_system(spec)
    return solve_affine(A, None, z0, [u], method=method, what=what)[0]


def _mean_split_system(spec: QueueSpec):
    """Affine system for ``[Mbar, w]`` where ``m = Mbar pi + w`` and ``sum(w) = 0``.

    ``Mbar' = lam.pi - (mu.pi) Mbar - mu.w`` and
    ``w' = pi*(lam - lam.pi) - Mbar pi*(mu - mu.pi) + (Q^T - Mu + pi mu^T) w``.
    The generator only multiplies ``w``, which is small when switching is fast.
    """
    d = spec.dim
    pi, lam, mu = spec.pi, spec.lam, spec.mu
    lam_inf, mu_inf = float(lam @ pi), float(mu @ pi)
    A = np.zeros((d + 1, d + 1))
    A[0, 0] = -mu_inf
    A[0, 1:] = -mu
    A[1:, 0] = -pi * (mu - mu_inf)
    A[1:, 1:] = spec.Q.T - np.diag(mu) + np.outer(pi, mu)
    b = np.concatenate([[lam_inf], pi * (lam - lam_inf)])
    return A, b


def _stiffness(spec: QueueSpec, horizon: float) -> float:
    return float((np.abs(spec.Q).sum(axis=1).max() + 2.0 * spec.mu.max()) * horizon)


# Absolute tolerance per unit of count scale. The split components carry
# rounding noise of order eps times the large ones, so a fixed absolute
# tolerance becomes unattainable once counts reach about 1e5.
_ATOL_PER_SCALE = 1e-13


def _centered_atol(spec: QueueSpec, sizes) -> np.ndarray:
    """Blockwise absolute tolerances from the stationary mean and variance.

    Started empty with stationary ``J``, ``M(t)`` increases stochastically to
    its stationary law, so these bound the transient magnitudes.
    """
    scale1, delta, c = stationary_centered_moments(spec)
    scale2 = float(c.sum() + (spec.pi * delta**2).sum())
    tol1 = max(ATOL, _ATOL_PER_SCALE * scale1)
    tol2 = max(ATOL, _ATOL_PER_SCALE * scale2)
    return np.concatenate([np.full(n1, tol1) for n1 in sizes[:-1]] + [np.full(sizes[-1], tol2)])


def _centered_first_stage(spec: QueueSpec, t: np.ndarray, method: str) -> np.ndarray:
    """``[Mbar, w, eta, omega]`` on the grid, shape ``(n, 2 d + 2)``.

    ``h_j = E[(M - Mbar)^2 1{J=j}] = eta pi_j + omega_j`` with ``sum(omega) = 0``
    obeys ``h' = Q^T h + (2 lam + mu - 2 Mbar mu)*w + lam*pi + Mbar mu*pi
    - 2 mu*h - 2 Mbar' w``.
    """
    d = spec.dim
    pi, lam, mu, QT = spec.pi, spec.lam, spec.mu, spec.Q.T
    A, b = _mean_split_system(spec)
    iw, ie, io = slice(1, d + 1), d + 1, slice(d + 2, 2 * d + 2)
    n = 2 * d + 2

    def fun(_t, y):
        M, w, eta, om = y[0], y[iw], y[ie], y[io]
        f1 = A @ y[:d + 1] + b
        h = eta * pi + om
        coef = 2.0 * lam + mu - 2.0 * M * mu
        deta = coef @ w + lam @ pi + M * (mu @ pi) - 2.0 * (mu @ h)
        raw = QT @ om + coef * w + lam * pi + M * mu * pi - 2.0 * mu * h - 2.0 * f1[0] * w
        out = np.empty(n)
        out[:d + 1] = f1
        out[ie] = deta
        out[io] = raw - deta * pi
        return out

    def jac(_t, y):
        M, w, eta, om = y[0], y[iw], y[ie], y[io]
        f1 = A @ y[:d + 1] + b
        coef = 2.0 * lam + mu - 2.0 * M * mu
        Jm = np.zeros((n, n))
        Jm[:d + 1, :d + 1] = A
        # eta row
        Jm[ie, 0] = -2.0 * (mu @ w) + mu @ pi
        Jm[ie, iw] = coef
        Jm[ie, ie] = -2.0 * (mu @ pi)
        Jm[ie, io] = -2.0 * mu
        # raw rows, then subtract pi times the eta row
        R = np.zeros((d, n))
        R[:, 0] = -2.0 * mu * w + mu * pi - 2.0 * w * A[0, 0]
        R[:, iw] = np.diag(coef) - 2.0 * f1[0] * np.eye(d) - 2.0 * np.outer(w, A[0, 1:])
        R[:, ie] = -2.0 * mu * pi
        R[:, io] = QT - 2.0 * np.diag(mu)
        Jm[io] = R - np.outer(pi, Jm[ie])
        return Jm

    atol = _centered_atol(spec, [d + 1, d + 1])
    return solve_general(fun, jac, np.zeros(n), t, stiffness=_stiffness(spec, t.max()),
                         method=method, atol=atol, what="model1.covariance")


def _centered_lag(spec: QueueSpec, y: np.ndarray, u: float, method: str) -> float:
    """Covariance at lag ``u`` from the centred first-stage state ``y`` at time ``t``.

    With ``X = M(t) - Mbar(t)``, ``e_j = E[X 1{J(t+tau)=j}]`` and
    ``g_j = E[X (M(t+tau) - Mbar(t+tau)) 1{J(t+tau)=j}]`` solve ``e' = Q^T e`` and
    ``g' = (Q^T - Mu) g + (lam - Mbar mu - Mbar')*e``, with ``e(0) = w(t)`` and
    ``g(0) = h(t)``; ``(Mbar, w)`` keep evolving alongside. ``g`` is split as
    ``eta pi + omega``; the covariance is ``eta(u)``.
    """
    d = spec.dim
    if u == 0.0:
        return float(y[d + 1])
    pi, lam, mu, QT = spec.pi, spec.lam, spec.mu, spec.Q.T
    A, b = _mean_split_system(spec)
    iw, ie, ig, io = slice(1, d + 1), slice(d + 1, 2 * d + 1), 2 * d + 1, slice(2 * d + 2, 3 * d + 2)
    n = 3 * d + 2

    def fun(_t, z):
        M, e, eta, om = z[0], z[ie], z[ig], z[io]
        f1 = A @ z[:d + 1] + b
        g = eta * pi + om
        deta = -(mu @ g) + (lam - M * mu) @ e
        raw = QT @ om - mu * g + (lam - M * mu - f1[0]) * e
        out = np.empty(n)
        out[:d + 1] = f1
        out[ie] = QT @ e
        out[ig] = deta
        out[io] = raw - deta * pi
        return out

    def jac(_t, z):
        M, e = z[0], z[ie]
        f1 = A @ z[:d + 1] + b
        Jm = np.zeros((n, n))
        Jm[:d + 1, :d + 1] = A
        Jm[ie, ie] = QT
        Jm[ig, 0] = -(mu @ e)
        Jm[ig, ie] = lam - M * mu
        Jm[ig, ig] = -(mu @ pi)
        Jm[ig, io] = -mu
        R = np.zeros((d, n))
        R[:, 0] = -mu * e - e * A[0, 0]
        R[:, iw] = -np.outer(e, A[0, 1:])
        R[:, ie] = np.diag(lam - M * mu - f1[0])
        R[:, ig] = -mu * pi
        R[:, io] = QT - np.diag(mu)
        Jm[io] = R - np.outer(pi, Jm[ig])
        return Jm

    z0 = np.concatenate([y[:d + 1], y[iw], y[d + 1:]])
    atol = _centered_atol(spec, [2 * d + 1, d + 1])
    z = solve_general(fun, jac, z0, [u], stiffness=_stiffness(spec, u), method=method,
                      atol=atol, what="model1.covariance")[0]
    return float(z[ig])


def first_moments(spec: QueueSpec, t_grid, method: str = "RK45"):
    """Per-state first and second moments ``m(t)`` and ``s(t)``.

    Returns
    -------
    m, s : (n, d) ndarray
        ``E[M(t) 1{J(t)=j}]`` and ``E[M(t)^2 1{J(t)=j}]`` on the grid.
    """
    t = _check_grid(t_grid)
    A, b = _first_stage_system(spec)
    y = solve_affine(A, b, np.zeros(2 * spec.dim), t, method=method,
                     what="model1.first_moments")
    return y[:, :spec.dim], y[:, spec.dim:]


def mean_trajectory(spec: QueueSpec, scaling: ScalingParams, t_grid,
                    method: str = "RK45") -> np.ndarray:
    """Per-state mean ``m(t)`` of the scaled system, shape ``(n, d)``.

    Solves ``m' = N pi^T Lam - m (Mu - N**alpha Q)`` from ``m(0) = 0``;
    ``E M(t) = m(t) 1``. Integrated as ``m = Mbar pi + w`` with ``sum(w) = 0``
    so that fast switching does not swamp the mean in rounding error.

    Raises
    ------
    OdeToleranceFailure
        If the integrator fails or the scaled system is too stiff for the
        chosen explicit method.
    """
    sc = scaling.apply(spec)
    t = _check_grid(t_grid)
    A, b = _mean_split_system(sc)
    y = solve_affine(A, b, np.zeros(sc.dim + 1), t, method=method,
                     what="model1.mean_trajectory")
    return y[:, :1] * sc.pi + y[:, 1:]


def joint_moment_odes(spec: QueueSpec, u: float, t_grid,
                      method: str = "RK45") -> JointMomentState:
    """Solve for ``e, g, c`` at lag ``u`` on ``t_grid``.

    ``spec`` is used as given; apply any scaling beforehand.
    """
    u = float(u)
    if u < 0:
        raise ValueError("lag u must be nonnegative")
    t = _check_grid(t_grid)
    d = spec.dim
    n = d * d
    m, s = first_moments(spec, t, method=method)
    z0 = _lag_initial(spec.pi, m, s)
    z = _propagate_lag(spec, z0, u, method, "model1.joint_moment_odes")
    k = vec(np.diag(spec.pi) @ transition_matrix(spec.gen, u))
    return JointMomentState(
        u=u, t_grid=t,
        e=z[n:2 * n].T.copy(), g=z[2 * n:3 * n].T.copy(), c=z[3 * n:].T.copy(), k=k,
    )


def covariance(spec: QueueSpec, t, u: float, method: str = "RK45",
               formulation: str = "centered"):
    """``Cov(M(t), M(t+u))`` for scalar or array ``t`` and lag ``u >= 0``.

    Parameters
    ----------
    formulation : {"centered", "kronecker"}
        ``"centered"`` integrates moments about the mean with every
        generator-driven vector split as ``sigma pi + w``; it stays accurate
        for very large counts and fast switching. ``"kronecker"`` uses the raw
        two-stage system of :func:`joint_moment_odes`.
    """
    u = float(u)
    if u < 0:
        raise ValueError("lag u must be nonnegative")
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    order = np.argsort(tt, kind="stable")
    grid = _check_grid(tt[order])
    if formulation == "kronecker":
        vals = joint_moment_odes(spec, u, grid, method=method).cov
    elif formulation == "centered":
        ys = _centered_first_stage(spec, grid, method)
        vals = np.array([_centered_lag(spec, y, u, method) for y in ys])
    else:
        raise ValueError(f"unknown formulation {formulation!r}")
    out = np.empty_like(tt)
    out[order] = vals
    return float(out[0]) if scalar else out


def stationary_mean(spec: QueueSpec, u: float = 0.0) -> float:
    """Stationary mean number of jobs.

    Solves ``((I kron Mu) - (Q^T kron-sum Q^T)) e = (I kron Lam) k(u)`` and
    returns ``1^T e``; the result does not depend on ``u``.
    """
    d = spec.dim
    ident = np.eye(d)
    QT = spec.Q.T
    lhs = np.kron(ident, spec.Mu) - (np.kron(QT, ident) + np.kron(ident, QT))
    k = vec(np.diag(spec.pi) @ transition_matrix(spec.gen, u))
    rhs = np.kron(ident, spec.Lam) @ k
    if np.linalg.cond(lhs) > _COND_LIMIT:
        raise SingularSystem("model1.stationary_mean: singular linear system")
    return float(np.linalg.solve(lhs, rhs).sum())


def stationary_first_moments(spec: QueueSpec):
    """Stationary ``m`` and ``s`` (per-state first and second moments)."""
    QT = spec.Q.T
    f = spec.lam * spec.pi
    a1 = spec.Mu - QT
    a2 = 2.0 * spec.Mu - QT
    if max(np.linalg.cond(a1), np.linalg.cond(a2)) > _COND_LIMIT:
        raise SingularSystem("model1.stationary_first_moments: singular linear system")
    m = np.linalg.solve(a1, f)
    s = np.linalg.solve(a2, f + (2.0 * spec.Lam + spec.Mu) @ m)
    return m, s


def split_solve(spec: QueueSpec, rates: np.ndarray, rhs: np.ndarray):
    """Solve ``(diag(rates) - Q^T) x = rhs`` as ``x = sigma pi + w`` with ``sum(w) = 0``.

    The generator annihilates ``pi`` exactly, so it only ever acts on the
    small component ``w``. The scalar ``sigma`` is fixed by the column-sum
    equation, whose coefficients are free of generator entries. This keeps
    full relative accuracy when ``Q`` is many orders of magnitude larger
    than ``rates``.

    Returns
    -------
    sigma : float
    w : (d,) ndarray
    """
    d = spec.dim
    pi = spec.pi
    rates = np.asarray(rates, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    scale = max(1.0, float(np.abs(spec.Q).max()))
    eps = 1.0 / scale
    a = np.zeros((d + 1, d + 1))
    # unknowns: v = w * scale (d entries), sigma
    a[: d - 1, :d] = (np.diag(eps * rates) - spec.Q.T / scale)[: d - 1]
    a[: d - 1, d] = (rates * pi)[: d - 1]
    a[d - 1, :d] = 1.0
    a[d, :d] = eps * rates
    a[d, d] = rates @ pi
    b = np.concatenate([rhs[: d - 1], [0.0, rhs.sum()]])
    if np.linalg.cond(a) > _COND_LIMIT:
        raise SingularSystem("model1.split_solve: singular stationary system")
    z = np.linalg.solve(a, b)
    z += np.linalg.solve(a, b - a @ z)
    return float(z[d]), z[:d] * eps


def stationary_centered_moments(spec: QueueSpec):
    """Stationary moments in centred form.

    Returns
    -------
    mean : float
        ``E M``.
    delta : (d,) ndarray
        ``E[M | J=j] - E M``.
    c : (d,) ndarray
        ``pi_j Var(M | J=j)``.

    Notes
    -----
    With ``m_j = E[M 1{J=j}] = pi_j (EM + delta_j)`` the mean solves
    ``(Mu - Q^T) m = pi lam``. The conditional variances solve
    ``(2 Mu - Q^T) c = pi lam + Mu m + r`` with
    ``r_j = sum_k pi_k q_kj (delta_k - delta_j)**2``, a cancellation-free
    rewrite of the raw second-moment equations. Both are solved with
    :func:`split_solve`.
    """
    pi, lam, mu = spec.pi, spec.lam, spec.mu
    mean, w = split_solve(spec, mu, pi * lam)
    delta = w / pi
    diff2 = (delta[:, None] - delta[None, :]) ** 2
    r = (pi[:, None] * spec.Q * diff2).sum(axis=0)
    b = pi * lam + mu * (mean * pi + w) + r
    sigma, wc = split_solve(spec, 2.0 * mu, b)
    return mean, delta, sigma * pi + wc


def stationary_variance(spec: QueueSpec) -> float:
    """Stationary ``Var M = sum_j c_j + sum_j pi_j delta_j**2`` (law of total variance)."""
    _, delta, c = stationary_centered_moments(spec)
    return float(c.sum() + (spec.pi * delta**2).sum())


def stationary_covariance(spec: QueueSpec, u: float, method: str = "RK45") -> float:
    """``Cov(M(t), M(t+u))`` for a system started in stationarity.

    Let ``e_j = E[(M(0) - EM) 1{J(tau)=j}]`` and
    ``h_j = E[(M(0) - EM)(M(tau) - EM) 1{J(tau)=j}]``. Then ``e' = Q^T e`` and
    ``h' = (Lam - EM Mu) e + (Q^T - Mu) h`` with ``e(0) = pi delta`` and
    ``h(0) = c + pi delta**2``. The covariance is ``sum(h)``. ``h`` is carried
    as ``eta pi + omega`` with ``sum(omega) = 0`` so that the generator never
    multiplies the large component.
    """
    u = float(u)
    if u < 0:
        raise ValueError("lag u must be nonnegative")
    mean, delta, c = stationary_centered_moments(spec)
    pi, mu = spec.pi, spec.mu
    h0 = c + pi * delta**2
    eta0 = float(h0.sum())
    if u == 0.0:
        return eta0
    d = spec.dim
    QT = spec.Q.T
    g = spec.lam - mean * mu
    mpi = float(mu @ pi)
    A = np.zeros((2 * d + 1, 2 * d + 1))
    A[:d, :d] = QT
    A[d, :d] = g
    A[d, d] = -mpi
    A[d, d + 1:] = -mu
    A[d + 1:, :d] = np.diag(g) - np.outer(pi, g)
    A[d + 1:, d] = -(mu * pi - mpi * pi)
    A[d + 1:, d + 1:] = QT - np.diag(mu) + np.outer(pi, mu)
    y0 = np.concatenate([pi * delta, [eta0], h0 - eta0 * pi])
    z = solve_affine(A, None, y0[:, None], [u], method=method,
                     what="model1.stationary_covariance")[0][:, 0]
    return float(z[d])


def stationary_covariance_raw(spec: QueueSpec, u: float, method: str = "RK45") -> float:
    """Stationary covariance through raw second moments and the Kronecker lag system.

    Numerically inferior to :func:`stationary_covariance` for large counts.
    Kept as an independent route for cross-checks.
    """
    u = float(u)
    if u < 0:
        raise ValueError("lag u must be nonnegative")
    m, s = stationary_first_moments(spec)
    z0 = _lag_initial(spec.pi, m[None, :], s[None, :])
    z = _propagate_lag(spec, z0, u, method, "model1.stationary_covariance")[:, 0]
    n = spec.dim ** 2
    mean = m.sum()
    return float(z[3 * n:].sum() - mean * z[2 * n:3 * n].sum())


def mean_correction_coefficients(spec: QueueSpec):
    """Coefficients ``(a, b)`` of the first-order mean correction.

    ``a = pi^T Lam D Mu 1`` and ``b = pi^T Mu D Mu 1``.
    """
    D = spec.chain.D
    a = float(spec.pi @ spec.Lam @ D @ spec.mu)
    b = float(spec.pi @ spec.Mu @ D @ spec.mu)
    return a, b


def mean_correction_constant(spec: QueueSpec) -> float:
    """``kappa = (a - rho b) / mu_inf``; the stationary mean is ``N rho - N**(1-alpha) kappa + ...``."""
    a, b = mean_correction_coefficients(spec)
    rho = spec.lam_inf / spec.mu_inf
    return (a - rho * b) / spec.mu_inf


def refined_mean(spec: QueueSpec, scaling: ScalingParams, t):
    """Two-term large-``N`` expansion of the mean of the scaled system.

    ``N rho (1 - e^{-mu_inf t}) + N**(1-alpha) psi(t)`` with
    ``psi(t) = -kappa (1 - e^{-mu_inf t}) - b rho t e^{-mu_inf t}``,
    ``rho = lam_inf / mu_inf`` and ``kappa``, ``b`` from
    :func:`mean_correction_constant` and :func:`mean_correction_coefficients`.
    """
    if scaling.alpha <= 0:
        raise ValueError("refined_mean requires alpha > 0")
    t = np.asarray(t, dtype=float)
    mu = spec.mu_inf
    rho = spec.lam_inf / mu
    _, b = mean_correction_coefficients(spec)
    kappa = mean_correction_constant(spec)
    decay = np.exp(-mu * t)
    psi = -kappa * (1.0 - decay) - b * rho * t * decay
    N, alpha = scaling.N, scaling.alpha
    out = N * rho * (1.0 - decay) + N ** (1.0 - alpha) * psi
    return float(out) if out.ndim == 0 else out
