"""Algebra of the finite background chain.

Stationary law, transition matrices, deviation and fundamental matrices,
and the Kronecker helpers used by the vectorised moment equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._expm import expm
from .errors import DimensionMismatch, InvalidGenerator, SingularSystem
from .quadrature import geometric_breakpoints, integrate

_ROW_SUM_TOL = 1e-12
_COND_LIMIT = 1e13


def _strongly_connected(adj: np.ndarray) -> bool:
    """Depth-first reachability from state 0 in the graph and its reverse."""
    d = adj.shape[0]

    def reaches_all(a):
        seen = np.zeros(d, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(a[i]):
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        return bool(seen.all())

    return reaches_all(adj) and reaches_all(adj.T)


@dataclass(frozen=True, eq=False)
class Generator:
    """Validated generator of an irreducible continuous-time Markov chain.

    Parameters
    ----------
    rates : (d, d) array_like
        Transition rate matrix ``Q``. Off-diagonal entries must be
        nonnegative and rows must sum to zero within 1e-12.

    Raises
    ------
    InvalidGenerator
        If the matrix is not square, has negative off-diagonal rates, rows
        that do not sum to zero, or a positivity pattern that is not
        strongly connected.
    """

    rates: np.ndarray

    def __post_init__(self):
        q = np.array(self.rates, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
            raise InvalidGenerator("generator must be a non-empty square matrix")
        if not np.all(np.isfinite(q)):
            raise InvalidGenerator("generator has non-finite entries")
        off = q - np.diag(np.diag(q))
        if np.any(off < 0):
            raise InvalidGenerator("generator has negative off-diagonal rates")
        if np.any(np.abs(q.sum(axis=1)) > _ROW_SUM_TOL * max(1.0, np.abs(q).max())):
            raise InvalidGenerator("generator rows must sum to zero")
        if not _strongly_connected(off > 0):
            raise InvalidGenerator("generator is not irreducible")
        q.setflags(write=False)
        object.__setattr__(self, "rates", q)

    @property
    def dim(self) -> int:
        return self.rates.shape[0]

    @property
    def exit_rates(self) -> np.ndarray:
        """Holding-time rates ``q_i = -q_ii``."""
        return -np.diag(self.rates)

    def scaled(self, factor: float) -> "Generator":
        """Generator with every rate multiplied by ``factor``."""
        return Generator(self.rates * float(factor))

    @cached_property
    def analysis(self) -> "ChainAnalysis":
        return analyze_chain(self)


@dataclass(frozen=True, eq=False)
class ChainAnalysis:
    """Derived objects of a generator, computed once.

    Attributes
    ----------
    pi : (d,) ndarray
        Stationary distribution.
    Pi : (d, d) ndarray
        ``1 pi^T``, every row equal to ``pi``.
    D : (d, d) ndarray
        Deviation matrix, the integral of ``P(t) - Pi`` over ``[0, inf)``.
    F : (d, d) ndarray
        Fundamental matrix ``D + Pi = (Pi - Q)^{-1}``.
    gap : float
        Smallest magnitude of the real part of a nonzero eigenvalue of Q;
        ``inf`` for a single state.
    """

    pi: np.ndarray
    Pi: np.ndarray
    D: np.ndarray
    F: np.ndarray
    gap: float


@dataclass(frozen=True, eq=False)
class QueueSpec:
    """Markov-modulated infinite-server queue.

    Parameters
    ----------
    gen : Generator
        Background chain.
    lam : (d,) array_like
        Arrival rate in each background state, nonnegative.
    mu : (d,) array_like
        Service rate in each background state, strictly positive.
    """

    gen: Generator
    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float).reshape(-1)
        mu = np.array(self.mu, dtype=float).reshape(-1)
        d = self.gen.dim
        if lam.size != d or mu.size != d:
            raise DimensionMismatch(
                f"lambda and mu must have length {d}, got {lam.size} and {mu.size}"
            )
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(mu))):
            raise ValueError("rates must be finite")
        if np.any(lam < 0):
            raise ValueError("arrival rates lambda must be nonnegative")
        if np.any(mu <= 0):
            raise ValueError("service rates mu must be strictly positive")
        lam.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def from_arrays(cls, Q, lam, mu) -> "QueueSpec":
        return cls(Generator(np.asarray(Q, dtype=float)), lam, mu)

    @property
    def dim(self) -> int:
        return self.gen.dim

    @property
    def Q(self) -> np.ndarray:
        return self.gen.rates

    @property
    def chain(self) -> ChainAnalysis:
        return self.gen.analysis

    @property
    def pi(self) -> np.ndarray:
        return self.gen.analysis.pi

    @property
    def Lam(self) -> np.ndarray:
        return np.diag(self.lam)

    @property
    def Mu(self) -> np.ndarray:
        return np.diag(self.mu)

    @property
    def lam_inf(self) -> float:
        return float(self.pi @ self.lam)

    @property
    def mu_inf(self) -> float:
        return float(self.pi @ self.mu)

    def scaled(self, N: float, alpha: float) -> "QueueSpec":
        """Spec with arrivals ``N lambda`` and generator ``N**alpha Q``."""
        return QueueSpec(self.gen.scaled(float(N) ** float(alpha)), float(N) * self.lam, self.mu)


def stationary_distribution(gen: Generator) -> np.ndarray:
    """Stationary law of the chain.

    One balance equation of ``pi^T Q = 0`` is replaced by the normalisation
    ``sum(pi) = 1`` and the resulting square system is solved directly.

    Raises
    ------
    SingularSystem
        If the augmented system is numerically singular or the solution is
        not strictly positive.
    """
    d = gen.dim
    a = gen.rates.T.copy()
    a[-1, :] = 1.0
    rhs = np.zeros(d)
    rhs[-1] = 1.0
    if np.linalg.cond(a) > _COND_LIMIT:
        raise SingularSystem("stationary_distribution: augmented balance system is singular")
    pi = np.linalg.solve(a, rhs)
    if np.any(pi <= 0):
        raise SingularSystem("stationary_distribution: non-positive stationary mass")
    return pi / pi.sum()


def transition_matrix(gen: Generator, t: float) -> np.ndarray:
    """``P(t) = exp(Q t)`` for a single time ``t >= 0``."""
    t = float(t)
    if t < 0:
        raise ValueError("transition_matrix requires t >= 0")
    return np.maximum(expm(gen.rates * t), 0.0)


def transition_matrices(gen: Generator, ts) -> np.ndarray:
    """Stack of ``P(t)`` for an array of nonnegative times, shape ``(n, d, d)``."""
    ts = np.asarray(ts, dtype=float).reshape(-1)
    if np.any(ts < 0):
        raise ValueError("transition_matrices requires t >= 0")
    return np.maximum(expm(ts[:, None, None] * gen.rates[None, :, :]), 0.0)


def centered_transition_matrices(gen: Generator, ts, cutoff: float = 50.0) -> np.ndarray:
    """Stack of ``P(t) - Pi``, shape ``(n, d, d)``.

    Beyond ``t = cutoff / gap`` the deviation is below ``exp(-cutoff)`` of
    its scale and is returned as exactly zero. Evaluating the exponential
    there would only add squaring round-off of order ``||Q t|| * eps``.
    """
    ts = np.asarray(ts, dtype=float).reshape(-1)
    ca = gen.analysis
    d = gen.dim
    out = np.zeros((ts.size, d, d))
    live = ts * ca.gap <= cutoff
    if np.any(live):
        out[live] = transition_matrices(gen, ts[live]) - ca.pi[None, None, :]
    return out


def spectral_gap(gen: Generator) -> float:
    """Decay rate of ``P(t) - Pi``: the smallest ``|Re lambda|`` over nonzero eigenvalues."""
    if gen.dim == 1:
        return float("inf")
    ev = np.linalg.eigvals(gen.rates)
    scale = max(1.0, np.abs(gen.rates).max())
    nonzero = ev[np.abs(ev) > 1e-10 * scale]
    return float(np.min(np.abs(nonzero.real)))


def fundamental_matrix(gen: Generator, pi: np.ndarray | None = None) -> np.ndarray:
    """``F = (Pi - Q)^{-1}``."""
    if pi is None:
        pi = stationary_distribution(gen)
    d = gen.dim
    Pi = np.tile(pi, (d, 1))
    a = Pi - gen.rates
    if np.linalg.cond(a) > _COND_LIMIT:
        raise SingularSystem("deviation_matrix: Pi - Q is singular")
    return np.linalg.solve(a, np.eye(d))


def deviation_matrix(gen: Generator) -> np.ndarray:
    """Deviation matrix ``D = F - Pi``, the group inverse of ``-Q``."""
    pi = stationary_distribution(gen)
    return fundamental_matrix(gen, pi) - np.tile(pi, (gen.dim, 1))


def analyze_chain(gen: Generator) -> ChainAnalysis:
    pi = stationary_distribution(gen)
    Pi = np.tile(pi, (gen.dim, 1))
    F = fundamental_matrix(gen, pi)
    for arr in (pi, Pi, F):
        arr.setflags(write=False)
    D = F - Pi
    D.setflags(write=False)
    return ChainAnalysis(pi=pi, Pi=Pi, D=D, F=F, gap=spectral_gap(gen))


def weighted_deviation_matrix(gen: Generator, gamma, method: str = "resolvent") -> np.ndarray:
    """Row-weighted deviation matrix.

    Entry ``(i, j)`` is the integral over ``[0, inf)`` of
    ``exp(-gamma_i t) (p_ij(t) - pi_j)``. The weight is indexed by the row
    state and the matrix is not symmetrised.

    Parameters
    ----------
    gen : Generator
    gamma : (d,) array_like
        Nonnegative row weights.
    method : {"resolvent", "quadrature"}
        ``"resolvent"`` uses the identity
        ``row_i = e_i^T (gamma_i I - Q + Pi)^{-1} (I - Pi)``, exact for all
        ``gamma_i >= 0`` and equal to ``D`` at ``gamma_i = 0``.
        ``"quadrature"`` integrates numerically up to the horizon
        ``40 / gap`` (rows with ``gamma_i = 0`` use ``D``).

    Returns
    -------
    (d, d) ndarray
    """
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    d = gen.dim
    if gamma.size != d:
        raise DimensionMismatch(f"gamma must have length {d}")
    if np.any(gamma < 0):
        raise ValueError("gamma must be nonnegative")
    ca = gen.analysis
    if d == 1:
        return np.zeros((1, 1))
    out = np.empty((d, d))
    if method == "resolvent":
        proj = np.eye(d) - ca.Pi
        for g in np.unique(gamma):
            a = g * np.eye(d) - gen.rates + ca.Pi
            if np.linalg.cond(a) > _COND_LIMIT:
                raise SingularSystem("weighted_deviation_matrix: resolvent is singular")
            rows = np.linalg.solve(a, proj)
            sel = gamma == g
            out[sel] = rows[sel]
        return out
    if method == "quadrature":
        horizon = 40.0 / ca.gap
        for i in range(d):
            if gamma[i] == 0.0:
                out[i] = ca.D[i]
                continue
            g = gamma[i]

            def f(w, i=i, g=g):
                return np.exp(-g * w)[:, None] * centered_transition_matrices(gen, w)[:, i, :]

            out[i] = integrate(f, 0.0, horizon, breakpoints=geometric_breakpoints(ca.gap, horizon),
                               what="weighted_deviation_matrix")
        return out
    raise ValueError(f"unknown method {method!r}")


def kron_sum(A, B) -> np.ndarray:
    """Kronecker sum ``A (x) I + I (x) B`` of two square matrices of equal size."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or A.shape[0] != A.shape[1] or B.shape[0] != B.shape[1]:
        raise DimensionMismatch("kron_sum expects square matrices")
    if A.shape != B.shape:
        raise DimensionMismatch(f"kron_sum shapes differ: {A.shape} vs {B.shape}")
    ident = np.eye(A.shape[0])
    return np.kron(A, ident) + np.kron(ident, B)


def vec(A) -> np.ndarray:
    """Column-stacking vectorisation: ``A[:, 0]`` first, then ``A[:, 1]``, and so on."""
    A = np.asarray(A)
    if A.ndim != 2:
        raise DimensionMismatch("vec expects a matrix")
    return A.reshape(-1, order="F")


def unvec(v, d: int) -> np.ndarray:
    """Inverse of :func:`vec` for a ``d x d`` matrix."""
    return np.asarray(v).reshape(d, d, order="F")
