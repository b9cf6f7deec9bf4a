"""Adaptive Gauss-Legendre quadrature for vector- and matrix-valued integrands.

Each panel is integrated with a 15-point Gauss-Legendre rule and compared
with the sum of the same rule on its two halves. Panels whose difference
exceeds their share of the tolerance are bisected. All panels of one
refinement round are evaluated in a single vectorised call to the
integrand, so the integrand should accept an array of nodes.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import QuadratureFailure

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(15)


def _rule(f, lo, hi):
    """Apply the 15-point rule on every panel [lo_k, hi_k] at once."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    vals = np.asarray(f(x), dtype=float)
    vals = vals.reshape((lo.size, _NODES.size) + vals.shape[1:])
    w = (half[:, None] * _WEIGHTS[None, :])
    return np.einsum("pk,pk...->p...", w, vals)


def geometric_breakpoints(rate: float, upper: float, factor: float = 2.0) -> list[float]:
    """Points ``(1/rate) * factor**k`` for ``k >= -3`` inside ``(0, upper)``.

    Seeding panels this way resolves integrands that vary on the time scale
    ``1/rate`` near the origin but extend over a much longer range, where a
    single initial panel could miss the feature and falsely converge.
    """
    if not (rate > 0 and np.isfinite(rate)) or upper <= 0:
        return []
    pts = []
    x = factor**-3 / rate
    while x < upper:
        pts.append(x)
        x *= factor
    return pts


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    breakpoints: Sequence[float] = (),
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-12,
    max_rounds: int = 50,
    max_panels: int = 200_000,
    what: str = "integral",
) -> np.ndarray:
    """Integrate ``f`` over ``[a, b]``.

    Parameters
    ----------
    f : callable
        Maps a 1-D array of nodes of length n to an array of shape
        ``(n, ...)``. Trailing axes are integrated componentwise.
    a, b : float
        Integration limits, ``a <= b``.
    breakpoints : sequence of float, optional
        Interior points where the integrand has kinks; panels never
        straddle them.
    abs_tol, rel_tol : float
        Accept when the estimated error is below
        ``max(abs_tol, rel_tol * |I|)``, with the budget shared between
        panels in proportion to their width.
    what : str
        Name used in the failure message.

    Returns
    -------
    ndarray
        The integral, with the trailing shape of ``f``'s output.

    Raises
    ------
    QuadratureFailure
        If the tolerance is not met within ``max_rounds`` bisection rounds.
    """
    a = float(a)
    b = float(b)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise QuadratureFailure(f"{what}: non-finite integration limits")
    if b < a:
        raise ValueError("integrate expects a <= b")
    probe = np.asarray(f(np.array([a])), dtype=float)
    out_shape = probe.shape[1:]
    if b == a:
        return np.zeros(out_shape)

    cuts = sorted({a, b, *(float(p) for p in breakpoints if a < p < b)})
    lo = np.array(cuts[:-1])
    hi = np.array(cuts[1:])
    whole = _rule(f, lo, hi)
    total_width = b - a
    total = np.zeros(out_shape)

    for _ in range(max_rounds):
        mid = 0.5 * (lo + hi)
        halves = _rule(f, np.concatenate([lo, mid]), np.concatenate([mid, hi]))
        n = lo.size
        left, right = halves[:n], halves[n:]
        refined = left + right
        err = np.abs(refined - whole).reshape(n, -1).max(axis=1)
        if not np.all(np.isfinite(err)):
            raise QuadratureFailure(f"{what}: integrand produced non-finite values")
        scale = np.abs(total + refined.sum(axis=0)).max(initial=0.0)
        budget = max(abs_tol, rel_tol * scale) * (hi - lo) / total_width
        done = err <= budget
        total = total + refined[done].sum(axis=0)
        if done.all():
            return total
        keep = ~done
        lo_k, mid_k, hi_k = lo[keep], mid[keep], hi[keep]
        lo = np.concatenate([lo_k, mid_k])
        hi = np.concatenate([mid_k, hi_k])
        whole = np.concatenate([left[keep], right[keep]])
        if lo.size > max_panels:
            break
    raise QuadratureFailure(
        f"{what}: adaptive Gauss-Legendre did not converge to {abs_tol:g}"
    )
