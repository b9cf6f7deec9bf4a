"""Thin wrappers around scipy's adaptive integrators."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .errors import OdeToleranceFailure

RTOL = 1e-9
ATOL = 1e-10
# Explicit RK needs roughly ||A|| * horizon / 3 steps; beyond this budget the
# problem is treated as stiff and an implicit method must be requested.
_EXPLICIT_STEP_BUDGET = 2e6
_EXPLICIT = {"RK45", "RK23", "DOP853"}
# "auto" switches to an implicit method well before the explicit budget runs
# out: a few hundred implicit steps beat tens of thousands of explicit ones.
_AUTO_IMPLICIT_ABOVE = 2e4


def choose_method(method: str, stiffness: float, what: str) -> str:
    """Resolve ``"auto"`` and refuse explicit methods on stiff problems.

    ``stiffness`` is an estimate of ``||A|| * horizon``.
    """
    if method == "auto":
        return "RK45" if stiffness <= _AUTO_IMPLICIT_ABOVE else "Radau"
    if method in _EXPLICIT and stiffness > _EXPLICIT_STEP_BUDGET:
        raise OdeToleranceFailure(
            f"{what}: system too stiff for explicit {method} "
            f"(||A|| * horizon = {stiffness:.3g}); use method='Radau' or 'LSODA'"
        )
    return method


def solve_general(fun, jac, y0, t_eval, *, stiffness: float, method="RK45",
                  rtol=RTOL, atol=ATOL, what="ode") -> np.ndarray:
    """Integrate ``y' = fun(t, y)`` from ``y(0) = y0``; returns shape ``(k, n)``.

    ``jac(t, y)`` is passed to implicit methods. ``stiffness`` estimates
    ``||df/dy|| * max(t_eval)`` and drives the ``"auto"`` choice.
    """
    y0 = np.asarray(y0, dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.size == 0:
        return np.zeros((0, y0.size))
    horizon = float(t_eval.max())
    if horizon == 0.0:
        return np.tile(y0, (t_eval.size, 1))
    method = choose_method(method, stiffness, what)
    kwargs = {} if method in _EXPLICIT else {"jac": jac}
    uniq, inverse = np.unique(t_eval, return_inverse=True)
    sol = solve_ivp(fun, (0.0, horizon), y0, method=method, t_eval=uniq,
                    rtol=rtol, atol=atol, **kwargs)
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise OdeToleranceFailure(f"{what}: integrator failed ({sol.message})")
    return sol.y.T[inverse]


def solve_affine(A, b, y0, t_eval, *, method="RK45", rtol=RTOL, atol=ATOL, what="ode"):
    """Integrate ``y' = A y + b`` (``b`` constant) or batched ``Y' = A Y``.

    Parameters
    ----------
    A : (n, n) ndarray
    b : (n,) ndarray or None
        Constant forcing; must be ``None`` when ``y0`` is a batch.
    y0 : (n,) or (n, m) ndarray
        Initial state at time 0. A 2-D array integrates ``m`` columns
        simultaneously.
    t_eval : (k,) array_like
        Nondecreasing output times, all ``>= 0``.
    method : str
        A ``solve_ivp`` method, or ``"auto"`` for RK45 unless the system is
        too stiff for it, in which case Radau.

    Returns
    -------
    ndarray
        Shape ``(k, n)`` or ``(k, n, m)``.
    """
    A = np.asarray(A, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    batch = y0.ndim == 2
    n = A.shape[0]
    ncol = y0.shape[1] if batch else 1
    out_shape = (t_eval.size,) + y0.shape
    if t_eval.size == 0:
        return np.zeros(out_shape)
    horizon = float(t_eval.max())
    if horizon == 0.0:
        return np.broadcast_to(y0, out_shape).copy()
    method = choose_method(method, np.abs(A).sum(axis=1).max() * horizon, what)

    if batch:
        def fun(_t, y):
            return (A @ y.reshape(n, ncol)).ravel()
        if n * ncol <= 512:
            jac = np.kron(A, np.eye(ncol))
        else:
            jac = sp.kron(sp.csr_matrix(A), sp.identity(ncol), format="csr")
    else:
        bb = np.zeros(n) if b is None else np.asarray(b, dtype=float)

        def fun(_t, y):
            return A @ y + bb
        jac = A
    kwargs = {} if method in _EXPLICIT else {"jac": lambda _t, _y: jac}
    # Integrate from 0 and report at the requested (possibly repeated) times.
    uniq, inverse = np.unique(t_eval, return_inverse=True)
    sol = solve_ivp(fun, (0.0, horizon), y0.ravel(), method=method, t_eval=uniq,
                    rtol=rtol, atol=atol, **kwargs)
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise OdeToleranceFailure(f"{what}: integrator failed ({sol.message})")
    ys = sol.y.T[inverse]
    return ys.reshape(out_shape)
