"""Matrix exponential by Pade approximation with scaling and squaring.

Implements the degree-selection and scaling strategy of Higham (2005),
"The scaling and squaring method for the matrix exponential revisited".
Works on a single square matrix or on a stack of them (leading axes are
batch axes), which lets transition matrices at many quadrature nodes be
formed in one call.
"""

from __future__ import annotations

import numpy as np

# Largest 1-norm for which the [m/m] approximant meets unit roundoff.
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}


def _pade_uv(a, m):
    """Odd part U and even part V of the degree-m Pade numerator."""
    b = _COEFFS[m]
    n = a.shape[-1]
    ident = np.broadcast_to(np.eye(n), a.shape)
    a2 = a @ a
    if m == 13:
        a4 = a2 @ a2
        a6 = a4 @ a2
        u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
                 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
        v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
             + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
        return u, v
    powers = [ident, a2]
    for _ in range(2, m // 2 + 1):
        powers.append(powers[-1] @ a2)
    u = sum(b[2 * k + 1] * powers[k] for k in range(m // 2 + 1))
    v = sum(b[2 * k] * powers[k] for k in range(m // 2 + 1))
    return a @ u, v


def _expm_uniform(a, norm1):
    """Exponential of a batch that shares one degree and scaling power."""
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            u, v = _pade_uv(a, m)
            return np.linalg.solve(v - u, v + u)
    s = max(0, int(np.ceil(np.log2(norm1 / _THETA[13])))) if norm1 > 0 else 0
    u, v = _pade_uv(a / 2.0**s, 13)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def _plan(norm1):
    """Pade degree and scaling power for a given 1-norm."""
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            return m, 0
    return 13, max(0, int(np.ceil(np.log2(norm1 / _THETA[13]))))


def expm(a):
    """Matrix exponential of a square matrix or a stack of square matrices.

    Parameters
    ----------
    a : (..., n, n) array_like
        Real matrix or batch of matrices.

    Returns
    -------
    (..., n, n) ndarray
        ``exp(a)`` for each matrix in the batch.

    Notes
    -----
    Members of a batch are grouped by their Pade degree and scaling power,
    so a small matrix is never over-squared because a large one shares its
    batch. Squaring amplifies rounding roughly by ``2**s``.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError("expm expects square matrices")
    if a.shape[-1] == 0:
        return a.copy()
    if not np.all(np.isfinite(a)):
        raise ValueError("expm input contains non-finite entries")
    if a.ndim == 2:
        return _expm_uniform(a, float(np.abs(a).sum(axis=0).max()))
    batch_shape = a.shape[:-2]
    flat = a.reshape((-1,) + a.shape[-2:])
    norms = np.abs(flat).sum(axis=-2).max(axis=-1)
    plans = [_plan(x) for x in norms]
    out = np.empty_like(flat)
    for key in set(plans):
        sel = np.array([p == key for p in plans])
        out[sel] = _expm_uniform(flat[sel], float(norms[sel].max()))
    return out.reshape(batch_shape + a.shape[-2:])
