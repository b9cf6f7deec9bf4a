"""Compiled single-replication kernels.

Every kernel simulates one replication on ``[0, horizon]`` with the
background chain started from its stationary law and the queue empty. It
fills ``out`` with the total count at each recording time and ``occ`` with
the time spent in each background state. Model II kernels also fill
``out_types`` with per-arrival-state counts.

Rates passed in are already scaled: ``lam`` is ``N lambda`` and the jump
structure is that of ``N**alpha Q``.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _draw_index(rng, cum):
    u = rng.random() * cum[-1]
    k = 0
    while k < cum.size - 1 and u >= cum[k]:
        k += 1
    return k


@njit(cache=True, nogil=True)
def _next_state(rng, jump_cum, j):
    row = jump_cum[j]
    u = rng.random() * row[-1]
    k = 0
    d = row.size
    while k < d - 1 and u >= row[k]:
        k += 1
    return k


@njit(cache=True, nogil=True)
def gillespie_model1(rng, jump_cum, q_exit, lam, mu, pi_cum, rec_times, horizon, out, occ):
    d = lam.size
    K = rec_times.size
    j = _draw_index(rng, pi_cum)
    m = 0
    t = 0.0
    k = 0
    while True:
        rate = q_exit[j] + lam[j] + m * mu[j]
        if rate > 0.0:
            tn = t + rng.standard_exponential() / rate
        else:
            tn = np.inf
        while k < K and rec_times[k] < tn:
            out[k] = m
            k += 1
        if tn >= horizon:
            occ[j] += horizon - t
            break
        occ[j] += tn - t
        t = tn
        u = rng.random() * rate
        if u < lam[j]:
            m += 1
        elif u < lam[j] + m * mu[j]:
            m -= 1
        else:
            j = _next_state(rng, jump_cum, j)
    return d


@njit(cache=True, nogil=True)
def gillespie_model2(rng, jump_cum, q_exit, lam, mu, pi_cum, rec_times, horizon,
                     out, out_types, occ):
    d = lam.size
    K = rec_times.size
    j = _draw_index(rng, pi_cum)
    m = np.zeros(d, dtype=np.int64)
    total = 0
    t = 0.0
    k = 0
    while True:
        dep = 0.0
        for i in range(d):
            dep += m[i] * mu[i]
        rate = q_exit[j] + lam[j] + dep
        if rate > 0.0:
            tn = t + rng.standard_exponential() / rate
        else:
            tn = np.inf
        while k < K and rec_times[k] < tn:
            out[k] = total
            for i in range(d):
                out_types[k, i] = m[i]
            k += 1
        if tn >= horizon:
            occ[j] += horizon - t
            break
        occ[j] += tn - t
        t = tn
        u = rng.random() * rate
        if u < lam[j]:
            m[j] += 1
            total += 1
        elif u < lam[j] + dep:
            v = u - lam[j]
            i = 0
            acc = m[0] * mu[0]
            while i < d - 1 and v >= acc:
                i += 1
                acc += m[i] * mu[i]
            m[i] -= 1
            total -= 1
        else:
            j = _next_state(rng, jump_cum, j)
    return d


@njit(cache=True, nogil=True)
def poisson_model1(rng, jump_cum, q_exit, lam, mu, pi_cum, rec_times, horizon, out, occ):
    # Given the background path, jobs present at the next recording time are
    # binomial survivors of the previous count plus an independent Poisson
    # number of fresh arrivals.
    K = rec_times.size
    j = _draw_index(rng, pi_cum)
    t = 0.0
    if q_exit[j] > 0.0:
        nxt = rng.standard_exponential() / q_exit[j]
    else:
        nxt = np.inf
    count = 0
    surv = 0.0
    fresh = 0.0
    for k in range(K + 1):
        target = rec_times[k] if k < K else horizon
        while True:
            stop = min(nxt, target)
            dt = stop - t
            if dt > 0.0:
                decay = np.exp(-mu[j] * dt)
                fresh = fresh * decay + lam[j] * (1.0 - decay) / mu[j]
                surv += mu[j] * dt
                occ[j] += dt
                t = stop
            if nxt <= target:
                j = _next_state(rng, jump_cum, j)
                nxt = t + rng.standard_exponential() / q_exit[j]
            else:
                break
        if k < K:
            kept = rng.binomial(count, np.exp(-surv)) if count > 0 else 0
            count = kept + rng.poisson(fresh)
            out[k] = count
            surv = 0.0
            fresh = 0.0
    return K


@njit(cache=True, nogil=True)
def poisson_model2(rng, jump_cum, q_exit, lam, mu, pi_cum, rec_times, horizon,
                   out, out_types, occ):
    d = lam.size
    K = rec_times.size
    j = _draw_index(rng, pi_cum)
    t = 0.0
    if q_exit[j] > 0.0:
        nxt = rng.standard_exponential() / q_exit[j]
    else:
        nxt = np.inf
    counts = np.zeros(d, dtype=np.int64)
    fresh = np.zeros(d)
    last = 0.0
    for k in range(K + 1):
        target = rec_times[k] if k < K else horizon
        while True:
            stop = min(nxt, target)
            dt = stop - t
            if dt > 0.0:
                for i in range(d):
                    fresh[i] *= np.exp(-mu[i] * dt)
                fresh[j] += lam[j] * (1.0 - np.exp(-mu[j] * dt)) / mu[j]
                occ[j] += dt
                t = stop
            if nxt <= target:
                j = _next_state(rng, jump_cum, j)
                nxt = t + rng.standard_exponential() / q_exit[j]
            else:
                break
        if k < K:
            gap = target - last
            total = 0
            for i in range(d):
                kept = rng.binomial(counts[i], np.exp(-mu[i] * gap)) if counts[i] > 0 else 0
                counts[i] = kept + rng.poisson(fresh[i])
                fresh[i] = 0.0
                out_types[k, i] = counts[i]
                total += counts[i]
            out[k] = total
            last = target
    return K


@njit(cache=True, nogil=True)
def _occupation_step(rng, pi, chol, dt, o):
    # Gaussian occupation times over a step much longer than the switching
    # correlation time, clipped to be nonnegative and renormalised to dt.
    d = pi.size
    z = np.empty(d)
    for i in range(d):
        z[i] = rng.standard_normal()
    s = 0.0
    sq = np.sqrt(dt)
    for i in range(d):
        acc = 0.0
        for l in range(d):
            acc += chol[i, l] * z[l]
        v = pi[i] * dt + sq * acc
        if v < 0.0:
            v = 0.0
        o[i] = v
        s += v
    for i in range(d):
        o[i] *= dt / s


@njit(cache=True, nogil=True)
def aggregated_model1(rng, pi, chol, lam, mu, rec_times, horizon, step, out, occ):
    d = pi.size
    K = rec_times.size
    o = np.empty(d)
    t = 0.0
    count = 0
    surv = 0.0
    fresh = 0.0
    for k in range(K + 1):
        target = rec_times[k] if k < K else horizon
        span = target - t
        if span > 0.0:
            n = int(np.ceil(span / step))
            dt = span / n
            for _ in range(n):
                _occupation_step(rng, pi, chol, dt, o)
                lam_int = 0.0
                mu_int = 0.0
                for i in range(d):
                    lam_int += lam[i] * o[i]
                    mu_int += mu[i] * o[i]
                    occ[i] += o[i]
                decay = np.exp(-mu_int)
                fresh = fresh * decay + lam_int * (1.0 - decay) / mu_int
                surv += mu_int
            t = target
        if k < K:
            kept = rng.binomial(count, np.exp(-surv)) if count > 0 else 0
            count = kept + rng.poisson(fresh)
            out[k] = count
            surv = 0.0
            fresh = 0.0
    return K


@njit(cache=True, nogil=True)
def aggregated_model2(rng, pi, chol, lam, mu, rec_times, horizon, step, out, out_types, occ):
    d = pi.size
    K = rec_times.size
    o = np.empty(d)
    t = 0.0
    last = 0.0
    counts = np.zeros(d, dtype=np.int64)
    fresh = np.zeros(d)
    for k in range(K + 1):
        target = rec_times[k] if k < K else horizon
        span = target - t
        if span > 0.0:
            n = int(np.ceil(span / step))
            dt = span / n
            for _ in range(n):
                _occupation_step(rng, pi, chol, dt, o)
                for i in range(d):
                    decay = np.exp(-mu[i] * dt)
                    fresh[i] = fresh[i] * decay + lam[i] * o[i] * (1.0 - decay) / (mu[i] * dt)
                    occ[i] += o[i]
            t = target
        if k < K:
            gap = target - last
            total = 0
            for i in range(d):
                kept = rng.binomial(counts[i], np.exp(-mu[i] * gap)) if counts[i] > 0 else 0
                counts[i] = kept + rng.poisson(fresh[i])
                fresh[i] = 0.0
                out_types[k, i] = counts[i]
                total += counts[i]
            out[k] = total
            last = target
    return K
