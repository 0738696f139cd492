"""Batch iteration kernels for the discrete learning map.

The map is iterated in log coordinates so that strategy components can
range over hundreds of orders of magnitude without hitting an absorbing
zero.  A numba kernel is used when available; a vectorized numpy fallback
implements the identical recurrence (cross-checked in the tests).
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency normally
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn

        return deco if not (args and callable(args[0])) else args[0]


@njit(cache=True)
def _map_batch_numba(flat, y0, alpha, beta, n_steps):  # pragma: no cover - jitted
    p, n = y0.shape
    m = flat.shape[2]
    y = y0.copy()
    x = np.empty((p, n))
    a = np.empty((p, n))
    w = np.empty(m)
    states = np.empty((n_steps + 1, p, n))
    payoffs = np.empty(n_steps + 1)
    logn = np.log(n)
    for mu in range(p):
        for i in range(n):
            x[mu, i] = np.exp(y[mu, i])
    states[0] = x
    for s in range(n_steps + 1):
        total = 0.0
        for mu in range(p):
            size = 1
            w[0] = 1.0
            for k in range(1, p):
                kap = (mu + k) % p
                for i in range(size - 1, -1, -1):
                    wi = w[i]
                    base = i * n
                    for j in range(n - 1, -1, -1):
                        w[base + j] = wi * x[kap, j]
                size *= n
            for i in range(n):
                acc = 0.0
                row = flat[mu, i]
                for j in range(m):
                    acc += row[j] * w[j]
                a[mu, i] = acc
                total += x[mu, i] * acc
        payoffs[s] = total / n
        if s == n_steps:
            break
        for mu in range(p):
            ymax = -1.0e300
            for i in range(n):
                yi = (1.0 - alpha) * y[mu, i] + beta * a[mu, i]
                y[mu, i] = yi
                if yi > ymax:
                    ymax = yi
            zsum = 0.0
            for i in range(n):
                zsum += np.exp(y[mu, i] - ymax)
            shift = ymax + np.log(zsum) - logn
            for i in range(n):
                y[mu, i] -= shift
                x[mu, i] = np.exp(y[mu, i])
        states[s + 1] = x
    return states, payoffs


def _opponent_weights(x, mu):
    p = x.shape[0]
    w = np.ones(1)
    for k in range(1, p):
        w = np.multiply.outer(w, x[(mu + k) % p]).ravel()
    return w


def _map_batch_numpy(flat, y0, alpha, beta, n_steps):
    p, n = y0.shape
    y = y0.copy()
    x = np.exp(y)
    states = np.empty((n_steps + 1, p, n))
    payoffs = np.empty(n_steps + 1)
    states[0] = x
    a = np.empty((p, n))
    for s in range(n_steps + 1):
        for mu in range(p):
            a[mu] = flat[mu] @ _opponent_weights(x, mu)
        payoffs[s] = float(np.sum(x * a)) / n
        if s == n_steps:
            break
        y = (1.0 - alpha) * y + beta * a
        ymax = y.max(axis=1, keepdims=True)
        zsum = np.exp(y - ymax).sum(axis=1, keepdims=True)
        y -= ymax + np.log(zsum) - np.log(n)
        x = np.exp(y)
        states[s + 1] = x
    return states, payoffs


def map_batch(flat: np.ndarray, y0: np.ndarray, alpha: float, beta: float,
              n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Iterate the map n_steps times from log-state y0.

    Returns (states, payoffs): states[k] is the linear strategy array after
    k steps (rows summing to N), payoffs[k] the total expected payoff
    sum_mu sum_i (x_i/N) a_i at states[k].
    """
    if HAVE_NUMBA:
        return _map_batch_numba(flat, y0, alpha, beta, n_steps)
    return _map_batch_numpy(flat, y0, alpha, beta, n_steps)
