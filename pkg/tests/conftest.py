from __future__ import annotations

import functools

import numpy as np
import pytest

from ewagames import GameParams, PayoffTensor, critical_inverse_r


def make_custom_tensor(params: GameParams, arrays) -> PayoffTensor:
    """Build a PayoffTensor from explicit per-player arrays (test hook)."""
    n = params.n_actions
    tensors = tuple(np.ascontiguousarray(a, dtype=float) for a in arrays)
    flat = np.stack([t.reshape(n, n ** (params.p - 1)) for t in tensors])
    return PayoffTensor(params=params, tensors=tensors, flat=flat)


def zero_tensor(p: int, n: int, alpha: float, beta: float,
                gamma: float = 0.0, seed: int = 0) -> PayoffTensor:
    params = GameParams(p=p, n_actions=n, alpha=alpha, beta=beta,
                        gamma=gamma, seed=seed)
    return make_custom_tensor(params, [np.zeros((n,) * p) for _ in range(p)])


@functools.lru_cache(maxsize=None)
def boundary(p: int, gamma: float) -> float:
    """Session-cached critical alpha/beta values (expensive to trace)."""
    return critical_inverse_r(p, gamma)


@pytest.fixture(scope="session")
def boundary_cache():
    return boundary
