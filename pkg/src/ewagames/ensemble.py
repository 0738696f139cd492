"""Correlated Gaussian payoff ensembles for p-player games.

Each action tuple (i_1, ..., i_p) carries one payoff per player.  The p
payoffs for a tuple are jointly Gaussian with per-entry variance
1/N^(p-1) and cross-player covariance gamma/((p-1) N^(p-1)); payoffs for
distinct tuples are independent.  gamma = -1 makes every outcome exactly
zero-sum, gamma = p-1 gives all players identical payoffs.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .seeds import MASK64, make_rng

DEFAULT_MEMORY_BUDGET = 2 * 1024**3  # bytes of stored tensor data

_MAGIC = b"EWAG"
_FORMAT_VERSION = 1


class ResourceError(RuntimeError):
    """Raised when a requested tensor exceeds the memory budget."""


@dataclass(frozen=True)
class GameParams:
    """Static description of a game instance.

    p: number of players (>= 2); n_actions: actions per player;
    alpha: memory-loss rate in [0, 1]; beta: intensity of choice (>= 0);
    gamma: payoff correlation parameter in [-1, p-1]; seed: 64-bit seed
    for the payoff draw.
    """

    p: int
    n_actions: int
    alpha: float
    beta: float
    gamma: float
    seed: int
    memory_budget: int = field(default=DEFAULT_MEMORY_BUDGET, compare=False)

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"need at least 2 players, got p={self.p}")
        if self.n_actions < 1:
            raise ValueError(f"need at least 1 action, got {self.n_actions}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if not -1.0 <= self.gamma <= self.p - 1:
            raise ValueError(
                f"gamma must lie in [-1, p-1] = [-1, {self.p - 1}], got {self.gamma}"
            )
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.tensor_bytes() > self.memory_budget:
            raise ResourceError(
                f"payoff tensor needs {self.tensor_bytes()} bytes "
                f"(p*N^p = {self.p * self.n_actions**self.p} entries), "
                f"budget is {self.memory_budget}"
            )

    @property
    def r(self) -> float:
        """Learning-timescale ratio beta/alpha."""
        if self.alpha <= 0.0:
            raise ValueError("r = beta/alpha undefined for alpha = 0")
        return self.beta / self.alpha

    def tensor_bytes(self) -> int:
        return 8 * self.p * self.n_actions**self.p


def equicorrelation_cholesky(p: int, gamma: float) -> np.ndarray:
    """Lower-triangular factor L with L L^T = (1-g)I + gJ, g = gamma/(p-1).

    Valid over the whole admissible range gamma in [-1, p-1], including the
    singular endpoints, where a clamped pivot keeps the factor exact.
    """
    if not -1.0 <= gamma <= p - 1:
        raise ValueError(f"gamma={gamma} outside [-1, {p - 1}]")
    g = gamma / (p - 1)
    c = (1.0 - g) * np.eye(p) + g * np.ones((p, p))
    low = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1):
            s = np.dot(low[i, :j], low[j, :j])
            if i == j:
                low[i, j] = np.sqrt(max(c[i, i] - s, 0.0))
            elif low[j, j] == 0.0:
                low[i, j] = 0.0
            else:
                low[i, j] = (c[i, j] - s) / low[j, j]
    return low


@dataclass(frozen=True)
class PayoffTensor:
    """Frozen payoff draw for one game.

    tensors[mu] is player mu's rank-p payoff array with the own action as
    the first axis and the remaining players' actions following in cyclic
    order (mu+1, ..., mu-1 modulo p).  flat is the same data reshaped to
    (p, N, N^(p-1)) for fast contraction against opponents' strategies.
    """

    params: GameParams
    tensors: tuple[np.ndarray, ...]
    flat: np.ndarray

    def __post_init__(self):
        for t in self.tensors:
            if not np.all(np.isfinite(t)):
                raise ValueError("payoff tensor must be finite")


def generate_payoffs(params: GameParams) -> PayoffTensor:
    """Draw a payoff tensor from the correlated Gaussian ensemble.

    Tuples are enumerated in lexicographic order of (i_1, ..., i_p); the p
    correlated payoffs for each tuple come from one block of the Philox
    stream, so identical params reproduce identical tensors bit for bit.
    """
    p, n = params.p, params.n_actions
    m = n**p
    rng = make_rng(params.seed)
    low = equicorrelation_cholesky(p, params.gamma)
    z = rng.standard_normal((m, p))
    payoffs = (z @ low.T) * float(n) ** (-(p - 1) / 2.0)
    del z
    tensors = []
    for mu in range(p):
        full = payoffs[:, mu].reshape((n,) * p)
        axes = [(mu + j) % p for j in range(p)]
        tensors.append(np.ascontiguousarray(np.transpose(full, axes)))
    flat = np.stack([t.reshape(n, n ** (p - 1)) for t in tensors])
    for t in tensors:
        t.setflags(write=False)
    flat.setflags(write=False)
    return PayoffTensor(params=params, tensors=tuple(tensors), flat=flat)


def opponent_weights(x: np.ndarray, mu: int) -> np.ndarray:
    """Flattened outer product of the opponents' strategy rows.

    Rows enter in cyclic order mu+1, ..., mu+p-1 (mod p), matching the
    opponent axis order of player mu's tensor.
    """
    p = x.shape[0]
    w = np.ones(1)
    for k in range(1, p):
        w = np.multiply.outer(w, x[(mu + k) % p]).ravel()
    return w


def expected_payoff_vector(tensor: PayoffTensor, mu: int, x: np.ndarray) -> np.ndarray:
    """Expected payoff of each of player mu's actions against profile x.

    x holds the rescaled strategies (each row sums to N); the contraction
    uses the rescaled rows directly, which keeps the result O(1) for large
    N under the ensemble's 1/N^(p-1) payoff variance.
    """
    p, n = tensor.params.p, tensor.params.n_actions
    if not 0 <= mu < p:
        raise ValueError(f"player index {mu} out of range for p={p}")
    x = np.asarray(x, dtype=float)
    if x.shape != (p, n):
        raise ValueError(f"profile shape {x.shape} does not match (p, N)=({p}, {n})")
    if not np.all(np.isfinite(x)):
        raise ValueError("profile must be finite")
    return tensor.flat[mu] @ opponent_weights(x, mu)


def tuple_aligned_payoffs(tensor: PayoffTensor) -> np.ndarray:
    """Payoffs as an (N^p, p) array with rows aligned on action tuples.

    Row k holds (payoff to player 1, ..., payoff to player p) for the k-th
    tuple in lexicographic order; used for statistical audits.
    """
    p, n = tensor.params.p, tensor.params.n_actions
    cols = []
    for mu in range(p):
        axes = [(k - mu) % p for k in range(p)]
        cols.append(np.transpose(tensor.tensors[mu], axes).ravel())
    return np.stack(cols, axis=1)


def save_tensor(tensor: PayoffTensor, path) -> None:
    """Binary dump: fixed header then per-player float64 blocks."""
    params = tensor.params
    header = struct.pack(
        "<4sIIIddQdd",
        _MAGIC,
        _FORMAT_VERSION,
        params.p,
        params.n_actions,
        params.gamma,
        0.0,  # reserved
        params.seed,
        params.alpha,
        params.beta,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for t in tensor.tensors:
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_tensor(path, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> PayoffTensor:
    with open(path, "rb") as fh:
        raw = fh.read(struct.calcsize("<4sIIIddQdd"))
        magic, version, p, n, gamma, _res, seed, alpha, beta = struct.unpack(
            "<4sIIIddQdd", raw
        )
        if magic != _MAGIC:
            raise ValueError(f"not a payoff tensor file: bad magic {magic!r}")
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported tensor format version {version}")
        params = GameParams(
            p=p, n_actions=n, alpha=alpha, beta=beta, gamma=gamma, seed=seed,
            memory_budget=memory_budget,
        )
        count = n**p
        tensors = []
        for _ in range(p):
            block = np.frombuffer(fh.read(8 * count), dtype="<f8", count=count)
            tensors.append(block.reshape((n,) * p).copy())
    flat = np.stack([t.reshape(n, n ** (p - 1)) for t in tensors])
    for t in tensors:
        t.setflags(write=False)
    flat.setflags(write=False)
    return PayoffTensor(params=params, tensors=tuple(tensors), flat=flat)


def export_entries_csv(tensor: PayoffTensor, path, n_samples: int, seed: int = 0) -> None:
    """Write a random sample of tensor entries for off-line statistical audit."""
    p, n = tensor.params.p, tensor.params.n_actions
    aligned = tuple_aligned_payoffs(tensor)
    rng = make_rng(seed)
    rows = rng.integers(0, aligned.shape[0], size=min(n_samples, aligned.shape[0]))
    buf = io.StringIO()
    idx_names = ",".join(f"i{k+1}" for k in range(p))
    val_names = ",".join(f"payoff{mu+1}" for mu in range(p))
    buf.write(f"{idx_names},{val_names}\n")
    for row in rows:
        idx = np.unravel_index(int(row), (n,) * p)
        vals = ",".join(repr(float(v)) for v in aligned[row])
        buf.write(",".join(str(int(i)) for i in idx) + "," + vals + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
