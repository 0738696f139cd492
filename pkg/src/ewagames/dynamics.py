"""Learning dynamics: the discrete logit map and its continuous-time flow.

Strategies are kept in the rescaled convention where each player's row of
components sums to N (so a uniform mixture is all ones).  The discrete map
updates x_i <- x_i^(1-alpha) exp(beta a_i) / Z with a_i the expected payoff
of action i against the opponents' current mixtures.  Its continuous limit
(alpha, beta -> 0 at fixed r = beta/alpha, time in units of beta) is the
replicator-like flow

    dx_i/dt = x_i [ -(1/r) ln x_i + a_i - rho ],

with rho fixed per player so that each row sum is conserved.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import map_batch
from .ensemble import GameParams, PayoffTensor, expected_payoff_vector, opponent_weights
from .seeds import make_rng

ROW_SUM_RTOL = 1e-9


class IntegrationError(RuntimeError):
    """Non-finite state during integration; .t holds the last valid time."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


@dataclass(frozen=True)
class StrategyProfile:
    """Rescaled strategy rows (p x N, strictly positive, each summing to N)."""

    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "x", x)
        if x.ndim != 2:
            raise ValueError("profile must be a p x N array")
        if not np.all(x > 0.0):
            raise ValueError("strategy components must be strictly positive")
        n = x.shape[1]
        sums = x.sum(axis=1)
        if np.any(np.abs(sums - n) > ROW_SUM_RTOL * n):
            raise ValueError(f"rows must sum to N={n}, got {sums}")

    @property
    def log_x(self) -> np.ndarray:
        return np.log(self.x)


@dataclass
class Trajectory:
    """Sampled run of either dynamics.

    times/states hold snapshots at the sampling stride; payoffs holds the
    total expected payoff sum_mu sum_i (x_i/N) a_i at every step of the
    run (cadence recorded in metadata as payoff_dt).
    """

    times: np.ndarray
    states: np.ndarray
    payoffs: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("one snapshot per sample time required")

    def final_profile(self) -> StrategyProfile:
        return StrategyProfile(x=self.states[-1], t=float(self.times[-1]))


def init_random(params: GameParams, init_seed: int) -> StrategyProfile:
    """Flat-Dirichlet rows scaled to sum N; deterministic in init_seed."""
    rng = make_rng(init_seed)
    e = rng.standard_exponential((params.p, params.n_actions))
    x = params.n_actions * e / e.sum(axis=1, keepdims=True)
    return StrategyProfile(x=x, t=0.0)


def ewa_step(tensor: PayoffTensor, profile: StrategyProfile) -> StrategyProfile:
    """One step of the discrete map at the tensor's (alpha, beta)."""
    params = tensor.params
    p, n = params.p, params.n_actions
    a = np.empty((p, n))
    for mu in range(p):
        a[mu] = expected_payoff_vector(tensor, mu, profile.x)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite expected payoffs")
    logits = (1.0 - params.alpha) * profile.log_x + params.beta * a
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    x = n * e / e.sum(axis=1, keepdims=True)
    return StrategyProfile(x=x, t=profile.t + 1)


def run_map(tensor: PayoffTensor, profile: StrategyProfile, n_steps: int,
            sample_stride: int = 1) -> Trajectory:
    """Iterate the discrete map, recording snapshots and per-step payoffs."""
    params = tensor.params
    states, payoffs = map_batch(
        tensor.flat, profile.log_x, params.alpha, params.beta, n_steps
    )
    t0 = profile.t
    times = t0 + np.arange(0, n_steps + 1, sample_stride)
    return Trajectory(
        times=times.astype(float),
        states=states[::sample_stride].copy(),
        payoffs=payoffs,
        metadata={
            "engine": "map",
            "alpha": params.alpha,
            "beta": params.beta,
            "gamma": params.gamma,
            "p": params.p,
            "n_actions": params.n_actions,
            "seed": params.seed,
            "payoff_dt": 1.0,
            "sample_stride": sample_stride,
        },
    )


def _payoff_vectors(tensor: PayoffTensor, x: np.ndarray) -> np.ndarray:
    p = x.shape[0]
    a = np.empty_like(x)
    for mu in range(p):
        a[mu] = tensor.flat[mu] @ opponent_weights(x, mu)
    return a


def sc_derivative(tensor: PayoffTensor, profile: StrategyProfile, r: float) -> np.ndarray:
    """Continuous-time rate dx/dt for the rescaled strategy array.

    The per-player normalizer rho is closed so every row of the returned
    array sums to zero exactly (row sums are conserved by the flow).
    """
    if r <= 0:
        raise ValueError("r must be positive")
    x = profile.x
    n = x.shape[1]
    a = _payoff_vectors(tensor, x)
    g = -np.log(x) / r + a
    rho = (x * g).sum(axis=1, keepdims=True) / n
    return x * (g - rho)


def _flow_rate(tensor: PayoffTensor, y: np.ndarray, r: float) -> np.ndarray:
    # d(log x)/dt on the log-state; non-finite values propagate to the
    # integrator's state check instead of warning here
    with np.errstate(over="ignore", invalid="ignore"):
        x = np.exp(y)
        n = x.shape[1]
        a = _payoff_vectors(tensor, x)
        g = -y / r + a
        rho = (x * g).sum(axis=1, keepdims=True) / n
        return g - rho


def default_flow_step(r: float) -> float:
    return 0.1 * min(1.0, r)


def integrate_sc(tensor: PayoffTensor, profile: StrategyProfile, r: float,
                 horizon: float, step: float | None = None,
                 sample_stride: int = 1) -> Trajectory:
    """Fixed-step 4th-order integration of the flow in log coordinates.

    Positivity is structural (the state is log x); each accepted step is
    re-projected so every row of exp(y) sums to N.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    h = default_flow_step(r) if step is None else float(step)
    if h <= 0:
        raise ValueError("step must be positive")
    n_steps = max(1, int(round(horizon / h)))
    p, n = profile.x.shape
    logn = math.log(n)
    y = profile.log_x
    t0 = profile.t

    n_samples = n_steps // sample_stride + 1
    states = np.empty((n_samples, p, n))
    times = np.empty(n_samples)
    payoffs = np.empty(n_steps + 1)
    states[0] = profile.x
    times[0] = t0
    write = 1
    for k in range(n_steps + 1):
        x = np.exp(y)
        payoffs[k] = float(np.sum(x * _payoff_vectors(tensor, x))) / n
        if k == n_steps:
            break
        k1 = _flow_rate(tensor, y, r)
        k2 = _flow_rate(tensor, y + 0.5 * h * k1, r)
        k3 = _flow_rate(tensor, y + 0.5 * h * k2, r)
        k4 = _flow_rate(tensor, y + h * k3, r)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(
                f"state became non-finite at t={t0 + k * h}", t=t0 + k * h
            )
        y += logn - np.log(np.exp(y).sum(axis=1, keepdims=True))
        if (k + 1) % sample_stride == 0:
            states[write] = np.exp(y)
            times[write] = t0 + (k + 1) * h
            write += 1
    return Trajectory(
        times=times[:write],
        states=states[:write],
        payoffs=payoffs,
        metadata={
            "engine": "flow",
            "r": r,
            "step": h,
            "gamma": tensor.params.gamma,
            "p": p,
            "n_actions": n,
            "seed": tensor.params.seed,
            "payoff_dt": h,
            "sample_stride": sample_stride,
        },
    )


def payoff_sum_series(trajectory: Trajectory) -> np.ndarray:
    """Per-step total expected payoff along the run."""
    if trajectory.payoffs.size == 0:
        raise ValueError("empty trajectory")
    return trajectory.payoffs


def diff_series(trajectory: Trajectory) -> np.ndarray:
    """First differences of the total-payoff series."""
    return np.diff(payoff_sum_series(trajectory))


def autocorrelation(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation at lags 0..max_lag.

    Raises ValueError on a (numerically) constant series, where the
    autocorrelation is undefined.
    """
    s = np.asarray(series, dtype=float)
    if s.size <= max_lag + 1:
        raise ValueError("series too short for requested max_lag")
    d = s - s.mean()
    denom = float(np.dot(d, d))
    if denom <= 1e-30 * s.size * max(1.0, float(np.max(np.abs(s))) ** 2):
        raise ValueError("autocorrelation undefined for a constant series")
    out = np.empty(max_lag + 1)
    n = s.size
    for lag in range(max_lag + 1):
        out[lag] = float(np.dot(d[: n - lag], d[lag:])) / denom
    return out


OBSERVABLE_FLOOR = 1e-150


def trajectory_to_csv(trajectory: Trajectory, path, components: int | None = None) -> None:
    """Export snapshots (time, components, payoff sum) as CSV.

    components limits the number of actions written per player; exported
    component values are floored at 1e-150 so downstream log plots are safe
    (the in-memory state is never floored).
    """
    p, n = trajectory.states.shape[1:]
    n_out = n if components is None else min(components, n)
    stride = int(trajectory.metadata.get("sample_stride", 1))
    header = ["time"]
    header += [f"x_{mu + 1}_{i + 1}" for mu in range(p) for i in range(n_out)]
    header.append("payoff_sum")
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for k, t in enumerate(trajectory.times):
        x = np.maximum(trajectory.states[k, :, :n_out], OBSERVABLE_FLOOR)
        step_idx = min(k * stride, trajectory.payoffs.size - 1)
        row = [repr(float(t))]
        row += [repr(float(v)) for v in x.ravel()]
        row.append(repr(float(trajectory.payoffs[step_idx])))
        buf.write(",".join(row) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
