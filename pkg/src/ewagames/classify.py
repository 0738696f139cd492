"""Heuristic classification of long-run behavior.

A run is iterated in batches.  After each batch the batch is scanned for a
fixed point (every component's relative spread below fp_rel_tol), then for
a limit cycle (some period tau whose multiples all revisit the batch-start
state within lc_rel_tol per component).  Runs that never trigger either
detector within the step budget are reported non-convergent.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from ._kernels import map_batch
from .dynamics import StrategyProfile, default_flow_step, init_random, integrate_sc, sc_derivative
from .ensemble import GameParams, PayoffTensor, generate_payoffs
from .seeds import derive_seed

# stream tags for deterministic seed derivation
INIT_STREAM = 1
GAME_STREAM = 2


class AttractorKind(str, Enum):
    FIXED_POINT = "fixed_point"
    LIMIT_CYCLE = "limit_cycle"
    NON_CONVERGENT = "non_convergent"


@dataclass(frozen=True)
class ClassifierConfig:
    max_steps: int = 500_000
    batch: int = 10_000
    fp_rel_tol: float = 0.01
    lc_rel_tol: float = 0.001
    fp_identity_tol: float = 0.1
    n_initial_conditions: int = 500

    def __post_init__(self):
        if min(self.fp_rel_tol, self.lc_rel_tol, self.fp_identity_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.batch < 2 or self.max_steps < self.batch:
            raise ValueError("need max_steps >= batch >= 2")
        if self.max_steps % self.batch != 0:
            raise ValueError("batch must divide max_steps")
        if self.n_initial_conditions < 1:
            raise ValueError("need at least one initial condition")

    def as_dict(self) -> dict:
        return {
            "max_steps": self.max_steps,
            "batch": self.batch,
            "fp_rel_tol": self.fp_rel_tol,
            "lc_rel_tol": self.lc_rel_tol,
            "fp_identity_tol": self.fp_identity_tol,
            "n_initial_conditions": self.n_initial_conditions,
        }


@dataclass(frozen=True)
class AttractorReport:
    kind: AttractorKind
    steps_used: int
    location: np.ndarray | None = None   # fixed points only
    period: int | None = None            # limit cycles only
    flow_residual: float | None = None   # max |dx/dt| at a reported fixed point


def find_cycle(states: np.ndarray, lc_rel_tol: float) -> int | None:
    """Smallest tau in [1, batch/2] whose multiples revisit states[0].

    states has batch+1 entries; a candidate tau must match at every
    multiple k*tau <= batch, each component within lc_rel_tol relative to
    the anchor state's component.
    """
    batch = states.shape[0] - 1
    ref = states[0]
    tol = lc_rel_tol * ref
    half = batch // 2
    first_ok = np.nonzero(
        (np.abs(states[1:half + 1] - ref) <= tol).all(axis=(1, 2))
    )[0] + 1
    for tau in first_ok:
        tau = int(tau)
        ok = True
        for k in range(2, batch // tau + 1):
            if not np.all(np.abs(states[k * tau] - ref) <= tol):
                ok = False
                break
        if ok:
            return tau
    return None


def _relative_spread(states: np.ndarray) -> np.ndarray:
    hi = states.max(axis=0)
    lo = states.min(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(hi > 0.0, (hi - lo) / hi, 0.0)
    return rel


def _flow_batch(tensor: PayoffTensor, y: np.ndarray, batch: int) -> np.ndarray:
    """Integrate the flow for `batch` map-equivalent time units (of size beta)."""
    params = tensor.params
    r = params.r
    h0 = default_flow_step(r)
    sub = max(1, int(np.ceil(params.beta / h0)))
    step = params.beta / sub
    profile = StrategyProfile(x=np.exp(y), t=0.0)
    traj = integrate_sc(tensor, profile, r, horizon=batch * params.beta,
                        step=step, sample_stride=sub)
    return traj.states


def classify(tensor: PayoffTensor, init_seed: int,
             config: ClassifierConfig | None = None,
             engine: str = "map") -> AttractorReport:
    """Classify the attractor reached from one random initial condition.

    The fixed-point test runs before the limit-cycle test in every batch,
    so a fixed point is never reported as a period-1 cycle.
    """
    config = config or ClassifierConfig()
    params = tensor.params
    y = init_random(params, init_seed).log_x
    steps = 0
    while steps < config.max_steps:
        if engine == "map":
            states, _ = map_batch(tensor.flat, y, params.alpha, params.beta,
                                  config.batch)
        elif engine == "flow":
            states = _flow_batch(tensor, y, config.batch)
        else:
            raise ValueError(f"unknown engine {engine!r}")
        if not np.all(np.isfinite(states[-1])):
            raise FloatingPointError("non-finite state during classification")
        steps += config.batch
        if np.all(_relative_spread(states) < config.fp_rel_tol):
            location = states.mean(axis=0)
            residual = None
            if params.alpha > 0:
                rate = sc_derivative(tensor, StrategyProfile(x=location), params.r)
                residual = float(np.max(np.abs(rate)))
            return AttractorReport(
                kind=AttractorKind.FIXED_POINT, steps_used=steps,
                location=location, flow_residual=residual,
            )
        tau = find_cycle(states, config.lc_rel_tol)
        if tau is not None:
            return AttractorReport(
                kind=AttractorKind.LIMIT_CYCLE, steps_used=steps, period=tau
            )
        with np.errstate(divide="ignore"):
            y = np.log(states[-1])
    return AttractorReport(kind=AttractorKind.NON_CONVERGENT, steps_used=steps)


def classify_many(tensor: PayoffTensor, config: ClassifierConfig,
                  base_seed: int | None = None,
                  engine: str = "map") -> list[AttractorReport]:
    base = tensor.params.seed if base_seed is None else base_seed
    return [
        classify(tensor, derive_seed(base, INIT_STREAM, i), config, engine)
        for i in range(config.n_initial_conditions)
    ]


def convergence_fraction(tensor: PayoffTensor, config: ClassifierConfig | None = None,
                         base_seed: int | None = None) -> float:
    """Fraction of initial conditions classified as fixed points."""
    config = config or ClassifierConfig()
    reports = classify_many(tensor, config, base_seed)
    hits = sum(r.kind is AttractorKind.FIXED_POINT for r in reports)
    return hits / config.n_initial_conditions


def same_fixed_point(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """Component-wise relative distance |a-b|/max(a,b) below tol everywhere."""
    scale = np.maximum(a, b)
    return bool(np.all(np.abs(a - b) < tol * scale))


def distinct_fixed_points(locations: list[np.ndarray], tol: float) -> int:
    reps: list[np.ndarray] = []
    for loc in locations:
        if not any(same_fixed_point(loc, rep, tol) for rep in reps):
            reps.append(loc)
    return len(reps)


def multiplicity_study(params: GameParams, config: ClassifierConfig,
                       n_games: int, base_seed: int | None = None) -> float:
    """Fraction of sampled games with at least two distinct fixed points."""
    if n_games < 1:
        raise ValueError("need at least one game")
    base = params.seed if base_seed is None else base_seed
    multi = 0
    for g in range(n_games):
        game_seed = derive_seed(base, GAME_STREAM, g)
        tensor = generate_payoffs(replace(params, seed=game_seed))
        locations = []
        for i in range(config.n_initial_conditions):
            report = classify(tensor, derive_seed(game_seed, INIT_STREAM, i), config)
            if report.kind is AttractorKind.FIXED_POINT:
                locations.append(report.location)
        if distinct_fixed_points(locations, config.fp_identity_tol) >= 2:
            multi += 1
    return multi / n_games


def reports_to_csv(rows: list[tuple[int, int, AttractorReport]], path) -> None:
    """One CSV row per (game seed, init seed) classification."""
    buf = io.StringIO()
    buf.write("game_seed,init_seed,class,period,steps_used\n")
    for game_seed, init_seed, report in rows:
        period = "" if report.period is None else str(report.period)
        buf.write(f"{game_seed},{init_seed},{report.kind.value},{period},{report.steps_used}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
