"""Parallel (alpha, gamma) grid sweeps with theory overlay and file outputs.

A sweep classifies many runs per grid cell (n_games payoff draws times
n_initial_conditions starts each), aggregates attractor fractions, traces
the predicted stability boundary over the negative-gamma part of the grid,
and emits CSV, SVG and a JSON run manifest.  Every cell derives its seeds
from (base_seed, cell indices, game index, start index), so results are
independent of worker count and scheduling.
"""

from __future__ import annotations

import io
import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__ as _pkg_version
from .classify import (
    GAME_STREAM,
    INIT_STREAM,
    AttractorKind,
    ClassifierConfig,
    classify,
    distinct_fixed_points,
)
from .ensemble import GameParams, generate_payoffs
from .seeds import RNG_ALGORITHM, derive_seed
from .theory import BoundaryRangeError, critical_inverse_r, default_rule

CELL_STREAM = 3

DESK_MAX_STEPS = 100_000
DESK_INITIAL_CONDITIONS = 50


@dataclass(frozen=True)
class SweepConfig:
    p: int = 2
    n_actions: int = 50
    beta: float = 0.05
    base_seed: int = 0
    alpha_min: float = 0.01
    alpha_max: float = 0.4
    alpha_count: int = 8
    alpha_spacing: str = "linear"
    gamma_min: float = -1.0
    gamma_max: float = 0.0
    gamma_count: int = 8
    n_games: int = 1
    n_initial_conditions: int = DESK_INITIAL_CONDITIONS
    max_steps: int = DESK_MAX_STEPS
    batch: int = 10_000
    fp_rel_tol: float = 0.01
    lc_rel_tol: float = 0.001
    fp_identity_tol: float = 0.1
    workers: int = 1
    theory_overlay: bool = True

    def __post_init__(self):
        if self.alpha_count < 1 or self.gamma_count < 1:
            raise ValueError("grids must be non-empty")
        if self.n_games < 1 or self.n_initial_conditions < 1:
            raise ValueError("counts must be at least 1")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.alpha_spacing not in ("linear", "log"):
            raise ValueError("alpha_spacing must be 'linear' or 'log'")
        if not (0.0 < self.alpha_min <= self.alpha_max <= 1.0):
            raise ValueError("need 0 < alpha_min <= alpha_max <= 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def alphas(self) -> np.ndarray:
        if self.alpha_count == 1:
            return np.array([self.alpha_min])
        if self.alpha_spacing == "log":
            return np.geomspace(self.alpha_min, self.alpha_max, self.alpha_count)
        return np.linspace(self.alpha_min, self.alpha_max, self.alpha_count)

    def gammas(self) -> np.ndarray:
        if self.gamma_count == 1:
            return np.array([self.gamma_min])
        return np.linspace(self.gamma_min, self.gamma_max, self.gamma_count)

    def classifier(self) -> ClassifierConfig:
        return ClassifierConfig(
            max_steps=self.max_steps,
            batch=self.batch,
            fp_rel_tol=self.fp_rel_tol,
            lc_rel_tol=self.lc_rel_tol,
            fp_identity_tol=self.fp_identity_tol,
            n_initial_conditions=self.n_initial_conditions,
        )


@dataclass
class CellResult:
    alpha: float
    gamma: float
    frac_fixed_point: float
    frac_limit_cycle: float
    frac_non_convergent: float
    multiplicity_fraction: float
    mean_steps_to_converge: float
    status: str = "ok"
    message: str = ""


@dataclass
class HeatMapResult:
    config: SweepConfig
    cells: list[CellResult]
    boundary: list[tuple[float, float]] = field(default_factory=list)  # (gamma, alpha/beta)
    timings: dict = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(c.status != "ok" for c in self.cells)


def _run_cell(config: SweepConfig, ia: int, ig: int) -> CellResult:
    alpha = float(config.alphas()[ia])
    gamma = float(config.gammas()[ig])
    cc = config.classifier()
    try:
        cell_seed = derive_seed(config.base_seed, CELL_STREAM, ia, ig)
        counts = {k: 0 for k in AttractorKind}
        steps_converged: list[int] = []
        games_multi = 0
        for g in range(config.n_games):
            game_seed = derive_seed(cell_seed, GAME_STREAM, g)
            params = GameParams(
                p=config.p, n_actions=config.n_actions, alpha=alpha,
                beta=config.beta, gamma=gamma, seed=game_seed,
            )
            tensor = generate_payoffs(params)
            locations = []
            for i in range(config.n_initial_conditions):
                report = classify(tensor, derive_seed(game_seed, INIT_STREAM, i), cc)
                counts[report.kind] += 1
                if report.kind is not AttractorKind.NON_CONVERGENT:
                    steps_converged.append(report.steps_used)
                if report.kind is AttractorKind.FIXED_POINT:
                    locations.append(report.location)
            if distinct_fixed_points(locations, cc.fp_identity_tol) >= 2:
                games_multi += 1
        total = config.n_games * config.n_initial_conditions
        mean_steps = float(np.mean(steps_converged)) if steps_converged else float("nan")
        return CellResult(
            alpha=alpha,
            gamma=gamma,
            frac_fixed_point=counts[AttractorKind.FIXED_POINT] / total,
            frac_limit_cycle=counts[AttractorKind.LIMIT_CYCLE] / total,
            frac_non_convergent=counts[AttractorKind.NON_CONVERGENT] / total,
            multiplicity_fraction=games_multi / config.n_games,
            mean_steps_to_converge=mean_steps,
        )
    except Exception as exc:  # record, never abort the sweep
        return CellResult(
            alpha=alpha, gamma=gamma,
            frac_fixed_point=float("nan"), frac_limit_cycle=float("nan"),
            frac_non_convergent=float("nan"), multiplicity_fraction=float("nan"),
            mean_steps_to_converge=float("nan"),
            status="error", message=f"{type(exc).__name__}: {exc}",
        )


def _cell_task(args: tuple[dict, int, int]) -> tuple[int, int, CellResult]:
    cfg_dict, ia, ig = args
    cfg = SweepConfig(**cfg_dict)
    return ia, ig, _run_cell(cfg, ia, ig)


def theory_boundary(config: SweepConfig) -> list[tuple[float, float]]:
    """(gamma, critical alpha/beta) for the grid's gamma <= 0 values."""
    out = []
    rule = default_rule()
    for gamma in config.gammas():
        g = float(gamma)
        if g > 0.0:
            continue
        try:
            out.append((g, critical_inverse_r(config.p, g, rule)))
        except (BoundaryRangeError, RuntimeError):
            continue
    return out


def run_sweep(config: SweepConfig) -> HeatMapResult:
    t0 = time.perf_counter()
    pairs = [(ia, ig) for ia in range(config.alpha_count)
             for ig in range(config.gamma_count)]
    results: dict[tuple[int, int], CellResult] = {}
    if config.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        cfg_dict = asdict(config)
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for ia, ig, cell in pool.map(
                _cell_task, [(cfg_dict, ia, ig) for ia, ig in pairs]
            ):
                results[(ia, ig)] = cell
    else:
        for ia, ig in pairs:
            results[(ia, ig)] = _run_cell(config, ia, ig)
    t1 = time.perf_counter()
    boundary = theory_boundary(config) if config.theory_overlay else []
    t2 = time.perf_counter()
    cells = [results[pair] for pair in pairs]
    return HeatMapResult(
        config=config, cells=cells, boundary=boundary,
        timings={"cells_s": t1 - t0, "boundary_s": t2 - t1},
    )


# ---------------------------------------------------------------------------
# Outputs
# ---------------------------------------------------------------------------

_CSV_FIELDS = [
    "alpha", "gamma", "frac_fixed_point", "frac_limit_cycle",
    "frac_non_convergent", "multiplicity_fraction", "mean_steps_to_converge",
]

# piecewise-linear color ramp for convergence fractions:
# 0 -> white, ~0.225 -> yellow, ~0.6 -> red, 1 -> black
_RAMP = [
    (0.0, (255, 255, 255)),
    (0.225, (255, 255, 0)),
    (0.6, (255, 0, 0)),
    (1.0, (0, 0, 0)),
]


def fraction_color(f: float) -> str:
    if not np.isfinite(f):
        return "#808080"
    f = min(max(f, 0.0), 1.0)
    for (f0, c0), (f1, c1) in zip(_RAMP, _RAMP[1:]):
        if f <= f1:
            t = 0.0 if f1 == f0 else (f - f0) / (f1 - f0)
            rgb = tuple(round(a + t * (b - a)) for a, b in zip(c0, c1))
            return "#%02x%02x%02x" % rgb
    return "#000000"


def heatmap_csv(result: HeatMapResult, path) -> None:
    buf = io.StringIO()
    buf.write(",".join(_CSV_FIELDS + ["n_games", "n_initial_conditions", "status"]) + "\n")
    cfg = result.config
    for cell in result.cells:
        vals = [repr(float(getattr(cell, f))) for f in _CSV_FIELDS]
        buf.write(",".join(vals + [str(cfg.n_games), str(cfg.n_initial_conditions),
                                   cell.status]) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def heatmap_svg(result: HeatMapResult, path, observable: str = "frac_fixed_point") -> None:
    """Self-contained SVG heat map with the theory boundary polyline."""
    cfg = result.config
    alphas, gammas = cfg.alphas(), cfg.gammas()
    na, ng = len(alphas), len(gammas)
    cell_px = 40
    ml, mb, mt, mr = 70, 50, 20, 20
    width = ml + na * cell_px + mr
    height = mt + ng * cell_px + mb
    a_lo = float(alphas[0]) - (float(alphas[-1]) - float(alphas[0])) / max(2 * (na - 1), 1)
    a_hi = float(alphas[-1]) + (float(alphas[-1]) - float(alphas[0])) / max(2 * (na - 1), 1)
    g_lo = float(gammas[0]) - (float(gammas[-1]) - float(gammas[0])) / max(2 * (ng - 1), 1)
    g_hi = float(gammas[-1]) + (float(gammas[-1]) - float(gammas[0])) / max(2 * (ng - 1), 1)
    if na == 1:
        a_lo, a_hi = float(alphas[0]) - 0.5, float(alphas[0]) + 0.5
    if ng == 1:
        g_lo, g_hi = float(gammas[0]) - 0.5, float(gammas[0]) + 0.5

    def x_px(alpha: float) -> float:
        return ml + (alpha - a_lo) / (a_hi - a_lo) * na * cell_px

    def y_px(gamma: float) -> float:
        return mt + (g_hi - gamma) / (g_hi - g_lo) * ng * cell_px

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    by_pair = {}
    k = 0
    for ia in range(na):
        for ig in range(ng):
            by_pair[(ia, ig)] = result.cells[k]
            k += 1
    for ia in range(na):
        for ig in range(ng):
            cell = by_pair[(ia, ig)]
            color = fraction_color(getattr(cell, observable))
            x0 = ml + ia * cell_px
            y0 = mt + (ng - 1 - ig) * cell_px
            parts.append(
                f'<rect x="{x0}" y="{y0}" width="{cell_px}" height="{cell_px}" '
                f'fill="{color}" stroke="none"/>'
            )
    if result.boundary:
        pts = " ".join(
            f"{x_px(cfg.beta * inv_r):.2f},{y_px(g):.2f}"
            for g, inv_r in sorted(result.boundary)
            if a_lo <= cfg.beta * inv_r <= a_hi
        )
        if pts:
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="green" stroke-width="2"/>'
            )
    axis_y = mt + ng * cell_px
    parts.append(
        f'<line x1="{ml}" y1="{axis_y}" x2="{ml + na * cell_px}" y2="{axis_y}" stroke="black"/>'
    )
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{axis_y}" stroke="black"/>')
    parts.append(
        f'<text x="{ml + na * cell_px / 2:.0f}" y="{height - 12}" font-size="13" '
        f'text-anchor="middle">alpha</text>'
    )
    parts.append(
        f'<text x="16" y="{mt + ng * cell_px / 2:.0f}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 16 {mt + ng * cell_px / 2:.0f})">gamma</text>'
    )
    for alpha in (alphas[0], alphas[-1]):
        parts.append(
            f'<text x="{x_px(float(alpha)):.0f}" y="{axis_y + 16}" font-size="11" '
            f'text-anchor="middle">{float(alpha):.3g}</text>'
        )
    for gamma in (gammas[0], gammas[-1]):
        parts.append(
            f'<text x="{ml - 6}" y="{y_px(float(gamma)) + 4:.0f}" font-size="11" '
            f'text-anchor="end">{float(gamma):.3g}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def write_manifest(path, command: str, config: dict, outputs: list[str],
                   timings: dict | None = None) -> None:
    manifest = {
        "command": command,
        "config": config,
        "package_version": _pkg_version,
        "rng_algorithm": RNG_ALGORITHM,
        "classifier_defaults": ClassifierConfig().as_dict(),
        "outputs": outputs,
        "timings": timings or {},
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_outputs(result: HeatMapResult, out_dir, command: str = "sweep",
                 observable: str = "frac_fixed_point",
                 manifest_config: dict | None = None) -> dict[str, str]:
    """Write heat-map CSV, boundary CSV, SVG, and the run manifest.

    manifest_config overrides the config dict recorded in the manifest
    (the CLI stores its resolved flag schema there so that manifests can
    be fed back as --config).
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "heatmap_csv": os.path.join(out_dir, "heatmap.csv"),
        "boundary_csv": os.path.join(out_dir, "boundary.csv"),
        "heatmap_svg": os.path.join(out_dir, "heatmap.svg"),
        "manifest": os.path.join(out_dir, "manifest.json"),
    }
    heatmap_csv(result, paths["heatmap_csv"])
    from .theory import boundary_to_csv

    boundary_to_csv(
        [(result.config.p, g, v) for g, v in result.boundary], paths["boundary_csv"]
    )
    heatmap_svg(result, paths["heatmap_svg"], observable=observable)
    write_manifest(
        paths["manifest"], command,
        manifest_config if manifest_config is not None else asdict(result.config),
        [paths["heatmap_csv"], paths["boundary_csv"], paths["heatmap_svg"]],
        result.timings,
    )
    return paths
