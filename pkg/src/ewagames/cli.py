"""Command-line front end.

Every subcommand accepts --config FILE (flat JSON; a previously written
run manifest also works, its embedded config is reused) with command-line
flags taking precedence, and writes its outputs plus a manifest.json into
--out.  Exit codes: 0 success, 1 config error, 2 resource/IO error,
3 sweep finished with failed cells.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from .classify import ClassifierConfig, classify, reports_to_csv
from .dynamics import init_random, integrate_sc, run_map, trajectory_to_csv
from .ensemble import (
    GameParams,
    ResourceError,
    export_entries_csv,
    generate_payoffs,
    save_tensor,
)
from .seeds import derive_seed
from .sweep import (
    DESK_INITIAL_CONDITIONS,
    DESK_MAX_STEPS,
    SweepConfig,
    emit_outputs,
    run_sweep,
    write_manifest,
)
from .theory import (
    BoundaryRangeError,
    area_table_to_csv,
    boundary_to_csv,
    critical_inverse_r,
    large_p_targets,
    unstable_area,
)


class ConfigError(ValueError):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]  # run manifest: reuse the embedded config
    return data


def _resolve(schema: dict, args: argparse.Namespace) -> dict:
    """defaults <- config file <- explicitly passed flags."""
    cfg = dict(schema)
    file_cfg = _load_config(getattr(args, "config", None))
    for key, value in file_cfg.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = value
    for key in schema:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _prepare_out(out_dir: str) -> None:
    """Fail on an unwritable output directory before any computation."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.unlink(probe)
    except OSError as exc:
        raise ResourceError(f"output directory {out_dir!r} not writable: {exc}") from exc


def _game_params(cfg: dict) -> GameParams:
    return GameParams(
        p=int(cfg["p"]), n_actions=int(cfg["n"]), alpha=float(cfg["alpha"]),
        beta=float(cfg["beta"]), gamma=float(cfg["gamma"]), seed=int(cfg["seed"]),
    )


_GAME_SCHEMA = {"p": 2, "n": 20, "gamma": -0.5, "alpha": 0.1, "beta": 0.05, "seed": 0}
_CLASSIFIER_SCHEMA = {
    "max_steps": 500_000, "batch": 10_000, "fp_rel_tol": 0.01,
    "lc_rel_tol": 0.001, "fp_identity_tol": 0.1,
}


def _add_game_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--p", type=int, help="number of players")
    sp.add_argument("--n", type=int, help="actions per player")
    sp.add_argument("--gamma", type=float, help="payoff correlation parameter")
    sp.add_argument("--alpha", type=float, help="memory-loss rate")
    sp.add_argument("--beta", type=float, help="intensity of choice")


def _add_common(sp: argparse.ArgumentParser, default_out: str) -> None:
    sp.add_argument("--config", help="JSON config file (or a run manifest)")
    sp.add_argument("--seed", type=int, help="base seed")
    sp.add_argument("--workers", type=int, help="worker processes")
    sp.add_argument("--out", default=None, help=f"output directory (default {default_out})")
    sp.set_defaults(default_out=default_out)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_generate(args) -> int:
    schema = dict(_GAME_SCHEMA, entries_csv=0)
    cfg = _resolve(schema, args)
    out = args.out or args.default_out
    _prepare_out(out)
    tensor = generate_payoffs(_game_params(cfg))
    tensor_path = os.path.join(out, "tensor.bin")
    save_tensor(tensor, tensor_path)
    outputs = [tensor_path]
    if int(cfg["entries_csv"]) > 0:
        entries_path = os.path.join(out, "entries.csv")
        export_entries_csv(tensor, entries_path, int(cfg["entries_csv"]),
                           seed=int(cfg["seed"]))
        outputs.append(entries_path)
    write_manifest(os.path.join(out, "manifest.json"), "generate", cfg, outputs)
    print(f"wrote {tensor_path}")
    return 0


def _cmd_simulate(args) -> int:
    schema = dict(
        _GAME_SCHEMA, init_seed=1, engine="map", steps=10_000,
        horizon=0.0, step=0.0, stride=10, components=5,
    )
    cfg = _resolve(schema, args)
    out = args.out or args.default_out
    _prepare_out(out)
    params = _game_params(cfg)
    tensor = generate_payoffs(params)
    profile = init_random(params, int(cfg["init_seed"]))
    if cfg["engine"] == "map":
        traj = run_map(tensor, profile, int(cfg["steps"]), int(cfg["stride"]))
    elif cfg["engine"] == "flow":
        horizon = float(cfg["horizon"]) or 50.0 * params.r
        step = float(cfg["step"]) or None
        traj = integrate_sc(tensor, profile, params.r, horizon, step,
                            int(cfg["stride"]))
    else:
        raise ConfigError(f"unknown engine {cfg['engine']!r}")
    traj_path = os.path.join(out, "trajectory.csv")
    trajectory_to_csv(traj, traj_path, components=int(cfg["components"]))
    write_manifest(os.path.join(out, "manifest.json"), "simulate", cfg, [traj_path])
    print(f"wrote {traj_path} ({traj.times.size} samples)")
    return 0


def _cmd_classify(args) -> int:
    schema = dict(_GAME_SCHEMA, init_seed=1, engine="map", **_CLASSIFIER_SCHEMA)
    cfg = _resolve(schema, args)
    out = args.out or args.default_out
    _prepare_out(out)
    params = _game_params(cfg)
    tensor = generate_payoffs(params)
    cc = ClassifierConfig(
        max_steps=int(cfg["max_steps"]), batch=int(cfg["batch"]),
        fp_rel_tol=float(cfg["fp_rel_tol"]), lc_rel_tol=float(cfg["lc_rel_tol"]),
        fp_identity_tol=float(cfg["fp_identity_tol"]), n_initial_conditions=1,
    )
    report = classify(tensor, int(cfg["init_seed"]), cc, engine=cfg["engine"])
    report_path = os.path.join(out, "report.csv")
    reports_to_csv([(params.seed, int(cfg["init_seed"]), report)], report_path)
    write_manifest(os.path.join(out, "manifest.json"), "classify", cfg, [report_path])
    extra = f" period={report.period}" if report.period else ""
    print(f"{report.kind.value} after {report.steps_used} steps{extra}")
    return 0


_SWEEP_SCHEMA = {
    "p": 2, "n": 50, "beta": 0.05, "seed": 0,
    "alpha_min": 0.01, "alpha_max": 0.4, "alpha_count": 8,
    "alpha_spacing": "linear",
    "gamma_min": -1.0, "gamma_max": 0.0, "gamma_count": 8,
    "n_games": 1, "n_initial_conditions": DESK_INITIAL_CONDITIONS,
    "max_steps": DESK_MAX_STEPS, "batch": 10_000,
    "fp_rel_tol": 0.01, "lc_rel_tol": 0.001, "fp_identity_tol": 0.1,
    "workers": 1, "paper_scale": False, "theory_overlay": True,
}


def _sweep_config(cfg: dict) -> SweepConfig:
    if cfg.get("paper_scale"):
        cfg = dict(cfg, n_initial_conditions=500, max_steps=500_000)
    return SweepConfig(
        p=int(cfg["p"]), n_actions=int(cfg["n"]), beta=float(cfg["beta"]),
        base_seed=int(cfg["seed"]),
        alpha_min=float(cfg["alpha_min"]), alpha_max=float(cfg["alpha_max"]),
        alpha_count=int(cfg["alpha_count"]), alpha_spacing=cfg["alpha_spacing"],
        gamma_min=float(cfg["gamma_min"]), gamma_max=float(cfg["gamma_max"]),
        gamma_count=int(cfg["gamma_count"]), n_games=int(cfg["n_games"]),
        n_initial_conditions=int(cfg["n_initial_conditions"]),
        max_steps=int(cfg["max_steps"]), batch=int(cfg["batch"]),
        fp_rel_tol=float(cfg["fp_rel_tol"]), lc_rel_tol=float(cfg["lc_rel_tol"]),
        fp_identity_tol=float(cfg["fp_identity_tol"]),
        workers=int(cfg["workers"]), theory_overlay=bool(cfg["theory_overlay"]),
    )


def _run_sweep_command(args, command: str, observable: str,
                       schema_overrides: dict | None = None) -> int:
    schema = dict(_SWEEP_SCHEMA)
    if schema_overrides:
        schema.update(schema_overrides)
    cfg = _resolve(schema, args)
    if cfg.get("paper_scale") and command == "multiplicity":
        cfg = dict(cfg, n_games=20, n_initial_conditions=100)
    out = args.out or args.default_out
    _prepare_out(out)
    result = run_sweep(_sweep_config(cfg))
    # the manifest holds the resolved flag schema so it can be fed back in
    emit_outputs(result, out, command=command, observable=observable,
                 manifest_config=cfg)
    failed = result.n_failed
    print(f"sweep: {len(result.cells)} cells, {failed} failed, outputs in {out}")
    return 3 if failed else 0


def _cmd_sweep(args) -> int:
    return _run_sweep_command(args, "sweep", "frac_fixed_point")


def _cmd_limit_cycles(args) -> int:
    return _run_sweep_command(args, "limit-cycles", "frac_limit_cycle")


def _cmd_multiplicity(args) -> int:
    overrides = {
        "gamma_min": 0.1, "gamma_max": 0.9, "n_games": 5,
        "n_initial_conditions": 20, "theory_overlay": False,
    }
    return _run_sweep_command(args, "multiplicity", "multiplicity_fraction",
                              overrides)


def _cmd_boundary(args) -> int:
    schema = {"p": 2, "gamma_min": -1.0, "gamma_max": 0.0, "gamma_count": 11,
              "workers": 1}
    cfg = _resolve(schema, args)
    out = args.out or args.default_out
    _prepare_out(out)
    p = int(cfg["p"])
    gammas = [float(g) for g in np.linspace(
        float(cfg["gamma_min"]), float(cfg["gamma_max"]), int(cfg["gamma_count"]))]
    t0 = time.perf_counter()
    rows = []
    if int(cfg["workers"]) > 1:
        from concurrent.futures import ProcessPoolExecutor

        from .theory import _boundary_task

        with ProcessPoolExecutor(max_workers=int(cfg["workers"])) as pool:
            vals = list(pool.map(_boundary_task, [(p, g) for g in gammas]))
        rows = [(p, g, v) for g, v in zip(gammas, vals)]
    else:
        for gamma in gammas:
            try:
                rows.append((p, gamma, critical_inverse_r(p, gamma)))
            except BoundaryRangeError:
                continue
    path = os.path.join(out, "boundary.csv")
    boundary_to_csv(rows, path)
    write_manifest(os.path.join(out, "manifest.json"), "boundary", cfg, [path],
                   {"elapsed_s": time.perf_counter() - t0})
    print(f"wrote {path} ({len(rows)} points)")
    return 0


def _cmd_area(args) -> int:
    schema = {"p_min": 2, "p_max": 11, "n_gamma_nodes": 16, "workers": 1}
    cfg = _resolve(schema, args)
    out = args.out or args.default_out
    _prepare_out(out)
    t0 = time.perf_counter()
    rows = []
    for p in range(int(cfg["p_min"]), int(cfg["p_max"]) + 1):
        area = unstable_area(p, n_gamma_nodes=int(cfg["n_gamma_nodes"]),
                             workers=int(cfg["workers"]))
        rows.append((p, area, large_p_targets(p, 0.0)["boundary_inverse_r"]))
    path = os.path.join(out, "area.csv")
    area_table_to_csv(rows, path)
    write_manifest(os.path.join(out, "manifest.json"), "area", cfg, [path],
                   {"elapsed_s": time.perf_counter() - t0})
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ewagames",
        description="Learning dynamics in random p-player games: "
                    "simulation, classification, theory, and sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("generate", help="draw a payoff tensor and save it")
    _add_game_flags(sp)
    sp.add_argument("--entries-csv", dest="entries_csv", type=int,
                    help="also export this many sampled entries as CSV")
    _add_common(sp, "out/generate")
    sp.set_defaults(func=_cmd_generate)

    sp = sub.add_parser("simulate", help="run one trajectory and export it")
    _add_game_flags(sp)
    sp.add_argument("--init-seed", dest="init_seed", type=int)
    sp.add_argument("--engine", choices=["map", "flow"])
    sp.add_argument("--steps", type=int, help="map steps")
    sp.add_argument("--horizon", type=float, help="flow horizon")
    sp.add_argument("--step", type=float, help="flow integrator step")
    sp.add_argument("--stride", type=int, help="snapshot stride")
    sp.add_argument("--components", type=int, help="components per player in CSV")
    _add_common(sp, "out/simulate")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("classify", help="classify the attractor of one run")
    _add_game_flags(sp)
    sp.add_argument("--init-seed", dest="init_seed", type=int)
    sp.add_argument("--engine", choices=["map", "flow"])
    sp.add_argument("--max-steps", dest="max_steps", type=int)
    sp.add_argument("--batch", type=int)
    sp.add_argument("--fp-rel-tol", dest="fp_rel_tol", type=float)
    sp.add_argument("--lc-rel-tol", dest="lc_rel_tol", type=float)
    sp.add_argument("--fp-identity-tol", dest="fp_identity_tol", type=float)
    _add_common(sp, "out/classify")
    sp.set_defaults(func=_cmd_classify)

    def add_sweep_flags(sp):
        sp.add_argument("--p", type=int)
        sp.add_argument("--n", type=int)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--alpha-min", dest="alpha_min", type=float)
        sp.add_argument("--alpha-max", dest="alpha_max", type=float)
        sp.add_argument("--alpha-count", dest="alpha_count", type=int)
        sp.add_argument("--alpha-spacing", dest="alpha_spacing",
                        choices=["linear", "log"])
        sp.add_argument("--gamma-min", dest="gamma_min", type=float)
        sp.add_argument("--gamma-max", dest="gamma_max", type=float)
        sp.add_argument("--gamma-count", dest="gamma_count", type=int)
        sp.add_argument("--n-games", dest="n_games", type=int)
        sp.add_argument("--n-ic", dest="n_initial_conditions", type=int)
        sp.add_argument("--max-steps", dest="max_steps", type=int)
        sp.add_argument("--batch", type=int)
        sp.add_argument("--paper-scale", dest="paper_scale", action="store_const",
                        const=True, help="paper-scale run sizes (500 starts, "
                        "500000 steps; 20 games for multiplicity)")
        sp.add_argument("--no-theory", dest="theory_overlay", action="store_const",
                        const=False, help="skip the theory boundary overlay")

    sp = sub.add_parser("sweep", help="(alpha, gamma) heat map of convergence")
    add_sweep_flags(sp)
    _add_common(sp, "out/sweep")
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("limit-cycles", help="heat map of limit-cycle fraction")
    add_sweep_flags(sp)
    _add_common(sp, "out/limit_cycles")
    sp.set_defaults(func=_cmd_limit_cycles)

    sp = sub.add_parser("multiplicity",
                        help="heat map of games with multiple fixed points")
    add_sweep_flags(sp)
    _add_common(sp, "out/multiplicity")
    sp.set_defaults(func=_cmd_multiplicity)

    sp = sub.add_parser("boundary", help="trace the predicted stability boundary")
    sp.add_argument("--p", type=int)
    sp.add_argument("--gamma-min", dest="gamma_min", type=float)
    sp.add_argument("--gamma-max", dest="gamma_max", type=float)
    sp.add_argument("--gamma-count", dest="gamma_count", type=int)
    _add_common(sp, "out/boundary")
    sp.set_defaults(func=_cmd_boundary)

    sp = sub.add_parser("area", help="area of the unstable region vs p")
    sp.add_argument("--p-min", dest="p_min", type=int)
    sp.add_argument("--p-max", dest="p_max", type=int)
    sp.add_argument("--n-gamma-nodes", dest="n_gamma_nodes", type=int)
    _add_common(sp, "out/area")
    sp.set_defaults(func=_cmd_area)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
