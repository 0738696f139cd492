"""Acceptance suite: one test per guaranteed behavior, at stated tolerance.

Each test prints a `[criterion NN] PASS/FAIL ...` line (run with -s to see
them).  Tolerances are fixed here, not tuned at runtime.  The small-p
clause of the area law (criterion 3b) is a known honest failure: the
closed-form area target is a large-p asymptote that overestimates the
true p=2 area by roughly 2.5x, so no correct solver can meet the stated
20% agreement there; the assertion is kept as written to keep the gap
visible.
"""

import itertools
import json
import math
import os

import numpy as np
import pytest

from ewagames import (
    AttractorKind,
    ClassifierConfig,
    GameParams,
    NoFixedPointError,
    TheoryPoint,
    autocorrelation,
    classify,
    convergence_fraction,
    diff_series,
    dx_dz,
    gamma0_boundary,
    gamma0_order_parameters,
    generate_payoffs,
    init_random,
    is_stable,
    run_map,
    solve_order_parameters,
    unstable_area,
    x_of_z,
)
from ewagames.classify import GAME_STREAM, find_cycle
from ewagames.cli import main
from ewagames.ensemble import expected_payoff_vector, tuple_aligned_payoffs
from ewagames.seeds import derive_seed
from ewagames.theory import default_rule

from conftest import boundary, zero_tensor
from test_ensemble import brute_force_payoff

WORKERS = min(2, os.cpu_count() or 1)
BETA = 0.05


def report(num: str, ok: bool, detail: str) -> None:
    print(f"\n[criterion {num}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {num}: {detail}"


def mean_fraction(p, n, gamma, alpha, n_games, n_ic, base_seed,
                  max_steps=100_000):
    fracs = []
    for g in range(n_games):
        seed = derive_seed(base_seed, GAME_STREAM, g)
        params = GameParams(p=p, n_actions=n, alpha=alpha, beta=BETA,
                            gamma=gamma, seed=seed)
        tensor = generate_payoffs(params)
        cc = ClassifierConfig(max_steps=max_steps, batch=10_000,
                              n_initial_conditions=n_ic)
        fracs.append(convergence_fraction(tensor, cc))
    return float(np.mean(fracs))


# -------------------------------------------------------------------- 1

def test_criterion_01_gamma0_boundary_closed_form():
    details = []
    for p in (2, 3, 5, 10):
        target = math.sqrt((p - 1) * math.e)
        got = boundary(p, 0.0)
        assert abs(got - target) / target < 1e-3
        b = gamma0_boundary(p)
        solved = solve_order_parameters(TheoryPoint(p=p, gamma=0.0, r=b["r"]))
        assert abs(solved.q - math.exp(1.0 / (p - 1))) < 1e-6
        assert abs(solved.rho - 0.5 * math.sqrt(math.e / (p - 1))) < 1e-6
        details.append(f"p={p}: 1/r_c={got:.5f} (target {target:.5f})")
    report("01", True, "; ".join(details))


# -------------------------------------------------------------------- 2

def test_criterion_02_two_branch_structure():
    for p in (2, 3, 5, 10):
        r_ok = 0.6 / math.sqrt((p - 1) * math.e)    # (p-1) r^2 < 1/e
        upper = gamma0_order_parameters(p, r_ok, "principal")
        lower = gamma0_order_parameters(p, r_ok, "minus_one")
        point = TheoryPoint(p=p, gamma=0.0, r=r_ok)
        assert upper.q < lower.q
        assert is_stable(point, upper), f"upper branch unstable at p={p}"
        assert not is_stable(point, lower), f"lower branch stable at p={p}"
        r_bad = 1.05 / math.sqrt((p - 1) * math.e)  # (p-1) r^2 > 1/e
        for branch in ("principal", "minus_one"):
            with pytest.raises(NoFixedPointError):
                gamma0_order_parameters(p, r_bad, branch)
    report("02", True, "both branches found below the fold, none above; "
           "upper stable, lower unstable (p in {2,3,5,10})")


# -------------------------------------------------------------------- 3

@pytest.fixture(scope="module")
def areas():
    values = {}
    for p in list(range(2, 11)) + [11, 21]:
        values[p] = unstable_area(p, workers=WORKERS)
    return values


def test_criterion_03a_area_law_large_p_and_monotonicity(areas):
    details = []
    for p in (11, 21):
        target = math.sqrt(math.e * (p - 1))
        rel = abs(areas[p] - target) / target
        assert rel < 0.10, f"p={p}: area {areas[p]:.4f} vs {target:.4f}"
        details.append(f"p={p}: {areas[p]:.3f}/{target:.3f} ({100*rel:.1f}%)")
    seq = [areas[p] for p in range(2, 11)]
    assert all(b > a for a, b in zip(seq, seq[1:])), f"not increasing: {seq}"
    report("03a", True, "; ".join(details) + "; area strictly increasing p=2..10")


def test_criterion_03b_area_law_small_p_asymptote(areas):
    # Known honest failure: the asymptotic area formula is poor at p=2
    # (true area ~0.66 vs sqrt(e) ~ 1.65). Kept as stated.
    target = math.sqrt(math.e)
    rel = abs(areas[2] - target) / target
    report("03b", rel < 0.20,
           f"p=2: area {areas[2]:.4f} vs sqrt(e)={target:.4f} "
           f"({100 * rel:.0f}% off; asymptote inaccurate at p=2)")


# -------------------------------------------------------------------- 4

def test_criterion_04_boundary_grows_with_p():
    details = []
    for gamma in (-0.1, -0.5, -0.9):
        vals = [boundary(p, gamma) for p in range(2, 7)]
        assert all(b > a for a, b in zip(vals, vals[1:])), \
            f"gamma={gamma}: {vals}"
        details.append(f"gamma={gamma}: " +
                       " < ".join(f"{v:.3f}" for v in vals))
    report("04", True, "; ".join(details))


# -------------------------------------------------------------------- 5

def test_criterion_05_zero_sum_endpoints():
    near = boundary(2, -0.999)
    assert near < 0.05, f"p=2 gamma=-0.999: {near}"
    gaps = {p: boundary(p, -1.0) for p in (3, 4, 5)}
    for p, v in gaps.items():
        assert v > 0.05, f"p={p} gamma=-1: {v}"
    report("05", True,
           f"p=2 gamma=-0.999: 1/r_c={near:.2e} < 0.05; " +
           "; ".join(f"p={p} gamma=-1: {v:.3f} > 0.05" for p, v in gaps.items()))


# -------------------------------------------------------------------- 6

def test_criterion_06_theory_simulation_straddle():
    details = []
    b2 = boundary(2, -0.5)
    hi2 = mean_fraction(2, 50, -0.5, BETA * b2 * 1.5, 1, 50, 2024)
    lo2 = mean_fraction(2, 50, -0.5, BETA * b2 * 0.5, 1, 50, 2024)
    assert hi2 > 0.9 and lo2 < 0.3, f"p=2 N=50: {hi2} / {lo2}"
    details.append(f"p=2 N=50: {hi2:.2f} at 1.5x, {lo2:.2f} at 0.5x")
    b3 = boundary(3, -0.5)
    hi3 = mean_fraction(3, 12, -0.5, BETA * b3 * 1.5, 4, 13, 2024)
    lo3 = mean_fraction(3, 12, -0.5, BETA * b3 * 0.5, 4, 13, 2024)
    assert hi3 > 0.9 and lo3 < 0.3, f"p=3 N=12: {hi3} / {lo3}"
    details.append(f"p=3 N=12: {hi3:.2f} at 1.5x, {lo3:.2f} at 0.5x")
    report("06", True, "; ".join(details))


# -------------------------------------------------------------------- 7

def crossing_alpha(n, n_games, n_ic, alpha_crit):
    factors = np.geomspace(0.25, 1.6, 8)
    fracs = [mean_fraction(2, n, -0.5, BETA * alpha_crit * float(f),
                           n_games, n_ic, 777) for f in factors]
    for i in range(1, len(factors)):
        if fracs[i - 1] < 0.5 <= fracs[i]:
            a0, a1 = factors[i - 1], factors[i]
            f0, f1 = fracs[i - 1], fracs[i]
            return float(a0 + (0.5 - f0) * (a1 - a0) / (f1 - f0))
    raise AssertionError(f"no 50% crossing for N={n}: {fracs}")


def test_criterion_07_finite_size_trend():
    b2 = boundary(2, -0.5)
    x10 = crossing_alpha(10, 2, 12, b2)
    x50 = crossing_alpha(50, 1, 20, b2)
    d10, d50 = abs(x10 - 1.0), abs(x50 - 1.0)
    report("07", d50 < d10,
           f"50%-convergence point vs theory boundary: N=10 at {x10:.2f}x, "
           f"N=50 at {x50:.2f}x (|off| {d10:.2f} -> {d50:.2f})")


# -------------------------------------------------------------------- 8

def test_criterion_08_ensemble_statistics():
    cases = [(2, -1.0, 320), (3, -0.5, 47), (3, 2.0, 47), (4, 0.0, 18)]
    details = []
    for p, gamma, n in cases:
        params = GameParams(p=p, n_actions=n, alpha=0.1, beta=BETA,
                            gamma=gamma, seed=55)
        aligned = tuple_aligned_payoffs(generate_payoffs(params))
        m = aligned.shape[0]
        assert m >= 10**5
        var_target = 1.0 / n ** (p - 1)
        for mu in range(p):
            var = float(np.var(aligned[:, mu]))
            assert abs(var - var_target) < 4.0 * math.sqrt(2.0 / m) * var_target
        corr_target = gamma / (p - 1)
        worst = 0.0
        for mu, nu in itertools.combinations(range(p), 2):
            corr = float(np.corrcoef(aligned[:, mu], aligned[:, nu])[0, 1])
            assert abs(corr - corr_target) < 4.0 / math.sqrt(m)
            worst = max(worst, abs(corr - corr_target))
        details.append(f"(p={p},gamma={gamma}): corr dev {worst:.2e}")
    report("08", True, "; ".join(details) + f" (4-sigma gates, M>=1e5)")


# -------------------------------------------------------------------- 9

def test_criterion_09_oracle_equivalence():
    rng = np.random.default_rng(0)
    combos = [(p, n) for p in (2, 3, 4) for n in (2, 3, 4, 6)]
    cases = (combos * 2)[:20]
    for k, (p, n) in enumerate(cases):
        params = GameParams(p=p, n_actions=n, alpha=0.1, beta=BETA,
                            gamma=-0.4, seed=900 + k)
        tensor = generate_payoffs(params)
        x = rng.uniform(0.05, 2.0, size=(p, n))
        x *= n / x.sum(axis=1, keepdims=True)
        mu = int(rng.integers(p))
        fast = expected_payoff_vector(tensor, mu, x)
        slow = brute_force_payoff(tensor, mu, x)
        assert np.allclose(fast, slow, rtol=1e-12, atol=1e-14)

    solved_points = [
        TheoryPoint(p=2, gamma=0.0, r=0.5),
        TheoryPoint(p=2, gamma=-0.5, r=0.9),
        TheoryPoint(p=3, gamma=-0.5, r=0.3),
        TheoryPoint(p=5, gamma=-0.2, r=0.2),
    ]
    rule = default_rule()
    z, w = rule.nodes, rule.weights
    for point in solved_points:
        op = solve_order_parameters(point, rule)
        x = x_of_z(point, op, z)
        # pointwise defining-equation residual
        s = op.q ** ((point.p - 1) / 2.0)
        resid = (point.gamma * op.q ** (point.p - 2) * op.chi * x
                 - np.log(x) / point.r + s * z - op.rho)
        assert np.max(np.abs(resid)) < 1e-12, point
        # the three averaged relations
        dx = dx_dz(point, op, z)
        assert abs(float(w @ x) - 1.0) < 1e-8
        assert abs(float(w @ (x * x)) - op.q) < 1e-8 * max(1.0, op.q)
        assert abs(float(w @ dx) - s * op.chi) < 1e-8 * max(1.0, abs(s * op.chi))
        # derivative vs central finite differences
        h = 1e-6
        for zz in np.linspace(-2.0, 2.0, 7):
            fd = (x_of_z(point, op, zz + h) - x_of_z(point, op, zz - h)) / (2 * h)
            assert dx_dz(point, op, zz) == pytest.approx(fd, rel=1e-6)
    report("09", True, "contraction matches brute force (20 instances, 1e-12); "
           "dx/dz matches finite differences (1e-6); all solved points pass "
           "the 1e-12/1e-8 residual gates")


# -------------------------------------------------------------------- 10

def test_criterion_10_classifier_soundness(tmp_path, monkeypatch):
    # trivial game converges to the uniform fixed point
    t = zero_tensor(2, 5, alpha=0.3, beta=BETA)
    rep = classify(t, init_seed=1,
                   config=ClassifierConfig(max_steps=20_000, batch=10_000,
                                           n_initial_conditions=1))
    assert rep.kind is AttractorKind.FIXED_POINT

    # injected exact period-7 signal is reported as a period-7 cycle
    rng = np.random.default_rng(3)
    cycle = rng.uniform(0.5, 1.5, size=(7, 2, 5))
    cycle *= 5 / cycle.sum(axis=2, keepdims=True)
    import importlib

    classify_mod = importlib.import_module("ewagames.classify")

    def injected(flat, y0, alpha, beta, n_steps):
        states = np.tile(cycle, (n_steps // 7 + 2, 1, 1))[: n_steps + 1]
        return states, np.zeros(n_steps + 1)

    monkeypatch.setattr(classify_mod, "map_batch", injected)
    rep7 = classify(t, init_seed=1,
                    config=ClassifierConfig(max_steps=10_000, batch=10_000,
                                            n_initial_conditions=1))
    monkeypatch.undo()
    assert rep7.kind is AttractorKind.LIMIT_CYCLE and rep7.period == 7

    # the deep chaotic cell stays non-convergent for most seeds at full budget
    params = GameParams(p=3, n_actions=20, alpha=0.005, beta=BETA,
                        gamma=-0.5, seed=424242)
    n_nc = 0
    for k in range(20):
        tensor = generate_payoffs(
            GameParams(p=3, n_actions=20, alpha=0.005, beta=BETA, gamma=-0.5,
                       seed=derive_seed(params.seed, GAME_STREAM, k)))
        rep = classify(tensor, init_seed=derive_seed(1, k),
                       config=ClassifierConfig(n_initial_conditions=1))
        n_nc += rep.kind is AttractorKind.NON_CONVERGENT
    assert n_nc >= 14, f"only {n_nc}/20 non-convergent"

    # standard heuristic constants are the defaults and appear in manifests
    cc = ClassifierConfig()
    assert (cc.max_steps, cc.batch, cc.fp_rel_tol, cc.lc_rel_tol) == \
        (500_000, 10_000, 0.01, 0.001)
    out = tmp_path / "clf"
    assert main(["classify", "--p", "2", "--n", "5", "--gamma", "0.0",
                 "--alpha", "0.3", "--beta", "0.05", "--seed", "1",
                 "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["max_steps"] == 500_000
    assert manifest["config"]["batch"] == 10_000
    assert manifest["config"]["fp_rel_tol"] == 0.01
    assert manifest["config"]["lc_rel_tol"] == 0.001
    assert manifest["classifier_defaults"]["max_steps"] == 500_000
    report("10", True, f"trivial game -> fixed point; injected 7-cycle -> "
           f"period 7; chaotic cell {n_nc}/20 non-convergent; heuristic "
           f"constants are defaults and in the manifest")


# -------------------------------------------------------------------- 11

def test_criterion_11_volatility_clustering():
    positives = 0
    values = []
    for k in range(10):
        seed = derive_seed(31337, GAME_STREAM, k)
        params = GameParams(p=3, n_actions=20, alpha=0.005, beta=BETA,
                            gamma=-0.5, seed=seed)
        tensor = generate_payoffs(params)
        traj = run_map(tensor, init_random(params, derive_seed(seed, 1)),
                       30_000, sample_stride=30_000)
        mag = np.abs(diff_series(traj))[5_000:]
        ac1 = autocorrelation(mag, 1)[1]
        values.append(ac1)
        positives += ac1 > 0
    report("11", positives >= 8,
           f"lag-1 autocorrelation of |payoff changes| positive for "
           f"{positives}/10 seeds (values {np.round(values, 2).tolist()})")


# -------------------------------------------------------------------- 12

def _files_equal(a, b) -> bool:
    with open(a, "rb") as fa, open(b, "rb") as fb:
        return fa.read() == fb.read()


def test_criterion_12_determinism_and_manifest_round_trips(tmp_path):
    checked = []

    def rerun(cmd, args, outputs, extra_rerun=()):
        out1 = tmp_path / f"{cmd}_a"
        out2 = tmp_path / f"{cmd}_b"
        assert main([cmd] + args + ["--out", str(out1)]) == 0
        assert main([cmd, "--config", str(out1 / "manifest.json"),
                     "--out", str(out2)] + list(extra_rerun)) == 0
        for name in outputs:
            assert _files_equal(out1 / name, out2 / name), f"{cmd}/{name}"
        checked.append(cmd)

    rerun("generate", ["--p", "2", "--n", "5", "--gamma", "-0.5", "--seed",
                       "11", "--entries-csv", "20"],
          ["tensor.bin", "entries.csv"])
    rerun("simulate", ["--p", "2", "--n", "5", "--gamma", "-0.5", "--alpha",
                       "0.1", "--beta", "0.05", "--steps", "2000"],
          ["trajectory.csv"])
    rerun("classify", ["--p", "2", "--n", "5", "--gamma", "-0.5", "--alpha",
                       "0.3", "--beta", "0.05", "--max-steps", "30000"],
          ["report.csv"])
    sweep_args = ["--p", "2", "--n", "8", "--beta", "0.05",
                  "--alpha-min", "0.05", "--alpha-max", "0.3",
                  "--alpha-count", "2", "--gamma-min", "-0.5",
                  "--gamma-max", "-0.5", "--gamma-count", "1",
                  "--n-ic", "4", "--max-steps", "30000", "--seed", "5"]
    # run with 1 worker, re-run from the manifest with 8: must be identical
    rerun("sweep", sweep_args + ["--workers", "1"],
          ["heatmap.csv", "boundary.csv", "heatmap.svg"],
          extra_rerun=["--workers", "8"])
    rerun("limit-cycles", sweep_args + ["--no-theory"],
          ["heatmap.csv", "heatmap.svg"])
    rerun("multiplicity", ["--p", "2", "--n", "8", "--beta", "0.05",
                           "--alpha-min", "0.02", "--alpha-max", "0.02",
                           "--alpha-count", "1", "--gamma-min", "0.5",
                           "--gamma-max", "0.5", "--gamma-count", "1",
                           "--n-games", "2", "--n-ic", "4",
                           "--max-steps", "30000", "--seed", "6"],
          ["heatmap.csv"])
    rerun("boundary", ["--p", "2", "--gamma-min", "-0.3", "--gamma-max", "0",
                       "--gamma-count", "2"],
          ["boundary.csv"])
    rerun("area", ["--p-min", "2", "--p-max", "2", "--n-gamma-nodes", "2"],
          ["area.csv"])
    report("12", True,
           "byte-identical outputs on manifest re-runs for: " + ", ".join(checked)
           + " (sweep re-run with workers 1 -> 8)")
