"""Self-consistent fixed-point theory for the learning flow at large N.

For an ensemble-typical game the long-run strategy distribution at a fixed
point is characterized by three order parameters: q (second moment of the
components), chi (integrated response), and rho (the normalization
multiplier).  Writing s = q^((p-1)/2) and c = -gamma r q^(p-2) chi, each
component solves

    gamma q^(p-2) chi x - (1/r) ln x + s z - rho = 0,

with z a standard Gaussian variable, i.e. x(z) = W(c exp(ln c + r(s z -
rho)))/c on the principal branch (x(z) = exp(r (s z - rho)) when gamma =
0).  The order parameters close the system through Gaussian averages of
x, x^2 and dx/dz, and linear stability of the solved point holds iff

    E[(1/(r x) - gamma q^(p-2) chi)^(-2)] < 1 / ((p-1) q^(p-2)).

The solver follows a damped fixed-point iteration on (q, chi) with rho
eliminated by an inner normalization solve, finished by a safeguarded
Newton refinement; a failed refinement signals that no fixed point exists
at the requested parameters.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite

RESIDUAL_TOL = 1e-8
RHO_TOL = 1e-13
_NEWTON_ACCEPT = 1e-12
_NEWTON_MARGINAL = 1e-10
_NEWTON_REJECT = 1e-6

_INV_E = math.exp(-1.0)


class NoFixedPointError(RuntimeError):
    """The fixed-point system has no (numerically reachable) solution."""


class BoundaryRangeError(RuntimeError):
    """No stable fixed point anywhere in the searched 1/r range."""


@dataclass(frozen=True)
class TheoryPoint:
    """Parameter triple (p, gamma, r) on the solvable side gamma <= 0."""

    p: int
    gamma: float
    r: float

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("p must be at least 2")
        if not -1.0 <= self.gamma <= 0.0:
            raise ValueError(
                f"solver is valid for gamma in [-1, 0], got {self.gamma}"
            )
        if not self.r > 0.0:
            raise ValueError("r must be positive")


@dataclass(frozen=True)
class OrderParameters:
    """Solved fixed-point order parameters and the final residual."""

    q: float
    chi: float
    rho: float
    residual: float = 0.0

    def __post_init__(self):
        if not (self.q > 0.0 and np.isfinite(self.q) and np.isfinite(self.chi)
                and np.isfinite(self.rho)):
            raise ValueError("order parameters must be finite with q > 0")


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for averaging over the standard Gaussian measure."""

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss_hermite(cls, n: int = 201) -> "QuadratureRule":
        t, v = roots_hermite(n)
        return cls(nodes=np.sqrt(2.0) * t, weights=v / np.sqrt(np.pi))

    def validate(self) -> None:
        w, z = self.weights, self.nodes
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if abs(float(w @ z)) > 1e-12:
            raise ValueError("first moment must vanish")
        if abs(float(w @ (z * z)) - 1.0) > 1e-10:
            raise ValueError("second moment must be 1")

    def average(self, values: np.ndarray) -> float:
        return float(self.weights @ values)


@lru_cache(maxsize=8)
def default_rule(n: int = 201) -> QuadratureRule:
    rule = QuadratureRule.gauss_hermite(n)
    rule.validate()
    return rule


# ---------------------------------------------------------------------------
# Lambert W
# ---------------------------------------------------------------------------

def _halley_we(w: np.ndarray, y: np.ndarray, max_iter: int = 60) -> np.ndarray:
    """Halley refinement of w e^w = y (stall-safe near the branch point)."""
    for _ in range(max_iter):
        ew = np.exp(w)
        f = w * ew - y
        denom = ew * (w + 1.0) ** 2 - 0.5 * (w + 2.0) * f
        step = np.where(denom != 0.0, f * (w + 1.0) / np.where(denom == 0.0, 1.0, denom), 0.0)
        w = w - step
        if np.all(np.abs(step) <= 4e-16 * (1.0 + np.abs(w))):
            break
    return w


def _branch_series(sigma: np.ndarray) -> np.ndarray:
    # expansion of W about the branch point; sigma = +/- sqrt(2 (1 + e y))
    return (-1.0 + sigma * (1.0 + sigma * (-1.0 / 3.0 + sigma * (11.0 / 72.0
            + sigma * (-43.0 / 540.0 + sigma * (769.0 / 17280.0))))))


def _w_principal(y: np.ndarray) -> np.ndarray:
    w = np.empty_like(y)
    sig = np.sqrt(np.maximum(2.0 * (1.0 + np.e * y), 0.0))
    near = y < -0.25
    mid = (~near) & (y < 0.0)
    pos = y >= 0.0
    w[near] = _branch_series(sig[near])
    ym = y[mid]
    w[mid] = ym * (1.0 - ym + 1.5 * ym * ym)
    yp = y[pos]
    l1 = np.log1p(yp)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(l1 > 0.0, np.log1p(l1) / (2.0 + l1), 0.0)
    w[pos] = l1 * (1.0 - corr)
    w = _halley_we(w, y)
    return np.maximum(w, -1.0)


def _w_minus_one(y: np.ndarray) -> np.ndarray:
    w = np.empty_like(y)
    sig = np.sqrt(np.maximum(2.0 * (1.0 + np.e * y), 0.0))
    near = sig < 0.3
    w[near] = _branch_series(-sig[near])
    far = ~near
    if np.any(far):
        l1 = np.log(-y[far])
        l2 = np.log(-l1)
        wf = l1 - l2 + l2 / l1
        # Newton on w + ln(-w) = ln(-y); well conditioned for w < -1
        for _ in range(60):
            h = wf + np.log(-wf) - l1
            step = h * wf / (wf + 1.0)
            wf = wf - step
            if np.all(np.abs(step) <= 4e-16 * np.abs(wf)):
                break
        w[far] = wf
    w[near] = _halley_we(w[near], y[near])
    return np.minimum(w, -1.0)


def lambert_w(y, branch: str = "principal"):
    """Real Lambert W: the solution w of w e^w = y on the requested branch.

    principal: defined for y >= -1/e, returns w >= -1.
    minus_one: defined for -1/e <= y < 0, returns w <= -1.
    Evaluated by Halley iteration from piecewise initial guesses (branch
    point series, Maclaurin series, and a log-log asymptotic start).
    """
    arr = np.asarray(y, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr < -_INV_E) or np.any(~np.isfinite(arr)):
        raise ValueError(f"lambert_w defined for y >= -1/e, got {y}")
    if branch == "principal":
        out = _w_principal(arr.copy())
    elif branch == "minus_one":
        if np.any(arr >= 0.0):
            raise ValueError("minus_one branch requires y < 0")
        out = _w_minus_one(arr.copy())
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return float(out[0]) if scalar else out


def _w0_of_exp(v: np.ndarray) -> np.ndarray:
    """W0(e^v) elementwise without forming e^v outside its safe range."""
    v = np.asarray(v, dtype=float)
    w = np.empty_like(v)
    small = v < -36.0
    big = v > 36.0
    mid = ~(small | big)
    w[small] = np.exp(v[small])
    if np.any(big):
        vb = v[big]
        wb = vb - np.log(vb)
        for _ in range(40):
            f = wb + np.log(wb) - vb
            step = f * wb / (wb + 1.0)
            wb = wb - step
            if np.all(np.abs(step) <= 4e-16 * wb):
                break
        w[big] = wb
    if np.any(mid):
        w[mid] = _w_principal(np.exp(v[mid]))
    return w


# ---------------------------------------------------------------------------
# Fixed-point structure
# ---------------------------------------------------------------------------

def _coupling(point: TheoryPoint, q: float, chi: float) -> float:
    # c = -gamma r q^(p-2) chi; positive in the valid region for gamma < 0
    if point.gamma == 0.0:
        return 0.0
    return -point.gamma * point.r * q ** (point.p - 2) * chi


def _x_nodes(point: TheoryPoint, q: float, chi: float, rho: float,
             z: np.ndarray) -> np.ndarray:
    s = q ** ((point.p - 1) / 2.0)
    u = point.r * (s * z - rho)
    if point.gamma == 0.0:
        with np.errstate(over="ignore"):
            return np.exp(u)
    c = _coupling(point, q, chi)
    if not c > 0.0:
        raise NoFixedPointError(
            f"coupling must be positive for gamma < 0 (chi = {chi})"
        )
    return _w0_of_exp(np.log(c) + u) / c


def x_of_z(point: TheoryPoint, params: OrderParameters, z):
    """Fixed-point component value x(z) at Gaussian coordinate z."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    out = _x_nodes(point, params.q, params.chi, params.rho, z_arr)
    return float(out[0]) if np.ndim(z) == 0 else out


def dx_dz(point: TheoryPoint, params: OrderParameters, z):
    """Derivative of x(z): s / (1/(r x) - gamma q^(p-2) chi)."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    x = _x_nodes(point, params.q, params.chi, params.rho, z_arr)
    s = params.q ** ((point.p - 1) / 2.0)
    c = _coupling(point, params.q, params.chi)
    with np.errstate(over="ignore"):
        out = s * point.r * x / (1.0 + c * x)
    return float(out[0]) if np.ndim(z) == 0 else out


def _solve_rho(point: TheoryPoint, q: float, chi: float, rho0: float,
               rule: QuadratureRule) -> float:
    """Inner solve of E[x] = 1 for rho (monotone decreasing in rho)."""
    z, w = rule.nodes, rule.weights

    def mean_x(rho: float) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            val = float(w @ _x_nodes(point, q, chi, rho, z))
        return val if np.isfinite(val) else np.inf

    rho = rho0
    f = mean_x(rho)
    walked = 0
    while f == np.inf:
        rho += max(1.0, abs(rho))
        f = mean_x(rho)
        walked += 1
        if walked > 200:
            raise NoFixedPointError("normalization solve: mean diverges")
    if point.gamma == 0.0:
        # E[x] scales as exp(-r rho): one-shot solve
        if f <= 0.0:
            raise NoFixedPointError("normalization solve: degenerate mean")
        return rho + math.log(f) / point.r
    # bracket the root of mean_x(rho) - 1 (decreasing in rho)
    step = max(1.0, abs(rho))
    lo = hi = rho
    flo = f
    while flo < 1.0:
        lo -= step
        step *= 2.0
        flo = mean_x(lo)
        if step > 1e12:
            raise NoFixedPointError("normalization solve: no lower bracket")
    step = max(1.0, abs(rho))
    fhi = mean_x(hi)
    while not fhi < 1.0:
        hi += step
        step *= 2.0
        fhi = mean_x(hi)
        if step > 1e12:
            raise NoFixedPointError("normalization solve: no upper bracket")
    c = _coupling(point, q, chi)
    rho = 0.5 * (lo + hi)
    for _ in range(200):
        x = _x_nodes(point, q, chi, rho, z)
        with np.errstate(over="ignore", invalid="ignore"):
            f = float(w @ x) - 1.0
        if abs(f) < RHO_TOL:
            return rho
        if f > 0.0:
            lo = rho
        else:
            hi = rho
        with np.errstate(over="ignore", invalid="ignore"):
            df = -point.r * float(w @ (x / (1.0 + c * x)))
        cand = rho - f / df if df != 0.0 and np.isfinite(df) else np.nan
        rho = cand if lo < cand < hi else 0.5 * (lo + hi)
    return rho


def _iterate_once(point: TheoryPoint, q: float, chi: float, rho: float,
                  rule: QuadratureRule) -> tuple[float, float, float]:
    rho = _solve_rho(point, q, chi, rho, rule)
    z, w = rule.nodes, rule.weights
    x = _x_nodes(point, q, chi, rho, z)
    s = q ** ((point.p - 1) / 2.0)
    c = _coupling(point, q, chi)
    with np.errstate(over="ignore"):
        dx = s * point.r * x / (1.0 + c * x)
        i1 = float(w @ dx)
        i2 = float(w @ (x * x))
    return i2, i1 / s, rho


def _self_consistency_residual(point: TheoryPoint, q: float, chi: float,
                               rho: float, rule: QuadratureRule) -> float:
    q_new, chi_new, _ = _iterate_once(point, q, chi, rho, rule)
    return max(abs(q_new - q) / max(1.0, q),
               abs(chi_new - chi) / max(1.0, abs(chi)))


def _fold_polish_gamma0(point: TheoryPoint, q: float) -> float:
    """Refine q at gamma = 0 by minimizing the scalar map residual.

    With the normalization constraint eliminated analytically, the gamma=0
    iteration map is q -> exp(r^2 q^(p-1)); near a marginal (double-root)
    solution Newton stalls at sqrt(noise) accuracy, while a golden-section
    search on the noise-free scalar residual recovers q to ~1e-7.
    """
    rr = point.r * point.r
    n = point.p - 1

    def resid(qq: float) -> float:
        return abs(math.exp(min(rr * qq**n, 700.0)) - qq)

    lo, hi = q * (1.0 - 1e-3), q * (1.0 + 1e-3)
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1 = b - phi * (b - a)
    c2 = a + phi * (b - a)
    f1, f2 = resid(c1), resid(c2)
    for _ in range(80):
        if f1 < f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - phi * (b - a)
            f1 = resid(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + phi * (b - a)
            f2 = resid(c2)
    return 0.5 * (a + b)


def _newton_refine(point: TheoryPoint, q: float, chi: float, rho: float,
                   rule: QuadratureRule, max_iter: int = 30):
    """Newton on the residual of the (q, chi) self-consistency map.

    Returns ("ok", q, chi, rho, res) on convergence or ("floor", res) when
    the residual bottoms out away from zero (no nearby solution).
    """

    def residual(v):
        qq, cc = v
        if qq <= 0.0 or (point.gamma < 0.0 and cc <= 0.0):
            return None, rho
        try:
            q_new, chi_new, rr = _iterate_once(point, qq, cc, rho, rule)
        except NoFixedPointError:
            return None, rho
        vec = np.array([q_new - qq, chi_new - cc])
        if not np.all(np.isfinite(vec)):
            return None, rr
        return vec, rr

    v = np.array([q, chi])
    vec, rho = residual(v)
    if vec is None:
        return ("floor", np.inf)
    fd_scale = 1e-7
    retried = False
    for _ in range(max_iter):
        scaled = float(np.max(np.abs(vec) / np.maximum(np.abs(v), 1.0)))
        if scaled < _NEWTON_ACCEPT:
            return ("ok", float(v[0]), float(v[1]), rho, scaled)
        jac = np.empty((2, 2))
        for j in range(2):
            dv = fd_scale * max(abs(v[j]), 1e-3)
            vp = v.copy()
            vp[j] += dv
            vec_p, _ = residual(vp)
            if vec_p is None:
                return ("floor", scaled)
            jac[:, j] = (vec_p - vec) / dv
        try:
            step = np.linalg.solve(jac, -vec)
        except np.linalg.LinAlgError:
            return ("floor", scaled)
        improved = False
        base = float(np.max(np.abs(vec)))
        for sign in (1.0, -1.0):
            trial = sign * step
            for _ls in range(12):
                vn = v + trial
                vec_n, rho_n = residual(vn)
                if vec_n is not None and float(np.max(np.abs(vec_n))) < base:
                    v, vec, rho = vn, vec_n, rho_n
                    improved = True
                    break
                trial = 0.5 * trial
            if improved:
                break
        if not improved:
            if not retried:
                # near a double root the residual is quadratic in the offset;
                # a finer finite-difference step resolves the tiny Jacobian
                retried = True
                fd_scale = 1e-10
                continue
            return ("floor", float(np.max(np.abs(vec) / np.maximum(np.abs(v), 1.0))))
    return ("floor", float(np.max(np.abs(vec) / np.maximum(np.abs(v), 1.0))))


def solve_order_parameters(point: TheoryPoint, rule: QuadratureRule | None = None,
                           q0: float = 1.0, chi0: float | None = None,
                           rho0: float = 0.0, damping: float = 0.5,
                           rel_tol: float = 1e-10,
                           max_iter: int = 10_000,
                           newton_first: bool = False) -> OrderParameters:
    """Solve the three self-consistency relations for (q, chi, rho).

    Damped fixed-point iteration (mixing factor `damping`) on (q, chi),
    with rho re-solved from the normalization constraint at every pass;
    declared converged when the relative change drops below rel_tol, then
    polished by a safeguarded Newton refinement.  newton_first skips the
    damped burn-in (useful when (q0, chi0, rho0) warm-start from a nearby
    solution).  Raises NoFixedPointError when the iteration diverges, the
    Newton refinement bottoms out at a non-zero residual, or the iteration
    budget is exhausted.
    """
    rule = rule or default_rule()
    z, w = rule.nodes, rule.weights
    q = q0
    chi = min(point.r, 1.0) if chi0 is None else chi0
    rho = rho0
    last_floor = np.inf
    strikes = 0
    k = 0
    next_newton = 0 if newton_first else 150

    def finish(qf, cf, rf) -> OrderParameters:
        if point.gamma == 0.0:
            # scalar closed-form residual is noise-free: polish q through it
            # (Newton's quadrature residual goes quadratic near a fold and
            # stops resolving q at ~sqrt(quadrature noise))
            qf = _fold_polish_gamma0(point, qf)
            cf = point.r
        rf = _solve_rho(point, qf, cf, rf, rule)
        x = _x_nodes(point, qf, cf, rf, z)
        s = qf ** ((point.p - 1) / 2.0)
        c = _coupling(point, qf, cf)
        with np.errstate(over="ignore"):
            dx = s * point.r * x / (1.0 + c * x)
        res = max(
            abs(float(w @ (x * x)) - qf) / max(1.0, qf),
            abs(float(w @ dx) - s * cf) / max(1.0, abs(s * cf)),
            abs(float(w @ x) - 1.0),
        )
        if res > RESIDUAL_TOL:
            raise NoFixedPointError(
                f"solution fails residual gate: {res:.3e} > {RESIDUAL_TOL}"
            )
        return OrderParameters(q=qf, chi=cf, rho=rf, residual=res)

    while k < max_iter:
        try:
            q_new, chi_new, rho = _iterate_once(point, q, chi, rho, rule)
        except NoFixedPointError:
            raise NoFixedPointError(
                f"iteration left the valid region at {point}"
            ) from None
        k += 1
        if not (np.isfinite(q_new) and np.isfinite(chi_new)) or q_new <= 0.0 or q_new > 1e12:
            raise NoFixedPointError(f"iteration diverged at {point}")
        delta = max(abs(q_new - q) / max(q, 1e-300),
                    abs(chi_new - chi) / max(abs(chi), 1e-300))
        q += damping * (q_new - q)
        chi += damping * (chi_new - chi)
        if q <= 0.0 or (point.gamma < 0.0 and chi <= 0.0):
            raise NoFixedPointError(f"iteration left the valid region at {point}")
        if delta < rel_tol or (delta < 1e-3 and k >= next_newton) or k >= next_newton:
            outcome = _newton_refine(point, q, chi, rho, rule)
            if outcome[0] == "ok":
                return finish(outcome[1], outcome[2], outcome[3])
            floor = outcome[1]
            if floor > _NEWTON_REJECT:
                raise NoFixedPointError(
                    f"no fixed point near the iterate at {point} (residual {floor:.2e})"
                )
            if floor < _NEWTON_MARGINAL:
                # marginal (near-double-root) solution: accept current point
                return finish(q, chi, rho)
            strikes += 1
            if strikes >= 2 and floor > 0.1 * last_floor:
                raise NoFixedPointError(
                    f"refinement stalled at residual {floor:.2e} at {point}"
                )
            last_floor = min(last_floor, floor)
            next_newton = k + 150
    raise NoFixedPointError(f"no convergence within {max_iter} iterations at {point}")


# ---------------------------------------------------------------------------
# Stability and the boundary
# ---------------------------------------------------------------------------

def stability_lhs(point: TheoryPoint, params: OrderParameters,
                  rule: QuadratureRule | None = None) -> float:
    """Gaussian average of (1/(r x) - gamma q^(p-2) chi)^(-2)."""
    rule = rule or default_rule()
    x = _x_nodes(point, params.q, params.chi, params.rho, rule.nodes)
    g = point.gamma * params.q ** (point.p - 2) * params.chi
    with np.errstate(divide="ignore", over="ignore"):
        integrand = (1.0 / (point.r * x) - g) ** (-2.0)
    return rule.average(integrand)


def stability_rhs(point: TheoryPoint, params: OrderParameters) -> float:
    return 1.0 / ((point.p - 1) * params.q ** (point.p - 2))


def is_stable(point: TheoryPoint, params: OrderParameters,
              rule: QuadratureRule | None = None) -> bool:
    return stability_lhs(point, params, rule) < stability_rhs(point, params)


def _stable_here(p: int, gamma: float, inv_r: float, rule: QuadratureRule,
                 warm: OrderParameters | None):
    point = TheoryPoint(p=p, gamma=gamma, r=1.0 / inv_r)
    try:
        if warm is not None:
            params = solve_order_parameters(
                point, rule, q0=warm.q, chi0=warm.chi, rho0=warm.rho,
                newton_first=True,
            )
        else:
            params = solve_order_parameters(point, rule)
    except NoFixedPointError:
        if warm is not None:
            try:
                params = solve_order_parameters(point, rule)
            except NoFixedPointError:
                return False, None
        else:
            return False, None
    return is_stable(point, params, rule), params


def critical_inverse_r(p: int, gamma: float, rule: QuadratureRule | None = None,
                       lo: float = 1e-6, hi: float = 1e3, tol: float = 1e-6,
                       n_scan: int = 20) -> float:
    """Smallest 1/r with a stable solved fixed point, to within tol.

    An initial scan over n_scan log-spaced points (walked from the stable
    large-1/r side with warm starts) verifies that stability changes sign
    exactly once before bisecting; points where no fixed point can be
    solved count as unstable.
    """
    rule = rule or default_rule()
    grid = np.geomspace(lo, hi, n_scan)
    flags: list[bool | None] = [None] * n_scan
    warms: dict[int, OrderParameters] = {}
    warm = None
    for i in range(n_scan - 1, -1, -1):
        ok, params = _stable_here(p, gamma, float(grid[i]), rule, warm)
        flags[i] = ok
        if ok:
            warm = params
            warms[i] = params
    if flags[0]:
        return float(grid[0])
    if not flags[-1]:
        raise BoundaryRangeError(
            f"no stable fixed point up to 1/r = {hi} for p={p}, gamma={gamma}"
        )
    changes = [i for i in range(n_scan - 1) if flags[i] != flags[i + 1]]
    if len(changes) != 1:
        raise RuntimeError(
            f"stability is not single-crossing in 1/r for p={p}, gamma={gamma}: {flags}"
        )
    lo_b = float(grid[changes[0]])
    hi_b = float(grid[changes[0] + 1])
    warm = warms[changes[0] + 1]
    while hi_b - lo_b > tol:
        mid = 0.5 * (lo_b + hi_b)
        ok, params = _stable_here(p, gamma, mid, rule, warm)
        if ok:
            hi_b = mid
            warm = params
        else:
            lo_b = mid
    return 0.5 * (lo_b + hi_b)


def gamma_quadrature(n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on the gamma interval [-1, 0]."""
    t, v = np.polynomial.legendre.leggauss(n_nodes)
    return 0.5 * (t - 1.0), 0.5 * v


def unstable_area(p: int, rule: QuadratureRule | None = None,
                  n_gamma_nodes: int = 16, workers: int = 1) -> float:
    """Area of the unstable region in the (alpha/beta, gamma) plane.

    Gauss-Legendre integral of the critical 1/r over gamma in [-1, 0];
    for large p it approaches sqrt(e (p-1)).
    """
    rule = rule or default_rule()
    gammas, weights = gamma_quadrature(n_gamma_nodes)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(_boundary_task, [(p, float(g)) for g in gammas]))
    else:
        vals = [critical_inverse_r(p, float(g), rule) for g in gammas]
    return float(np.dot(weights, vals))


def _boundary_task(args: tuple[int, float]) -> float:
    p, gamma = args
    return critical_inverse_r(p, gamma, default_rule())


def large_p_targets(p: int, gamma: float) -> dict[str, float]:
    """Asymptotic boundary location and multiplier for many players.

    boundary_inverse_r: sqrt(e (p-1)); rho: (1/2 + gamma) sqrt(e/(p-1)),
    used as validation targets for the full solver at large p.
    """
    n = p - 1
    return {
        "boundary_inverse_r": math.sqrt(math.e * n),
        "rho": (0.5 + gamma) * math.sqrt(math.e / n),
    }


# ---------------------------------------------------------------------------
# Closed forms on the gamma = 0 line
# ---------------------------------------------------------------------------

def gamma0_order_parameters(p: int, r: float, branch: str = "principal") -> OrderParameters:
    """Closed-form order parameters at gamma = 0.

    q solves exp((p-1) r^2 q^(p-1)) = q^(p-1) ... i.e. q = (-W(-(p-1) r^2)
    / ((p-1) r^2))^(1/(p-1)) with chi = r and rho = ln(q)/(2 r).  Two
    solutions exist for (p-1) r^2 < 1/e (one per branch of W); none above.
    """
    a = (p - 1) * r * r
    if a > _INV_E:
        raise NoFixedPointError(
            f"no gamma=0 fixed point for (p-1) r^2 = {a:.6f} > 1/e"
        )
    wval = lambert_w(-a, branch=branch)
    q = (-wval / a) ** (1.0 / (p - 1))
    rho = math.log(q) / (2.0 * r)
    return OrderParameters(q=q, chi=r, rho=rho, residual=0.0)


def gamma0_boundary(p: int) -> dict[str, float]:
    """Marginal-stability values on the gamma = 0 line."""
    n = p - 1
    r = 1.0 / math.sqrt(n * math.e)
    return {
        "inverse_r": math.sqrt(n * math.e),
        "r": r,
        "q": math.exp(1.0 / n),
        "chi": r,
        "rho": 0.5 * math.sqrt(math.e / n),
    }


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def boundary_to_csv(rows: list[tuple[int, float, float]], path) -> None:
    """Rows of (p, gamma, critical alpha/beta)."""
    buf = io.StringIO()
    buf.write("p,gamma,alpha_over_beta\n")
    for p, gamma, val in rows:
        buf.write(f"{p},{repr(float(gamma))},{repr(float(val))}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def area_table_to_csv(rows: list[tuple[int, float, float]], path) -> None:
    """Rows of (p, area, large-p asymptote)."""
    buf = io.StringIO()
    buf.write("p,area,asymptote\n")
    for p, area, asym in rows:
        buf.write(f"{p},{repr(float(area))},{repr(float(asym))}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
