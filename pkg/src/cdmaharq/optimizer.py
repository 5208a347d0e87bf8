"""Per-round total-rate maximisation over power, code, spreading length and on/off.

Internally every node is described by its received power normalised to the
noise-plus-external-interference floor, ``y_i = alpha_i P_i g_i / (N0 W + J_m)``.
In these units the weighted sum rate is

    F(y) = sum_i w_i ln(1 + S) - sum_i w_i ln(1 + S - y_i),   S = sum_j y_j

and every constraint is linear in ``y``: the SINR floor reads
``y_i >= c_i (1 + S - y_i)`` with ``c_i = 10^(gamma_min/10) / (2 SL_i R_ci d_i)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar, nnls

from . import analytics
from .rs import CodeSpec

REL_TOL = 1e-9


class ConfigurationError(ValueError):
    pass


@dataclass
class OptimizationScenario:
    gains: Sequence[float]
    N0: float
    W: float
    J_m: float = 0.0
    gamma_min_db: float = 10.0
    P_max: float = 1.0
    P_th: float = math.inf
    codes: Sequence[CodeSpec] = (CodeSpec(7, 3),)
    sl_menu: Sequence[int] = (10,)
    round_index: int = 1
    node_codes: Optional[Sequence[Sequence[CodeSpec]]] = None
    node_sl: Optional[Sequence[Sequence[int]]] = None
    fixed_alpha: Optional[Sequence[int]] = None
    best_effort: bool = False

    def __post_init__(self):
        self.gains = tuple(float(g) for g in self.gains)
        self.codes = tuple(self.codes)
        self.sl_menu = tuple(int(s) for s in self.sl_menu)
        if not self.gains:
            raise ConfigurationError("scenario needs at least one node")
        if not self.codes or not self.sl_menu:
            raise ConfigurationError("code and spreading-length menus must be non-empty")
        if self.node_codes is not None:
            self.node_codes = tuple(tuple(m) for m in self.node_codes)
            if len(self.node_codes) != self.n_nodes or not all(self.node_codes):
                raise ConfigurationError("per-node code menus must be non-empty, one per node")
        if self.node_sl is not None:
            self.node_sl = tuple(tuple(int(s) for s in m) for m in self.node_sl)
            if len(self.node_sl) != self.n_nodes or not all(self.node_sl):
                raise ConfigurationError("per-node SL menus must be non-empty, one per node")
        if self.fixed_alpha is not None:
            self.fixed_alpha = tuple(int(a) for a in self.fixed_alpha)
            if len(self.fixed_alpha) != self.n_nodes or any(a not in (0, 1) for a in self.fixed_alpha):
                raise ConfigurationError("fixed_alpha must hold one 0/1 entry per node")
        if not math.isfinite(self.gamma_min_db):
            raise ConfigurationError("gamma_min must be finite")
        if self.P_max <= 0 or self.P_th <= 0:
            raise ConfigurationError("P_max and P_th must be positive")
        if self.N0 * self.W + self.J_m <= 0:
            raise ConfigurationError("noise floor must be positive")
        if any(g < 0 for g in self.gains):
            raise ConfigurationError("gains must be non-negative")

    def key(self) -> tuple:
        """Hashable identity of everything the solver reads."""
        return (self.gains, self.N0, self.W, self.J_m, self.gamma_min_db, self.P_max, self.P_th,
                tuple(self.codes_for(i) for i in range(self.n_nodes)),
                tuple(self.sls_for(i) for i in range(self.n_nodes)),
                self.fixed_alpha, self.best_effort)

    @property
    def n_nodes(self) -> int:
        return len(self.gains)

    @property
    def floor(self) -> float:
        return self.N0 * self.W + self.J_m

    def codes_for(self, i: int) -> tuple[CodeSpec, ...]:
        return tuple(self.node_codes[i]) if self.node_codes is not None else tuple(self.codes)

    def sls_for(self, i: int) -> tuple[int, ...]:
        return tuple(self.node_sl[i]) if self.node_sl is not None else tuple(self.sl_menu)

    def sinr_factor(self, sl: int, code: CodeSpec) -> float:
        return 10 ** (self.gamma_min_db / 10.0) / (2.0 * sl * code.rate * code.d)


@dataclass
class OptimizerSolution:
    powers: np.ndarray
    alphas: np.ndarray
    codes: list[Optional[CodeSpec]]
    sls: list[Optional[int]]
    objective: float
    rates: np.ndarray
    sinr_db: np.ndarray
    feasible: bool
    all_active: bool
    constraints: dict = field(default_factory=dict)
    multipliers: Optional[np.ndarray] = None
    kkt_residual: Optional[float] = None
    best_effort: bool = False

    @property
    def theta(self) -> list[dict]:
        out = []
        for i in range(len(self.powers)):
            code = self.codes[i]
            out.append({
                "P": float(self.powers[i]),
                "R_c": code.rate if code else None,
                "d": code.d if code else None,
                "code": [code.n, code.k] if code else None,
                "SL": self.sls[i],
                "alpha": int(self.alphas[i]),
            })
        return out

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "objective": self.objective,
            "rates": [float(r) for r in self.rates],
            "sinr_db": [None if not math.isfinite(s) else float(s) for s in self.sinr_db],
            "feasible": self.feasible,
            "all_active": self.all_active,
            "best_effort": self.best_effort,
            "constraints": self.constraints,
            "multipliers": None if self.multipliers is None else [float(m) for m in self.multipliers],
            "kkt_residual": self.kkt_residual,
        }


# ---------------------------------------------------------------------------
# continuous power subproblem (normalised units)


def weighted_rate(y: np.ndarray, w: np.ndarray) -> float:
    S = float(np.sum(y))
    return float(np.sum(w) * math.log1p(S) - np.sum(w * np.log1p(S - y)))


def _rate_grad(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    S = float(np.sum(y))
    inv = w / (1.0 + S - y)
    return np.sum(w) / (1.0 + S) - (np.sum(inv) - inv)


def min_power_point(c: np.ndarray) -> Optional[np.ndarray]:
    """Componentwise-smallest y meeting every SINR floor, or None if unattainable."""
    frac = c / (1.0 + c)
    s = float(np.sum(frac))
    if s >= 1.0:
        return None
    return frac / (1.0 - s)


def _constraint_rows(u: np.ndarray, c: np.ndarray, pth: float) -> tuple[np.ndarray, np.ndarray]:
    n = len(u)
    rows, rhs = [], []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        rows.append(e)
        rhs.append(u[i])
        rows.append(-e)
        rhs.append(0.0)
        rows.append(c[i] * np.ones(n) - (1.0 + c[i]) * e)
        rhs.append(-c[i])
    if math.isfinite(pth):
        rows.append(np.ones(n))
        rhs.append(pth)
    return np.array(rows), np.array(rhs)


def _is_feasible(y, A, b) -> bool:
    scale = np.maximum(1.0, np.abs(b))
    return bool(np.all(A @ y - b <= 1e-9 * scale))


def _coordinate_ascent(y0, u, c, w, pth, iters=200, tol=1e-8):
    y = np.array(y0, dtype=float)
    n = len(y)
    for _ in range(iters):
        moved = 0.0
        for i in range(n):
            rest = float(np.sum(y) - y[i])
            lo = max(0.0, c[i] * (1.0 + rest))
            hi = u[i]
            if math.isfinite(pth):
                hi = min(hi, pth - rest)
            for j in range(n):
                if j != i:
                    others = rest - y[j]
                    hi = min(hi, y[j] / c[j] - 1.0 - others)
            if hi < lo:
                continue

            def neg(v, i=i):
                z = y.copy()
                z[i] = v
                return -weighted_rate(z, w)

            cands = [lo, hi]
            if hi > lo:
                res = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                      options={"xatol": 1e-12 * max(1.0, hi)})
                cands.append(float(res.x))
            best = min(cands, key=neg)
            moved = max(moved, abs(best - y[i]) / max(1.0, abs(y[i])))
            y[i] = best
        if moved < tol:
            break
    return y


def _polish(y0, u, w, A, b):
    scale = np.maximum(u, 1e-300)
    res = minimize(
        lambda z: -weighted_rate(z * scale, w),
        y0 / scale,
        jac=lambda z: -_rate_grad(z * scale, w) * scale,
        method="SLSQP",
        constraints=[{"type": "ineq", "fun": lambda z: b - A @ (z * scale), "jac": lambda z: -(A * scale)}],
        bounds=[(0.0, 1.0)] * len(u),
        options={"ftol": 1e-15, "maxiter": 500},
    )
    y = np.clip(res.x, 0.0, 1.0) * scale
    return y


def solve_powers(u: np.ndarray, c: np.ndarray, w: np.ndarray, pth: float) -> Optional[tuple[np.ndarray, float]]:
    """Maximise the weighted rate over the polytope; None when infeasible.

    Candidates are the polytope vertices, coordinate ascent from the
    minimum-power point, and an SLSQP polish of the best candidates.
    """
    y_min = min_power_point(c)
    if y_min is None or np.any(y_min > u * (1 + 1e-12)) or (math.isfinite(pth) and y_min.sum() > pth * (1 + 1e-12)):
        return None
    n = len(u)
    A, b = _constraint_rows(u, c, pth)
    cands = [np.minimum(y_min, u)]
    for rows in itertools.combinations(range(len(b)), n):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        y = np.linalg.solve(M, b[list(rows)])
        if _is_feasible(y, A, b):
            cands.append(y)
    cands.append(_coordinate_ascent(cands[0], u, c, w, pth))
    cands.sort(key=lambda y: -weighted_rate(y, w))
    cands.append(_coordinate_ascent(cands[0], u, c, w, pth))
    for y0 in cands[:3]:
        y = _polish(y0, u, w, A, b)
        if _is_feasible(y, A, b):
            cands.append(y)
    cands = [np.clip(y, 0.0, u) for y in cands if _is_feasible(y, A, b)]
    best = max(cands, key=lambda y: (round_rel(weighted_rate(y, w)), -float(np.sum(y))))
    return best, weighted_rate(best, w)


def round_rel(x: float) -> float:
    """Quantise an objective so near-equal values tie deterministically."""
    if x == 0 or not math.isfinite(x):
        return x
    digits = 9 - int(math.floor(math.log10(abs(x))))
    return round(x, digits)


# ---------------------------------------------------------------------------
# discrete search


@dataclass
class _Candidate:
    active: tuple[int, ...]
    code_idx: tuple[int, ...]
    sl_idx: tuple[int, ...]
    powers: np.ndarray
    objective: float

    def key(self, scenario: OptimizationScenario):
        sls = tuple(scenario.sls_for(i)[j] for i, j in zip(self.active, self.sl_idx))
        return (-round_rel(self.objective), round_rel(float(self.powers.sum())), self.active, sls, self.code_idx)


def _patterns(scenario: OptimizationScenario):
    n = scenario.n_nodes
    if scenario.fixed_alpha is not None:
        return [tuple(i for i in range(n) if scenario.fixed_alpha[i])]
    pats = []
    for size in range(n, 0, -1):
        pats.extend(itertools.combinations(range(n), size))
    return pats


def _evaluate(scenario: OptimizationScenario, active, code_idx, sl_idx) -> Optional[_Candidate]:
    floor = scenario.floor
    g = np.array([scenario.gains[i] for i in active])
    if np.any(g <= 0):
        return None
    codes = [scenario.codes_for(i)[j] for i, j in zip(active, code_idx)]
    sls = [scenario.sls_for(i)[j] for i, j in zip(active, sl_idx)]
    u = g * scenario.P_max / floor
    c = np.array([scenario.sinr_factor(s, cd) for s, cd in zip(sls, codes)])
    w = np.array([cd.rate for cd in codes])
    res = solve_powers(u, c, w, scenario.P_th / floor)
    if res is None:
        return None
    y, F = res
    powers = np.minimum(y * floor / g, scenario.P_max)
    return _Candidate(tuple(active), tuple(code_idx), tuple(sl_idx), powers, F)


def _choices(scenario, active):
    code_sets = [range(len(scenario.codes_for(i))) for i in active]
    sl_sets = [range(len(scenario.sls_for(i))) for i in active]
    for ci in itertools.product(*code_sets):
        for si in itertools.product(*sl_sets):
            yield ci, si


def _finish(scenario: OptimizationScenario, cand: Optional[_Candidate], best_effort=False,
            pinned: Sequence[int] = ()) -> OptimizerSolution:
    n = scenario.n_nodes
    powers = np.zeros(n)
    alphas = np.zeros(n, dtype=int)
    codes: list[Optional[CodeSpec]] = [None] * n
    sls: list[Optional[int]] = [None] * n
    if cand is not None:
        for pos, i in enumerate(cand.active):
            powers[i] = cand.powers[pos]
            alphas[i] = 1
            codes[i] = scenario.codes_for(i)[cand.code_idx[pos]]
            sls[i] = scenario.sls_for(i)[cand.sl_idx[pos]]
    for i in pinned:
        powers[i] = scenario.P_max
        alphas[i] = 1
        codes[i] = scenario.codes_for(i)[0]
        sls[i] = max(scenario.sls_for(i))
    sol = evaluate_solution(scenario, powers, alphas, codes, sls)
    sol.feasible = cand is not None and not best_effort
    sol.best_effort = best_effort
    sol.all_active = bool(np.all(alphas == 1))
    return sol


def evaluate_solution(scenario: OptimizationScenario, powers, alphas, codes, sls) -> OptimizerSolution:
    """Recompute objective, rates, SINR and constraint status for a given Θ."""
    n = scenario.n_nodes
    powers = np.asarray(powers, dtype=float)
    alphas = np.asarray(alphas, dtype=int)
    gains = np.asarray(scenario.gains)
    rates = np.array([
        analytics.spectral_efficiency(i, powers, alphas, gains, scenario.N0, scenario.W, scenario.J_m)
        for i in range(n)
    ])
    sinr = np.array([
        analytics.sinr_db(i, sls[i], codes[i].rate, codes[i].d, powers, alphas, gains,
                          scenario.N0, scenario.W, scenario.J_m)
        if alphas[i] and codes[i] is not None else analytics.NODE_OFF
        for i in range(n)
    ])
    F = float(sum(codes[i].rate * rates[i] for i in range(n) if alphas[i] and codes[i] is not None))
    recv = float(np.sum(alphas * powers * gains))
    tol = 1e-9
    constraints = {
        "sinr": [bool(not alphas[i] or sinr[i] >= scenario.gamma_min_db - 1e-7) for i in range(n)],
        "power_threshold": bool(recv <= scenario.P_th * (1 + tol)),
        "power_max": [bool(p <= scenario.P_max * (1 + tol)) for p in powers],
        "alpha": bool(np.sum(alphas) <= n),
    }
    feasible = all(constraints["sinr"]) and constraints["power_threshold"] and all(constraints["power_max"])
    return OptimizerSolution(powers, alphas, list(codes), list(sls), F, rates, sinr, feasible,
                             bool(np.all(alphas == 1)), constraints)


def solve_rate_max(scenario: OptimizationScenario, with_kkt: bool = True) -> OptimizerSolution:
    """Maximise sum_i R_ci R_i subject to SINR, power and on/off constraints.

    Assignments with more active nodes take precedence: nodes are switched
    off only when no assignment keeps them all on.  Within a level the
    objective decides, then lower total power, then lower node indices.
    """
    best: Optional[_Candidate] = None
    level = None
    for active in _patterns(scenario):
        if level is not None and len(active) < level:
            break
        for ci, si in _choices(scenario, active):
            cand = _evaluate(scenario, active, ci, si)
            if cand is None:
                continue
            level = len(active)
            if best is None or cand.key(scenario) < best.key(scenario):
                best = cand
    if best is None and scenario.best_effort:
        return _best_effort(scenario)
    sol = _finish(scenario, best)
    if with_kkt and sol.feasible:
        rep = kkt_residuals(scenario, sol)
        sol.multipliers = rep.multipliers
        sol.kkt_residual = rep.stationarity
    return sol


def _standalone_ok(scenario: OptimizationScenario, i: int) -> bool:
    g = scenario.gains[i]
    if g <= 0:
        return False
    u = g * scenario.P_max / scenario.floor
    best_c = min(scenario.sinr_factor(s, cd) for s in scenario.sls_for(i) for cd in scenario.codes_for(i))
    return u >= best_c


def _best_effort(scenario: OptimizationScenario) -> OptimizerSolution:
    """Fallback for forced-on nodes: pin hopeless nodes at P_max and optimise the rest."""
    forced = [i for i in range(scenario.n_nodes) if scenario.fixed_alpha is None or scenario.fixed_alpha[i]]
    hopeless = [i for i in forced if not _standalone_ok(scenario, i)]
    rest = [i for i in forced if i not in hopeless]
    if hopeless and rest:
        pinned_rx = sum(scenario.gains[i] * scenario.P_max for i in hopeless)
        sub = OptimizationScenario(
            [scenario.gains[i] for i in rest], scenario.N0, scenario.W, scenario.J_m + pinned_rx,
            scenario.gamma_min_db, scenario.P_max, scenario.P_th - pinned_rx if math.isfinite(scenario.P_th) else math.inf,
            scenario.codes, scenario.sl_menu, scenario.round_index,
            [scenario.codes_for(i) for i in rest], [scenario.sls_for(i) for i in rest],
            [1] * len(rest), False,
        ) if (not math.isfinite(scenario.P_th) or scenario.P_th > pinned_rx) else None
        if sub is not None:
            subsol = solve_rate_max(sub, with_kkt=False)
            if subsol.feasible:
                powers = np.zeros(scenario.n_nodes)
                codes: list = [None] * scenario.n_nodes
                sls: list = [None] * scenario.n_nodes
                alphas = np.zeros(scenario.n_nodes, dtype=int)
                for pos, i in enumerate(rest):
                    powers[i] = subsol.powers[pos]
                    codes[i] = subsol.codes[pos]
                    sls[i] = subsol.sls[pos]
                    alphas[i] = 1
                for i in hopeless:
                    powers[i] = scenario.P_max
                    codes[i] = scenario.codes_for(i)[0]
                    sls[i] = max(scenario.sls_for(i))
                    alphas[i] = 1
                sol = evaluate_solution(scenario, powers, alphas, codes, sls)
                sol.feasible = False
                sol.best_effort = True
                return sol
    powers = np.array([scenario.P_max if i in forced else 0.0 for i in range(scenario.n_nodes)])
    alphas = np.array([1 if i in forced else 0 for i in range(scenario.n_nodes)])
    codes = [scenario.codes_for(i)[0] if i in forced else None for i in range(scenario.n_nodes)]
    sls = [max(scenario.sls_for(i)) if i in forced else None for i in range(scenario.n_nodes)]
    sol = evaluate_solution(scenario, powers, alphas, codes, sls)
    sol.feasible = False
    sol.best_effort = True
    return sol


# ---------------------------------------------------------------------------
# brute-force oracle


def power_grid(P_max: float, resolution: int, decades: float = 6.0) -> np.ndarray:
    """Zero, ``resolution - 1`` log-spaced levels and ``resolution`` linear levels up to P_max.

    The log part keeps the relative step constant, which matters because the
    useful transmit powers of near and far nodes differ by orders of
    magnitude; the linear part keeps the absolute step small near P_max.
    """
    if resolution < 2:
        raise ValueError("grid resolution must be at least 2")
    levels = np.concatenate([[0.0], P_max * np.logspace(-decades, 0.0, resolution - 1),
                             np.linspace(0.0, P_max, resolution)])
    return np.unique(levels)


def brute_force_oracle(scenario: OptimizationScenario, resolution: int = 61) -> OptimizerSolution:
    """Exhaustive search over the discrete menus and the :func:`power_grid` mesh.

    Uses the same precedence rule as :func:`solve_rate_max` (most active
    nodes first), evaluated directly from the SINR and power definitions.
    """
    grid = power_grid(scenario.P_max, resolution)
    gains = np.asarray(scenario.gains)
    floor = scenario.floor
    gmin = 10 ** (scenario.gamma_min_db / 10.0)
    best = None
    best_key = None
    level = None
    for active in _patterns(scenario):
        if level is not None and len(active) < level:
            break
        if any(gains[i] <= 0 for i in active):
            continue
        mesh = np.stack(np.meshgrid(*([grid] * len(active)), indexing="ij"), axis=-1).reshape(-1, len(active))
        rx = mesh * gains[list(active)]
        total = rx.sum(axis=1, keepdims=True)
        sir = rx / (floor + total - rx)
        ok_pth = total[:, 0] <= scenario.P_th
        log_sir = np.log1p(sir)
        psum = mesh.sum(axis=1)
        for ci, si in _choices(scenario, active):
            codes = [scenario.codes_for(i)[j] for i, j in zip(active, ci)]
            sls = [scenario.sls_for(i)[j] for i, j in zip(active, si)]
            need = np.array([gmin / (2.0 * s * cd.rate * cd.d) for s, cd in zip(sls, codes)])
            mask = ok_pth & np.all(sir >= need * (1 - 1e-12), axis=1)
            if not mask.any():
                continue
            level = len(active)
            F = log_sir @ np.array([cd.rate for cd in codes])
            Fm = np.where(mask, F, -np.inf)
            top = Fm.max()
            tied = np.flatnonzero(Fm >= top - 1e-9 * max(1.0, abs(top)))
            idx = tied[np.argmin(psum[tied])]
            cand = _Candidate(tuple(active), tuple(ci), tuple(si), mesh[idx].copy(), float(F[idx]))
            key = cand.key(scenario)
            if best is None or key < best_key:
                best, best_key = cand, key
    return _finish(scenario, best)


def grid_gap(scenario: OptimizationScenario, solution: OptimizerSolution, resolution: int = 61) -> float:
    """How much objective the oracle grid can lose near ``solution``.

    Evaluates the best feasible grid point among the grid neighbours of the
    solution (same discrete assignment) and returns F* minus that value, or
    F* itself when no neighbour is feasible.
    """
    if not solution.feasible:
        return 0.0
    grid = power_grid(scenario.P_max, resolution)
    active = [i for i in range(scenario.n_nodes) if solution.alphas[i]]
    axes = []
    for i in active:
        k = int(np.searchsorted(grid, solution.powers[i]))
        axes.append([grid[j] for j in range(max(k - 2, 0), min(k + 2, grid.size))])
    best = -math.inf
    for pt in itertools.product(*axes):
        powers = np.zeros(scenario.n_nodes)
        for i, p in zip(active, pt):
            powers[i] = p
        sol = evaluate_solution(scenario, powers, solution.alphas, solution.codes, solution.sls)
        if sol.feasible:
            best = max(best, sol.objective)
    if best == -math.inf:
        return solution.objective
    return max(0.0, solution.objective - best)


# ---------------------------------------------------------------------------
# Kuhn-Tucker diagnostics


@dataclass
class KKTReport:
    stationarity: float
    complementary: np.ndarray
    dual_feasible: bool
    multipliers: np.ndarray
    gradient: np.ndarray
    active: list[int]

    @property
    def complementary_max(self) -> float:
        return float(np.max(np.abs(self.complementary))) if self.complementary.size else 0.0


def _constraint_values(scenario: OptimizationScenario, powers, alphas, codes, sls) -> np.ndarray:
    """g_l(Θ) - b_l for the 2N + 2 constraints, in the order P_max, SINR, P_th, alpha."""
    n = scenario.n_nodes
    gains = np.asarray(scenario.gains)
    out = np.zeros(2 * n + 2)
    for l in range(n):
        out[l] = powers[l] - scenario.P_max
    for l in range(n):
        if alphas[l] and codes[l] is not None:
            g = analytics.sinr_db(l, sls[l], codes[l].rate, codes[l].d, powers, alphas, gains,
                                  scenario.N0, scenario.W, scenario.J_m)
            out[n + l] = scenario.gamma_min_db - g
        else:
            out[n + l] = -math.inf
    recv = float(np.sum(np.asarray(alphas) * np.asarray(powers) * gains))
    out[2 * n] = recv - scenario.P_th if math.isfinite(scenario.P_th) else -math.inf
    out[2 * n + 1] = float(np.sum(alphas)) - n
    return out


def _objective(scenario, powers, alphas, codes) -> float:
    gains = np.asarray(scenario.gains)
    total = 0.0
    for i in range(scenario.n_nodes):
        if alphas[i] and codes[i] is not None:
            total += codes[i].rate * analytics.spectral_efficiency(
                i, powers, alphas, gains, scenario.N0, scenario.W, scenario.J_m)
    return total


def kkt_residuals(scenario: OptimizationScenario, solution: OptimizerSolution,
                  multipliers: Optional[Sequence[float]] = None, h: float = 1e-6,
                  active_tol: float = 1e-7) -> KKTReport:
    """Stationarity, complementary slackness and dual feasibility over the active powers.

    Derivatives are central finite differences with respect to P_i / P_max.
    When ``multipliers`` is omitted they are fitted by non-negative least
    squares on the active constraints (inactive ones get zero).
    """
    n = scenario.n_nodes
    alphas = np.asarray(solution.alphas)
    codes, sls = solution.codes, solution.sls
    P = np.asarray(solution.powers, dtype=float)
    var = [i for i in range(n) if alphas[i]]
    L = 2 * n + 2
    base = _constraint_values(scenario, P, alphas, codes, sls)

    grad_f = np.zeros(len(var))
    jac = np.zeros((L, len(var)))
    for col, i in enumerate(var):
        step = h * scenario.P_max
        up, dn = P.copy(), P.copy()
        up[i] += step
        dn[i] -= step
        grad_f[col] = (_objective(scenario, up, alphas, codes) - _objective(scenario, dn, alphas, codes)) / (2 * h)
        cu = _constraint_values(scenario, up, alphas, codes, sls)
        cd = _constraint_values(scenario, dn, alphas, codes, sls)
        with np.errstate(invalid="ignore"):
            diff = (cu - cd) / (2 * h)
        jac[:, col] = np.where(np.isfinite(diff), diff, 0.0)

    applicable = np.isfinite(base)
    scale = np.array([scenario.P_max] * n + [1.0] * n +
                     [scenario.P_th if math.isfinite(scenario.P_th) else 1.0, 1.0])
    active = [l for l in range(L) if applicable[l] and abs(base[l]) <= active_tol * scale[l]]
    if multipliers is None:
        psi = np.zeros(L)
        # the alpha-count row has no dependence on P and stays at zero
        rows = [l for l in active if np.any(jac[l] != 0)]
        if rows and var:
            sol, _ = nnls(jac[rows].T, grad_f)
            psi[rows] = sol
    else:
        psi = np.asarray(multipliers, dtype=float)
        if psi.shape != (L,):
            raise ValueError(f"expected {L} multipliers")
    lag_grad = grad_f - jac.T @ psi
    stationarity = float(np.max(np.abs(lag_grad))) if var else 0.0
    slack = np.where(applicable, base, 0.0)
    comp = psi * slack
    return KKTReport(stationarity, comp, bool(np.all(psi >= 0)), psi, lag_grad, active)


def with_alpha(scenario: OptimizationScenario, alpha: Sequence[int]) -> OptimizationScenario:
    return replace(scenario, fixed_alpha=tuple(alpha))
