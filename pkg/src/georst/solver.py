"""Design-point solver: constrained maximum-likelihood reverse stress test.

Minimizes half the squared Mahalanobis distance over the capital-breaching
set, subject to g > 0 (as g >= g_min), optional box bounds, and an optional
monotonicity constraint. All optimization runs in whitened coordinates with
multi-start; a brute-force grid oracle validates 2-D problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .errors import InfeasibleError, InvalidInputError, NonConvergenceError
from .reference import ReferenceModel
from .special_functions import normal_quantile

G_MIN_DEFAULT = 1e-6


@dataclass
class ConstraintSet:
    """Feasibility restrictions beyond the capital breach itself."""

    g_min: float = G_MIN_DEFAULT
    g_max: float | None = None
    x_min: np.ndarray | float | None = None
    x_max: np.ndarray | float | None = None
    enforce_monotonicity: bool = False

    def __post_init__(self):
        if not self.g_min > 0:
            raise InvalidInputError("g_min must be positive")
        if self.g_max is not None and not self.g_max > self.g_min:
            raise InvalidInputError("g_max must exceed g_min")
        if self.x_min is not None and self.x_max is not None:
            if np.any(np.asarray(self.x_max) <= np.asarray(self.x_min)):
                raise InvalidInputError("x bounds define an empty box")

    def x_bound(self, which: str, d: int) -> np.ndarray | None:
        raw = self.x_min if which == "min" else self.x_max
        if raw is None:
            return None
        arr = np.broadcast_to(np.asarray(raw, dtype=float), (d - 1,)).copy()
        return arr

    def clip(self, s: np.ndarray) -> np.ndarray:
        """Project a scenario onto the box (used for start generation only)."""
        d = s.size
        out = s.copy()
        out[0] = max(out[0], self.g_min)
        if self.g_max is not None:
            out[0] = min(out[0], self.g_max)
        lo = self.x_bound("min", d)
        hi = self.x_bound("max", d)
        if lo is not None:
            out[1:] = np.maximum(out[1:], lo)
        if hi is not None:
            out[1:] = np.minimum(out[1:], hi)
        return out

    def satisfied(self, s: np.ndarray, tol: float = 1e-9) -> bool:
        d = s.size
        if s[0] < self.g_min - tol:
            return False
        if self.g_max is not None and s[0] > self.g_max + tol:
            return False
        lo = self.x_bound("min", d)
        hi = self.x_bound("max", d)
        if lo is not None and np.any(s[1:] < lo - tol):
            return False
        if hi is not None and np.any(s[1:] > hi + tol):
            return False
        return True


@dataclass
class SolverConfig:
    """Multi-start and tolerance settings for the design-point solve."""

    n_starts: int = 32
    seed: int = 0
    penalty_initial: float = 10.0
    penalty_growth: float = 10.0
    penalty_rounds: int = 6
    fd_step: float = 1e-5          # central-difference step, whitened units
    tol_constraint: float = 1e-8
    tol_stationarity: float = 1e-8
    dedup_radius: float = 1e-3     # whitened distance
    max_inner_iter: int = 200

    def __post_init__(self):
        if self.n_starts < 1:
            raise InvalidInputError("n_starts must be >= 1")
        for name in ("fd_step", "tol_constraint", "tol_stationarity",
                     "dedup_radius"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")


@dataclass
class LocalOptimum:
    s: np.ndarray
    y: np.ndarray
    mahalanobis_sq: float
    ratio: float
    start_index: int


@dataclass
class DesignPointResult:
    s_star: np.ndarray
    y_star: np.ndarray
    mahalanobis_sq: float
    tail_probability: float
    ratio_at_optimum: float
    active: bool
    local_optima: list[LocalOptimum] = field(default_factory=list)
    n_starts: int = 0


def _constraint_scale(capital) -> float:
    return max(capital.r0 - capital.r_star, 1e-12)


def _fd_grad(fun, y: np.ndarray, step: float) -> np.ndarray:
    g = np.empty_like(y)
    for j in range(y.size):
        e = np.zeros_like(y)
        e[j] = step
        g[j] = (fun(y + e) - fun(y - e)) / (2.0 * step)
    return g


def _build_constraints(model: ReferenceModel, capital, constraints: ConstraintSet,
                       config: SolverConfig, monotonicity_fn=None,
                       g_fixed: float | None = None) -> list[dict]:
    L = model.chol
    d = model.d
    scale = _constraint_scale(capital)

    def breach_fun(y):
        return (capital.r_star - capital.ratio(L @ y)) / scale

    cons = [{
        "type": "ineq",
        "fun": breach_fun,
        "jac": lambda y: _fd_grad(breach_fun, y, config.fd_step),
    }]
    row_g = L[0, :]
    if g_fixed is None:
        cons.append({
            "type": "ineq",
            "fun": lambda y: np.array([row_g @ y - constraints.g_min]),
            "jac": lambda y: row_g.reshape(1, -1),
        })
        if constraints.g_max is not None:
            cons.append({
                "type": "ineq",
                "fun": lambda y: np.array([constraints.g_max - row_g @ y]),
                "jac": lambda y: -row_g.reshape(1, -1),
            })
    else:
        cons.append({
            "type": "eq",
            "fun": lambda y: np.array([row_g @ y - g_fixed]),
            "jac": lambda y: row_g.reshape(1, -1),
        })
    lo = constraints.x_bound("min", d)
    hi = constraints.x_bound("max", d)
    rows_x = L[1:, :]
    if lo is not None:
        cons.append({
            "type": "ineq",
            "fun": lambda y: rows_x @ y - lo,
            "jac": lambda y: rows_x,
        })
    if hi is not None:
        cons.append({
            "type": "ineq",
            "fun": lambda y: hi - rows_x @ y,
            "jac": lambda y: -rows_x,
        })
    if monotonicity_fn is not None and constraints.enforce_monotonicity:
        def mono_fun(y):
            return -monotonicity_fn(L @ y)

        cons.append({
            "type": "ineq",
            "fun": mono_fun,
            "jac": lambda y: _fd_grad(mono_fun, y, config.fd_step),
        })
    return cons


def _g_cap(model: ReferenceModel, constraints: ConstraintSet) -> float:
    if constraints.g_max is not None:
        return constraints.g_max
    return normal_quantile(0.999) * model.marginal_std(0)


def _frontier_warm_start(model: ReferenceModel, capital,
                         constraints: ConstraintSet, g_j: float,
                         t_cap: float = 4096.0) -> np.ndarray:
    """Bisect along a stress ray at fixed g for a near-frontier start."""
    d = model.d
    v = np.sqrt(np.diag(model.sigma)[1:])

    def point(t):
        s = np.empty(d)
        s[0] = g_j
        s[1:] = t * v
        return constraints.clip(s)

    def breach(t):
        return capital.ratio(point(t)) <= capital.r_star

    if breach(0.0):
        return point(0.0)
    t = 1.0
    while t <= t_cap and not breach(t):
        t *= 2.0
    if t > t_cap:
        return point(0.0)
    lo, hi = t / 2.0, t
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if breach(mid):
            hi = mid
        else:
            lo = mid
    return point(hi)


def _generate_starts(model: ReferenceModel, capital, constraints: ConstraintSet,
                     config: SolverConfig, rng: np.random.Generator) -> list[np.ndarray]:
    """Half whitened-sphere draws, half g-grid conditional warm starts."""
    d = model.d
    starts = []
    n_sphere = config.n_starts // 2
    radii = (1.0, 2.0, 3.0, 4.0)
    for i in range(n_sphere):
        u = rng.standard_normal(d)
        u /= max(np.linalg.norm(u), 1e-12)
        y = radii[i % len(radii)] * u
        s = constraints.clip(model.unwhiten(y))
        starts.append(model.whiten(s))
    n_grid = config.n_starts - n_sphere
    if n_grid > 0:
        g_cap = _g_cap(model, constraints)
        g_values = np.linspace(constraints.g_min, g_cap, max(n_grid, 2))[:n_grid]
        for g_j in g_values:
            s = _frontier_warm_start(model, capital, constraints, g_j)
            starts.append(model.whiten(s))
    return starts


def _polish_to_frontier(model: ReferenceModel, capital, y: np.ndarray,
                        config: SolverConfig) -> np.ndarray:
    """Push a near-frontier iterate exactly onto the feasible side.

    Moves along the (finite-difference) constraint normal until the ratio
    crosses r_star, then keeps a strictly feasible point on the bracket.
    """
    L = model.chol
    scale = _constraint_scale(capital)

    def c(yy):
        return (capital.r_star - capital.ratio(L @ yy)) / scale

    c0 = c(y)
    if c0 >= 0.0:
        return y
    grad = _fd_grad(c, y, config.fd_step)
    norm = np.linalg.norm(grad)
    if norm < 1e-14:
        return y
    direction = grad / norm
    t_hi = abs(c0) / norm * 4.0 + 1e-12
    for _ in range(60):
        if c(y + t_hi * direction) > 0.0:
            break
        t_hi *= 2.0
    else:
        return y
    t_root = brentq(lambda t: c(y + t * direction), 0.0, t_hi, xtol=1e-15)
    # step just past the root so the iterate is feasible, not merely on it
    for pad in (0.0, 1e-12, 1e-10, 1e-8):
        cand = y + (t_root + pad * (1.0 + abs(t_root))) * direction
        if c(cand) >= 0.0:
            return cand
    return y


def _solve_from(y0: np.ndarray, cons: list[dict], config: SolverConfig):
    return minimize(
        lambda y: 0.5 * float(y @ y),
        y0,
        jac=lambda y: y,
        method="SLSQP",
        constraints=cons,
        options={"maxiter": config.max_inner_iter, "ftol": 1e-14},
    )


def _feasible(model: ReferenceModel, capital, constraints: ConstraintSet,
              s: np.ndarray, monotonicity_fn=None, tol: float = 1e-8) -> bool:
    if capital.ratio(s) > capital.r_star + tol:
        return False
    if not constraints.satisfied(s, tol=1e-8):
        return False
    if monotonicity_fn is not None and constraints.enforce_monotonicity:
        if monotonicity_fn(s) > tol:
            return False
    return True


def _dedup(optima: list[LocalOptimum], radius: float) -> list[LocalOptimum]:
    kept: list[LocalOptimum] = []
    for opt in sorted(optima, key=lambda o: (round(o.mahalanobis_sq, 9),
                                             tuple(o.y))):
        if all(np.linalg.norm(opt.y - k.y) > radius for k in kept):
            kept.append(opt)
    return kept


def solve_design_point(model: ReferenceModel, capital,
                       constraints: ConstraintSet | None = None,
                       config: SolverConfig | None = None,
                       monotonicity_fn=None) -> DesignPointResult:
    """Find the most plausible capital-breaching scenario.

    Multi-start SLSQP in whitened coordinates, feasibility polish onto the
    breach frontier, deduplication of local optima, and a deterministic
    lexicographic tie-break. Raises InfeasibleError when no breach exists
    within bounds, NonConvergenceError when starts exist but none converge
    to a feasible point.
    """
    if constraints is None:
        constraints = ConstraintSet()
    if config is None:
        config = SolverConfig()
    rng = np.random.default_rng(config.seed)
    starts = _generate_starts(model, capital, constraints, config, rng)
    cons = _build_constraints(model, capital, constraints, config,
                              monotonicity_fn=monotonicity_fn)

    probe_breach = any(
        capital.ratio(constraints.clip(model.unwhiten(y))) <= capital.r_star
        for y in starts)

    optima: list[LocalOptimum] = []
    best_infeasible: tuple[float, np.ndarray] | None = None
    for idx, y0 in enumerate(starts):
        res = _solve_from(y0, cons, config)
        y = _polish_to_frontier(model, capital, res.x, config)
        s = model.unwhiten(y)
        if _feasible(model, capital, constraints, s, monotonicity_fn,
                     tol=config.tol_constraint):
            optima.append(LocalOptimum(
                s=s, y=y, mahalanobis_sq=float(y @ y),
                ratio=capital.ratio(s), start_index=idx))
        else:
            obj = float(y @ y)
            if best_infeasible is None or obj < best_infeasible[0]:
                best_infeasible = (obj, s)

    if not optima:
        if not probe_breach:
            raise InfeasibleError(
                "no capital-breaching scenario found within the admissible bounds")
        err = NonConvergenceError(
            "no start converged to a feasible design point")
        err.best_iterate = None if best_infeasible is None else best_infeasible[1]
        raise err

    deduped = _dedup(optima, config.dedup_radius)
    best = deduped[0]
    ratio = capital.ratio(best.s)
    active = abs(ratio - capital.r_star) <= 1e-6 * capital.r0
    return DesignPointResult(
        s_star=best.s,
        y_star=best.y,
        mahalanobis_sq=best.mahalanobis_sq,
        tail_probability=model.tail_probability(best.mahalanobis_sq),
        ratio_at_optimum=ratio,
        active=active,
        local_optima=deduped,
        n_starts=len(starts),
    )


def conditional_anchor(model: ReferenceModel, capital,
                       constraints: ConstraintSet, g_j: float,
                       config: SolverConfig | None = None,
                       monotonicity_fn=None) -> np.ndarray | None:
    """Least-unlikely macro-financial companion shock at fixed g = g_j.

    Returns the anchor scenario (g_j, x*(g_j)), or None when no feasible x
    exists at this geopolitical intensity (the anchor is skipped).
    """
    if config is None:
        config = SolverConfig()
    g_cap = _g_cap(model, constraints)
    if not (constraints.g_min <= g_j <= max(g_cap, constraints.g_min)):
        raise InvalidInputError(f"g_j={g_j} outside the admissible range")
    d = model.d
    cons = _build_constraints(model, capital, constraints, config,
                              monotonicity_fn=monotonicity_fn, g_fixed=g_j)
    rng = np.random.default_rng(config.seed + 1)
    n_starts = max(6, config.n_starts // 4)
    starts = []
    warm = _frontier_warm_start(model, capital, constraints, g_j)
    starts.append(model.whiten(warm))
    stds = np.sqrt(np.diag(model.sigma)[1:])
    radii = (1.0, 2.0, 3.0)
    for i in range(n_starts - 1):
        u = rng.standard_normal(d - 1)
        u /= max(np.linalg.norm(u), 1e-12)
        s = np.empty(d)
        s[0] = g_j
        s[1:] = radii[i % len(radii)] * u * stds
        starts.append(model.whiten(constraints.clip(s)))

    best: tuple[float, np.ndarray] | None = None
    for y0 in starts:
        res = _solve_from(y0, cons, config)
        for y in (_polish_to_frontier(model, capital, res.x, config), res.x):
            s = model.unwhiten(y)
            if abs(s[0] - g_j) > 1e-6 * max(1.0, abs(g_j)):
                continue
            s[0] = g_j  # snap away residual solver tolerance
            if not _feasible(model, capital, constraints, s, monotonicity_fn,
                             tol=config.tol_constraint):
                continue
            m2 = model.mahalanobis_sq(s)
            if best is None or m2 < best[0]:
                best = (m2, s)
            break
    if best is None:
        return None
    return best[1]


@dataclass
class GridOracleResult:
    s: np.ndarray
    mahalanobis_sq: float
    cell_size: tuple[float, float]


def grid_oracle(model: ReferenceModel, capital, constraints: ConstraintSet,
                resolution: int, x_bounds: tuple[float, float] | None = None,
                g_bounds: tuple[float, float] | None = None) -> GridOracleResult | None:
    """Exhaustive 2-D scan: the feasible grid point with minimal distance.

    Independent validator for the solver; returns None when no grid point
    breaches (infeasible signal).
    """
    if model.d != 2:
        raise InvalidInputError("grid oracle only supports d = 2")
    if resolution < 2:
        raise InvalidInputError("resolution must be >= 2")
    if g_bounds is None:
        if constraints.g_max is None:
            raise InvalidInputError("grid oracle needs finite g bounds")
        g_bounds = (constraints.g_min, constraints.g_max)
    if x_bounds is None:
        lo = constraints.x_bound("min", 2)
        hi = constraints.x_bound("max", 2)
        if lo is None or hi is None:
            raise InvalidInputError("grid oracle needs finite x bounds")
        x_bounds = (float(lo[0]), float(hi[0]))
    g_axis = np.linspace(g_bounds[0], g_bounds[1], resolution)
    x_axis = np.linspace(x_bounds[0], x_bounds[1], resolution)
    G, X = np.meshgrid(g_axis, x_axis, indexing="ij")
    S = np.column_stack([G.ravel(), X.ravel()])
    ratio = capital.ratio_many(S)
    feasible = (ratio <= capital.r_star) & (S[:, 0] >= constraints.g_min)
    if not np.any(feasible):
        return None
    m2 = model.mahalanobis_sq_many(S[feasible])
    idx = int(np.argmin(m2))
    cell = (g_axis[1] - g_axis[0], x_axis[1] - x_axis[0])
    return GridOracleResult(s=S[feasible][idx], mahalanobis_sq=float(m2[idx]),
                            cell_size=cell)
