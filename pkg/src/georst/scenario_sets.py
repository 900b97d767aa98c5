"""Set-valued reverse-stress outputs.

Membership tests for the local neighbourhood and the near-optimal set,
candidate-pool construction (local sphere draws with a hit-and-run fallback
for thin regions), farthest-point reduction to a short scenario list, and
driver decomposition in whitened coordinates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InfeasibleError, InvalidInputError
from .reference import ReferenceModel, as_scenario_array
from .solver import ConstraintSet, SolverConfig, conditional_anchor, _g_cap

THIN_REGION_RATE = 0.01
STALL_WIDTH = 1e-10
DEFAULT_POOL_SIZE = 2000
DEFAULT_LIST_SIZE = 8
DEFAULT_TOP_K = 3


class TargetSet(Enum):
    NEIGHBOURHOOD = "neighbourhood"   # breach within a Mahalanobis ball of s*
    NEAR_OPTIMAL = "near-optimal"     # breach with near-optimal plausibility


@dataclass(frozen=True)
class NeighbourhoodSpec:
    """Mahalanobis-squared radius of the ball around the design point."""

    radius_eta: float

    def __post_init__(self):
        if not self.radius_eta > 0:
            raise InvalidInputError("radius_eta must be positive")


@dataclass(frozen=True)
class NearOptimalSpec:
    """Plausibility slack epsilon for the near-optimal set."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise InvalidInputError("epsilon must be non-negative")


class Membership:
    """Inclusive membership oracle for a target scenario set.

    Neighbourhood: breach and d^2(s - s*) <= eta. Near-optimal: breach,
    g > 0, and neg-log-density within epsilon/2 of the design point's
    (under the Gaussian this is exactly d^2(s) <= d^2(s*) + epsilon).
    """

    def __init__(self, target: TargetSet, model: ReferenceModel, capital,
                 s_star, spec):
        self.target = TargetSet(target)
        self.model = model
        self.capital = capital
        self.s_star = as_scenario_array(s_star, model.d)
        self.spec = spec
        if self.target is TargetSet.NEIGHBOURHOOD:
            if not isinstance(spec, NeighbourhoodSpec):
                raise InvalidInputError("neighbourhood target needs a NeighbourhoodSpec")
        else:
            if not isinstance(spec, NearOptimalSpec):
                raise InvalidInputError("near-optimal target needs a NearOptimalSpec")
            self._nld_star = model.neg_log_density(self.s_star)

    def __call__(self, s) -> bool:
        arr = np.asarray(s, dtype=float)
        if arr.shape != (self.model.d,) or not np.all(np.isfinite(arr)):
            return False
        if self.capital.ratio(arr) > self.capital.r_star:
            return False
        if self.target is TargetSet.NEIGHBOURHOOD:
            return self.model.mahalanobis_sq(arr - self.s_star) <= self.spec.radius_eta
        if not arr[0] > 0.0:
            return False
        return (self.model.neg_log_density(arr)
                <= self._nld_star + 0.5 * self.spec.epsilon)


@dataclass
class PoolEntry:
    s: np.ndarray
    origin: str  # anchor | grid_anchor(g) | local_draw | hit_and_run


@dataclass
class CandidatePool:
    target: TargetSet
    entries: list[PoolEntry]

    @property
    def scenarios(self) -> np.ndarray:
        return np.vstack([e.s for e in self.entries])

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class LocalSampleResult:
    accepted: list[np.ndarray]
    acceptance_rate: float
    thin_region: bool


def local_sample(model: ReferenceModel, anchor, radius_interval, n: int,
                 seed: int, membership) -> LocalSampleResult:
    """Uniform sphere-shell perturbations around an anchor in whitened space.

    Flags a thin region (acceptance below 1%) so the caller can switch to
    hit-and-run. Deterministic for a fixed seed.
    """
    anchor = as_scenario_array(anchor, model.d)
    if not membership(anchor):
        raise InvalidInputError("anchor does not pass the membership test")
    r_lo, r_hi = float(radius_interval[0]), float(radius_interval[1])
    if r_lo < 0 or r_hi < r_lo:
        raise InvalidInputError("radius interval must satisfy 0 <= lo <= hi")
    rng = np.random.default_rng(seed)
    y_anchor = model.whiten(anchor)
    accepted = []
    for _ in range(n):
        u = rng.standard_normal(model.d)
        u /= max(np.linalg.norm(u), 1e-12)
        r = rng.uniform(r_lo, r_hi)
        s = model.unwhiten(y_anchor + r * u)
        if membership(s):
            accepted.append(s)
    rate = len(accepted) / n if n > 0 else 0.0
    return LocalSampleResult(accepted=accepted, acceptance_rate=rate,
                             thin_region=rate < THIN_REGION_RATE)


def hit_and_run(model: ReferenceModel, start, n_steps: int, seed: int,
                membership, bracket_cap: float = 64.0) -> list[np.ndarray]:
    """Membership-oracle line sampler in whitened space.

    Each step draws a uniform direction, brackets the membership interval
    along the line (doubling expansion then bisection on the yes/no oracle),
    and draws uniformly inside it with shrinkage retries, so every emitted
    point passes membership. Stalls (degenerate intervals) repeat the
    current point; a majority of stalls triggers a warning.
    """
    start = as_scenario_array(start, model.d)
    if not membership(start):
        raise InvalidInputError("hit-and-run start does not pass membership")
    rng = np.random.default_rng(seed)
    y = model.whiten(start)
    chain = []
    stalls = 0

    def member_at(t, u):
        return membership(model.unwhiten(y + t * u))

    for _ in range(n_steps):
        u = rng.standard_normal(model.d)
        u /= max(np.linalg.norm(u), 1e-12)
        t_hi = _boundary(member_at, u, +1.0, bracket_cap)
        t_lo = _boundary(member_at, u, -1.0, bracket_cap)
        moved = False
        if t_hi - t_lo >= STALL_WIDTH:
            lo, hi = t_lo, t_hi
            for _ in range(40):
                t = rng.uniform(lo, hi)
                if member_at(t, u):
                    y = y + t * u
                    moved = True
                    break
                # shrink toward the current (member) point at t = 0
                if t > 0:
                    hi = t
                else:
                    lo = t
            else:
                pass
        if not moved:
            stalls += 1
        chain.append(model.unwhiten(y))
    if n_steps > 0 and stalls > 0.5 * n_steps:
        warnings.warn(
            f"hit-and-run stalled on {stalls}/{n_steps} steps; "
            "the admissible region may be degenerate", RuntimeWarning)
    return chain


def _boundary(member_at, u, sign: float, cap: float) -> float:
    """Distance to the membership boundary along sign * u from the current point."""
    t = sign * 1.0
    last_in = 0.0
    while abs(t) <= cap and member_at(t, u):
        last_in = t
        t *= 2.0
    if abs(t) > cap:
        return last_in if last_in != 0.0 else sign * cap
    t_out = t
    t_in = last_in
    for _ in range(40):
        mid = 0.5 * (t_in + t_out)
        if member_at(mid, u):
            t_in = mid
        else:
            t_out = mid
    return t_in


def build_pool(model: ReferenceModel, capital, constraints: ConstraintSet,
               solver_config: SolverConfig, membership: Membership,
               design_result, g_grid=None, n_target: int = DEFAULT_POOL_SIZE,
               seed: int = 0, monotonicity_fn=None) -> CandidatePool:
    """Anchors (multi-start optima and conditional g-grid anchors) densified
    by local sampling, with a hit-and-run fallback on thin regions."""
    anchors: list[PoolEntry] = []
    for opt in design_result.local_optima:
        if membership(opt.s):
            anchors.append(PoolEntry(s=opt.s, origin="anchor"))
    if g_grid is None:
        g_grid = default_g_grid(model, constraints)
    for g_j in g_grid:
        anchor = conditional_anchor(model, capital, constraints, float(g_j),
                                    config=solver_config,
                                    monotonicity_fn=monotonicity_fn)
        if anchor is None:
            continue
        if membership(anchor):
            anchors.append(PoolEntry(s=anchor, origin=f"grid_anchor({g_j:g})"))
    if not anchors:
        raise InfeasibleError("no feasible anchors for the candidate pool")

    entries = list(anchors)
    per_anchor = max(1, math.ceil((n_target - len(entries)) / len(anchors)))
    radius = _pool_radius(membership)
    seeds = np.random.SeedSequence(seed).spawn(2 * len(anchors))
    for i, anchor in enumerate(anchors):
        draw_budget = max(per_anchor * 2, 50)
        result = local_sample(model, anchor.s, (0.0, radius), draw_budget,
                              seed=_seed_int(seeds[2 * i]), membership=membership)
        if result.thin_region:
            chain = hit_and_run(model, anchor.s, per_anchor,
                                seed=_seed_int(seeds[2 * i + 1]),
                                membership=membership)
            entries.extend(PoolEntry(s=s, origin="hit_and_run") for s in chain)
        else:
            entries.extend(PoolEntry(s=s, origin="local_draw")
                           for s in result.accepted[:per_anchor])
    if len(entries) < n_target:
        warnings.warn(
            f"candidate pool has {len(entries)} members, short of the "
            f"target {n_target}", RuntimeWarning)
    return CandidatePool(target=membership.target, entries=entries)


def _pool_radius(membership: Membership) -> float:
    """Sampling radius adapted to the target set geometry (whitened units)."""
    if membership.target is TargetSet.NEIGHBOURHOOD:
        return math.sqrt(membership.spec.radius_eta)
    m2_star = membership.model.mahalanobis_sq(membership.s_star)
    return math.sqrt(m2_star + membership.spec.epsilon) - math.sqrt(m2_star) + 1e-6


def _seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


def default_g_grid(model: ReferenceModel, constraints: ConstraintSet,
                   n_points: int = 8) -> np.ndarray:
    """Equally spaced geopolitical intensities up to the marginal 99.9th pct."""
    return np.linspace(constraints.g_min, _g_cap(model, constraints), n_points)


@dataclass
class Driver:
    factor: str
    sign: int
    magnitude: float


@dataclass
class ScenarioEntry:
    s: np.ndarray
    ratio: float
    mahalanobis_sq: float
    tail_probability: float
    rarity: float
    g_value: float
    drivers: list[Driver] = field(default_factory=list)


@dataclass
class ScenarioList:
    target: TargetSet
    entries: list[ScenarioEntry]

    def __len__(self) -> int:
        return len(self.entries)


def driver_decomposition(model: ReferenceModel, s, k: int = DEFAULT_TOP_K) -> list[Driver]:
    """Top-k whitened coordinates by absolute value, with signs and labels."""
    if k > model.d:
        raise InvalidInputError(f"k={k} exceeds dimension {model.d}")
    y = model.whiten(s)
    order = sorted(range(model.d), key=lambda j: (-abs(y[j]), j))
    return [Driver(factor=model.factor_names[j],
                   sign=int(np.sign(y[j])) if y[j] != 0 else 0,
                   magnitude=abs(float(y[j])))
            for j in order[:k]]


def _farthest_point_indices(Y: np.ndarray, y_star: np.ndarray, count: int) -> list[int]:
    """Maximin selection over whitened pool Y, seeded at the design point.

    Ties broken by lexicographically smallest whitened coordinates;
    permutation-invariant up to that tie-break.
    """
    n = Y.shape[0]
    selected: list[int] = []
    min_dist = np.linalg.norm(Y - y_star, axis=1)
    for _ in range(count):
        if n == 0:
            break
        best = np.max(min_dist[_available_mask(n, selected)])
        candidates = [i for i in range(n)
                      if i not in selected and min_dist[i] >= best - 1e-12]
        pick = min(candidates, key=lambda i: tuple(Y[i]))
        selected.append(pick)
        min_dist = np.minimum(min_dist, np.linalg.norm(Y - Y[pick], axis=1))
    return selected


def _available_mask(n: int, selected: list[int]) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[selected] = False
    return mask


def reduce_farthest_point(model: ReferenceModel, pool: CandidatePool, s_star,
                          P: int, capital=None,
                          k: int = DEFAULT_TOP_K) -> ScenarioList:
    """Reduce the pool to P diverse representatives, the design point first."""
    s_star = as_scenario_array(s_star, model.d)
    if P < 1:
        raise InvalidInputError("list size P must be >= 1")
    if P > len(pool) + 1:
        raise InvalidInputError(
            f"list size P={P} exceeds pool size {len(pool)} + 1")
    picks = [s_star]
    if P > 1:
        if len(pool) == 0:
            raise InvalidInputError("empty pool cannot fill a list with P > 1")
        Y = model.whiten_many(pool.scenarios)
        idx = _farthest_point_indices(Y, model.whiten(s_star), P - 1)
        picks.extend(pool.scenarios[i] for i in idx)
    entries = []
    for s in picks:
        score = model.plausibility(s)
        entries.append(ScenarioEntry(
            s=s,
            ratio=capital.ratio(s) if capital is not None else math.nan,
            mahalanobis_sq=score.mahalanobis_sq,
            tail_probability=score.tail_probability,
            rarity=score.rarity,
            g_value=float(s[0]),
            drivers=driver_decomposition(model, s, k=min(k, model.d)),
        ))
    return ScenarioList(target=pool.target, entries=entries)
