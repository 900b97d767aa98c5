"""Run configuration, orchestration, and structured report output."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .capital import (CapitalState, CreditCapitalModel, LossBasis, RwaMode,
                      calibrate_linear_alpha)
from .dataio import (load_alpha, load_covariance, load_history,
                     load_portfolio, load_sector_portfolio, load_sensitivities)
from .errors import InvalidInputError
from .loss import LossQuantileSpec, mc_loss_quantile, loss_quantile
from .reference import Family, ReferenceModel, estimate_covariance
from .scenario_sets import (Membership, NearOptimalSpec, NeighbourhoodSpec,
                            TargetSet, build_pool, reduce_farthest_point)
from .sectors import aggregate_sectors
from .solver import ConstraintSet, SolverConfig, solve_design_point
from .transmission import smooth_monotonicity_violation

DEFAULTS = {
    "q": 0.999,
    "depletion": 0.03,
    "g_min": 1e-6,
    "pool_size": 2000,
    "list_size": 8,
    "top_k": 3,
    "n_starts": 32,
    "n_sims": 200000,
}


@dataclass
class RunConfig:
    """Resolved run configuration (raw dict retained for hashing)."""

    raw: dict
    path: Path | None = None

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise InvalidInputError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from exc
        return cls(raw=raw, path=path)

    def section(self, name: str) -> dict:
        sec = self.raw.get(name, {})
        if not isinstance(sec, dict):
            raise InvalidInputError(f"config section {name!r} must be an object")
        return sec

    def hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def _resolve(self, p) -> Path:
        p = Path(p)
        if not p.is_absolute() and self.path is not None:
            return self.path.parent / p
        return p


@dataclass
class RunContext:
    """Everything a command needs, assembled from a RunConfig."""

    config: RunConfig
    model: ReferenceModel
    portfolio: object
    capital: CreditCapitalModel
    constraints: ConstraintSet
    solver_config: SolverConfig
    loss_spec: LossQuantileSpec
    scenario_cfg: dict
    seed: int
    portfolio_kind: str
    monotonicity_fn: object | None = None


def build_context(config: RunConfig) -> RunContext:
    seed = int(config.raw.get("seed", 0))

    ref = config.section("reference")
    family = Family(ref.get("family", "gaussian"))
    nu = ref.get("nu")
    if "covariance" in ref:
        sigma, names = load_covariance(config._resolve(ref["covariance"]))
        model = ReferenceModel.from_covariance(sigma, family=family, nu=nu,
                                               factor_names=names)
    elif "history" in ref:
        X, names = load_history(config._resolve(ref["history"]))
        model = estimate_covariance(X, family=family, nu=nu, factor_names=names)
    else:
        raise InvalidInputError(
            "reference section needs a 'covariance' or 'history' path")

    pf = config.section("portfolio")
    if "path" not in pf or "sensitivities" not in pf:
        raise InvalidInputError("portfolio section needs 'path' and 'sensitivities'")
    sens = load_sensitivities(config._resolve(pf["sensitivities"]),
                              model.factor_names)
    sign_constraints = bool(pf.get("sign_constraints", True))
    kind = pf.get("kind", "exposure")
    if kind == "exposure":
        portfolio = load_portfolio(config._resolve(pf["path"]), sens,
                                   sign_constraints=sign_constraints)
        engine_portfolio = portfolio
    elif kind == "sector":
        portfolio = load_sector_portfolio(config._resolve(pf["path"]), sens,
                                          sign_constraints=sign_constraints)
        engine_portfolio = portfolio.to_portfolio()
    else:
        raise InvalidInputError(f"unknown portfolio kind {kind!r}")
    if engine_portfolio.d != model.d:
        raise InvalidInputError(
            f"portfolio dimension {engine_portfolio.d} != reference dimension {model.d}")

    loss_cfg = config.section("loss")
    loss_spec = LossQuantileSpec(q=float(loss_cfg.get("q", DEFAULTS["q"])))

    cap = config.section("capital")
    for key in ("cet1_0", "rwa_0"):
        if key not in cap:
            raise InvalidInputError(f"capital section needs {key!r}")
    rwa_mode = RwaMode(cap.get("rwa_mode", "irb_full"))
    alpha = None
    if rwa_mode is RwaMode.LINEAR:
        if "alpha_path" in cap and cap["alpha_path"]:
            alpha = load_alpha(config._resolve(cap["alpha_path"]), engine_portfolio)
        else:
            alpha = calibrate_linear_alpha(
                engine_portfolio, loss_spec,
                bool(cap.get("maturity_adjustment", True)))
    pnl = cap.get("pnl_noncredit")
    state = CapitalState(
        cet1_0=float(cap["cet1_0"]),
        rwa_0=float(cap["rwa_0"]),
        depletion=float(cap.get("depletion", DEFAULTS["depletion"])),
        r_star_override=cap.get("r_star"),
        rwa_mode=rwa_mode,
        alpha=alpha,
        pnl_noncredit=None if pnl is None else np.asarray(pnl, dtype=float),
        loss_basis=LossBasis(cap.get("loss_basis", "incremental")),
        maturity_adjustment=bool(cap.get("maturity_adjustment", True)),
    )
    capital = CreditCapitalModel(engine_portfolio, state, loss_spec)

    con = config.section("constraints")
    constraints = ConstraintSet(
        g_min=float(con.get("g_min", DEFAULTS["g_min"])),
        g_max=con.get("g_max"),
        x_min=con.get("x_min"),
        x_max=con.get("x_max"),
        enforce_monotonicity=bool(con.get("enforce_monotonicity", False)),
    )
    mono_fn = None
    if constraints.enforce_monotonicity:
        mono_fn = lambda s: smooth_monotonicity_violation(engine_portfolio, s)

    sol = config.section("solver")
    solver_config = SolverConfig(
        n_starts=int(sol.get("n_starts", DEFAULTS["n_starts"])),
        seed=int(sol.get("seed", seed)),
    )

    return RunContext(
        config=config, model=model, portfolio=engine_portfolio,
        capital=capital, constraints=constraints, solver_config=solver_config,
        loss_spec=loss_spec, scenario_cfg=config.section("scenario_set"),
        seed=seed, portfolio_kind=kind, monotonicity_fn=mono_fn,
    )


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class ReportWriter:
    """Deterministic key-value report; identical inputs give identical bytes."""

    def __init__(self, title: str, ctx: RunContext):
        self.lines = [f"# georst {title}"]
        self.kv("engine_version", __version__)
        self.kv("config_hash", ctx.config.hash())
        self.kv("seed", ctx.seed)

    def section(self, name: str):
        self.lines.append(f"[{name}]")

    def kv(self, key: str, value):
        self.lines.append(f"{key} = {_fmt(value)}")

    def row(self, *cells):
        self.lines.append("  ".join(_fmt(c) for c in cells))

    def render(self) -> str:
        return "\n".join(self.lines) + "\n"


def _emit_defaults(w: ReportWriter, ctx: RunContext):
    w.section("defaults")
    w.kv("q", ctx.loss_spec.q)
    w.kv("depletion", ctx.capital.state.depletion)
    w.kv("g_min", ctx.constraints.g_min)
    w.kv("n_starts", ctx.solver_config.n_starts)
    w.kv("pool_size", int(ctx.scenario_cfg.get("pool", DEFAULTS["pool_size"])))
    w.kv("list_size", int(ctx.scenario_cfg.get("list", DEFAULTS["list_size"])))
    w.kv("top_k", int(ctx.scenario_cfg.get("top_k", DEFAULTS["top_k"])))
    w.kv("rwa_mode", ctx.capital.state.rwa_mode.value)
    w.kv("loss_basis", ctx.capital.state.loss_basis.value)
    w.kv("maturity_adjustment", ctx.capital.state.maturity_adjustment)
    w.kv("family", ctx.model.family.value)
    if ctx.model.nu is not None:
        w.kv("nu", ctx.model.nu)
    w.kv("r0", ctx.capital.r0)
    w.kv("r_star", ctx.capital.r_star)


def _emit_design_point(w: ReportWriter, ctx: RunContext, result):
    w.section("design_point")
    for name, value in zip(ctx.model.factor_names, result.s_star):
        w.kv(f"s_star.{name}", value)
    w.kv("mahalanobis_sq", result.mahalanobis_sq)
    w.kv("tail_probability", result.tail_probability)
    w.kv("ratio", result.ratio_at_optimum)
    w.kv("constraint_active", result.active)
    w.section("local_optima")
    w.row("index", "mahalanobis_sq", "ratio", *ctx.model.factor_names)
    for i, opt in enumerate(result.local_optima):
        w.row(i, opt.mahalanobis_sq, opt.ratio, *opt.s)


def _emit_sector_table(w: ReportWriter, ctx: RunContext, s_star):
    w.section("sector_table")
    aggregates_0 = aggregate_sectors(ctx.portfolio, np.zeros(ctx.model.d))
    aggregates = aggregate_sectors(ctx.portfolio, s_star)
    w.row("sector_id", "ead", "pd0", "pd_star", "lgd0", "lgd_star")
    for base, agg in zip(aggregates_0, aggregates):
        w.row(agg.sector_id, agg.weight_total, base.pd_star, agg.pd_star,
              base.lgd_star, agg.lgd_star)


def run_design_point(ctx: RunContext) -> tuple[str, object]:
    result = solve_design_point(ctx.model, ctx.capital, ctx.constraints,
                                ctx.solver_config,
                                monotonicity_fn=ctx.monotonicity_fn)
    w = ReportWriter("design-point report", ctx)
    _emit_defaults(w, ctx)
    _emit_design_point(w, ctx, result)
    _emit_sector_table(w, ctx, result.s_star)
    return w.render(), result


def _membership_from_cfg(ctx: RunContext, s_star, target: str | None = None):
    cfg = ctx.scenario_cfg
    target = TargetSet(target or cfg.get("target", "near-optimal"))
    if target is TargetSet.NEIGHBOURHOOD:
        spec = NeighbourhoodSpec(radius_eta=float(cfg.get("eta", 1.0)))
    else:
        spec = NearOptimalSpec(epsilon=float(cfg.get("epsilon", 1.0)))
    return Membership(target, ctx.model, ctx.capital, s_star, spec)


def run_scenario_list(ctx: RunContext, target: str | None = None) -> tuple[str, object]:
    result = solve_design_point(ctx.model, ctx.capital, ctx.constraints,
                                ctx.solver_config,
                                monotonicity_fn=ctx.monotonicity_fn)
    cfg = ctx.scenario_cfg
    membership = _membership_from_cfg(ctx, result.s_star, target)
    g_grid = cfg.get("g_grid")
    pool = build_pool(ctx.model, ctx.capital, ctx.constraints,
                      ctx.solver_config, membership, result,
                      g_grid=g_grid,
                      n_target=int(cfg.get("pool", DEFAULTS["pool_size"])),
                      seed=ctx.seed, monotonicity_fn=ctx.monotonicity_fn)
    listing = reduce_farthest_point(
        ctx.model, pool, result.s_star,
        P=int(cfg.get("list", DEFAULTS["list_size"])),
        capital=ctx.capital,
        k=int(cfg.get("top_k", DEFAULTS["top_k"])))

    w = ReportWriter("scenario-list report", ctx)
    _emit_defaults(w, ctx)
    w.kv("target", membership.target.value)
    if membership.target is TargetSet.NEIGHBOURHOOD:
        w.kv("eta", membership.spec.radius_eta)
    else:
        w.kv("epsilon", membership.spec.epsilon)
    w.kv("pool_members", len(pool))
    _emit_design_point(w, ctx, result)
    w.section("scenario_list")
    w.row("index", "ratio", "mahalanobis_sq", "tail_probability", "rarity",
          "g", "drivers")
    for i, entry in enumerate(listing.entries):
        drivers = ";".join(
            f"{d.factor}{'+' if d.sign >= 0 else '-'}{d.magnitude:.6g}"
            for d in entry.drivers)
        w.row(i, entry.ratio, entry.mahalanobis_sq, entry.tail_probability,
              entry.rarity, entry.g_value, drivers)
    w.section("scenario_coordinates")
    w.row("index", *ctx.model.factor_names)
    for i, entry in enumerate(listing.entries):
        w.row(i, *entry.s)
    _emit_sector_table(w, ctx, result.s_star)
    return w.render(), (result, pool, listing)


def emit_contours(ctx: RunContext, resolution: int,
                  g_bounds: tuple[float, float] | None = None,
                  x_bounds: tuple[float, float] | None = None) -> str:
    """Grid of (g, x, m2, ratio, breach, in_S_eta, in_N_eps) for plotting."""
    if ctx.model.d != 2:
        raise InvalidInputError("contour output requires d = 2")
    if resolution < 2:
        raise InvalidInputError("resolution must be >= 2")
    if g_bounds is None:
        hi = ctx.constraints.g_max
        if hi is None:
            hi = 4.0 * ctx.model.marginal_std(0)
        g_bounds = (0.0, hi)
    if x_bounds is None:
        lim = 4.0 * ctx.model.marginal_std(1)
        x_bounds = (-lim, lim)
    result = solve_design_point(ctx.model, ctx.capital, ctx.constraints,
                                ctx.solver_config,
                                monotonicity_fn=ctx.monotonicity_fn)
    cfg = ctx.scenario_cfg
    m_eta = Membership(TargetSet.NEIGHBOURHOOD, ctx.model, ctx.capital,
                       result.s_star,
                       NeighbourhoodSpec(radius_eta=float(cfg.get("eta", 1.0))))
    m_eps = Membership(TargetSet.NEAR_OPTIMAL, ctx.model, ctx.capital,
                       result.s_star,
                       NearOptimalSpec(epsilon=float(cfg.get("epsilon", 1.0))))
    lines = ["g,x,m2,ratio,breach,in_S_eta,in_N_eps"]
    g_axis = np.linspace(g_bounds[0], g_bounds[1], resolution)
    x_axis = np.linspace(x_bounds[0], x_bounds[1], resolution)
    for g in g_axis:
        for x in x_axis:
            s = np.array([g, x])
            m2 = ctx.model.mahalanobis_sq(s)
            ratio = ctx.capital.ratio(s)
            breach = ratio <= ctx.capital.r_star
            lines.append(",".join([
                repr(float(g)), repr(float(x)), repr(m2), repr(ratio),
                "1" if breach else "0",
                "1" if m_eta(s) else "0",
                "1" if m_eps(s) else "0",
            ]))
    return "\n".join(lines) + "\n"


def run_validate(ctx: RunContext) -> str:
    """Dry-run consistency summary after a successful ingestion."""
    w = ReportWriter("validate report", ctx)
    _emit_defaults(w, ctx)
    w.section("inputs")
    w.kv("dimension", ctx.model.d)
    w.kv("factors", ",".join(ctx.model.factor_names))
    w.kv("portfolio_kind", ctx.portfolio_kind)
    w.kv("n_exposures", ctx.portfolio.n)
    w.kv("n_sectors", len(ctx.portfolio.sectors))
    w.kv("total_ead", ctx.portfolio.total_ead)
    w.kv("baseline_loss_quantile",
         loss_quantile(ctx.portfolio, np.zeros(ctx.model.d), ctx.loss_spec))
    w.kv("baseline_ratio", ctx.capital.ratio(np.zeros(ctx.model.d)))
    w.kv("baseline_breach", ctx.capital.breach(np.zeros(ctx.model.d)))
    return w.render()


def run_mc_check(ctx: RunContext, scenario=None, n_sims: int | None = None) -> str:
    """Analytic tail-loss quantile against the Monte Carlo oracle."""
    s = (np.zeros(ctx.model.d) if scenario is None
         else np.asarray(scenario, dtype=float))
    n_sims = int(n_sims or ctx.config.section("loss").get("n_sims",
                                                          DEFAULTS["n_sims"]))
    analytic = loss_quantile(ctx.portfolio, s, ctx.loss_spec)
    mc = mc_loss_quantile(ctx.portfolio, s, ctx.loss_spec, n_sims=n_sims,
                          seed=ctx.seed)
    w = ReportWriter("mc-check report", ctx)
    _emit_defaults(w, ctx)
    w.section("comparison")
    for name, value in zip(ctx.model.factor_names, s):
        w.kv(f"scenario.{name}", float(value))
    w.kv("n_sims", mc.n_sims)
    w.kv("analytic_quantile", analytic)
    w.kv("mc_quantile", mc.quantile)
    w.kv("mc_std_error", mc.std_error)
    z = abs(analytic - mc.quantile) / mc.std_error if mc.std_error > 0 else 0.0
    w.kv("abs_z_score", z)
    w.kv("within_3_se", z <= 3.0)
    return w.render()
