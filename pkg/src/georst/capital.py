"""Capital mechanics: stressed CET1, risk-weighted assets, and the breach test.

``CreditCapitalModel`` bundles a portfolio and a capital state into the
capital-function abstraction the solver and samplers consume: anything with
``ratio(s)``, ``r0`` and ``r_star`` works, so synthetic maps are injectable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .loss import LossQuantileSpec, loss_quantile
from .special_functions import normal_cdf, normal_pdf, normal_quantile
from .transmission import Portfolio

RWA_FLOOR_FRACTION = 1e-6


class RwaMode(enum.Enum):
    IRB_FULL = "irb_full"
    LINEAR = "linear"
    CONSTANT = "constant"


class LossBasis(enum.Enum):
    ABSOLUTE = "absolute"
    INCREMENTAL = "incremental"


@dataclass
class CapitalState:
    """Baseline capital, RWA, threshold definition, and modelling switches."""

    cet1_0: float
    rwa_0: float
    depletion: float = 0.03
    r_star_override: float | None = None
    rwa_mode: RwaMode = RwaMode.IRB_FULL
    alpha: np.ndarray | None = None              # Linear mode, per exposure
    pnl_noncredit: np.ndarray | None = None      # linear loadings on s, length d
    loss_basis: LossBasis = LossBasis.INCREMENTAL
    maturity_adjustment: bool = True

    def __post_init__(self):
        if not (self.cet1_0 > 0 and self.rwa_0 > 0):
            raise InvalidInputError("cet1_0 and rwa_0 must be positive")
        if self.r_star_override is None and not (0.0 < self.depletion < 1.0):
            raise InvalidInputError("depletion must lie in (0, 1)")
        self.rwa_mode = RwaMode(self.rwa_mode)
        self.loss_basis = LossBasis(self.loss_basis)
        if self.alpha is not None:
            self.alpha = np.asarray(self.alpha, dtype=float)
        if (self.rwa_mode is RwaMode.LINEAR) != (self.alpha is not None):
            raise InvalidInputError("alpha must be present iff rwa_mode is linear")
        if self.pnl_noncredit is not None:
            self.pnl_noncredit = np.asarray(self.pnl_noncredit, dtype=float)
        if not (0.0 < self.r_star < self.r0):
            raise InvalidInputError("threshold must satisfy 0 < r_star < r0")

    @property
    def r0(self) -> float:
        return self.cet1_0 / self.rwa_0

    @property
    def r_star(self) -> float:
        if self.r_star_override is not None:
            return self.r_star_override
        return self.r0 * (1.0 - self.depletion)


def maturity_adjustment_factor(pd, maturity):
    """Basel IRB maturity multiplier (1 + (M - 2.5) b) / (1 - 1.5 b)."""
    pd = np.asarray(pd, dtype=float)
    b = (0.11852 - 0.05478 * np.log(pd)) ** 2
    out = (1.0 + (np.asarray(maturity, dtype=float) - 2.5) * b) / (1.0 - 1.5 * b)
    if out.ndim == 0:
        return float(out)
    return out


def risk_weight(pd, lgd, rho, maturity, spec: LossQuantileSpec,
                use_maturity_adjustment: bool = True):
    """Unexpected-loss risk weight per unit EAD.

    lgd * [Phi((Phi^-1(pd) + sqrt(rho) Phi^-1(q)) / sqrt(1 - rho)) - pd]
    times the maturity adjustment (or 1 when disabled).
    """
    pd = np.clip(np.asarray(pd, dtype=float), 1e-300, 1.0 - 1e-16)
    tail = normal_cdf((normal_quantile(pd)
                       + np.sqrt(np.asarray(rho, dtype=float)) * normal_quantile(spec.q))
                      / np.sqrt(1.0 - np.asarray(rho, dtype=float)))
    rw = np.asarray(lgd, dtype=float) * (tail - pd)
    if use_maturity_adjustment:
        rw = rw * maturity_adjustment_factor(pd, maturity)
    rw = np.maximum(rw, 0.0)
    if rw.ndim == 0:
        return float(rw)
    return rw


def risk_weight_pd_derivative(pd, lgd, rho, maturity, spec: LossQuantileSpec,
                              use_maturity_adjustment: bool = True):
    """Analytic d RW / d pd, used to calibrate the linear RWA mode."""
    pd = np.clip(np.asarray(pd, dtype=float), 1e-300, 1.0 - 1e-16)
    lgd = np.asarray(lgd, dtype=float)
    rho = np.asarray(rho, dtype=float)
    zq = normal_quantile(spec.q)
    zp = normal_quantile(pd)
    sq1 = np.sqrt(1.0 - rho)
    arg = (zp + np.sqrt(rho) * zq) / sq1
    bracket = normal_cdf(arg) - pd
    dbracket = normal_pdf(arg) / (sq1 * normal_pdf(zp)) - 1.0
    if not use_maturity_adjustment:
        out = lgd * dbracket
    else:
        sqb = 0.11852 - 0.05478 * np.log(pd)
        b = sqb ** 2
        m = np.asarray(maturity, dtype=float)
        gamma_m = (1.0 + (m - 2.5) * b) / (1.0 - 1.5 * b)
        dgamma_db = ((m - 2.5) * (1.0 - 1.5 * b)
                     + 1.5 * (1.0 + (m - 2.5) * b)) / (1.0 - 1.5 * b) ** 2
        db_dpd = 2.0 * sqb * (-0.05478 / pd)
        out = lgd * (dbracket * gamma_m + bracket * dgamma_db * db_dpd)
    if out.ndim == 0:
        return float(out)
    return out


def calibrate_linear_alpha(portfolio: Portfolio, spec: LossQuantileSpec,
                           use_maturity_adjustment: bool = True) -> np.ndarray:
    """alpha_i = EAD_i * dRW_i/dPD_i at baseline (first-order tangency)."""
    return portfolio.ead * risk_weight_pd_derivative(
        portfolio.pd0, portfolio.lgd0, portfolio.rho, portfolio.maturity,
        spec, use_maturity_adjustment)


def rwa_stressed(state: CapitalState, portfolio: Portfolio, s,
                 spec: LossQuantileSpec) -> float:
    """Total risk-weighted assets under scenario s, floored away from zero."""
    value, _ = rwa_stressed_flagged(state, portfolio, s, spec)
    return value


def rwa_stressed_flagged(state: CapitalState, portfolio: Portfolio, s,
                         spec: LossQuantileSpec) -> tuple[float, bool]:
    """RWA plus a flag marking activation of the floor clamp."""
    if state.rwa_mode is RwaMode.CONSTANT:
        raw = state.rwa_0
    elif state.rwa_mode is RwaMode.LINEAR:
        if state.alpha.shape != (portfolio.n,):
            raise InvalidInputError("alpha length must match the number of exposures")
        dpd = portfolio.stressed_pd(s) - portfolio.pd0
        raw = state.rwa_0 + float(state.alpha @ dpd)
    else:
        rw = risk_weight(portfolio.stressed_pd(s), portfolio.stressed_lgd(s),
                         portfolio.rho, portfolio.maturity, spec,
                         state.maturity_adjustment)
        raw = float(portfolio.ead @ rw)
    floor = RWA_FLOOR_FRACTION * state.rwa_0
    if raw < floor:
        return floor, True
    return raw, False


def cet1_stressed(state: CapitalState, portfolio: Portfolio, s,
                  spec: LossQuantileSpec,
                  baseline_loss: float | None = None) -> float:
    """Stressed CET1: capital minus the tail loss plus linear non-credit P&L.

    Under the incremental basis the baseline tail loss is netted out so the
    unstressed scenario reproduces CET1_0 exactly.
    """
    lq = loss_quantile(portfolio, s, spec)
    if state.loss_basis is LossBasis.INCREMENTAL:
        if baseline_loss is None:
            d = portfolio.d
            baseline_loss = loss_quantile(portfolio, np.zeros(d), spec)
        lq -= baseline_loss
    out = state.cet1_0 - lq
    if state.pnl_noncredit is not None:
        from .reference import as_scenario_array
        arr = as_scenario_array(s, portfolio.d)
        if state.pnl_noncredit.shape != (portfolio.d,):
            raise InvalidInputError("pnl_noncredit length must equal dimension d")
        out += float(state.pnl_noncredit @ arr)
    return out


def cet1_ratio(state: CapitalState, portfolio: Portfolio, s,
               spec: LossQuantileSpec,
               baseline_loss: float | None = None) -> float:
    """Stressed CET1 ratio R(s); breach means R(s) <= r_star (inclusive)."""
    num = cet1_stressed(state, portfolio, s, spec, baseline_loss=baseline_loss)
    den = rwa_stressed(state, portfolio, s, spec)
    return num / den


class CreditCapitalModel:
    """Capital-function view of a portfolio: s -> R(s) and the breach test."""

    def __init__(self, portfolio: Portfolio, state: CapitalState,
                 spec: LossQuantileSpec | None = None):
        self.portfolio = portfolio
        self.state = state
        self.spec = spec if spec is not None else LossQuantileSpec()
        self._baseline_loss = loss_quantile(portfolio, np.zeros(portfolio.d),
                                            self.spec)
        self.rwa_floor_hits = 0

    @property
    def d(self) -> int:
        return self.portfolio.d

    @property
    def r0(self) -> float:
        return self.state.r0

    @property
    def r_star(self) -> float:
        return self.state.r_star

    def loss_quantile(self, s) -> float:
        return loss_quantile(self.portfolio, s, self.spec)

    def cet1(self, s) -> float:
        return cet1_stressed(self.state, self.portfolio, s, self.spec,
                             baseline_loss=self._baseline_loss)

    def rwa(self, s) -> float:
        value, clamped = rwa_stressed_flagged(self.state, self.portfolio, s,
                                              self.spec)
        if clamped:
            self.rwa_floor_hits += 1
        return value

    def ratio(self, s) -> float:
        return self.cet1(s) / self.rwa(s)

    def ratio_many(self, S: np.ndarray) -> np.ndarray:
        S = np.asarray(S, dtype=float)
        return np.array([self.ratio(row) for row in S])

    def breach(self, s) -> bool:
        return self.ratio(s) <= self.r_star

    def scenario_metrics(self, s) -> dict:
        """Severity numbers for reporting a single scenario."""
        lq = self.loss_quantile(s)
        ratio = self.ratio(s)
        return {
            "loss_quantile": lq,
            "cet1": self.cet1(s),
            "rwa": self.rwa(s),
            "ratio": ratio,
            "breach": ratio <= self.r_star,
        }


class LinearCapital:
    """Synthetic affine capital map, mainly for tests and validation.

    R(s) = r0 - slope w . s, so the breach set {R <= r_star} is the
    half-space {w . s >= level} with level = (r0 - r_star) / slope.
    """

    def __init__(self, weights, r0: float = 0.10, depletion: float = 0.03,
                 level: float = 1.0):
        self.weights = np.asarray(weights, dtype=float)
        self.r0 = r0
        self.r_star = r0 * (1.0 - depletion)
        self.slope = (self.r0 - self.r_star) / level

    @property
    def d(self) -> int:
        return self.weights.size

    def ratio(self, s) -> float:
        return self.r0 - self.slope * float(self.weights @ np.asarray(s, dtype=float))

    def ratio_many(self, S: np.ndarray) -> np.ndarray:
        S = np.asarray(S, dtype=float)
        return self.r0 - self.slope * (S @ self.weights)

    def breach(self, s) -> bool:
        return self.ratio(s) <= self.r_star
