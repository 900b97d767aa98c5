import numpy as np
import pytest
from scipy import stats

from georst import (CapitalState, InvalidInputError, LinearCapital, LossBasis,
                    LossQuantileSpec, RwaMode, calibrate_linear_alpha,
                    risk_weight)
from georst.capital import (cet1_ratio, cet1_stressed,
                            maturity_adjustment_factor,
                            risk_weight_pd_derivative, rwa_stressed,
                            rwa_stressed_flagged)

from conftest import make_credit_capital, make_portfolio

SPEC = LossQuantileSpec(q=0.999)


def scipy_risk_weight(pd, lgd, rho, q):
    cond = stats.norm.cdf(
        (stats.norm.ppf(pd) + np.sqrt(rho) * stats.norm.ppf(q))
        / np.sqrt(1.0 - rho))
    return lgd * (cond - pd)


def test_risk_weight_worked_value():
    got = risk_weight(0.02, 0.5, 0.2, 2.5, SPEC, use_maturity_adjustment=False)
    assert got == pytest.approx(scipy_risk_weight(0.02, 0.5, 0.2, 0.999),
                                abs=1e-10)
    assert got == pytest.approx(0.10316, abs=5e-5)


def test_maturity_adjustment_neutral_at_reference_maturity():
    # gamma(2.5) = 1 / (1 - 1.5 b) > 1, and M = 2.5 cancels the numerator term
    b = (0.11852 - 0.05478 * np.log(0.02)) ** 2
    assert maturity_adjustment_factor(0.02, 2.5) == pytest.approx(
        1.0 / (1.0 - 1.5 * b), abs=1e-12)
    # longer maturity raises the multiplier
    assert maturity_adjustment_factor(0.02, 5.0) > maturity_adjustment_factor(
        0.02, 1.0)


def test_risk_weight_maturity_switch():
    with_adj = risk_weight(0.02, 0.5, 0.2, 4.0, SPEC)
    without = risk_weight(0.02, 0.5, 0.2, 4.0, SPEC,
                          use_maturity_adjustment=False)
    assert with_adj > without


def test_risk_weight_pd_derivative_matches_fd():
    for use_adj in (True, False):
        h = 1e-7
        fd = (risk_weight(0.02 + h, 0.5, 0.2, 3.0, SPEC, use_adj)
              - risk_weight(0.02 - h, 0.5, 0.2, 3.0, SPEC, use_adj)) / (2 * h)
        got = risk_weight_pd_derivative(0.02, 0.5, 0.2, 3.0, SPEC, use_adj)
        assert got == pytest.approx(fd, rel=1e-6)


def test_capital_state_thresholds():
    state = CapitalState(cet1_0=8.0, rwa_0=100.0)
    assert state.r0 == pytest.approx(0.08)
    assert state.r_star == pytest.approx(0.08 * 0.97, abs=1e-15)
    # explicit override replaces the depletion rule
    state2 = CapitalState(cet1_0=8.0, rwa_0=100.0, r_star_override=0.06)
    assert state2.r_star == 0.06


def test_capital_state_validation():
    with pytest.raises(InvalidInputError):
        CapitalState(cet1_0=0.0, rwa_0=1.0)
    with pytest.raises(InvalidInputError):
        CapitalState(cet1_0=1.0, rwa_0=1.0, depletion=1.5)
    with pytest.raises(InvalidInputError):
        CapitalState(cet1_0=1.0, rwa_0=10.0, rwa_mode=RwaMode.LINEAR)
    with pytest.raises(InvalidInputError):
        CapitalState(cet1_0=1.0, rwa_0=10.0, alpha=np.array([1.0]))


def test_constant_mode_rwa_and_baseline_ratio():
    pf = make_portfolio(n=4)
    state = CapitalState(cet1_0=6.0, rwa_0=50.0, rwa_mode=RwaMode.CONSTANT)
    for s in (np.zeros(2), np.array([1.0, 0.5])):
        assert rwa_stressed(state, pf, s, SPEC) == 50.0
    # incremental basis with constant RWA reproduces r0 at s = 0
    assert cet1_ratio(state, pf, np.zeros(2), SPEC) == pytest.approx(
        state.r0, abs=1e-15)


def test_linear_mode_matches_hand_arithmetic():
    pf = make_portfolio(n=1, pd0=0.02, delta=0.5, beta=(0.0,))
    # one exposure, alpha = 1000: PD rise of dp adds 1000 * dp to RWA
    state = CapitalState(cet1_0=6.0, rwa_0=50.0, rwa_mode=RwaMode.LINEAR,
                         alpha=np.array([1000.0]))
    assert rwa_stressed(state, pf, np.zeros(2), SPEC) == pytest.approx(50.0)
    s = np.array([1.0, 0.0])
    dp = pf.stressed_pd(s)[0] - 0.02
    assert rwa_stressed(state, pf, s, SPEC) == pytest.approx(50.0 + 1000.0 * dp)


def test_linear_alpha_first_order_tangency():
    # halving the scenario should shrink the Linear-vs-IRB_full RWA gap
    # faster than linearly (the difference is o(||dPD||))
    # LGD loadings are zeroed: the linear mode models only the PD channel
    pf = make_portfolio(n=6, delta=0.6, beta=(0.4,), eta=0.0, gamma=(0.0,))
    alpha = calibrate_linear_alpha(pf, SPEC)
    base_irb = float(pf.ead @ risk_weight(pf.pd0, pf.lgd0, pf.rho,
                                          pf.maturity, SPEC))
    irb = CapitalState(cet1_0=6.0, rwa_0=base_irb, rwa_mode=RwaMode.IRB_FULL)
    # freeze LGD loadings so only the PD channel moves the IRB RWA
    gaps = []
    for scale in (1.0, 0.5, 0.25, 0.125):
        s = scale * np.array([0.4, 0.3])
        full = rwa_stressed(irb, pf, s, SPEC)
        lin = base_irb + float(alpha @ (pf.stressed_pd(s) - pf.pd0))
        dpd = np.linalg.norm(pf.stressed_pd(s) - pf.pd0)
        gaps.append(abs(full - lin) / dpd)
    # gap per unit PD move vanishes as the step shrinks
    assert gaps[-1] < 0.5 * gaps[0]
    assert all(np.diff(gaps) < 0)


def test_rwa_floor_clamps_and_flags():
    pf = make_portfolio(n=1, delta=0.5, beta=(2.0,))
    state = CapitalState(cet1_0=6.0, rwa_0=50.0)
    # a huge favourable x with sign_constraints off drives PD ~ 0 and IRB
    # RWA toward 0; the clamp kicks in
    pf_free = make_portfolio(n=1, delta=0.0, beta=(5.0,))
    s = np.array([0.0, -200.0])
    value, flagged = rwa_stressed_flagged(state, pf_free, s, SPEC)
    assert flagged
    assert value == pytest.approx(1e-6 * 50.0)


def test_incremental_vs_absolute_basis():
    pf = make_portfolio(n=4)
    inc = CapitalState(cet1_0=6.0, rwa_0=50.0, rwa_mode=RwaMode.CONSTANT)
    absolute = CapitalState(cet1_0=6.0, rwa_0=50.0, rwa_mode=RwaMode.CONSTANT,
                            loss_basis=LossBasis.ABSOLUTE)
    base_loss = 0.0
    s0 = np.zeros(2)
    assert cet1_stressed(inc, pf, s0, SPEC) == pytest.approx(6.0, abs=1e-12)
    from georst import loss_quantile
    lq0 = loss_quantile(pf, s0, SPEC)
    assert cet1_stressed(absolute, pf, s0, SPEC) == pytest.approx(6.0 - lq0)


def test_noncredit_pnl_shifts_cet1_linearly():
    pf = make_portfolio(n=2)
    state = CapitalState(cet1_0=6.0, rwa_0=50.0, rwa_mode=RwaMode.CONSTANT,
                         pnl_noncredit=np.array([-0.5, 0.2]))
    s = np.array([1.0, 1.0])
    base = CapitalState(cet1_0=6.0, rwa_0=50.0, rwa_mode=RwaMode.CONSTANT)
    assert cet1_stressed(state, pf, s, SPEC) == pytest.approx(
        cet1_stressed(base, pf, s, SPEC) - 0.5 + 0.2)


def test_credit_capital_model_interface():
    pf = make_portfolio(n=3)
    cap = make_credit_capital(pf, rwa_mode=RwaMode.CONSTANT)
    s0 = np.zeros(2)
    assert cap.ratio(s0) == pytest.approx(cap.r0, abs=1e-14)
    assert not cap.breach(s0)
    metrics = cap.scenario_metrics(np.array([1.0, 0.5]))
    assert set(metrics) == {"loss_quantile", "cet1", "rwa", "ratio", "breach"}
    S = np.vstack([s0, [1.0, 0.5]])
    many = cap.ratio_many(S)
    assert many[0] == pytest.approx(cap.ratio(s0))
    assert many[1] == pytest.approx(cap.ratio(S[1]))


def test_ratio_non_increasing_in_g_on_random_portfolios():
    rng = np.random.default_rng(9)
    for trial in range(5):
        pf = make_portfolio(
            n=4, pd0=float(rng.uniform(0.005, 0.05)),
            lgd0=float(rng.uniform(0.3, 0.6)),
            delta=float(rng.uniform(0.1, 1.0)),
            eta=float(rng.uniform(0.0, 0.2)),
            beta=(float(rng.uniform(0.0, 0.8)),),
            gamma=(float(rng.uniform(0.0, 0.1)),))
        cap = make_credit_capital(pf, rwa_mode=RwaMode.CONSTANT)
        x = float(rng.uniform(0.0, 1.0))
        ratios = [cap.ratio(np.array([g, x * g])) for g in np.linspace(0, 3, 7)]
        assert all(np.diff(ratios) <= 1e-12)


def test_linear_capital_breach_half_space():
    cap = LinearCapital(weights=np.array([1.0, 1.0]), level=4.0)
    assert not cap.breach(np.array([1.0, 1.0]))
    assert cap.breach(np.array([2.0, 2.0]))
    assert cap.breach(np.array([0.0, 5.0]))
    assert cap.ratio(np.zeros(2)) == pytest.approx(cap.r0)
