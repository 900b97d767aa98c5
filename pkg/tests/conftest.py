import numpy as np
import pytest

from georst import (CapitalState, CreditCapitalModel, ExposureRecord,
                    LossQuantileSpec, Portfolio, ReferenceModel,
                    SectorSensitivities)


@pytest.fixture
def identity_model():
    return ReferenceModel.from_covariance(np.eye(2))


@pytest.fixture
def correlated_model():
    return ReferenceModel.from_covariance(np.array([[1.0, 0.5], [0.5, 1.0]]))


def make_sensitivities(delta=0.5, eta=0.1, beta=(0.3,), gamma=(0.05,),
                       sector_id="corp"):
    return SectorSensitivities(sector_id, delta=delta, eta=eta,
                               beta=np.array(beta, dtype=float),
                               gamma=np.array(gamma, dtype=float))


def make_portfolio(n=5, ead=1.0, pd0=0.02, lgd0=0.45, rho=0.2, **sens_kwargs):
    sens = make_sensitivities(**sens_kwargs)
    exposures = tuple(
        ExposureRecord(f"e{i}", sens.sector_id, ead=ead, pd0=pd0, lgd0=lgd0,
                       rho=rho)
        for i in range(n))
    return Portfolio(exposures, {sens.sector_id: sens})


@pytest.fixture
def small_portfolio():
    return make_portfolio(n=5)


def make_credit_capital(portfolio, cet1_0=6.0, rwa_0=50.0, **state_kwargs):
    state = CapitalState(cet1_0=cet1_0, rwa_0=rwa_0, **state_kwargs)
    return CreditCapitalModel(portfolio, state, LossQuantileSpec())
