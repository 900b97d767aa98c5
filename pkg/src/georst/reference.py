"""Scenario space, reference distribution, and Mahalanobis plausibility.

The scenario vector is s = (g, x): the geopolitical shock first, then the
macro-financial shocks. The reference model is a zero-mean Gaussian or
Student-t with covariance (scatter) matrix sigma; plausibility of a
scenario is the tail probability of its squared Mahalanobis distance
(chi-squared under the Gaussian, scaled Fisher under the Student-t).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InvalidInputError
from .special_functions import chi2_cdf, f_cdf

DEFAULT_RIDGE_SCALE = 1e-8


class Family(enum.Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T = "student_t"


@dataclass(frozen=True)
class ScenarioVector:
    """A point s = (g, x) in the d-dimensional scenario space."""

    g: float
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        if self.x.ndim != 1 or self.x.size < 1:
            raise InvalidInputError("x must be a vector of length d-1 >= 1")
        if not (math.isfinite(self.g) and np.all(np.isfinite(self.x))):
            raise InvalidInputError("scenario coordinates must be finite")

    @property
    def d(self) -> int:
        return 1 + self.x.size

    def to_array(self) -> np.ndarray:
        return np.concatenate(([self.g], self.x))

    @classmethod
    def from_array(cls, arr) -> "ScenarioVector":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise InvalidInputError("scenario array must be 1-D with d >= 2")
        return cls(g=float(arr[0]), x=arr[1:])


def as_scenario_array(s, d: int | None = None) -> np.ndarray:
    """Coerce a ScenarioVector or array-like to a validated (d,) array."""
    if isinstance(s, ScenarioVector):
        arr = s.to_array()
    else:
        arr = np.asarray(s, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"scenario must be 1-D, got shape {arr.shape}")
    if d is not None and arr.size != d:
        raise InvalidInputError(f"scenario dimension {arr.size} != model dimension {d}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("scenario coordinates must be finite")
    return arr


@dataclass(frozen=True)
class PlausibilityScore:
    """Mahalanobis severity and its probabilistic calibration."""

    mahalanobis_sq: float
    tail_probability: float
    rarity: float  # -log10 of the tail probability


def default_factor_names(d: int) -> tuple[str, ...]:
    return ("g",) + tuple(f"x{j}" for j in range(1, d))


@dataclass(frozen=True)
class ReferenceModel:
    """Covariance, Cholesky factor, and distribution family for shocks."""

    sigma: np.ndarray
    chol: np.ndarray
    family: Family = Family.GAUSSIAN
    nu: float | None = None
    factor_names: tuple[str, ...] = field(default=())

    @classmethod
    def from_covariance(cls, sigma, family: Family = Family.GAUSSIAN,
                        nu: float | None = None,
                        factor_names=None) -> "ReferenceModel":
        sigma = np.asarray(sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise InvalidInputError(f"sigma must be square, got shape {sigma.shape}")
        d = sigma.shape[0]
        if d < 2:
            raise InvalidInputError("scenario dimension must be at least 2")
        scale = np.max(np.abs(sigma))
        if scale == 0.0 or not np.all(np.isfinite(sigma)):
            raise InvalidInputError("sigma must be finite and nonzero")
        if np.max(np.abs(sigma - sigma.T)) > 1e-12 * scale:
            raise InvalidInputError("sigma is not symmetric within tolerance")
        sigma = 0.5 * (sigma + sigma.T)
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise InvalidInputError("sigma is not positive definite") from exc
        if np.any(np.diag(chol) <= 0.0):
            raise InvalidInputError("sigma has non-positive Cholesky pivots")
        family = Family(family)
        if family is Family.STUDENT_T:
            if nu is None or not nu > 0:
                raise InvalidInputError("Student-t reference requires nu > 0")
            nu = float(nu)
        else:
            nu = None
        if factor_names is None:
            factor_names = default_factor_names(d)
        factor_names = tuple(str(n) for n in factor_names)
        if len(factor_names) != d:
            raise InvalidInputError("factor_names length must equal dimension")
        return cls(sigma=sigma, chol=chol, family=family, nu=nu,
                   factor_names=factor_names)

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    def whiten(self, s) -> np.ndarray:
        """y = L^{-1} s: level sets of the plausibility penalty become spheres."""
        arr = as_scenario_array(s, self.d)
        return solve_triangular(self.chol, arr, lower=True)

    def whiten_many(self, S: np.ndarray) -> np.ndarray:
        """Whiten an (N, d) batch of scenarios."""
        S = np.asarray(S, dtype=float)
        return solve_triangular(self.chol, S.T, lower=True).T

    def unwhiten(self, y) -> np.ndarray:
        """s = L y, the inverse of :meth:`whiten`."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.d,):
            raise InvalidInputError(f"whitened vector must have shape ({self.d},)")
        return self.chol @ y

    def unwhiten_many(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        return Y @ self.chol.T

    def mahalanobis_sq(self, s) -> float:
        """Squared Mahalanobis distance s' sigma^{-1} s via the Cholesky factor."""
        y = self.whiten(s)
        return float(y @ y)

    def mahalanobis_sq_many(self, S: np.ndarray) -> np.ndarray:
        Y = self.whiten_many(S)
        return np.einsum("ij,ij->i", Y, Y)

    def neg_log_density(self, s) -> float:
        """Negative log-density with constants dropped.

        Gaussian: half the squared Mahalanobis distance. Student-t:
        ((nu + d) / 2) * log(1 + m2 / nu). Both increase strictly in m2.
        """
        m2 = self.mahalanobis_sq(s)
        return self.neg_log_density_from_m2(m2)

    def neg_log_density_from_m2(self, m2: float) -> float:
        if self.family is Family.GAUSSIAN:
            return 0.5 * m2
        return 0.5 * (self.nu + self.d) * math.log1p(m2 / self.nu)

    def tail_probability(self, m2: float) -> float:
        """P(d_Sigma^2(S) >= m2) under the reference distribution."""
        if not m2 >= 0.0:
            raise InvalidInputError(f"squared distance must be >= 0, got {m2}")
        if self.family is Family.GAUSSIAN:
            return 1.0 - chi2_cdf(m2, self.d)
        return 1.0 - f_cdf(m2 / self.d, self.d, self.nu)

    def plausibility(self, s) -> PlausibilityScore:
        m2 = self.mahalanobis_sq(s)
        tail = self.tail_probability(m2)
        rarity = -math.log10(tail) if tail > 0.0 else math.inf
        return PlausibilityScore(mahalanobis_sq=m2, tail_probability=tail,
                                 rarity=rarity)

    def marginal_std(self, j: int) -> float:
        return math.sqrt(self.sigma[j, j])


def estimate_covariance(history, family: Family = Family.GAUSSIAN,
                        nu: float | None = None, factor_names=None,
                        ridge: float | None = None) -> ReferenceModel:
    """Centered sample covariance of T x d shock history, with a ridge fallback.

    The default ridge 1e-8 * trace / d guarantees positive definiteness for
    degenerate histories (e.g. constant or duplicated columns).
    """
    X = np.asarray(history, dtype=float)
    if X.ndim != 2:
        raise InvalidInputError("history must be a T x d matrix")
    T, d = X.shape
    if T < d + 1:
        raise InvalidInputError(f"need at least d+1={d + 1} observations, got {T}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("history contains non-finite entries")
    Xc = X - X.mean(axis=0)
    S = (Xc.T @ Xc) / (T - 1)
    if ridge is None:
        ridge = DEFAULT_RIDGE_SCALE * np.trace(S) / d
    if ridge < 0:
        raise InvalidInputError("ridge must be non-negative")
    sigma = S + ridge * np.eye(d)
    return ReferenceModel.from_covariance(sigma, family=family, nu=nu,
                                          factor_names=factor_names)
