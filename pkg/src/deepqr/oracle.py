"""Analytic conditional quantiles f0^tau(x) = f0(x) + F^{-1}_{eta|x}(tau)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datagen import ErrorModel, RegressionModel, ScaledT3, _GaussianHetero
from .errors import ConvergenceError, ShapeError

__all__ = [
    "normal_cdf",
    "normal_inv_cdf",
    "t3_cdf",
    "t3_pdf",
    "t3_inv_cdf",
    "QuantileOracle",
    "conditional_quantile",
]

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)

# Acklam's rational approximation to the normal quantile (rel. error < 1.15e-9)
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _check_level(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    return p


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def _acklam_lower(p: float) -> float:
    """Rational approximation for p <= 0.5."""
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))


def normal_inv_cdf(p: float) -> float:
    """Standard normal quantile: rational start plus one Newton step on erfc.

    Upper-tail levels are mapped through 1 - p (exact for p >= 0.5) so the
    refinement always runs in the lower tail where erfc keeps full precision.
    """
    p = _check_level(p)
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -normal_inv_cdf(1.0 - p)
    x = _acklam_lower(p)
    err = normal_cdf(x) - p
    x -= err / (math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi))
    return x


def t3_cdf(x):
    """CDF of Student's t with 3 degrees of freedom (closed form)."""
    x = np.asarray(x, dtype=np.float64)
    u = x / _SQRT3
    out = 0.5 + (u / (1.0 + u * u) + np.arctan(u)) / math.pi
    return float(out) if out.ndim == 0 else out


def t3_pdf(x):
    x = np.asarray(x, dtype=np.float64)
    out = 6.0 * _SQRT3 / (math.pi * (3.0 + x * x) ** 2)
    return float(out) if out.ndim == 0 else out


def _t3_lower_tail(x: float) -> float:
    # F(x) for x < 0 without the 0.5 + (-0.5 + small) cancellation:
    # pi F(x) = pi/2 + atan(u) + u/(1+u^2) = atan(-1/u) + u/(1+u^2)   (u < 0)
    u = x / _SQRT3
    return (math.atan(-1.0 / u) + u / (1.0 + u * u)) / math.pi


def t3_inv_cdf(tau: float, max_iter: int = 200) -> float:
    """t(3) quantile by safeguarded Newton iteration on the closed-form CDF.

    Starts from the bracket [-50, 0] (widened geometrically for extreme tails)
    and falls back to bisection whenever a Newton step leaves the bracket.
    """
    tau = _check_level(tau)
    if tau == 0.5:
        return 0.0
    if tau > 0.5:
        return -t3_inv_cdf(1.0 - tau, max_iter)

    lo, hi = -50.0, 0.0
    while _t3_lower_tail(lo) > tau:
        lo *= 2.0
        if lo < -1e150:
            raise ConvergenceError(f"cannot bracket the t(3) quantile for tau={tau}")
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = _t3_lower_tail(x) - tau
        if fx > 0:
            hi = x
        else:
            lo = x
        step = fx / t3_pdf(x)
        nxt = x - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= 1e-15 * max(1.0, abs(x)):
            return nxt
        x = nxt
    raise ConvergenceError(f"t(3) quantile did not converge for tau={tau}")


def _error_quantile(error: ErrorModel, tau: float, X: np.ndarray) -> np.ndarray:
    if isinstance(error, ScaledT3):
        return np.full(X.shape[0], error.scale * t3_inv_cdf(tau))
    if isinstance(error, _GaussianHetero):
        return error.sd(X) * normal_inv_cdf(tau)
    raise TypeError(f"no quantile function for error model {error!r}")


@dataclass(frozen=True)
class QuantileOracle:
    """Conditional quantile function for a (regression model, error model) pair."""

    model: RegressionModel
    error: ErrorModel

    def __post_init__(self):
        self.error.check_dim(self.model.dim)

    @property
    def dim(self) -> int:
        return self.model.dim

    def __call__(self, tau: float, X) -> np.ndarray:
        return conditional_quantile(self, tau, X)

    def predictor(self, tau: float):
        """X -> f0^tau(X) as a plain callable."""
        _check_level(tau)
        return lambda X: conditional_quantile(self, tau, X)

    def mean(self, X) -> np.ndarray:
        """Conditional mean; every error model here has mean zero."""
        return self.model(X)

    def matches(self, dataset) -> bool:
        m, e = getattr(dataset, "model", None), getattr(dataset, "error", None)
        return (m is None or m == self.model) and (e is None or e == self.error)


def conditional_quantile(oracle: QuantileOracle, tau: float, x):
    """f0^tau at one covariate vector (returns float) or at each row of X."""
    tau = _check_level(tau)
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 0 or (arr.ndim == 1 and oracle.dim > 1)
    X = arr.reshape(1, -1) if single else (arr.reshape(-1, 1) if arr.ndim == 1 else arr)
    if X.ndim != 2 or X.shape[1] != oracle.dim:
        raise ShapeError(f"oracle expects {oracle.dim} covariate column(s), got shape {arr.shape}")
    q = oracle.model(X) + _error_quantile(oracle.error, tau, X)
    return float(q[0]) if single else q
