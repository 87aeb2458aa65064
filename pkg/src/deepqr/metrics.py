"""Test-set metrics, a finite-class ERM decomposition check, and calibration ratios."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .datagen import Dataset, ScaledT3, _GaussianHetero
from .errors import ShapeError
from .loss import _check_tau
from .oracle import QuantileOracle, t3_cdf

__all__ = [
    "MetricSet",
    "METRICS",
    "empirical_risk",
    "excess_risk",
    "paired_differences",
    "l1_distance",
    "l2sq_distance",
    "delta2",
    "crossing_rate",
    "evaluate",
    "population_excess_risk",
    "DiscreteDistribution",
    "DecompositionCheck",
    "verify_erm_decomposition",
    "calibration_ratio",
    "estimate_calibration_constant",
]

Predictor = Callable[[np.ndarray], np.ndarray]
METRICS = ("excess_risk", "l1", "l2sq", "delta2", "crossing_rate")


@dataclass(frozen=True)
class MetricSet:
    excess_risk: float
    l1: float
    l2sq: float
    delta2: float
    crossing_rate: float | None = None

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in METRICS}
        if d["crossing_rate"] is None:
            del d["crossing_rate"]
        return d


def _rho(r: np.ndarray, tau: float) -> np.ndarray:
    return r * (tau - (r <= 0))


def _predict(predict: Predictor, X: np.ndarray) -> np.ndarray:
    out = np.asarray(predict(X), dtype=np.float64).ravel()
    if out.size != X.shape[0]:
        raise ShapeError(f"predictor returned {out.size} values for {X.shape[0]} rows")
    return out


def empirical_risk(predict: Predictor, testset: Dataset, tau: float) -> float:
    """Mean check loss of ``predict`` on the test sample."""
    tau = _check_tau(tau)
    if len(testset) == 0:
        raise ValueError("empty test set")
    return float(np.mean(_rho(testset.y - _predict(predict, testset.X), tau)))


def _check_match(oracle: QuantileOracle, testset: Dataset) -> None:
    if not oracle.matches(testset):
        raise ValueError(
            f"test set was drawn from ({getattr(testset.model, 'name', '?')}, "
            f"{getattr(testset.error, 'name', '?')}) but the oracle is "
            f"({oracle.model.name}, {oracle.error.name})"
        )


def paired_differences(predict: Predictor, oracle: QuantileOracle, testset: Dataset, tau: float) -> np.ndarray:
    """rho(y - f(x)) - rho(y - f0(x)) for every test row."""
    tau = _check_tau(tau)
    _check_match(oracle, testset)
    f0 = oracle(tau, testset.X)
    return _rho(testset.y - _predict(predict, testset.X), tau) - _rho(testset.y - f0, tau)


def excess_risk(predict: Predictor, oracle: QuantileOracle, testset: Dataset, tau: float) -> float:
    """Paired estimate of R(f) - R(f0^tau) on one test sample; may dip below 0."""
    return float(np.mean(paired_differences(predict, oracle, testset, tau)))


def _gap(predict: Predictor, oracle: QuantileOracle, X, tau: float) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return _predict(predict, X) - oracle(tau, X)


def l1_distance(predict: Predictor, oracle: QuantileOracle, X_test, tau: float) -> float:
    return float(np.mean(np.abs(_gap(predict, oracle, X_test, tau))))


def l2sq_distance(predict: Predictor, oracle: QuantileOracle, X_test, tau: float) -> float:
    e = _gap(predict, oracle, X_test, tau)
    return float(np.mean(e * e))


def delta2(predict: Predictor, oracle: QuantileOracle, X_test, tau: float) -> float:
    """Mean of min{e^2, |e|} with e = f - f0^tau."""
    a = np.abs(_gap(predict, oracle, X_test, tau))
    return float(np.mean(np.minimum(a * a, a)))


def crossing_rate(predictors: Mapping[float, Predictor], X_test) -> float:
    """Fraction of rows whose predictions decrease somewhere along sorted tau."""
    if len(predictors) < 2:
        raise ValueError("crossing rate needs at least two quantile levels")
    X = np.asarray(X_test, dtype=np.float64)
    taus = sorted(predictors)
    P = np.stack([_predict(predictors[t], X) for t in taus])
    return float(np.mean(np.any(np.diff(P, axis=0) < 0, axis=0)))


def evaluate(predict: Predictor, oracle: QuantileOracle, testset: Dataset, tau: float) -> MetricSet:
    """All single-level metrics with one pass over the predictor."""
    tau = _check_tau(tau)
    _check_match(oracle, testset)
    pred = _predict(predict, testset.X)
    f0 = oracle(tau, testset.X)
    y = testset.y
    e = pred - f0
    a = np.abs(e)
    return MetricSet(
        excess_risk=float(np.mean(_rho(y - pred, tau) - _rho(y - f0, tau))),
        l1=float(np.mean(a)),
        l2sq=float(np.mean(e * e)),
        delta2=float(np.mean(np.minimum(a * a, a))),
    )


# ---------------------------------------------------------------------------
# population excess risk by quadrature over the conditional error law
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_erfc = np.frompyfunc(math.erfc, 1, 1)


def _error_cdf(oracle: QuantileOracle, z: np.ndarray, X: np.ndarray) -> np.ndarray:
    """P(eta <= z | X) for each row; z has shape (n, k)."""
    err = oracle.error
    if isinstance(err, ScaledT3):
        return t3_cdf(z / err.scale)
    if isinstance(err, _GaussianHetero):
        sd = err.sd(X)[:, None]
        # sd = 0 (sine error at integer index) is a point mass at 0
        safe = np.where(sd > 0, sd, 1.0)
        smooth = 0.5 * _erfc(-z / (safe * math.sqrt(2.0))).astype(np.float64)
        return np.where(sd > 0, smooth, (z >= 0).astype(np.float64))
    raise TypeError(f"no CDF for error model {err!r}")


def population_excess_risk(predict: Predictor, oracle: QuantileOracle, X, tau: float) -> float:
    """Mean over rows of E[rho(Y - f) - rho(Y - f0) | X = x].

    Uses the identity  E[...] = integral_{f0}^{f} (F(s) - tau) ds  with
    32-point Gauss-Legendre quadrature, so no noise draws are involved.
    """
    tau = _check_tau(tau)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    f0 = oracle(tau, X)
    e = _predict(predict, X) - f0
    mean = oracle.model(X)
    u = 0.5 * (_GL_NODES + 1.0)
    s = (f0 - mean)[:, None] + e[:, None] * u[None, :]
    integrand = _error_cdf(oracle, s, X) - tau
    return float(np.mean(e * (integrand @ (0.5 * _GL_WEIGHTS))))


# ---------------------------------------------------------------------------
# finite-class decomposition check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely supported joint law of (X, Y): atoms (x_k, y_k) with mass p_k."""

    x: np.ndarray
    y: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        x = x.reshape(-1, 1) if x.ndim == 1 else x
        y = np.asarray(self.y, dtype=np.float64).ravel()
        p = np.asarray(self.p, dtype=np.float64).ravel()
        if not (x.shape[0] == y.size == p.size) or y.size == 0:
            raise ShapeError("atoms need matching x, y, p")
        if np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("masses must be nonnegative and sum to 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "p", p / p.sum())

    def risk(self, predict: Predictor, tau: float) -> float:
        return float(np.dot(self.p, _rho(self.y - _predict(predict, self.x), tau)))

    def sample(self, n: int, rng: np.random.Generator) -> Dataset:
        idx = rng.choice(self.y.size, size=n, p=self.p)
        return Dataset(self.x[idx], self.y[idx])

    def quantile_function(self, tau: float) -> Predictor:
        """Conditional tau-quantile on the support: smallest y with F(y | x) >= tau."""
        keys = [tuple(r) for r in self.x]
        table = {}
        for key in dict.fromkeys(keys):
            mask = np.array([k == key for k in keys])
            ys, ps = self.y[mask], self.p[mask]
            order = np.argsort(ys, kind="stable")
            cdf = np.cumsum(ps[order]) / ps.sum()
            table[key] = float(ys[order][np.searchsorted(cdf, tau - 1e-12)])

        def f0(X):
            X = np.asarray(X, dtype=np.float64)
            X = X.reshape(-1, 1) if X.ndim == 1 else X
            return np.array([table[tuple(r)] for r in X])

        return f0


@dataclass(frozen=True)
class DecompositionCheck:
    lhs: float
    rhs: float
    holds: bool


def verify_erm_decomposition(candidates: Sequence[Predictor], population: DiscreteDistribution,
                             sample: Dataset, tau: float, tol: float = 1e-12) -> DecompositionCheck:
    """Exact check of  R(f_hat) - R(f0) <= 2 sup|R - R_n| + min R - R(f0)  over a finite class."""
    tau = _check_tau(tau)
    if not candidates:
        raise ValueError("candidate class is empty")
    pop = np.array([population.risk(f, tau) for f in candidates])
    emp = np.array([empirical_risk(f, sample, tau) for f in candidates])
    r0 = population.risk(population.quantile_function(tau), tau)
    k = int(np.argmin(emp))
    lhs = float(pop[k] - r0)
    rhs = float(2.0 * np.max(np.abs(pop - emp)) + pop.min() - r0)
    return DecompositionCheck(lhs, rhs, lhs <= rhs + tol)


# ---------------------------------------------------------------------------
# self-calibration
# ---------------------------------------------------------------------------

def calibration_ratio(predict: Predictor, oracle: QuantileOracle, X, tau: float) -> float:
    """Delta^2(f, f0) / population excess risk of f."""
    ex = population_excess_risk(predict, oracle, X, tau)
    d2 = delta2(predict, oracle, X, tau)
    if ex <= 0:
        return math.inf if d2 > 0 else 0.0
    return d2 / ex


def estimate_calibration_constant(oracle: QuantileOracle, X, tau: float,
                                  deltas: Sequence[float] = (-0.2, -0.1, -0.05, 0.05, 0.1, 0.2),
                                  shapes: Sequence[Predictor] | None = None) -> float:
    """Largest Delta^2 / excess ratio over perturbations f0 + delta * g on a grid."""
    X = np.asarray(X, dtype=np.float64)
    X = X.reshape(-1, 1) if X.ndim == 1 else X
    if shapes is None:
        shapes = [lambda Z: np.ones(Z.shape[0])] + [
            (lambda Z, k=k: np.cos(np.pi * k * Z[:, 0])) for k in (1, 2, 3)
        ] + [(lambda Z, k=k: np.sin(np.pi * k * Z[:, 0])) for k in (1, 2, 3)]
    f0 = oracle.predictor(tau)
    best = 0.0
    for g in shapes:
        for dlt in deltas:
            f = lambda Z, g=g, dlt=dlt: f0(Z) + dlt * g(Z)
            best = max(best, calibration_ratio(f, oracle, X, tau))
    return best
