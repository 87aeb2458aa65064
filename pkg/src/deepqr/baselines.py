"""Comparison estimators: linear quantile regression and deep least squares."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DivergenceError, ShapeError
from .loss import Pinball, Squared, TrainConfig, _check_tau, train
from .net import DenseLayer, Mlp, init_mlp

__all__ = ["AffineModel", "fit_linear_qr", "fit_dls", "SOLVERS"]

SOLVERS = ("adam", "lp")


@dataclass(frozen=True)
class AffineModel:
    slope: np.ndarray
    intercept: float

    def __post_init__(self):
        slope = np.asarray(self.slope, dtype=np.float64).ravel()
        if not (np.all(np.isfinite(slope)) and np.isfinite(self.intercept)):
            raise DivergenceError("affine fit produced non-finite coefficients")
        object.__setattr__(self, "slope", slope)
        object.__setattr__(self, "intercept", float(self.intercept))

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        X = X.reshape(-1, 1) if X.ndim == 1 else X
        if X.shape[1] != self.slope.size:
            raise ShapeError(f"expected {self.slope.size} columns, got {X.shape[1]}")
        return X @ self.slope + self.intercept

    def to_mlp(self) -> Mlp:
        return Mlp([DenseLayer(self.slope[None, :], np.array([self.intercept]))])

    @classmethod
    def from_mlp(cls, mlp: Mlp) -> "AffineModel":
        if mlp.depth != 0 or mlp.shape[-1] != 1:
            raise ShapeError("only a single affine layer converts to an AffineModel")
        return cls(mlp.layers[0].weights[0].copy(), float(mlp.layers[0].bias[0]))


def _fit_lp(X: np.ndarray, y: np.ndarray, tau: float) -> AffineModel:
    # min tau 1'u + (1-tau) 1'v  s.t.  X b + b0 + u - v = y,  u, v >= 0
    from scipy.optimize import linprog
    from scipy.sparse import hstack, identity, csr_matrix

    n, d = X.shape
    A = hstack([csr_matrix(np.column_stack([X, np.ones(n)])), identity(n), -identity(n)], format="csr")
    c = np.concatenate([np.zeros(d + 1), np.full(n, tau), np.full(n, 1.0 - tau)])
    bounds = [(None, None)] * (d + 1) + [(0, None)] * (2 * n)
    res = linprog(c, A_eq=A, b_eq=y, bounds=bounds, method="highs")
    if res.status != 0:
        raise DivergenceError(f"linear programme failed: {res.message}")
    return AffineModel(res.x[:d], res.x[d])


def fit_linear_qr(dataset, tau: float, cfg: TrainConfig = TrainConfig(),
                  rng: np.random.Generator | None = None, solver: str = "adam") -> AffineModel:
    """Affine tau-quantile fit (intercept included).

    ``solver="adam"`` minimises the check loss with the same minibatch Adam
    loop as the networks; ``solver="lp"`` solves the exact linear programme.
    """
    tau = _check_tau(tau)
    X = np.asarray(dataset.X, dtype=np.float64)
    y = np.asarray(dataset.y, dtype=np.float64).ravel()
    n, d = X.shape
    if n <= d + 1:
        raise ConfigError(f"linear QR needs n > d + 1 (n={n}, d={d})")
    if solver == "lp":
        return _fit_lp(X, y, tau)
    if solver != "adam":
        raise ConfigError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    mlp = init_mlp((d, 1), rng)
    train(mlp, dataset, Pinball(tau), cfg, rng)
    return AffineModel.from_mlp(mlp)


def fit_dls(dataset, net_shape: Sequence[int], cfg: TrainConfig = TrainConfig(),
            rng: np.random.Generator | None = None) -> Mlp:
    """ReLU network fitted to the conditional mean with squared loss."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    mlp = init_mlp(net_shape, rng)
    train(mlp, dataset, Squared(), cfg, rng)
    return mlp
