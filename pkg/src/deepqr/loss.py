"""Check loss, squared loss, Adam, and the minibatch training loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ShapeError
from .net import GradientSet, Mlp, value_and_grad

__all__ = [
    "pinball",
    "pinball_subgrad",
    "squared_loss",
    "Pinball",
    "Squared",
    "AdamConfig",
    "AdamState",
    "adam_step",
    "TrainConfig",
    "TrainResult",
    "train",
]


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {tau}")
    return tau


def _residuals(residuals) -> np.ndarray:
    r = np.asarray(residuals, dtype=np.float64).ravel()
    if r.size == 0:
        raise ValueError("empty residual vector")
    return r


def pinball(residuals, tau: float) -> float:
    """Mean check loss ``rho_tau(r) = r * (tau - 1{r <= 0})``."""
    tau = _check_tau(tau)
    r = _residuals(residuals)
    return float(np.mean(r * (tau - (r <= 0))))


def pinball_subgrad(residual, tau: float):
    """d rho_tau / d r: ``tau`` for r > 0 and ``tau - 1`` for r <= 0."""
    tau = _check_tau(tau)
    r = np.asarray(residual, dtype=np.float64)
    g = tau - (r <= 0)
    return float(g) if g.ndim == 0 else g


def squared_loss(residuals) -> tuple[float, np.ndarray]:
    """Mean of r**2 and its gradient 2r/n with respect to the residuals."""
    r = _residuals(residuals)
    return float(np.mean(r * r)), 2.0 * r / r.size


@dataclass(frozen=True)
class Pinball:
    """Check-loss objective at level ``tau``."""

    tau: float

    def __post_init__(self):
        _check_tau(self.tau)

    def batch(self, y: np.ndarray, pred: np.ndarray) -> tuple[float, np.ndarray]:
        r = y - pred
        below = r <= 0
        loss = float(np.mean(r * (self.tau - below)))
        # d/dpred of rho(y - pred) = -(tau - 1{r<=0})
        return loss, (below - self.tau) / r.size

    def __str__(self) -> str:
        return f"pinball({self.tau})"


@dataclass(frozen=True)
class Squared:
    """Mean squared error objective."""

    def batch(self, y: np.ndarray, pred: np.ndarray) -> tuple[float, np.ndarray]:
        r = y - pred
        return float(np.mean(r * r)), -2.0 * r / r.size

    def __str__(self) -> str:
        return "squared"


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


@dataclass
class AdamState:
    """First/second moment accumulators (flat, aligned with ``Mlp.params``)."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, mlp: Mlp) -> "AdamState":
        return cls(np.zeros(mlp.n_params), np.zeros(mlp.n_params), 0)


def adam_step(mlp: Mlp, grads: GradientSet, state: AdamState, cfg: AdamConfig) -> tuple[Mlp, AdamState]:
    """One bias-corrected Adam update, applied to ``mlp`` in place."""
    g = grads.flat
    if g.shape != mlp.params.shape or state.m.shape != g.shape:
        raise ShapeError("gradient / optimizer state do not match the network")
    if not np.all(np.isfinite(g)):
        bad = int(np.flatnonzero(~np.isfinite(g))[0])
        raise DivergenceError(f"non-finite gradient at flat parameter index {bad} (step {state.t + 1})")
    state.t += 1
    state.m *= cfg.beta1
    state.m += (1.0 - cfg.beta1) * g
    state.v *= cfg.beta2
    state.v += (1.0 - cfg.beta2) * (g * g)
    bc1 = 1.0 - cfg.beta1 ** state.t
    bc2 = 1.0 - cfg.beta2 ** state.t
    denom = np.sqrt(state.v / bc2)
    denom += cfg.eps
    mlp.params -= (cfg.lr / bc1) * state.m / denom
    return mlp, state


@dataclass(frozen=True)
class TrainConfig:
    """Fixed-budget minibatch Adam; ``batch_size=None`` means ceil(n/2)."""

    epochs: int = 1000
    batch_size: int | None = None
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(self.lr, self.beta1, self.beta2, self.eps)


@dataclass
class TrainResult:
    mlp: Mlp
    losses: np.ndarray = field(repr=False)
    state: AdamState = field(repr=False)


def train(mlp: Mlp, dataset, objective, cfg: TrainConfig = TrainConfig(),
          rng: np.random.Generator | None = None) -> TrainResult:
    """Minimise ``objective`` over ``dataset`` (anything with ``X`` and ``y``).

    The network is updated in place.  ``losses[e]`` is the size-weighted mean
    of the minibatch losses seen during epoch ``e``.  Batches are reshuffled
    every epoch from ``rng`` (default: ``default_rng(cfg.seed)``).
    """
    X = np.asarray(dataset.X, dtype=np.float64)
    y = np.asarray(dataset.y, dtype=np.float64).ravel()
    n = y.size
    if n == 0 or X.shape[0] != n:
        raise ShapeError("dataset must be non-empty with matching X / y rows")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    bs = cfg.batch_size or max(1, math.ceil(n / 2))
    adam = cfg.adam
    state = AdamState.zeros_like(mlp)
    grads = GradientSet(mlp.shape)
    losses = np.empty(cfg.epochs)

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = perm[start:start + bs]
            yb = y[idx]
            loss, _ = value_and_grad(mlp, X[idx], lambda p: objective.batch(yb, p), grads)
            if not math.isfinite(loss):
                raise DivergenceError(f"loss became {loss} in epoch {epoch}", epoch=epoch)
            try:
                adam_step(mlp, grads, state, adam)
            except DivergenceError as exc:
                raise DivergenceError(f"{exc} in epoch {epoch}", epoch=epoch) from None
            total += loss * idx.size
        losses[epoch] = total / n
    return TrainResult(mlp, losses, state)
