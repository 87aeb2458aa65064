"""Synthetic regression benchmarks: covariates, regression functions, error models.

Every random draw goes through a :class:`numpy.random.Generator` backed by
PCG64.  Streams are derived with :func:`derive_rng` from a master seed and an
integer key path (replication index, purpose, ...), so each replication is
reproducible on its own and independent of the others.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ShapeError

__all__ = [
    "THETA",
    "XI",
    "derive_rng",
    "RegressionModel",
    "Linear1D",
    "Wave",
    "Triangle",
    "SingleIndex",
    "Additive",
    "ErrorModel",
    "ScaledT3",
    "SineHetero",
    "ExpHetero",
    "Dataset",
    "f0_eval",
    "error_sd",
    "sample",
    "sample_t3",
    "MODELS",
    "make_model",
    "make_error",
]

#: index vector of the six-dimensional single index model
THETA = (2.2831, -1.4818, 5.1966, 0.0, 0.0, 0.0515)
#: direction driving the multivariate heteroscedastic errors
XI = (1.8100, -1.2999, 0.0, 0.0, -2.7874, 0.3197)


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """PCG64 generator for the stream ``(master_seed, *keys)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def _as_matrix(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size == dim and dim > 1 else X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != dim:
        raise ShapeError(f"expected covariates with {dim} column(s), got shape {np.shape(X)}")
    return X


# ---------------------------------------------------------------------------
# regression functions
# ---------------------------------------------------------------------------

class RegressionModel:
    """Base class: ``model(X)`` evaluates f0 row-wise on an (n, dim) array."""

    name: str = ""
    dim: int = 1

    def __call__(self, X) -> np.ndarray:
        return self._f(_as_matrix(X, self.dim))

    def _f(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError


@dataclass(frozen=True)
class Linear1D(RegressionModel):
    name = "linear"
    dim = 1

    def _f(self, X):
        return 2.0 * X[:, 0]


@dataclass(frozen=True)
class Wave(RegressionModel):
    name = "wave"
    dim = 1

    def _f(self, X):
        x = X[:, 0]
        return 2.0 * x * np.sin(4.0 * np.pi * x)


@dataclass(frozen=True)
class Triangle(RegressionModel):
    name = "triangle"
    dim = 1

    def _f(self, X):
        return 4.0 * (1.0 - np.abs(X[:, 0] - 0.5))


@dataclass(frozen=True)
class SingleIndex(RegressionModel):
    """f0(x) = exp(theta . x)."""

    theta: tuple = THETA
    name = "single_index"

    def __post_init__(self):
        if len(self.theta) != 6:
            raise ShapeError("single index model needs a 6-vector theta")

    @property
    def dim(self) -> int:  # type: ignore[override]
        return len(self.theta)

    def _f(self, X):
        return np.exp(X @ np.asarray(self.theta))


@dataclass(frozen=True)
class Additive(RegressionModel):
    """exp(4(x1-.5)) + 9(x2-.5)^2 + 10 sin(2 pi x3) - 7|x4-.5|; x5, x6 inert."""

    name = "additive"
    dim = 6

    def _f(self, X):
        return (
            np.exp(4.0 * (X[:, 0] - 0.5))
            + 9.0 * (X[:, 1] - 0.5) ** 2
            + 10.0 * np.sin(2.0 * np.pi * X[:, 2])
            - 7.0 * np.abs(X[:, 3] - 0.5)
        )


MODELS = {"linear": Linear1D, "wave": Wave, "triangle": Triangle,
          "single_index": SingleIndex, "additive": Additive}


def make_model(name: str) -> RegressionModel:
    try:
        return MODELS[name]()
    except KeyError:
        raise ValueError(f"unknown regression model {name!r}; choose from {sorted(MODELS)}") from None


# ---------------------------------------------------------------------------
# error models
# ---------------------------------------------------------------------------

def sample_t3(n: int, rng: np.random.Generator) -> np.ndarray:
    """Student t(3) draws as Z / sqrt(V/3), V a sum of three squared normals."""
    z = rng.standard_normal(n)
    v = np.sum(rng.standard_normal((n, 3)) ** 2, axis=1)
    return z / np.sqrt(v / 3.0)


class ErrorModel:
    name: str = ""
    xi: Optional[tuple] = None

    def check_dim(self, dim: int) -> None:
        pass

    def draw(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError


@dataclass(frozen=True)
class ScaledT3(ErrorModel):
    """eta ~ 0.5 * t(3), independent of X."""

    scale: float = 0.5
    name = "t3"

    def draw(self, X, rng):
        return self.scale * sample_t3(X.shape[0], rng)


@dataclass(frozen=True)
class _GaussianHetero(ErrorModel):
    xi: Optional[tuple] = None

    def __post_init__(self):
        if self.xi is not None:
            object.__setattr__(self, "xi", tuple(float(v) for v in self.xi))

    def check_dim(self, dim: int) -> None:
        if dim == 1 and self.xi is not None:
            raise ShapeError(f"{self.name} error: xi must be omitted for univariate models")
        if dim > 1 and (self.xi is None or len(self.xi) != dim):
            raise ShapeError(f"{self.name} error: multivariate models need a length-{dim} xi")

    def index(self, X: np.ndarray) -> np.ndarray:
        return X[:, 0] if self.xi is None else X @ np.asarray(self.xi)

    def sd(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError  # pragma: no cover

    def draw(self, X, rng):
        return self.sd(X) * rng.standard_normal(X.shape[0])


@dataclass(frozen=True)
class SineHetero(_GaussianHetero):
    """eta | x ~ 0.5 * N(0, sin(pi u)^2), u = x or xi . x."""

    name = "sine"

    def sd(self, X):
        return 0.5 * np.abs(np.sin(np.pi * self.index(X)))


@dataclass(frozen=True)
class ExpHetero(_GaussianHetero):
    """eta | x ~ 0.5 * N(0, exp(4u - 2)), u = x or xi . x."""

    name = "exp"

    def sd(self, X):
        return 0.5 * np.exp(2.0 * self.index(X) - 1.0)


ERRORS = {"t3": ScaledT3, "sine": SineHetero, "exp": ExpHetero}


def make_error(name: str, dim: int = 1, xi=None) -> ErrorModel:
    """Error model by name; multivariate heteroscedastic errors default to XI."""
    if name not in ERRORS:
        raise ValueError(f"unknown error model {name!r}; choose from {sorted(ERRORS)}")
    if name == "t3":
        if xi is not None:
            raise ValueError("t3 error takes no xi")
        return ScaledT3()
    if xi is None and dim > 1:
        xi = XI
    err = ERRORS[name](xi=xi)
    err.check_dim(dim)
    return err


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    model: Optional[RegressionModel] = field(default=None, compare=False)
    error: Optional[ErrorModel] = field(default=None, compare=False)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise ShapeError("X must be (n, d) with n == len(y)")

    def __len__(self) -> int:
        return self.y.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{j + 1}" for j in range(self.dim)] + ["y"])
            for row, yi in zip(self.X, self.y):
                w.writerow([repr(float(v)) for v in row] + [repr(float(yi))])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(rows[0]))
        return cls(data[:, :-1], data[:, -1])


def f0_eval(model: RegressionModel, x) -> float:
    """f0 at a single covariate vector."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != model.dim:
        raise ShapeError(f"{model.name} expects a {model.dim}-vector, got {x.size}")
    return float(model(x.reshape(1, -1))[0])


def error_sd(error: ErrorModel, x):
    """Conditional standard deviation of a Gaussian heteroscedastic error."""
    if not isinstance(error, _GaussianHetero):
        raise TypeError(f"error_sd is defined only for heteroscedastic Gaussian errors, not {error.name}")
    X = np.asarray(x, dtype=np.float64)
    dim = 1 if error.xi is None else len(error.xi)
    scalar = X.ndim == 0 or (X.ndim == 1 and dim > 1)
    sd = error.sd(_as_matrix(X.reshape(-1) if X.ndim == 0 else X, dim))
    return float(sd[0]) if scalar else sd


def sample(model: RegressionModel, error: ErrorModel, n: int, rng: np.random.Generator) -> Dataset:
    """Draw n pairs with X ~ U[0,1]^d and y = f0(X) + eta."""
    if n < 1:
        raise ValueError("n must be >= 1")
    error.check_dim(model.dim)
    X = rng.uniform(0.0, 1.0, size=(n, model.dim))
    y = model(X) + error.draw(X, rng)
    return Dataset(X, y, model, error)
