"""Scenario configuration, seeded replications, aggregation and CSV reports."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import planner
from .baselines import SOLVERS, fit_dls, fit_linear_qr
from .datagen import Dataset, derive_rng, make_error, make_model, sample
from .errors import ConfigError, DeepQRError
from .loss import Pinball, TrainConfig, train
from .metrics import METRICS, MetricSet, crossing_rate, evaluate
from .net import Mlp, init_mlp
from .oracle import QuantileOracle

__all__ = [
    "SCHEMA_VERSION",
    "METHODS",
    "NET_ALIASES",
    "NetSpec",
    "Scenario",
    "ReplicationError",
    "ReplicationResult",
    "AggregateReport",
    "fit_dqr",
    "fit_methods",
    "training_set",
    "run_replication",
    "run_scenario",
    "emit_table",
    "read_table",
    "emit_curves",
    "load_config",
    "parse_config",
]

SCHEMA_VERSION = 1
METHODS = ("DQR", "LinearQR", "DLS")
NET_ALIASES = {"desk": (64, 64, 64), "wide": (256, 256, 256, 256)}
TABLE_HEADER = ("model", "error", "n", "tau", "method", "metric", "mean", "std")
CURVE_HEADER = ("x", "tau", "y_hat", "y_true")

# stream purposes under derive_rng(master_seed, r, purpose, ...)
_TRAIN, _TEST, _FIT = 0, 1, 2
_SHARED = 2**31 - 1


class ReplicationError(DeepQRError, RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"replication {index} failed: {type(cause).__name__}: {cause}")
        self.index = index
        self.cause = cause


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NetSpec:
    """Hidden widths given directly, or derived from a planner preset."""

    hidden: tuple[int, ...] | None = None
    family: str | None = None
    family_args: Mapping = field(default_factory=dict)
    preset: str | None = None
    p: float = math.inf

    def __post_init__(self):
        if (self.hidden is None) == (self.preset is None):
            raise ConfigError("net needs exactly one of 'hidden' or 'preset'")
        if self.hidden is not None:
            hidden = tuple(int(w) for w in self.hidden)
            if any(w < 1 for w in hidden):
                raise ConfigError("hidden widths must be >= 1")
            object.__setattr__(self, "hidden", hidden)
        else:
            if self.family not in planner.FAMILIES:
                raise ConfigError(f"unknown family {self.family!r}; choose from {sorted(planner.FAMILIES)}")
            if self.preset not in planner.PRESETS:
                raise ConfigError(f"unknown preset {self.preset!r}; choose from {planner.PRESETS}")

    def shape(self, d: int, n: int) -> tuple[int, ...]:
        if self.hidden is not None:
            return (d,) + self.hidden + (1,)
        try:
            spec = planner.FAMILIES[self.family](**dict(self.family_args))
        except TypeError as exc:
            raise ConfigError(f"bad family_args for {self.family}: {exc}") from None
        if spec.d != d:
            raise ConfigError(f"planned input dimension {spec.d} does not match model dimension {d}")
        return planner.preset_plan(spec, n, self.p, self.preset).width_vector

    @classmethod
    def from_config(cls, doc) -> "NetSpec":
        if isinstance(doc, str):
            if doc not in NET_ALIASES:
                raise ConfigError(f"unknown net alias {doc!r}; choose from {sorted(NET_ALIASES)}")
            return cls(hidden=NET_ALIASES[doc])
        if isinstance(doc, list):
            return cls(hidden=tuple(doc))
        if not isinstance(doc, dict):
            raise ConfigError("net must be an alias, a list of widths, or an object")
        _reject_unknown(doc, {"hidden", "family", "family_args", "preset", "p"}, "net")
        p = doc.get("p", "inf")
        return cls(hidden=None if "hidden" not in doc else tuple(doc["hidden"]),
                   family=doc.get("family"), family_args=dict(doc.get("family_args", {})),
                   preset=doc.get("preset"), p=float(p))

    def to_config(self):
        if self.hidden is not None:
            return list(self.hidden)
        return {"family": self.family, "family_args": dict(self.family_args),
                "preset": self.preset, "p": "inf" if math.isinf(self.p) else self.p}


@dataclass(frozen=True)
class Scenario:
    model: str
    error: str
    n_train: int
    taus: tuple[float, ...] = (0.25, 0.5, 0.75)
    n_test: int = 100_000
    replications: int = 10
    methods: tuple[str, ...] = METHODS
    net: NetSpec = NetSpec(hidden=NET_ALIASES["desk"])
    train: TrainConfig = TrainConfig()
    master_seed: int = 0
    linear_qr_solver: str = "adam"
    test_set: str = "per_replication"
    xi: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.taus or any(not 0 < t < 1 for t in self.taus):
            raise ConfigError("taus must be a nonempty list in (0, 1)")
        if any(b <= a for a, b in zip(self.taus, self.taus[1:])):
            raise ConfigError("taus must be strictly increasing")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.n_train < 2 or self.n_test < 1:
            raise ConfigError("need n_train >= 2 and n_test >= 1")
        bad = set(self.methods) - set(METHODS)
        if bad or len(set(self.methods)) != len(self.methods):
            raise ConfigError(f"methods must be distinct members of {METHODS}")
        if self.linear_qr_solver not in SOLVERS:
            raise ConfigError(f"linear_qr_solver must be one of {SOLVERS}")
        if self.test_set not in ("per_replication", "shared"):
            raise ConfigError("test_set must be 'per_replication' or 'shared'")
        try:
            self.oracle()
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None

    def oracle(self) -> QuantileOracle:
        model = make_model(self.model)
        return QuantileOracle(model, make_error(self.error, model.dim, self.xi))

    @property
    def dim(self) -> int:
        return make_model(self.model).dim

    def net_shape(self) -> tuple[int, ...]:
        return self.net.shape(self.dim, self.n_train)

    @classmethod
    def from_config(cls, doc: dict, defaults: Mapping | None = None) -> "Scenario":
        doc = {**(defaults or {}), **doc}
        _reject_unknown(doc, _SCENARIO_KEYS, "scenario")
        for key in ("model", "error", "n_train"):
            if key not in doc:
                raise ConfigError(f"scenario is missing {key!r}")
        kw = dict(doc)
        if "net" in kw:
            kw["net"] = NetSpec.from_config(kw["net"])
        if "train" in kw:
            t = kw["train"]
            if not isinstance(t, dict):
                raise ConfigError("train must be an object")
            _reject_unknown(t, set(TrainConfig.__dataclass_fields__), "train")
            try:
                kw["train"] = TrainConfig(**t)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad train config: {exc}") from None
        for key in ("taus", "methods", "xi"):
            if kw.get(key) is not None:
                kw[key] = tuple(kw[key])
        for key in ("n_train", "n_test", "replications", "master_seed"):
            if key in kw and (not isinstance(kw[key], int) or isinstance(kw[key], bool)):
                raise ConfigError(f"{key} must be an integer")
        return cls(**kw)

    def to_config(self) -> dict:
        doc = {
            "model": self.model, "error": self.error, "n_train": self.n_train,
            "taus": list(self.taus), "n_test": self.n_test, "replications": self.replications,
            "methods": list(self.methods), "net": self.net.to_config(),
            "train": {k: getattr(self.train, k) for k in TrainConfig.__dataclass_fields__},
            "master_seed": self.master_seed, "linear_qr_solver": self.linear_qr_solver,
            "test_set": self.test_set,
        }
        if self.xi is not None:
            doc["xi"] = list(self.xi)
        return doc


_SCENARIO_KEYS = {f for f in Scenario.__dataclass_fields__}
_TOP_KEYS = {"schema_version", "defaults", "scenarios"}


def _reject_unknown(doc: Mapping, allowed: set, where: str) -> None:
    extra = set(doc) - set(allowed)
    if extra:
        raise ConfigError(f"unknown {where} key(s): {sorted(extra)}")


def parse_config(doc: dict) -> list[Scenario]:
    """Scenarios from a config document ``{"schema_version": 1, "scenarios": [...]}``.

    An optional ``defaults`` object is merged under every scenario.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "top-level")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    scenarios = doc.get("scenarios")
    if not isinstance(scenarios, list) or not scenarios:
        raise ConfigError("scenarios must be a nonempty list")
    defaults = doc.get("defaults", {})
    if not isinstance(defaults, dict):
        raise ConfigError("defaults must be an object")
    return [Scenario.from_config(s, defaults) for s in scenarios]


def load_config(path) -> list[Scenario]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc)


# ---------------------------------------------------------------------------
# replications
# ---------------------------------------------------------------------------

def fit_dqr(dataset: Dataset, tau: float, shape: Sequence[int], cfg: TrainConfig,
            rng: np.random.Generator) -> Mlp:
    """ReLU network fitted with the check loss at level ``tau``."""
    mlp = init_mlp(shape, rng)
    train(mlp, dataset, Pinball(tau), cfg, rng)
    return mlp


def _fit_rng(sc: Scenario, r: int, method: str, k: int) -> np.random.Generator:
    return derive_rng(sc.master_seed, r, _FIT, METHODS.index(method), k)


def fit_methods(sc: Scenario, r: int, data: Dataset) -> dict[str, dict[float, Callable]]:
    """Fitted predictors per method and tau for replication ``r``.

    DLS targets the conditional mean, so it is fitted once and listed at tau = 0.5.
    """
    fitted: dict[str, dict[float, Callable]] = {}
    shape = sc.net_shape() if ("DQR" in sc.methods or "DLS" in sc.methods) else None
    for method in sc.methods:
        if method == "DQR":
            fitted[method] = {tau: fit_dqr(data, tau, shape, sc.train, _fit_rng(sc, r, method, k))
                              for k, tau in enumerate(sc.taus)}
        elif method == "LinearQR":
            fitted[method] = {tau: fit_linear_qr(data, tau, sc.train, _fit_rng(sc, r, method, k),
                                                 sc.linear_qr_solver)
                              for k, tau in enumerate(sc.taus)}
        else:
            fitted[method] = {0.5: fit_dls(data, shape, sc.train, _fit_rng(sc, r, method, 0))}
    return fitted


def _dls_metrics(f, oracle: QuantileOracle, test: Dataset) -> MetricSet:
    # squared-loss excess risk against the conditional mean; distances at the median
    pred = np.asarray(f(test.X), dtype=np.float64).ravel()
    mean = oracle.mean(test.X)
    excess = float(np.mean((test.y - pred) ** 2 - (test.y - mean) ** 2))
    base = evaluate(f, oracle, test, 0.5)
    return replace(base, excess_risk=excess)


@dataclass
class ReplicationResult:
    index: int
    metrics: dict[tuple[float, str], MetricSet]


def _test_set(sc: Scenario, r: int, oracle: QuantileOracle) -> Dataset:
    key = (_SHARED, _TEST) if sc.test_set == "shared" else (r, _TEST)
    return sample(oracle.model, oracle.error, sc.n_test, derive_rng(sc.master_seed, *key))


def training_set(sc: Scenario, r: int) -> Dataset:
    oracle = sc.oracle()
    return sample(oracle.model, oracle.error, sc.n_train, derive_rng(sc.master_seed, r, _TRAIN))


def run_replication(sc: Scenario, r: int) -> ReplicationResult:
    """Generate data, fit every method at every tau, and score on the test set."""
    oracle = sc.oracle()
    fitted = fit_methods(sc, r, training_set(sc, r))
    test = _test_set(sc, r, oracle)
    out: dict[tuple[float, str], MetricSet] = {}
    for method, preds in fitted.items():
        if method == "DLS":
            out[(0.5, method)] = _dls_metrics(preds[0.5], oracle, test)
            continue
        cross = crossing_rate(preds, test.X) if len(preds) >= 2 else None
        for tau, f in preds.items():
            out[(tau, method)] = replace(evaluate(f, oracle, test, tau), crossing_rate=cross)
    return ReplicationResult(r, out)


def _run_one(args) -> ReplicationResult:
    sc, r = args
    try:
        return run_replication(sc, r)
    except Exception as exc:  # surfaced with the replication index
        raise ReplicationError(r, exc) from exc


@dataclass
class AggregateReport:
    """Mean and sample standard deviation (ddof=1; 0 when R = 1) per (tau, method, metric)."""

    model: str
    error: str
    n: int
    replications: int
    values: dict[tuple[float, str, str], np.ndarray]

    def mean(self, tau: float, method: str, metric: str) -> float:
        return float(np.mean(self.values[(tau, method, metric)]))

    def std(self, tau: float, method: str, metric: str) -> float:
        v = self.values[(tau, method, metric)]
        return float(np.std(v, ddof=1)) if v.size > 1 else 0.0

    def rows(self) -> list[tuple]:
        keys = sorted(self.values, key=lambda k: (k[0], k[1], k[2]))
        return [(self.model, self.error, self.n, tau, method, metric,
                 self.mean(tau, method, metric), self.std(tau, method, metric))
                for tau, method, metric in keys]

    @classmethod
    def from_results(cls, sc: Scenario, results: Sequence[ReplicationResult]) -> "AggregateReport":
        results = sorted(results, key=lambda res: res.index)
        collected: dict[tuple[float, str, str], list[float]] = {}
        for res in results:
            for (tau, method), ms in sorted(res.metrics.items()):
                for metric, value in ms.as_dict().items():
                    collected.setdefault((tau, method, metric), []).append(value)
        values = {k: np.array(v) for k, v in collected.items()}
        return cls(sc.model, sc.error, sc.n_train, len(results), values)


def run_scenario(sc: Scenario, threads: int = 1, order: Sequence[int] | None = None) -> AggregateReport:
    """All replications of ``sc``; the report is independent of ``threads`` and ``order``."""
    order = list(range(sc.replications)) if order is None else list(order)
    if sorted(order) != list(range(sc.replications)):
        raise ConfigError("order must be a permutation of the replication indices")
    jobs = [(sc, r) for r in order]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    return AggregateReport.from_results(sc, results)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def emit_table(reports: AggregateReport | Sequence[AggregateReport], path) -> None:
    """Long-format CSV, one row per (scenario, tau, method, metric)."""
    if isinstance(reports, AggregateReport):
        reports = [reports]
    rows = [row for rep in reports for row in rep.rows()]
    rows.sort(key=lambda r: (r[0], r[1], r[3], r[4], r[5], r[2]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for model, error, n, tau, method, metric, mean, std in rows:
            w.writerow([model, error, n, _fmt(tau), method, metric, _fmt(mean), _fmt(std)])


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["n"] = int(row["n"])
        for k in ("tau", "mean", "std"):
            row[k] = float(row[k])
    return rows


def emit_curves(sc: Scenario, fitted: Mapping[float, Callable], grid_size: int, path) -> None:
    """Fitted and true quantile curves on an equispaced grid over [0, 1]."""
    oracle = sc.oracle()
    if oracle.dim != 1:
        raise ConfigError("curves are only defined for univariate models")
    if grid_size < 2:
        raise ConfigError("grid_size must be >= 2")
    x = np.linspace(0.0, 1.0, grid_size)
    X = x[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for tau in sorted(fitted):
            y_hat = np.asarray(fitted[tau](X), dtype=np.float64).ravel()
            y_true = oracle(tau, X)
            for row in zip(x, y_hat, y_true):
                w.writerow([_fmt(row[0]), _fmt(tau), _fmt(row[1]), _fmt(row[2])])
