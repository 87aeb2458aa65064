"""Architecture sizing for composite targets f0 = h_q o ... o h_0.

Each component h_i maps R^{d_i} -> R^{d_{i+1}}, every output coordinate
depending on at most t_i inputs and being Hoelder(alpha_i, lambda_i).  Layers
flagged ``is_linear`` (the index set J) are affine and realised exactly by the
two-hidden-layer construction of :func:`build_linear_relu`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, ShapeError
from .net import DenseLayer, Mlp, _count, size_bound

__all__ = [
    "LayerSpec",
    "CompositeSpec",
    "CompositeStats",
    "NetworkPlan",
    "PRESETS",
    "composite_stats",
    "plan",
    "preset_plan",
    "preset_exponent",
    "rate_bound",
    "build_linear_relu",
    "single_index",
    "additive",
    "additive_link",
    "interaction",
    "projection_pursuit",
    "univariate_composite",
    "generalized_hierarchical_interaction",
    "FAMILIES",
]

PRESETS = ("deep_fixed_width", "deep_wide", "fixed_depth_wide")
_FLOOR_GUARD = 1e-12


@dataclass(frozen=True)
class LayerSpec:
    d_in: int
    d_out: int
    t: int
    alpha: float = 1.0
    lam: float = 1.0
    is_linear: bool = False

    def __post_init__(self):
        if self.d_in < 1 or self.d_out < 1:
            raise ConfigError("layer dimensions must be >= 1")
        if not 1 <= self.t <= self.d_in:
            raise ConfigError(f"arity t={self.t} must lie in [1, d_in={self.d_in}]")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"Hoelder order must lie in (0, 1], got {self.alpha}")
        if self.lam < 0:
            raise ConfigError("Hoelder constant must be >= 0")
        if self.is_linear and (self.alpha != 1.0 or self.lam != 1.0):
            raise ConfigError("linear layers carry alpha = lambda = 1")

    @classmethod
    def linear(cls, d_in: int, d_out: int) -> "LayerSpec":
        return cls(d_in, d_out, d_in, 1.0, 1.0, True)

    def to_dict(self) -> dict:
        return {"d_in": self.d_in, "d_out": self.d_out, "t": self.t,
                "alpha": self.alpha, "lambda": self.lam, "is_linear": self.is_linear}

    @classmethod
    def from_dict(cls, doc: dict) -> "LayerSpec":
        allowed = {"d_in", "d_out", "t", "alpha", "lambda", "is_linear"}
        extra = set(doc) - allowed
        if extra:
            raise ConfigError(f"unknown layer keys {sorted(extra)}")
        try:
            return cls(int(doc["d_in"]), int(doc["d_out"]), int(doc["t"]),
                       float(doc.get("alpha", 1.0)), float(doc.get("lambda", 1.0)),
                       bool(doc.get("is_linear", False)))
        except KeyError as exc:
            raise ConfigError(f"layer spec is missing {exc.args[0]!r}") from None


@dataclass(frozen=True)
class CompositeSpec:
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigError("a composite spec needs at least one layer")
        for i in range(1, len(self.layers)):
            if self.layers[i].d_in != self.layers[i - 1].d_out:
                raise ConfigError(
                    f"layer {i} has d_in={self.layers[i].d_in} but layer {i - 1} "
                    f"has d_out={self.layers[i - 1].d_out}"
                )
        if self.layers[-1].d_out != 1:
            raise ConfigError("the last component must be scalar valued")

    @property
    def q(self) -> int:
        return len(self.layers) - 1

    @property
    def d(self) -> int:
        return self.layers[0].d_in

    @property
    def nonlinear(self) -> list[int]:
        """Indices of J^c in composition order."""
        return [i for i, l in enumerate(self.layers) if not l.is_linear]

    @property
    def linear(self) -> list[int]:
        return [i for i, l in enumerate(self.layers) if l.is_linear]

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps({"layers": [l.to_dict() for l in self.layers]}, indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "CompositeSpec":
        doc = json.loads(text)
        if not isinstance(doc, dict) or set(doc) != {"layers"}:
            raise ConfigError('composite spec must be {"layers": [...]}')
        return cls(tuple(LayerSpec.from_dict(l) for l in doc["layers"]))


@dataclass(frozen=True)
class CompositeStats:
    C: tuple[float, ...]
    lam: tuple[float, ...]
    alpha: tuple[float, ...]
    t: tuple[float, ...]
    alpha_star: float
    t_star: int
    lambda_star: float
    d_star: float


def _prod(values) -> float:
    return math.prod(values)  # empty product is 1


def composite_stats(spec: CompositeSpec) -> CompositeStats:
    """Per-layer constants C_i*, lambda_i*, alpha_i*, t_i* and their aggregates."""
    L = spec.layers
    q = spec.q
    a = [l.alpha for l in L]

    def tail(i: int) -> float:
        return _prod(a[i:q + 1])

    C = tuple(18.0 ** tail(i + 1) for i in range(q + 1))
    lam = tuple(_prod(L[j].lam ** tail(j + 1) for j in range(i, q + 1)) for i in range(q + 1))
    alpha = tuple(tail(i) for i in range(q + 1))
    t = tuple(
        _prod(math.sqrt(L[j].t) ** tail(j) for j in range(i, q + 1)) / math.sqrt(L[i].t) ** a[i]
        for i in range(q + 1)
    )
    cand = spec.nonlinear
    if not cand:
        raise ConfigError("spec has no nonlinear component; alpha*, t* undefined")
    best = min(cand, key=lambda i: (alpha[i] / L[i].t, i))
    return CompositeStats(C, lam, alpha, t, alpha[best], L[best].t, max(lam), max(t))


@dataclass(frozen=True)
class NetworkPlan:
    width_vector: tuple[int, ...]
    depth: int
    width: int
    exact_size: int
    size_bound: int
    N: tuple[int, ...]
    L: tuple[int, ...]
    preset: str = "custom"

    def hidden(self) -> tuple[int, ...]:
        return self.width_vector[1:-1]

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["width_vector"] = list(self.width_vector)
        doc["N"], doc["L"] = list(self.N), list(self.L)
        return doc

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _per_layer(values, k: int, name: str) -> tuple[int, ...]:
    if np.ndim(values) == 0:
        values = [values] * k
    values = tuple(int(v) for v in values)
    if len(values) != k:
        raise ShapeError(f"{name} has {len(values)} entries but the spec has {k} nonlinear layers")
    if min(values, default=1) < 1:
        raise ConfigError(f"{name} entries must be >= 1")
    return values


def _block_width(layer: LayerSpec, N: int) -> int:
    t = layer.t
    root = math.floor(N ** (1.0 / t) * (1 + _FLOOR_GUARD))
    return layer.d_in * max(4 * t * root + 3 * t, 12 * N + 8)


def plan(spec: CompositeSpec, N, L, preset: str = "custom") -> NetworkPlan:
    """Concrete width vector for the composite architecture.

    Nonlinear component i contributes 12 L_i + 15 hidden layers (the last of
    width d_{i+1}, the rest of the approximation width); linear component j
    contributes two hidden layers of widths 2 d_j and d_{j+1}.
    """
    k = len(spec.nonlinear)
    N = _per_layer(N, k, "N")
    L = _per_layer(L, k, "L")
    widths = [spec.d]
    it = iter(range(k))
    for layer in spec.layers:
        if layer.is_linear:
            widths += [2 * layer.d_in, layer.d_out]
        else:
            j = next(it)
            w = _block_width(layer, N[j])
            widths += [w] * (12 * L[j] + 14) + [layer.d_out]
    widths.append(1)
    depth = sum(12 * l + 15 for l in L) + 2 * len(spec.linear)
    assert depth == len(widths) - 2
    width = max(widths[1:-1])
    return NetworkPlan(tuple(widths), depth, width, _count(widths),
                       size_bound(width, depth, spec.d), N, L, preset)


def _exponent_factor(p: float) -> float:
    p = float(p)
    if p < 1:
        raise ConfigError("moment index p must be >= 1")
    return 1.0 if math.isinf(p) else 1.0 - 1.0 / p


def preset_exponent(spec: CompositeSpec, p: float, preset: str) -> float:
    """Exponent e with N_i or L_i = floor(n^e) for the named preset."""
    st = composite_stats(spec)
    base = _exponent_factor(p) * st.t_star / (4 * st.alpha_star + 2 * st.t_star)
    if preset == "deep_wide":
        return base / 2
    if preset in ("deep_fixed_width", "fixed_depth_wide"):
        return base
    raise ConfigError(f"unknown preset {preset!r}; choose from {PRESETS}")


def _floor_pow(n: int, e: float) -> int:
    return max(1, math.floor(n ** e * (1 + _FLOOR_GUARD)))


def preset_plan(spec: CompositeSpec, n: int, p: float, preset: str) -> NetworkPlan:
    if n < 2:
        raise ConfigError("sample size n must be >= 2")
    m = _floor_pow(n, preset_exponent(spec, p, preset))
    N, L = {"deep_fixed_width": (1, m), "deep_wide": (m, m), "fixed_depth_wide": (m, 1)}[preset]
    return plan(spec, N, L, preset)


def _effective_dims(spec: CompositeSpec) -> list[int]:
    # d_i t_i for nonlinear components; d_i for linear ones (exactly represented)
    return [l.d_in if l.is_linear else l.d_in * l.t for l in spec.layers]


def rate_bound(spec: CompositeSpec, n: int, p: float) -> tuple[float, float, int]:
    """(rate exponent, prefactor C_{d,d*}, power of log n) of the excess-risk bound."""
    if n < 3:
        raise ConfigError("n must be >= 3")
    st = composite_stats(spec)
    expo = _exponent_factor(p) * 2 * st.alpha_star / (2 * st.alpha_star + st.t_star)
    e = max(_effective_dims(spec))
    # log(1) = 0 would zero the bound for trivial specs; floor the log at log 2
    pref = st.d_star ** 2 * e ** 2 * math.log(max(e, 2))
    return expo, pref, 2


def build_linear_relu(T, u) -> Mlp:
    """Exact ReLU realisation of x -> T x + u with widths (d, 2d, m).

    Uses x = relu(x) - relu(-x) coordinatewise.
    """
    T = np.atleast_2d(np.asarray(T, dtype=np.float64))
    u = np.asarray(u, dtype=np.float64).ravel()
    m, d = T.shape
    if u.size != m:
        raise ShapeError(f"u has length {u.size}, expected {m}")
    W1 = np.zeros((2 * d, d))
    W1[0::2] = np.eye(d)
    W1[1::2] = -np.eye(d)
    W2 = np.empty((m, 2 * d))
    W2[:, 0::2] = T
    W2[:, 1::2] = -T
    return Mlp([DenseLayer(W1, np.zeros(2 * d)), DenseLayer(W2, u)])


# ---------------------------------------------------------------------------
# model families
# ---------------------------------------------------------------------------

def single_index(d: int, alpha: float = 1.0, lam: float = 1.0) -> CompositeSpec:
    """g(theta . x): linear projection then one univariate map."""
    return CompositeSpec((LayerSpec.linear(d, 1), LayerSpec(1, 1, 1, alpha, lam)))


def additive(d: int, alpha: float = 1.0, lam: float = 1.0) -> CompositeSpec:
    """sum_k f_k(x_k)."""
    return CompositeSpec((LayerSpec(d, d, 1, alpha, lam), LayerSpec.linear(d, 1)))


def additive_link(d: int, alpha0: float = 1.0, alpha2: float = 1.0,
                  lam0: float = 1.0, lam2: float = 1.0) -> CompositeSpec:
    """g(sum_k f_k(x_k)) with unknown link g."""
    return CompositeSpec((LayerSpec(d, d, 1, alpha0, lam0), LayerSpec.linear(d, 1),
                          LayerSpec(1, 1, 1, alpha2, lam2)))


def interaction(d: int, d_star: int, alpha: float = 1.0, lam: float = 1.0) -> CompositeSpec:
    """Sum over all C(d, d*) subsets I of d*-variate f_I(x_I)."""
    K = math.comb(d, d_star)
    return CompositeSpec((LayerSpec(d, K, d_star, alpha, lam), LayerSpec.linear(K, 1)))


def projection_pursuit(d: int, K: int, alpha: float = 1.0, lam: float = 1.0) -> CompositeSpec:
    """sum_k g_k(theta_k . x)."""
    return CompositeSpec((LayerSpec.linear(d, K), LayerSpec(K, K, 1, alpha, lam),
                          LayerSpec.linear(K, 1)))


def _tree_sizes(Ks: Sequence[int]) -> list[int]:
    # P_m = K_1 ... K_m, P_0 = 1
    return [math.prod(Ks[:m]) for m in range(len(Ks) + 1)]


def univariate_composite(Ks: Sequence[int], d: int | None = None,
                         alphas: Sequence[float] | None = None) -> CompositeSpec:
    """Nested sums of univariate maps with branching factors K_1..K_q.

    Layers alternate univariate maps (arity 1) and summations; ``d`` defaults
    to the number of leaves K_1 ... K_q.
    """
    q = len(Ks)
    if q < 1 or min(Ks) < 1:
        raise ConfigError("need at least one branching factor, all >= 1")
    P = _tree_sizes(Ks)
    d = P[q] if d is None else d
    alphas = [1.0] * (q + 1) if alphas is None else list(alphas)
    if len(alphas) != q + 1:
        raise ConfigError(f"need {q + 1} Hoelder orders")
    layers = [LayerSpec(d, P[q], 1, alphas[0])]
    for level in range(q, 0, -1):
        layers.append(LayerSpec.linear(P[level], P[level - 1]))
        layers.append(LayerSpec(P[level - 1], P[level - 1], 1, alphas[q - level + 1]))
    return CompositeSpec(tuple(layers))


def generalized_hierarchical_interaction(d_star: int, Ks: Sequence[int], d: int | None = None,
                                         alphas: Sequence[float] | None = None) -> CompositeSpec:
    """Order-d* interaction tree of level l = len(Ks).

    Layers alternate d*-variate maps and summations; ``d`` defaults to the
    number of leaves K_1 ... K_l.
    """
    l = len(Ks)
    if l < 1 or min(Ks) < 1 or d_star < 1:
        raise ConfigError("need d* >= 1 and at least one branching factor >= 1")
    P = _tree_sizes(Ks)
    d = P[l] if d is None else d
    alphas = [1.0] * l if alphas is None else list(alphas)
    if len(alphas) != l:
        raise ConfigError(f"need {l} Hoelder orders")
    layers = []
    width_in = d
    for i, level in enumerate(range(l, 0, -1)):
        layers.append(LayerSpec(width_in, P[level], min(d_star, width_in), alphas[i]))
        layers.append(LayerSpec.linear(P[level], P[level - 1]))
        width_in = P[level - 1]
    return CompositeSpec(tuple(layers))


FAMILIES = {
    "single_index": single_index,
    "additive": additive,
    "additive_link": additive_link,
    "interaction": interaction,
    "projection_pursuit": projection_pursuit,
    "univariate_composite": univariate_composite,
    "generalized_hierarchical_interaction": generalized_hierarchical_interaction,
}
