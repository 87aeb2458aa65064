"""Dense ReLU feedforward networks with hand-written reverse-mode gradients.

All parameters of an :class:`Mlp` live in one contiguous float64 buffer; each
:class:`DenseLayer` holds views into it.  That keeps optimizer updates to a
handful of vector operations regardless of depth.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ShapeError

__all__ = [
    "DenseLayer",
    "Mlp",
    "GradientSet",
    "forward",
    "backward",
    "value_and_grad",
    "param_count",
    "size_bound",
    "init_mlp",
    "mlp_to_dict",
    "mlp_from_dict",
    "save_json",
    "load_json",
    "save_npz",
    "load_npz",
]


@dataclass
class DenseLayer:
    """Affine map ``x -> weights @ x + bias``; weights are (fan_out, fan_in)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("weights must be 2-D and bias 1-D")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"weights have {self.weights.shape[0]} rows but bias has length {self.bias.shape[0]}"
            )

    @property
    def fan_in(self) -> int:
        return self.weights.shape[1]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[0]


def _layout(shape: Sequence[int]):
    """Yield (w_slice, w_shape, b_slice) per layer for a flat parameter buffer."""
    offset = 0
    for fan_in, fan_out in zip(shape[:-1], shape[1:]):
        w_end = offset + fan_out * fan_in
        b_end = w_end + fan_out
        yield slice(offset, w_end), (fan_out, fan_in), slice(w_end, b_end)
        offset = b_end


def _views(flat: np.ndarray, shape: Sequence[int]):
    return [(flat[ws].reshape(wshape), flat[bs]) for ws, wshape, bs in _layout(shape)]


def _count(shape: Sequence[int]) -> int:
    return sum(o * (i + 1) for i, o in zip(shape[:-1], shape[1:]))


class Mlp:
    """Stack of dense layers; ReLU between layers, identity at the output.

    ``output_bound`` (B) optionally clamps the scalar output to [-B, B].
    """

    def __init__(self, layers: Sequence[DenseLayer], output_bound: float | None = None):
        layers = list(layers)
        if not layers:
            raise ShapeError("an Mlp needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].fan_in != layers[k - 1].fan_out:
                raise ShapeError(
                    f"layer {k} has fan_in {layers[k].fan_in} but layer {k - 1} "
                    f"has fan_out {layers[k - 1].fan_out}"
                )
        if output_bound is not None and not output_bound > 0:
            raise ValueError("output_bound must be positive")
        self.shape: tuple[int, ...] = (layers[0].fan_in,) + tuple(l.fan_out for l in layers)
        self.output_bound = None if output_bound is None else float(output_bound)
        self.params = np.empty(_count(self.shape), dtype=np.float64)
        self.layers: list[DenseLayer] = []
        for (w, b), src in zip(_views(self.params, self.shape), layers):
            w[...] = src.weights
            b[...] = src.bias
            layer = DenseLayer.__new__(DenseLayer)
            layer.weights, layer.bias = w, b
            self.layers.append(layer)

    @classmethod
    def from_flat(cls, shape: Sequence[int], params: np.ndarray, output_bound: float | None = None) -> "Mlp":
        shape = tuple(int(s) for s in shape)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (_count(shape),):
            raise ShapeError(f"expected {_count(shape)} parameters for shape {shape}, got {params.shape}")
        return cls([DenseLayer(w, b) for w, b in _views(params, shape)], output_bound)

    @property
    def depth(self) -> int:
        """Number of hidden layers."""
        return len(self.layers) - 1

    @property
    def width(self) -> int:
        """Largest hidden-layer width (0 for a single affine layer)."""
        return max(self.shape[1:-1], default=0)

    @property
    def n_params(self) -> int:
        return self.params.size

    def copy(self) -> "Mlp":
        return Mlp.from_flat(self.shape, self.params.copy(), self.output_bound)

    def __call__(self, X) -> np.ndarray:
        return forward(self, X)

    def __repr__(self) -> str:
        return f"Mlp(shape={self.shape}, output_bound={self.output_bound})"


class GradientSet:
    """Per-layer gradients laid out exactly like an Mlp's parameters."""

    def __init__(self, shape: Sequence[int], flat: np.ndarray | None = None):
        self.shape = tuple(shape)
        self.flat = np.zeros(_count(self.shape)) if flat is None else flat
        if self.flat.shape != (_count(self.shape),):
            raise ShapeError("flat gradient has the wrong length")
        views = _views(self.flat, self.shape)
        self.weights = [w for w, _ in views]
        self.biases = [b for _, b in views]

    def __len__(self) -> int:
        return len(self.weights)


def _check_input(mlp: Mlp, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"input must be a 2-D (n, d) array, got ndim={X.ndim}")
    if X.shape[1] != mlp.shape[0]:
        raise ShapeError(
            f"layer 0 expects {mlp.shape[0]} input columns, got {X.shape[1]}"
        )
    return X


def _forward_trace(mlp: Mlp, X: np.ndarray):
    """Return (activations, raw_output); activations[k] is the input of layer k."""
    acts = [X]
    a = X
    last = len(mlp.layers) - 1
    for k, layer in enumerate(mlp.layers):
        z = a @ layer.weights.T
        z += layer.bias
        if k < last:
            np.maximum(z, 0.0, out=z)
            acts.append(z)
        a = z
    return acts, a


def forward(mlp: Mlp, X) -> np.ndarray:
    """Evaluate the network on the rows of ``X``; returns a length-n vector.

    Networks with more than one output unit return an (n, m) matrix.
    """
    X = _check_input(mlp, X)
    _, out = _forward_trace(mlp, X)
    if mlp.output_bound is not None:
        np.clip(out, -mlp.output_bound, mlp.output_bound, out=out)
    return out[:, 0] if out.shape[1] == 1 else out


def backward(mlp: Mlp, X, dloss_dout, out: GradientSet | None = None) -> GradientSet:
    """Gradient of ``sum_i dloss_dout[i] * f(x_i)`` with respect to every parameter.

    ReLU'(0) is taken as 0.  Where the output clamp is active the gradient is 0.
    """
    X = _check_input(mlp, X)
    g = np.asarray(dloss_dout, dtype=np.float64)
    if g.ndim == 1:
        g = g[:, None]
    if g.shape != (X.shape[0], mlp.shape[-1]):
        raise ShapeError(f"dloss_dout has shape {g.shape}, expected ({X.shape[0]}, {mlp.shape[-1]})")
    if out is None:
        out = GradientSet(mlp.shape)
    elif out.shape != mlp.shape:
        raise ShapeError("GradientSet shape does not match the network")

    acts, raw = _forward_trace(mlp, X)
    _backprop(mlp, acts, raw, g, out)
    return out


def _backprop(mlp: Mlp, acts, raw, g, out: GradientSet) -> None:
    if mlp.output_bound is not None:
        g = g * (np.abs(raw) <= mlp.output_bound)
    for k in range(len(mlp.layers) - 1, -1, -1):
        np.matmul(g.T, acts[k], out=out.weights[k])
        np.sum(g, axis=0, out=out.biases[k])
        if k > 0:
            g = g @ mlp.layers[k].weights
            g *= acts[k] > 0


def value_and_grad(mlp: Mlp, X, loss_fn, out: GradientSet | None = None):
    """One forward/backward sweep for a scalar-output network.

    ``loss_fn(pred) -> (loss, dloss_dpred)`` sees the (clamped) predictions.
    Returns ``(loss, GradientSet)``.
    """
    X = _check_input(mlp, X)
    if out is None:
        out = GradientSet(mlp.shape)
    acts, raw = _forward_trace(mlp, X)
    pred = raw[:, 0]
    if mlp.output_bound is not None:
        pred = np.clip(pred, -mlp.output_bound, mlp.output_bound)
    loss, g = loss_fn(pred)
    _backprop(mlp, acts, raw, np.asarray(g, dtype=np.float64)[:, None], out)
    return loss, out


def param_count(mlp: Mlp) -> int:
    """Exact number of weights and biases."""
    return _count(mlp.shape)


def size_bound(width: int, depth: int, d_in: int) -> int:
    """Upper bound on the parameter count of any MLP with the given width/depth.

    First layer at most W(d+1), D-1 middle layers at most W^2+W each, output
    layer at most W+1.
    """
    if depth == 0:
        return d_in + 1
    return width * (d_in + 1) + (width * width + width) * (depth - 1) + width + 1


def init_mlp(
    shape: Sequence[int],
    rng: np.random.Generator,
    scheme: str = "uniform",
    output_bound: float | None = None,
) -> Mlp:
    """Random network; every weight and bias ~ U(-a, a) with a = 1/sqrt(fan_in).

    ``scheme="zeros"`` gives an all-zero network (handy for tests).
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) < 2 or min(shape) < 1:
        raise ShapeError(f"degenerate network shape {shape}")
    params = np.zeros(_count(shape))
    if scheme == "uniform":
        for (ws, _, bs), fan_in in zip(_layout(shape), shape[:-1]):
            a = 1.0 / np.sqrt(fan_in)
            params[ws] = rng.uniform(-a, a, ws.stop - ws.start)
            params[bs] = rng.uniform(-a, a, bs.stop - bs.start)
    elif scheme != "zeros":
        raise ValueError(f"unknown init scheme {scheme!r}")
    return Mlp.from_flat(shape, params, output_bound)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def mlp_to_dict(mlp: Mlp) -> dict:
    """JSON-ready dict; floats are stored as shortest round-trip decimal strings."""
    return {
        "format": "deepqr-mlp",
        "shape": list(mlp.shape),
        "output_bound": None if mlp.output_bound is None else repr(mlp.output_bound),
        "layers": [
            {
                "weights": [[repr(float(v)) for v in row] for row in layer.weights],
                "bias": [repr(float(v)) for v in layer.bias],
            }
            for layer in mlp.layers
        ],
    }


def mlp_from_dict(doc: dict) -> Mlp:
    if doc.get("format") != "deepqr-mlp":
        raise ValueError("not a deepqr-mlp document")
    layers = [
        DenseLayer(
            np.array([[float(v) for v in row] for row in spec["weights"]], dtype=np.float64),
            np.array([float(v) for v in spec["bias"]], dtype=np.float64),
        )
        for spec in doc["layers"]
    ]
    bound = doc.get("output_bound")
    mlp = Mlp(layers, None if bound is None else float(bound))
    if list(mlp.shape) != list(doc["shape"]):
        raise ShapeError("layer arrays disagree with the declared shape")
    return mlp


def save_json(mlp: Mlp, path) -> None:
    Path(path).write_text(json.dumps(mlp_to_dict(mlp)))


def load_json(path) -> Mlp:
    return mlp_from_dict(json.loads(Path(path).read_text()))


def save_npz(mlp: Mlp, path) -> None:
    bound = np.nan if mlp.output_bound is None else mlp.output_bound
    np.savez(path, shape=np.array(mlp.shape, dtype=np.int64), params=mlp.params, output_bound=np.float64(bound))


def load_npz(path) -> Mlp:
    with np.load(path) as data:
        bound = float(data["output_bound"])
        return Mlp.from_flat(data["shape"], data["params"].copy(), None if np.isnan(bound) else bound)
