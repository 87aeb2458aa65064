"""Training-free sanity checks behind ``deepqr verify``."""
from __future__ import annotations

from typing import Callable, Iterator

import numpy as np

from . import planner
from .metrics import DiscreteDistribution, verify_erm_decomposition
from .net import backward, forward, init_mlp, param_count
from .oracle import normal_cdf, normal_inv_cdf, t3_cdf, t3_inv_cdf


def bisect(f: Callable[[float], float], target: float, lo: float, hi: float, iters: int = 200) -> float:
    """Root of f(x) = target for nondecreasing f on [lo, hi]."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _check_normal():
    grid = np.linspace(0.001, 0.999, 199)
    err = max(abs(normal_inv_cdf(p) - bisect(normal_cdf, p, -10, 10)) for p in grid)
    return err <= 1e-9, f"max |inv - bisection| = {err:.2e} over 199 levels"


def _check_t3():
    grid = np.linspace(0.001, 0.999, 199)
    err = max(abs(t3_cdf(t3_inv_cdf(p)) - p) for p in grid)
    q95 = t3_inv_cdf(0.95)
    ok = err <= 1e-10 and abs(q95 - 2.353363) <= 1e-4
    return ok, f"max |F(inv) - tau| = {err:.2e}; t3 quantile(0.95) = {q95:.6f}"


def _check_linear_relu(rng):
    worst = 0.0
    for _ in range(200):
        d, m = rng.integers(1, 9, size=2)
        T, u = rng.standard_normal((m, d)), rng.standard_normal(m)
        X = rng.standard_normal((50, d))
        net = planner.build_linear_relu(T, u)
        out = forward(net, X).reshape(50, -1)
        worst = max(worst, float(np.max(np.abs(out - (X @ T.T + u)))))
    return worst <= 1e-12, f"max abs error {worst:.2e} over 200 random maps"


def _check_planner():
    got = [
        (planner.plan(planner.single_index(6), 1, 1).width, planner.plan(planner.single_index(6), 1, 1).depth),
        (planner.plan(planner.additive(6), 1, 2).width, planner.plan(planner.additive(6), 1, 2).depth),
        planner.plan(planner.additive_link(6), 1, 1).depth,
    ]
    want = [(20, 29), (120, 41), 56]
    return got == want, f"got {got}, want {want}"


def _check_gradient(rng):
    worst = 0.0
    for _ in range(10):
        net = init_mlp((3, 5, 4, 1), rng)
        X = rng.standard_normal((4, 3))
        g = rng.standard_normal(4)
        grads = backward(net, X, g)
        base = net.params.copy()
        for k in rng.choice(net.n_params, size=10, replace=False):
            h = 1e-5
            net.params[k] = base[k] + h
            fp = float(g @ forward(net, X))
            net.params[k] = base[k] - h
            fm = float(g @ forward(net, X))
            net.params[k] = base[k]
            fd = (fp - fm) / (2 * h)
            worst = max(worst, abs(fd - grads.flat[k]) / max(1.0, abs(fd)))
    return worst <= 1e-4, f"max relative deviation {worst:.2e}"


def _check_param_count():
    c = param_count(init_mlp((1, 256, 256, 256, 256, 1), np.random.default_rng(0), "zeros"))
    return c == 198145, f"(1,256x4,1) has {c} parameters"


def _check_decomposition(rng):
    bad = 0
    for _ in range(100):
        x = np.repeat(np.arange(2.0), 2)
        y = rng.normal(size=4)
        p = rng.dirichlet(np.ones(4))
        pop = DiscreteDistribution(x, y, p)
        cands = [(lambda X, c=c: np.full(len(X), c)) for c in rng.normal(size=5)]
        sample = pop.sample(int(rng.integers(1, 30)), rng)
        bad += not verify_erm_decomposition(cands, pop, sample, 0.3).holds
    return bad == 0, f"{bad} violations in 100 trials"


def run_all(seed: int = 0) -> Iterator[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    checks = [
        ("normal quantile", _check_normal),
        ("t3 quantile", _check_t3),
        ("exact linear ReLU network", lambda: _check_linear_relu(rng)),
        ("planner shapes", _check_planner),
        ("backward vs finite differences", lambda: _check_gradient(rng)),
        ("parameter count", _check_param_count),
        ("ERM decomposition bound", lambda: _check_decomposition(rng)),
    ]
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        yield name, bool(ok), detail
