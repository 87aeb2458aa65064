import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from deepqr.datagen import (
    ExpHetero,
    Linear1D,
    ScaledT3,
    SineHetero,
    Triangle,
    Wave,
    derive_rng,
    make_error,
    sample,
)
from deepqr.errors import ShapeError
from deepqr.oracle import QuantileOracle, conditional_quantile, normal_inv_cdf, t3_cdf, t3_inv_cdf

UNIVARIATE = [(m, e) for m in (Linear1D(), Wave(), Triangle()) for e in (ScaledT3(), SineHetero(), ExpHetero())]
TAUS = (0.05, 0.25, 0.5, 0.75, 0.95)


def bisect(f, target, lo=-60.0, hi=60.0):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) < target else (lo, mid)
    return 0.5 * (lo + hi)


def phi(x):
    return 0.5 * math.erfc(-x / math.sqrt(2))


def t3_closed_form(x):
    return 0.5 + (x / (math.sqrt(3) * (1 + x * x / 3)) + math.atan(x / math.sqrt(3))) / math.pi


class TestInverseCdfs:
    def test_normal_values(self):
        assert normal_inv_cdf(0.5) == 0.0
        assert normal_inv_cdf(0.975) == pytest.approx(1.959964, abs=1e-6)
        assert normal_inv_cdf(0.75) == pytest.approx(0.674490, abs=1e-6)

    def test_t3_values(self):
        assert t3_inv_cdf(0.5) == 0.0
        assert t3_inv_cdf(0.95) == pytest.approx(2.353363, abs=1e-4)

    @pytest.mark.parametrize("p", np.linspace(0.001, 0.999, 37))
    def test_normal_against_bisection(self, p):
        assert normal_inv_cdf(p) == pytest.approx(bisect(phi, p), abs=1e-9)

    @pytest.mark.parametrize("p", np.linspace(0.001, 0.999, 37))
    def test_t3_against_bisection(self, p):
        assert t3_inv_cdf(p) == pytest.approx(bisect(t3_closed_form, p, -1e3, 1e3), abs=1e-9)

    def test_t3_cdf_closed_form(self):
        for x in (-7.0, -1.0, 0.0, 0.3, 12.0):
            assert float(t3_cdf(x)) == pytest.approx(t3_closed_form(x), abs=1e-15)

    @given(st.floats(1e-8, 1 - 1e-8))
    def test_t3_round_trip(self, p):
        assert abs(float(t3_cdf(t3_inv_cdf(p))) - p) <= 1e-10

    @given(st.floats(1e-6, 0.5))
    def test_t3_antisymmetric(self, p):
        assert t3_inv_cdf(p) == pytest.approx(-t3_inv_cdf(1 - p), rel=1e-9)  # 1 - p is rounded

    def test_far_tail_expands_bracket(self):
        q = t3_inv_cdf(1e-12)
        assert q < -50 and float(t3_cdf(q)) == pytest.approx(1e-12, rel=1e-8)

    @pytest.mark.parametrize("p", [0.0, 1.0, -1.0, 2.0])
    def test_domain(self, p):
        with pytest.raises(ValueError):
            normal_inv_cdf(p)
        with pytest.raises(ValueError):
            t3_inv_cdf(p)


class TestConditionalQuantile:
    def test_wave_sine_median(self):
        o = QuantileOracle(Wave(), SineHetero())
        assert conditional_quantile(o, 0.5, 0.3) == pytest.approx(0.6 * math.sin(1.2 * math.pi), abs=1e-12)
        assert conditional_quantile(o, 0.5, 0.3) == pytest.approx(-0.352671, abs=1e-6)

    @pytest.mark.parametrize("model", [Linear1D(), Wave(), Triangle()])
    def test_exp_upper_quartile(self, model):
        o = QuantileOracle(model, ExpHetero())
        f0 = float(model([0.5])[0])
        assert conditional_quantile(o, 0.75, 0.5) == pytest.approx(f0 + 0.337245, abs=1e-6)

    def test_linear_t3(self):
        o = QuantileOracle(Linear1D(), ScaledT3())
        assert conditional_quantile(o, 0.95, 1.0) == pytest.approx(3.176681, abs=1e-6)

    def test_vectorised(self):
        o = QuantileOracle(Wave(), ExpHetero())
        X = np.linspace(0, 1, 5)[:, None]
        q = o(0.25, X)
        assert q.shape == (5,)
        np.testing.assert_allclose(q, [conditional_quantile(o, 0.25, x[0]) for x in X])

    def test_multivariate(self):
        from deepqr.datagen import SingleIndex

        o = QuantileOracle(SingleIndex(), make_error("sine", 6))
        assert isinstance(conditional_quantile(o, 0.5, np.full(6, 0.5)), float)
        with pytest.raises(ShapeError):
            conditional_quantile(o, 0.5, np.ones((2, 3)))

    def test_dimension_mismatch(self):
        from deepqr.datagen import Additive

        with pytest.raises(ShapeError):
            QuantileOracle(Additive(), SineHetero())

    @pytest.mark.parametrize("model, error", UNIVARIATE)
    def test_monotone_in_tau(self, model, error):
        o = QuantileOracle(model, error)
        x = np.linspace(0, 1, 51)[:, None]
        Q = np.stack([o(t, x) for t in np.linspace(0.01, 0.99, 25)])
        assert np.all(np.diff(Q, axis=0) >= 0)

    @pytest.mark.parametrize("model, error", UNIVARIATE)
    def test_coverage(self, model, error):
        n = 100_000
        d = sample(model, error, n, derive_rng(17, 0))
        o = QuantileOracle(model, error)
        for tau in TAUS:
            frac = np.mean(d.y <= o(tau, d.X))
            assert abs(frac - tau) <= 3 * math.sqrt(tau * (1 - tau) / n)

    @pytest.mark.parametrize("model, error", UNIVARIATE[:3])
    def test_risk_optimality(self, model, error):
        d = sample(model, error, 100_000, derive_rng(23, 0))
        o = QuantileOracle(model, error)
        for tau in (0.25, 0.5, 0.75):
            q = o(tau, d.X)
            risk = lambda f: np.mean((d.y - f) * (tau - (d.y - f <= 0)))
            base = risk(q)
            for delta in (-0.5, -0.1, 0.1, 0.5):
                assert base <= risk(q + delta)

    def test_matches(self):
        o = QuantileOracle(Wave(), SineHetero())
        assert o.matches(sample(Wave(), SineHetero(), 3, derive_rng(0)))
        assert not o.matches(sample(Wave(), ExpHetero(), 3, derive_rng(0)))
