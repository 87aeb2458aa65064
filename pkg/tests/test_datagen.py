import math

import numpy as np
import pytest

from deepqr.datagen import (
    THETA,
    XI,
    Additive,
    Dataset,
    ExpHetero,
    Linear1D,
    ScaledT3,
    SineHetero,
    SingleIndex,
    Triangle,
    Wave,
    derive_rng,
    error_sd,
    f0_eval,
    make_error,
    make_model,
    sample,
    sample_t3,
)
from deepqr.errors import ShapeError

N = 100_000


def ks_uniform(u):
    u = np.sort(u)
    n = u.size
    i = np.arange(1, n + 1)
    return max(np.max(i / n - u), np.max(u - (i - 1) / n))


class TestRegressionFunctions:
    def test_wave(self):
        assert f0_eval(Wave(), [0.125]) == pytest.approx(0.25, abs=1e-15)

    def test_triangle_apex(self):
        assert f0_eval(Triangle(), 0.5) == 4.0

    def test_additive_centre(self):
        assert f0_eval(Additive(), [0.5] * 6) == pytest.approx(1.0, abs=1e-14)

    def test_linear(self):
        np.testing.assert_array_equal(Linear1D()([0.0, 0.5, 1.0]), [0.0, 1.0, 2.0])

    def test_single_index(self):
        x = np.full(6, 0.5)
        assert f0_eval(SingleIndex(), x) == pytest.approx(math.exp(0.5 * sum(THETA)))

    def test_wrong_dimension(self):
        with pytest.raises(ShapeError):
            f0_eval(Additive(), [0.5, 0.5])

    def test_registry(self):
        assert isinstance(make_model("wave"), Wave)
        with pytest.raises(ValueError):
            make_model("sinc")


class TestErrorModels:
    def test_sine_sd(self):
        assert error_sd(SineHetero(), 0.5) == pytest.approx(0.5)

    def test_exp_sd(self):
        assert error_sd(ExpHetero(), 0.5) == pytest.approx(0.5)
        assert error_sd(ExpHetero(), 1.0) == pytest.approx(0.5 * math.e, abs=1e-5)
        assert error_sd(ExpHetero(), 1.0) == pytest.approx(1.35914, abs=1e-5)

    def test_multivariate_index(self):
        e = make_error("exp", 6)
        x = np.linspace(0, 1, 6)
        assert e.xi == XI
        assert error_sd(e, x) == pytest.approx(0.5 * math.exp(2 * np.dot(XI, x) - 1))

    def test_t3_has_no_sd(self):
        with pytest.raises(TypeError):
            error_sd(ScaledT3(), 0.5)

    def test_xi_validation(self):
        with pytest.raises(ShapeError):
            make_error("sine", 1, xi=(1.0,))
        with pytest.raises(ShapeError):
            make_error("sine", 6, xi=(1.0, 2.0))
        with pytest.raises(ValueError):
            make_error("t3", 1, xi=(1.0,))
        with pytest.raises(ValueError):
            make_error("laplace")


class TestSample:
    def test_deterministic(self):
        a = sample(Wave(), SineHetero(), 50, derive_rng(3, 0, 0))
        b = sample(Wave(), SineHetero(), 50, derive_rng(3, 0, 0))
        assert a == b

    def test_streams_differ(self):
        a = sample(Wave(), SineHetero(), 50, derive_rng(3, 0, 0))
        b = sample(Wave(), SineHetero(), 50, derive_rng(3, 1, 0))
        assert not np.array_equal(a.y, b.y)

    def test_zero_mean_error(self):
        d = sample(Linear1D(), SineHetero(), N, derive_rng(1, 0))
        r = d.y - 2 * d.X[:, 0]
        assert abs(r.mean()) <= 3 * r.std() / math.sqrt(N)

    def test_t3_median_and_tail(self):
        eta = 0.5 * sample_t3(N, derive_rng(2, 0))
        p = 0.5
        # SE of the sample median: sqrt(p(1-p)/n) / density(0); 0.5 t3 density at 0 is 2 * 0.36755
        assert abs(np.median(eta)) <= 3 * math.sqrt(p * (1 - p) / N) / (2 * 0.3675525969)
        frac = np.mean(eta <= 1.1767)
        assert abs(frac - 0.95) <= 3 * math.sqrt(0.95 * 0.05 / N)

    @pytest.mark.parametrize("model", [Wave(), Additive()])
    def test_uniform_marginals(self, model):
        err = make_error("t3", model.dim)
        d = sample(model, err, N, derive_rng(4, 0))
        crit = 1.628 / math.sqrt(N)  # 1% level
        for j in range(model.dim):
            assert ks_uniform(d.X[:, j]) < crit

    def test_heteroscedastic_window(self):
        d = sample(Linear1D(), SineHetero(), N, derive_rng(5, 0))
        m = (d.X[:, 0] >= 0.45) & (d.X[:, 0] <= 0.55)
        r = d.y[m] - 2 * d.X[m, 0]
        assert abs(r.std() - 0.5) <= 0.05

    def test_dataset_carries_generators(self):
        d = sample(Wave(), ExpHetero(), 5, derive_rng(0))
        assert d.model == Wave() and d.error == ExpHetero() and d.dim == 1 and len(d) == 5

    def test_n_must_be_positive(self):
        with pytest.raises(ValueError):
            sample(Wave(), ScaledT3(), 0, derive_rng(0))

    def test_multivariate_requires_xi(self):
        with pytest.raises(ShapeError):
            sample(Additive(), SineHetero(), 5, derive_rng(0))


class TestCsv:
    def test_round_trip(self, tmp_path):
        d = sample(Additive(), make_error("sine", 6), 20, derive_rng(9))
        d.to_csv(tmp_path / "d.csv")
        back = Dataset.from_csv(tmp_path / "d.csv")
        np.testing.assert_array_equal(back.X, d.X)
        np.testing.assert_array_equal(back.y, d.y)
        header = (tmp_path / "d.csv").read_text().splitlines()[0]
        assert header == "x1,x2,x3,x4,x5,x6,y"
