import numpy as np
import pytest

from deepqr.baselines import AffineModel, fit_dls, fit_linear_qr
from deepqr.datagen import Dataset, Linear1D, ScaledT3, SineHetero, Wave, derive_rng, sample
from deepqr.errors import ConfigError, DivergenceError, ShapeError
from deepqr.harness import fit_dqr
from deepqr.loss import TrainConfig
from deepqr.metrics import evaluate, l1_distance
from deepqr.net import forward, init_mlp
from deepqr.oracle import QuantileOracle

DESK = (1, 64, 64, 64, 1)


@pytest.fixture(scope="module")
def wave_t3_test():
    return sample(Wave(), ScaledT3(), 100_000, derive_rng(99, 1))


class TestAffineModel:
    def test_call(self):
        m = AffineModel([2.0, -1.0], 0.5)
        np.testing.assert_array_equal(m(np.array([[1.0, 1.0], [0.0, 2.0]])), [1.5, -1.5])

    def test_mlp_round_trip(self):
        m = AffineModel([3.0], -1.0)
        back = AffineModel.from_mlp(m.to_mlp())
        assert back == m or (np.array_equal(back.slope, m.slope) and back.intercept == m.intercept)
        np.testing.assert_array_equal(forward(m.to_mlp(), [[2.0]]), [5.0])

    def test_non_finite(self):
        with pytest.raises(DivergenceError):
            AffineModel([np.nan], 0.0)

    def test_shape(self):
        with pytest.raises(ShapeError):
            AffineModel([1.0, 2.0], 0.0)(np.zeros((3, 3)))
        with pytest.raises(ShapeError):
            AffineModel.from_mlp(init_mlp((1, 3, 1), np.random.default_rng(0)))


class TestLinearQR:
    def noiseless(self):
        x = np.linspace(0, 1, 200)[:, None]
        return Dataset(x, 2 * x[:, 0])

    @pytest.mark.parametrize("solver", ["adam", "lp"])
    def test_noiseless_line(self, solver):
        m = fit_linear_qr(self.noiseless(), 0.5, TrainConfig(), np.random.default_rng(0), solver)
        assert abs(m.slope[0] - 2) <= 0.05 and abs(m.intercept) <= 0.05

    def test_noisy_slope(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(size=(10_000, 1))
        y = 2 * x[:, 0] + 0.5 * rng.standard_normal(10_000)
        m = fit_linear_qr(Dataset(x, y), 0.5, TrainConfig(), rng)
        assert abs(m.slope[0] - 2) <= 0.1

    def test_lp_and_adam_agree(self):
        d = sample(Wave(), SineHetero(), 512, derive_rng(0, 0))
        a = fit_linear_qr(d, 0.25, TrainConfig(), derive_rng(0, 2))
        b = fit_linear_qr(d, 0.25, solver="lp")
        np.testing.assert_allclose([a.slope[0], a.intercept], [b.slope[0], b.intercept], atol=0.01)

    def test_recovery_across_seeds(self):
        # true model y = 1 - 3 x1 + 0.5 x2 + N(0, 1); median regression
        for seed in range(10):
            rng = np.random.default_rng(seed)
            n = 2000
            X = rng.uniform(size=(n, 2))
            y = 1 - 3 * X[:, 0] + 0.5 * X[:, 1] + rng.standard_normal(n)
            m = fit_linear_qr(Dataset(X, y), 0.5, solver="lp")
            band = 6 / np.sqrt(n) * np.sqrt(np.pi / 2) * np.sqrt(12)  # 3 SE of a slope, loose
            np.testing.assert_allclose(m.slope, [-3, 0.5], atol=band)
            assert abs(m.intercept - 1) <= band

    def test_wave_l1_matches_reference(self, wave_t3_test):
        o = QuantileOracle(Wave(), ScaledT3())
        d = sample(Wave(), ScaledT3(), 512, derive_rng(0, 0))
        m = fit_linear_qr(d, 0.5, TrainConfig(), derive_rng(0, 2))
        assert l1_distance(m, o, wave_t3_test.X, 0.5) == pytest.approx(0.581, abs=0.02)

    @pytest.mark.xfail(strict=True, reason="reference excess risk for this cell is not reproducible; "
                                           "paired estimate is about 0.145 while L1/L2 agree with the table")
    def test_wave_excess_matches_reference(self, wave_t3_test):
        o = QuantileOracle(Wave(), ScaledT3())
        d = sample(Wave(), ScaledT3(), 512, derive_rng(0, 0))
        m = fit_linear_qr(d, 0.5, TrainConfig(), derive_rng(0, 2))
        assert evaluate(m, o, wave_t3_test, 0.5).excess_risk == pytest.approx(0.24, abs=0.05)

    def test_needs_enough_rows(self):
        with pytest.raises(ConfigError):
            fit_linear_qr(Dataset(np.zeros((2, 1)), np.zeros(2)), 0.5)

    def test_unknown_solver(self):
        with pytest.raises(ConfigError):
            fit_linear_qr(self.noiseless(), 0.5, solver="simplex")


class TestDLS:
    def test_constant(self):
        x = np.linspace(0, 1, 100)[:, None]
        mlp = fit_dls(Dataset(x, np.full(100, -1.5)), (1, 8, 1), TrainConfig(epochs=300), np.random.default_rng(0))
        grid = np.linspace(0, 1, 201)[:, None]
        assert np.max(np.abs(forward(mlp, grid) + 1.5)) <= 0.05

    def test_noiseless_training_mse(self):
        x = np.linspace(0, 1, 256)[:, None]
        y = Wave()(x)
        mlp = fit_dls(Dataset(x, y), (1, 32, 32, 1), TrainConfig(epochs=2000), np.random.default_rng(1))
        assert np.mean((forward(mlp, x) - y) ** 2) <= 1e-2 * np.var(y)

    def test_wave_sine_l1(self):
        o = QuantileOracle(Wave(), SineHetero())
        d = sample(Wave(), SineHetero(), 512, derive_rng(0, 0))
        mlp = fit_dls(d, DESK, TrainConfig(), derive_rng(0, 2, 2, 0))
        X = np.linspace(0, 1, 10_001)[:, None]
        assert l1_distance(lambda Z: forward(mlp, Z), o, X, 0.5) == pytest.approx(0.082, abs=0.06)

    def test_mean_equals_median_under_symmetry(self):
        o = QuantileOracle(Linear1D(), ScaledT3())
        d = sample(Linear1D(), ScaledT3(), 512, derive_rng(1, 0))
        X = np.linspace(0, 1, 10_001)[:, None]
        dls = fit_dls(d, DESK, TrainConfig(), derive_rng(1, 2, 2, 0))
        dqr = fit_dqr(d, 0.5, DESK, TrainConfig(), derive_rng(1, 2, 0, 0))
        a = l1_distance(lambda Z: forward(dls, Z), o, X, 0.5)
        b = l1_distance(lambda Z: forward(dqr, Z), o, X, 0.5)
        assert 0.5 <= a / b <= 2.0
