"""Deep quantile regression laboratory.

ReLU networks trained with the check loss, an architecture planner for
composite targets, analytic conditional-quantile oracles, and a seeded
simulation harness.
"""
from .baselines import AffineModel, fit_dls, fit_linear_qr
from .datagen import Dataset, derive_rng, make_error, make_model, sample
from .errors import ConfigError, ConvergenceError, DeepQRError, DivergenceError, ShapeError
from .harness import AggregateReport, Scenario, emit_curves, emit_table, run_scenario
from .loss import AdamConfig, Pinball, Squared, TrainConfig, pinball, train
from .metrics import MetricSet, evaluate, excess_risk
from .net import Mlp, backward, forward, init_mlp, param_count
from .oracle import QuantileOracle, conditional_quantile, normal_inv_cdf, t3_inv_cdf
from .planner import CompositeSpec, LayerSpec, NetworkPlan, build_linear_relu, plan, preset_plan

__version__ = "0.1.0"
