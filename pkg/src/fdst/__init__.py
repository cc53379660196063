"""Forecasting toolkit for dynamic spatio-temporal fields: a Fourier
neural operator mean map with a heteroscedastic Gaussian error model,
plus the simulation, baseline, and evaluation machinery around it."""

from .burgers import BurgersConfig, Dataset, MaternConfig, generate_dataset, load_dataset
from .evaluate import MetricReport, evaluate, mpiw, mspe, persistence_forecast, picp
from .fno import FnoConfig, FnoParams, HistoryWindow, fno_backward, fno_forward, init_params
from .green_ide import GammaParams, build_propagator, green_kernel, ide_forecast
from .likelihood import (
    CovParams,
    ForecastDist,
    forecast_distribution,
    gaussian_nll,
    prediction_interval,
    stddev_field,
)
from .train import TrainConfig, load_checkpoint, make_windows, save_checkpoint, train

__version__ = "0.1.0"
