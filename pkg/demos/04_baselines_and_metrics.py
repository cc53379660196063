"""Compare the analytic diffusion-kernel forecaster and persistence on data
where the analytic model is (nearly) correct: low-amplitude fields that
evolve almost linearly.

Run:  python demos/04_baselines_and_metrics.py
"""

import numpy as np

from fdst import BurgersConfig, Dataset, GammaParams, MaternConfig, build_propagator, generate_dataset, ide_forecast, make_windows
from fdst.evaluate import evaluate, persistence_forecast

# tiny amplitude: advection is negligible and the dynamics reduce to heat
# flow, which the Green's-function propagator reproduces exactly
gamma = 0.02
ds = generate_dataset(
    BurgersConfig(
        n=128,
        T_model=8,
        delta=0.1,
        gamma_mode="fixed",
        gamma_fixed=gamma,
        ic=MaternConfig(variance=1e-6, lengthscale=0.3, smoothness=2.0),
    ),
    N=6,
    seed=2,
)

h = 2
prop = build_propagator(128, h * 0.1, GammaParams(0.0, gamma))

windows_per_instance = [
    make_windows(Dataset(series=[fs], cfg=ds.cfg, seed=0), 0, h) for fs in ds.series
]

report = evaluate(
    {
        "green-kernel": lambda w: (ide_forecast(w.frames[-1], prop), None, None),
        "persistence": lambda w: (persistence_forecast(w), None, None),
    },
    windows_per_instance,
)

print(report.to_table())
ratio = report.models["green-kernel"].mspe / report.models["persistence"].mspe
print("\nanalytic kernel vs persistence MSPE ratio: %.3g" % ratio)
assert ratio < 1.0
