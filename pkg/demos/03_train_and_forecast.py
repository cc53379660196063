"""Train a small model end to end and issue a probabilistic forecast.

Kept deliberately tiny so it finishes in well under a minute; scale n,
instances, and epochs up for anything serious.

Run:  python demos/03_train_and_forecast.py
"""

import numpy as np

from fdst import (
    BurgersConfig,
    FnoConfig,
    HistoryWindow,
    TrainConfig,
    forecast_distribution,
    generate_dataset,
    make_windows,
    prediction_interval,
    train,
)

ds = generate_dataset(
    BurgersConfig(n=64, T_model=8, delta=0.1, gamma_mode="fixed", gamma_fixed=0.1),
    N=6,
    seed=1,
    n_train=5,
)

fno_cfg = FnoConfig(n=64, tau=2, h=1, delta=0.1, dv=8, L=2, modes_space=8, modes_time=2)
train_cfg = TrainConfig(lr=1e-3, batch=8, epochs=10, seed=1, warmup_mse_epochs=3)

theta, alpha, log = train(ds, fno_cfg, train_cfg, cov_hidden=16, alpha_r_init=0.05)
for rec in log.records:
    print("epoch %2d  mse %.4e  nll %s" % (rec["epoch"], rec["mse"], rec["nll"]))

# forecast the last usable window of the held-out instance
held_out = ds.series[-1]
w = make_windows(type(ds)(series=[held_out], cfg=ds.cfg, seed=0), fno_cfg.tau, fno_cfg.h)[-1]
dist = forecast_distribution(w, theta, alpha, fno_cfg)
lo, hi = prediction_interval(dist, 0.95)

err = np.sqrt(np.mean((dist.mean - w.target) ** 2))
covered = np.mean((w.target >= lo) & (w.target <= hi))
print("\nheld-out window: rmse %.4f, 95%% interval coverage %.2f" % (err, covered))
print("mean interval width %.4f" % np.mean(hi - lo))
