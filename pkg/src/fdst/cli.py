"""Command-line front end: simulate | train | forecast | evaluate |
gradcheck | selftest.

Exit codes: 0 success, 1 selftest failure, 2 usage or configuration error,
3 I/O error, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import io as fio
from .burgers import BurgersConfig, Dataset, MaternConfig, generate_dataset, load_dataset
from .evaluate import evaluate as run_evaluate
from .evaluate import persistence_forecast
from .fno import FnoConfig, fno_backward, fno_forward, init_params
from .green_ide import GammaParams, build_propagator, ide_forecast
from .likelihood import forecast_distribution, init_cov_params, prediction_interval
from .train import TrainConfig, load_checkpoint, make_windows, save_checkpoint, train

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DIVERGED = 4

FAULT_ENV = "FDST_FAULT"


def _load_cfg(path):
    if path is None:
        return dict(fio.CONFIG_DEFAULTS)
    return fio.load_config(path)


def _burgers_cfg(cfg: dict) -> BurgersConfig:
    return BurgersConfig(
        n=cfg["grid.n"],
        T_model=cfg["data.T"],
        delta=cfg["data.delta"],
        gamma_mode=cfg["data.gamma_mode"],
        gamma_fixed=cfg["data.gamma_fixed"],
        gamma_lo=cfg["data.gamma_lo"],
        gamma_hi=cfg["data.gamma_hi"],
        ic=MaternConfig(
            variance=cfg["ic.variance"],
            lengthscale=cfg["ic.lengthscale"],
            smoothness=cfg["ic.nu"],
        ),
    )


def _fno_cfg(cfg: dict) -> FnoConfig:
    return FnoConfig(
        n=cfg["grid.n"],
        tau=cfg["model.tau"],
        h=cfg["model.h"],
        delta=cfg["data.delta"],
        dv=cfg["model.dv"],
        L=cfg["model.layers"],
        modes_space=cfg["model.modes_space"],
        modes_time=cfg["model.modes_time"],
    )


def _train_cfg(cfg: dict, seed_override=None) -> TrainConfig:
    return TrainConfig(
        lr=cfg["train.lr"],
        batch=cfg["train.batch"],
        epochs=cfg["train.epochs"],
        seed=cfg["seed"] if seed_override is None else seed_override,
        warmup_mse_epochs=cfg["train.warmup_mse_epochs"],
        grad_clip=cfg["train.grad_clip"],
    )


def cmd_simulate(args) -> int:
    cfg = _load_cfg(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    ds = generate_dataset(
        _burgers_cfg(cfg),
        N=cfg["data.instances"],
        seed=cfg["seed"],
        n_train=cfg["data.instances"] - cfg["data.test_instances"]
        if cfg["data.test_instances"]
        else None,
    )
    ds.save(args.out or "dataset")
    print("wrote %d instances to %s" % (ds.n_instances, args.out or "dataset"))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_cfg(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.data is None:
        print("train requires --data", file=sys.stderr)
        return EXIT_USAGE
    ds = load_dataset(args.data)
    if ds.cfg.n != cfg["grid.n"] or ds.cfg.T_model != cfg["data.T"]:
        print("config/dataset mismatch: grid or T differ", file=sys.stderr)
        return EXIT_USAGE
    fno_cfg = _fno_cfg(cfg)
    tcfg = _train_cfg(cfg)
    out = Path(args.out or "model.ckpt")
    theta = alpha = None
    if args.checkpoint:
        theta, alpha, _, _ = load_checkpoint(args.checkpoint, expect_fno_cfg=fno_cfg)
    log_path = Path(str(out) + ".log.jsonl")
    if log_path.exists():
        log_path.unlink()
    theta, alpha, log = train(
        ds,
        fno_cfg,
        tcfg,
        cov_hidden=cfg["cov.hidden"],
        alpha_r_init=cfg["cov.alpha_r_init"],
        theta=theta,
        alpha=alpha,
        log_path=log_path,
    )
    save_checkpoint(theta, alpha, None, out, fno_cfg, tcfg)
    final = log.records[-1] if log.records else {}
    print("trained: final mse %s nll %s -> %s" % (final.get("mse"), final.get("nll"), out))
    return EXIT_OK


def cmd_forecast(args) -> int:
    if args.checkpoint is None or args.data is None:
        print("forecast requires --checkpoint and --data", file=sys.stderr)
        return EXIT_USAGE
    theta, alpha, _, fno_cfg = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    tau, h = fno_cfg.tau, fno_cfg.h
    T = ds.cfg.T_model
    if not (0 <= args.instance < ds.n_instances):
        print("instance out of range [0, %d)" % ds.n_instances, file=sys.stderr)
        return EXIT_USAGE
    k = args.k
    if not (tau + 1 <= k <= T - h):
        print(
            "window anchor k=%d outside valid range [%d, %d]" % (k, tau + 1, T - h),
            file=sys.stderr,
        )
        return EXIT_USAGE
    from .fno import HistoryWindow

    vals = ds.series[args.instance].values
    w = HistoryWindow(frames=vals[k - 1 - tau : k], target=vals[k - 1 + h])
    dist = forecast_distribution(w, theta, alpha, fno_cfg, keep_cov=False)
    lo, hi = prediction_interval(dist, 0.95)
    out = Path(args.out or "forecast")
    out.mkdir(parents=True, exist_ok=True)
    fio.write_tensor(out / "mean.fdst", dist.mean)
    fio.write_tensor(out / "sigma.fdst", dist.sigma)
    fio.write_tensor(out / "lower.fdst", lo)
    fio.write_tensor(out / "upper.fdst", hi)
    summary = {
        "instance": args.instance,
        "k": k,
        "h": h,
        "tau": tau,
        "level": 0.95,
        "n": fno_cfg.n,
    }
    (out / "forecast.json").write_bytes(fio.dump_json(summary))
    print("forecast written to %s" % out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.checkpoint is None or args.data is None:
        print("evaluate requires --checkpoint and --data", file=sys.stderr)
        return EXIT_USAGE
    ds = load_dataset(args.data)
    if ds.n_train is None:
        print("dataset has no test split", file=sys.stderr)
        return EXIT_USAGE
    theta, alpha, _, fno_cfg = load_checkpoint(args.checkpoint)
    _, test_series = ds.train_test()
    tau, h = fno_cfg.tau, fno_cfg.h
    windows_per_instance = []
    gammas = []
    for fs in test_series:
        sub = Dataset(series=[fs], cfg=ds.cfg, seed=ds.seed)
        windows_per_instance.append(make_windows(sub, tau, h))
        gammas.append(fs.gamma)

    def fc_model(w):
        dist = forecast_distribution(w, theta, alpha, fno_cfg, keep_cov=False)
        lo, hi = prediction_interval(dist, 0.95)
        return dist.mean, lo, hi

    def fc_persist(w):
        return persistence_forecast(w), None, None

    forecasters = {"fno-dst": fc_model, "persistence": fc_persist}

    # diffusion-kernel baseline when the viscosity is recorded and the
    # kernel is wide enough to resolve on this grid
    try:
        props = [
            build_propagator(fno_cfg.n, h * fno_cfg.delta, GammaParams(0.0, g)) for g in gammas
        ]
        windows_flat_gamma = []
        for wi, inst in enumerate(windows_per_instance):
            windows_flat_gamma += [wi] * len(inst)
        counter = {"i": 0}

        def fc_ide(w):
            prop = props[windows_flat_gamma[counter["i"]]]
            counter["i"] = (counter["i"] + 1) % len(windows_flat_gamma)
            return ide_forecast(w.frames[-1], prop), None, None

        forecasters["ide"] = fc_ide
    except ValueError:
        pass

    report = run_evaluate(forecasters, windows_per_instance)
    print(report.to_table())
    if args.out:
        Path(args.out).write_bytes(report.to_json())
    return EXIT_OK


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


def _check_fft():
    from .spectral import dft_naive, fft

    rng = np.random.default_rng(0)
    for m in (1, 2, 8, 64, 256):
        for _ in range(5):
            x = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            ref = dft_naive(x)
            got = fft(x)
            scale = max(1.0, float(np.max(np.abs(ref))))
            if np.max(np.abs(got - ref)) / scale > 1e-10:
                return False
    return True


def _check_fno_backward():
    cfg = FnoConfig(n=8, tau=2, h=1, delta=0.1, dv=4, L=2, modes_space=3, modes_time=2)
    params = init_params(cfg, seed=11)
    rng = np.random.default_rng(11)
    frames = rng.standard_normal((cfg.tau + 1, cfg.n))
    up = rng.standard_normal(cfg.n)
    g = fno_backward(frames, params, cfg, up)
    if os.environ.get(FAULT_ENV) == "fno_backward":
        g.H_P = g.H_P + 1.0
    eps = 1e-6

    def loss():
        return float(np.sum(fno_forward(frames, params, cfg) * up))

    for idx in [(0, 0), (1, 2), (3, 1)]:
        old = params.H_P[idx]
        params.H_P[idx] = old + eps
        lp = loss()
        params.H_P[idx] = old - eps
        lm = loss()
        params.H_P[idx] = old
        fd = (lp - lm) / (2 * eps)
        if abs(g.H_P[idx] - fd) / max(1.0, abs(fd)) > 1e-4:
            return False
    return True


def _check_nll_gradients():
    from .likelihood import nll_gradients, stddev_field, build_covariance, gaussian_nll

    n, hidden = 12, 6
    rng = np.random.default_rng(7)
    alpha = init_cov_params(n, hidden, 0.08, seed=7)
    y_k = rng.standard_normal(n)
    y = 0.3 * rng.standard_normal(n)
    mu = 0.3 * rng.standard_normal(n)
    _, gmu, gc = nll_gradients(y, mu, y_k, alpha)

    def val():
        s = stddev_field(y_k, alpha)
        return gaussian_nll(y, mu, build_covariance(s, alpha.alpha_r), sigma=s)

    eps = 1e-5
    for idx in [(0,), (5,)]:
        old = mu[idx]
        mu[idx] = old + eps
        lp = val()
        mu[idx] = old - eps
        lm = val()
        mu[idx] = old
        fd = (lp - lm) / (2 * eps)
        if abs(gmu[idx] - fd) / max(1.0, abs(fd)) > 1e-4:
            return False
    old = alpha.alpha_r
    alpha.alpha_r = old + eps
    lp = val()
    alpha.alpha_r = old - eps
    lm = val()
    alpha.alpha_r = old
    fd = (lp - lm) / (2 * eps)
    return abs(gc.alpha_r - fd) / max(1.0, abs(fd)) < 1e-4


def _check_green():
    from .green_ide import GammaParams, green_kernel, green_kernel_quadrature

    rng = np.random.default_rng(3)
    for _ in range(3):
        p = GammaParams(float(rng.uniform(-1, 1)), float(rng.uniform(0.1, 1.0)))
        tau = float(rng.uniform(0.2, 1.0))
        for r in np.linspace(-1.5, 1.5, 7):
            if abs(green_kernel(r, tau, p) - green_kernel_quadrature(r, tau, p)) > 1e-6:
                return False
    return True


def _check_metrics():
    from .evaluate import mspe, picp, mpiw

    rng = np.random.default_rng(9)
    t = rng.standard_normal((4, 6))
    f = rng.standard_normal((4, 6))
    lo = f - np.abs(rng.standard_normal((4, 6)))
    hi = f + np.abs(rng.standard_normal((4, 6)))
    acc = 0.0
    cnt = 0
    inside = 0
    wsum = 0.0
    for i in range(4):
        for j in range(6):
            acc += (t[i, j] - f[i, j]) ** 2
            cnt += 1
            inside += 1 if lo[i, j] <= t[i, j] <= hi[i, j] else 0
            wsum += hi[i, j] - lo[i, j]
    return (
        mspe(t, f) == acc / cnt
        and picp(t, lo, hi) == inside / cnt
        and mpiw(lo, hi) == wsum / cnt
    )


SELFTEST_SUITE = [
    ("fft_vs_naive", _check_fft),
    ("fno_backward", _check_fno_backward),
    ("nll_gradients", _check_nll_gradients),
    ("green_quadrature", _check_green),
    ("metric_oracles", _check_metrics),
]

GRADCHECK_SUITE = [
    ("fno_backward", _check_fno_backward),
    ("nll_gradients", _check_nll_gradients),
]


def _run_suite(suite) -> int:
    failed = []
    width = max(len(name) for name, _ in suite)
    for name, fn in suite:
        ok = False
        try:
            ok = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            print("%s  ERROR (%s)" % (name.ljust(width), exc))
            failed.append(name)
            continue
        print("%s  %s" % (name.ljust(width), "pass" if ok else "FAIL"))
        if not ok:
            failed.append(name)
    if failed:
        print("failed: %s" % ", ".join(failed), file=sys.stderr)
        return EXIT_SELFTEST
    return EXIT_OK


def cmd_selftest(args) -> int:
    return _run_suite(SELFTEST_SUITE)


def cmd_gradcheck(args) -> int:
    return _run_suite(GRADCHECK_SUITE)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fdst", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for verb in ("simulate", "train", "forecast", "evaluate", "gradcheck", "selftest"):
        p = sub.add_parser(verb)
        p.add_argument("--config", default=None)
        p.add_argument("--data", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--checkpoint", default=None)
        if verb == "forecast":
            p.add_argument("--instance", type=int, default=0)
            p.add_argument("--k", type=int, required=True)
    return ap


_COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except fio.ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except fio.FormatError as exc:
        print("format error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as exc:
        print("missing file: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print("I/O error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print("numerical divergence: %s" % exc, file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
