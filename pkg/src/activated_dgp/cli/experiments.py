"""Experiment drivers behind the ``adgp`` subcommands.

Each driver takes a plain config dict (defaults below, overridable from a
JSON file), writes CSV/JSON results into an output directory and returns a
summary dict.
"""
from __future__ import annotations

import copy
import json
import time
from pathlib import Path

import jax
import numpy as np

from ..deepgp.builders import build_deep_gp
from ..deepgp.model import mean_forward, predict_mean, predict_proba, predictive_log_density
from ..deepgp.network import DenseNet, import_nn
from ..deepgp.training import TrainConfig, train_stage1, train_stage2
from ..inducing import ActivatedInducing
from ..kernels import ZonalKernel, embed, kernel_matrix
from ..spectra import ShapeFunction, activation_spectrum, kernel_spectrum, write_spectrum_csv
from ..svgp import gpr_predict, predict, titsias_optimal_q, variance_terms
from .data import DataError, banana_path, make_network_data, prepare, read_csv, write_csv
from .metrics import METRICS_VERSION, Metrics, summarise

SOFTPLUS = {"kind": "SoftplusRescaled", "params": {"beta": 5.0}}
ARCCOSINE = {"kind": "ArcCosine1", "params": {}}

DEFAULTS = {
    "banana": {
        "data": None,
        "depths": [1, 3],
        "num_inducing": 100,
        "hidden_dim": 5,
        "truncation": 10,
        "kernel": ARCCOSINE,
        "activation": SOFTPLUS,
        "stage1": {"max_steps": 2000, "lr": 0.02},
        "stage2": {"max_steps": 3000, "lr": 0.01, "train_mean": False},
        "grid_size": 100,
        "grid_extent": 4.0,
        "far_distance": 1.5,
        "eval_samples": 20,
        "smoothing_window": 200,
        "sweep": {"num_inducing": [8, 16, 32, 64, 128], "max_steps": 2000, "lr": 0.02},
    },
    "ablation": {
        "num_points": 10,
        "input_range": 2.0,
        "grid_range": 3.0,
        "grid_size": 200,
        "noise_var": 0.01,
        "num_inducing": 32,
        "truncation": 10,
        "activation": SOFTPLUS,
        "kernels": [ARCCOSINE, {"kind": "Matern52Zonal", "params": {"lengthscale": 1.0, "variance": 1.0}}],
    },
    "regress": {
        "data": "synthetic",
        "models": ["adgp3", "dgp3"],
        "splits": 5,
        "num_inducing": 512,
        "hidden_dim": 5,
        "truncation": 10,
        "kernel": ARCCOSINE,
        "activation": SOFTPLUS,
        "budget": 20000,
        "stage1_fraction": 0.5,
        "stage2_train_mean": False,
        "mse_predictor": "composed",
        "minibatch": 1024,
        "lr": 0.01,
        "noise_var": 0.1,
        "eval_every": 500,
        "eval_samples": 20,
    },
}


def merged_config(command: str, overrides: dict | None) -> dict:
    cfg = copy.deepcopy(DEFAULTS[command])
    for key, value in (overrides or {}).items():
        if key not in cfg:
            raise ValueError(f"unknown {command} config key {key!r}")
        if isinstance(cfg[key], dict) and isinstance(value, dict) and "kind" not in cfg[key]:
            cfg[key].update(value)
        else:
            cfg[key] = value
    return cfg


def _shape(spec: dict) -> ShapeFunction:
    return ShapeFunction.from_dict(spec)


def _write_json(path: Path, data: dict):
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


# -- spectrum ---------------------------------------------------------------


def run_spectrum(shape_spec: dict, dim: int, truncation: int, out: Path) -> Path:
    """CSV of kernel eigenvalues (kernel shapes) or activation coefficients."""
    shape = _shape(shape_spec)
    spectrum = (kernel_spectrum if shape.is_kernel else activation_spectrum)(shape, dim, truncation)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"spectrum_{shape.kind.value}_d{dim}_N{truncation}.csv"
    write_spectrum_csv(spectrum, path)
    return path


# -- banana -----------------------------------------------------------------


def _grid(extent: float, size: int):
    g = np.linspace(-extent, extent, size)
    return np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)


def far_field_mask(grid, X, distance: float):
    """Grid cells further than ``distance`` from every training input."""
    d2 = np.min(np.sum((grid[:, None, :] - X[None, :, :]) ** 2, axis=2), axis=1)
    return d2 > distance**2


def _net_proba(net: DenseNet, X):
    return np.asarray(jax.scipy.stats.norm.cdf(net.forward(X)))[:, 0]


def banana_two_stage(cfg: dict, X, y, depth: int, seed: int) -> dict:
    """Stage 1 (probit cross-entropy) then stage 2 (ELBO) for one depth."""
    rng = np.random.default_rng(seed)
    M, P = cfg["num_inducing"], cfg["hidden_dim"]
    widths, outs = [M] * depth, [P] * (depth - 1) + [1]
    act, kern = _shape(cfg["activation"]), _shape(cfg["kernel"])
    net = DenseNet.init(rng, 2, widths, outs, act, cfg["truncation"])
    s1_trace, s2_trace = [], []
    t0 = time.perf_counter()
    net = train_stage1(net, X, y, "bce", TrainConfig(stage="nn", seed=seed, **cfg["stage1"]), trace=s1_trace)
    template = build_deep_gp(rng, 2, widths, outs, kernel_shape=kern, activation=act,
                             truncation=cfg["truncation"], likelihood="probit")
    model = import_nn(net, template)
    model = train_stage2(model, X, y, TrainConfig(seed=seed + 1, **cfg["stage2"]), trace=s2_trace)
    wall = time.perf_counter() - t0

    grid = _grid(cfg["grid_extent"], cfg["grid_size"])
    far = far_field_mask(grid, X, cfg["far_distance"])
    key = jax.random.PRNGKey(seed + 2)
    p1 = _net_proba(net, grid)
    p2 = np.asarray(predict_proba(model, grid, key, cfg["eval_samples"]))
    elbo = np.array([v for _, v, _ in s2_trace])
    window = cfg["smoothing_window"]
    train_p = np.asarray(predict_proba(model, X, key, cfg["eval_samples"]))
    return {
        "depth": depth,
        "net": net,
        "model": model,
        "grid": grid,
        "far": far,
        "p_stage1": p1,
        "p_stage2": p2,
        "stage1_trace": s1_trace,
        "stage2_trace": s2_trace,
        "summary": {
            "depth": depth,
            "far_cells": int(far.sum()),
            "stage1_far_mean_min_p": float(np.mean(np.minimum(p1, 1 - p1)[far])),
            "stage1_far_mean_abs_p_minus_half": float(np.mean(np.abs(p1 - 0.5)[far])),
            "stage2_far_mean_abs_p_minus_half": float(np.mean(np.abs(p2 - 0.5)[far])),
            "stage1_train_accuracy": float(np.mean((_net_proba(net, X) > 0.5) == (y > 0.5))),
            "stage2_train_accuracy": float(np.mean((train_p > 0.5) == (y > 0.5))),
            "elbo_smoothed_start": float(np.mean(elbo[:window])) if len(elbo) else None,
            "elbo_smoothed_end": float(np.mean(elbo[-window:])) if len(elbo) else None,
            "wall_time": wall,
        },
    }


def banana_sweep(cfg: dict, X, y, seed: int) -> list:
    """Final smoothed ELBO of a one-layer model for each M (ELBO training only)."""
    sweep = cfg["sweep"]
    act, kern = _shape(cfg["activation"]), _shape(cfg["kernel"])
    rows = []
    for M in sweep["num_inducing"]:
        rng = np.random.default_rng(seed)
        model = build_deep_gp(rng, 2, [M], [1], kernel_shape=kern, activation=act,
                              truncation=cfg["truncation"], likelihood="probit")
        trace = []
        train_stage2(model, X, y, TrainConfig(seed=seed, max_steps=sweep["max_steps"], lr=sweep["lr"]),
                     trace=trace)
        values = [v for _, v, _ in trace]
        rows.append((M, float(np.mean(values[-cfg["smoothing_window"]:]))))
    return rows


def run_banana(cfg: dict, seed: int, out: Path) -> dict:
    path = Path(cfg["data"]) if cfg["data"] else banana_path()
    X_raw, y_raw = read_csv(path)
    if X_raw.shape[1] != 2 or not np.all(np.isin(y_raw, (0.0, 1.0))):
        raise DataError(f"{path}: banana data needs two inputs and 0/1 labels")
    ds = prepare(X_raw, y_raw, seed, classification=True, train_fraction=1.0)
    X, y = ds.X_train, ds.y_train[:, 0]
    out.mkdir(parents=True, exist_ok=True)
    summary = {"version": METRICS_VERSION, "seed": seed, "depths": []}
    for depth in cfg["depths"]:
        res = banana_two_stage(cfg, X, y, depth, seed)
        raw = ds.x_norm.invert(res["grid"])
        write_csv(out / f"banana_grid_depth{depth}.csv", ["x1", "x2", "far", "p_stage1", "p_stage2"],
                  [(float(a), float(b), int(f), float(p), float(q))
                   for (a, b), f, p, q in zip(raw, res["far"], res["p_stage1"], res["p_stage2"])])
        write_csv(out / f"banana_trace_depth{depth}.csv", ["stage", "step", "value", "lr"],
                  [("nn", i, float(v), float(lr)) for i, v, lr in res["stage1_trace"]]
                  + [("elbo", i, float(v), float(lr)) for i, v, lr in res["stage2_trace"]])
        res["net"].save(out / f"banana_net_depth{depth}.json")
        summary["depths"].append(res["summary"])
    sweep = banana_sweep(cfg, X, y, seed)
    write_csv(out / "banana_sweep.csv", ["num_inducing", "elbo_smoothed"], sweep)
    summary["sweep"] = [{"num_inducing": M, "elbo_smoothed": v} for M, v in sweep]
    _write_json(out / "banana_metrics.json", summary)
    return summary


# -- ablation ---------------------------------------------------------------


def fibonacci_sphere(num: int) -> np.ndarray:
    """``num`` nearly uniform points on S^2 (golden-angle spiral)."""
    i = np.arange(num) + 0.5
    z = 1.0 - 2.0 * i / num
    phi = np.pi * (1.0 + 5.0**0.5) * i
    rho = np.sqrt(1.0 - z * z)
    return np.stack([rho * np.cos(phi), z, rho * np.sin(phi)], axis=1)


def _pad(x):
    # 1-D inputs live in the (x, 0, bias) plane of R^3
    return np.stack([x, np.zeros_like(x)], axis=1)


def ablation_data(cfg: dict, seed: int):
    """Noisy draw from the arc-cosine GP at uniformly placed 1-D inputs."""
    rng = np.random.default_rng(seed)
    n = cfg["num_points"]
    x = np.sort(rng.uniform(-cfg["input_range"], cfg["input_range"], n))
    k = ZonalKernel.create(ShapeFunction.arccosine(), 3)
    K = np.asarray(kernel_matrix(k, embed(_pad(x), k)))
    f = np.linalg.cholesky(K + 1e-10 * np.eye(n)) @ rng.standard_normal(n)
    return x, f + np.sqrt(cfg["noise_var"]) * rng.standard_normal(n)


def ablation_fits(cfg: dict, seed: int) -> dict:
    """Per kernel: sparse fit with optimal q(u), its variance split and the exact GP."""
    x, y = ablation_data(cfg, seed)
    grid = np.linspace(-cfg["grid_range"], cfg["grid_range"], cfg["grid_size"])
    W = fibonacci_sphere(cfg["num_inducing"])
    act = _shape(cfg["activation"])
    fits = {}
    for spec in cfg["kernels"]:
        kernel = ZonalKernel.create(_shape(spec), 3)
        ind = ActivatedInducing.create(W, act, kernel, cfg["truncation"])
        X, G = embed(_pad(x), kernel), embed(_pad(grid), kernel)
        q = titsias_optimal_q(ind, kernel, X, y, cfg["noise_var"])
        resid, explained = variance_terms(ind, kernel, q, G)
        post = predict(ind, kernel, q, G)
        exact = gpr_predict(kernel, X, y, cfg["noise_var"], G)
        fits[kernel.shape.kind.value] = {
            "mean": np.asarray(post.mean[:, 0]),
            "var": np.asarray(post.var[:, 0]),
            "resid": np.asarray(resid[:, 0]),
            "explained": np.asarray(explained[:, 0]),
            "exact_mean": np.asarray(exact.mean[:, 0]),
            "exact_var": np.asarray(exact.var[:, 0]),
        }
    return {"x": x, "y": y, "grid": grid, "fits": fits}


def run_ablation(cfg: dict, seed: int, out: Path) -> dict:
    res = ablation_fits(cfg, seed)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "ablation_data.csv", ["x", "y"], [(float(a), float(b)) for a, b in zip(res["x"], res["y"])])
    fit_rows, var_rows, summary = [], [], {"version": METRICS_VERSION, "seed": seed, "kernels": {}}
    for name, f in res["fits"].items():
        sd, esd = np.sqrt(f["var"]), np.sqrt(f["exact_var"])
        for i, g in enumerate(res["grid"]):
            fit_rows.append((name, float(g), float(f["mean"][i]), float(f["mean"][i] - 2 * sd[i]),
                             float(f["mean"][i] + 2 * sd[i]), float(f["exact_mean"][i]),
                             float(f["exact_mean"][i] - 2 * esd[i]), float(f["exact_mean"][i] + 2 * esd[i])))
            var_rows.append((name, float(g), float(f["resid"][i]), float(f["explained"][i]), float(f["var"][i])))
        summary["kernels"][name] = {
            "resid_mean": float(np.mean(f["resid"])),
            "explained_mean": float(np.mean(f["explained"])),
            "resid_fraction": float(np.mean(f["resid"]) / np.mean(f["var"])),
        }
    write_csv(out / "ablation_fit.csv",
              ["kernel", "x", "mean", "lower", "upper", "exact_mean", "exact_lower", "exact_upper"], fit_rows)
    write_csv(out / "ablation_variance.csv", ["kernel", "x", "k_minus_q", "q_sigma_q", "total"], var_rows)
    _write_json(out / "ablation_summary.json", summary)
    return summary


# -- regression ---------------------------------------------------------------

MODEL_NAMES = {"adgp1": ("activated", 1), "adgp3": ("activated", 3), "dgp1": ("pseudo", 1), "dgp3": ("pseudo", 3)}


def _load_regression(cfg: dict, seed: int):
    if cfg["data"] == "synthetic":
        return make_network_data(seed=1000 + seed)
    return read_csv(cfg["data"])


def regress_once(cfg: dict, name: str, ds, seed: int) -> tuple[Metrics, list]:
    """Train one model on one split; returns metrics and a (step, test_mse) trace."""
    if name not in MODEL_NAMES:
        raise ValueError(f"unknown model {name!r}; expected one of {sorted(MODEL_NAMES)}")
    family, depth = MODEL_NAMES[name]
    rng = np.random.default_rng(seed)
    D = ds.input_dim
    M, P = cfg["num_inducing"], cfg["hidden_dim"]
    widths, outs = [M] * depth, [P] * (depth - 1) + [1]
    act, kern = _shape(cfg["activation"]), _shape(cfg["kernel"])
    Xtr, ytr, Xte, yte = ds.X_train, ds.y_train, ds.X_test, ds.y_test
    key = jax.random.PRNGKey(seed)
    mse_trace = []
    common = {"minibatch": cfg["minibatch"], "lr": cfg["lr"], "eval_every": cfg["eval_every"]}

    def test_mse(model_or_net):
        if isinstance(model_or_net, DenseNet):
            pred = np.asarray(model_or_net.forward(Xte))
        elif cfg["mse_predictor"] == "composed":
            pred = np.asarray(mean_forward(model_or_net, Xte))
        else:
            pred = np.asarray(predict_mean(model_or_net, Xte, key, cfg["eval_samples"]))
        return float(np.mean((pred - yte) ** 2))

    budget = cfg["budget"]
    elbo_trace = []
    t0 = time.perf_counter()
    if family == "activated":
        steps1 = int(round(cfg["stage1_fraction"] * budget))
        net = DenseNet.init(rng, D, widths, outs, act, cfg["truncation"])
        net = train_stage1(net, Xtr, ytr, "mse", TrainConfig(stage="nn", seed=seed, max_steps=steps1, **common),
                           callback=lambda i, n: mse_trace.append((i, test_mse(n))))
        template = build_deep_gp(rng, D, widths, outs, kernel_shape=kern, activation=act,
                                 truncation=cfg["truncation"], noise_var=cfg["noise_var"])
        model = import_nn(net, template)
        offset, steps2 = steps1, budget - steps1
        common["train_mean"] = cfg["stage2_train_mean"]
    else:
        model = build_deep_gp(rng, D, widths, outs, inducing="pseudo", kernel_shape=kern,
                              noise_var=cfg["noise_var"], X=Xtr)
        offset, steps2 = 0, budget
    model = train_stage2(model, Xtr, ytr, TrainConfig(seed=seed + 1, max_steps=steps2, **common),
                         trace=elbo_trace,
                         callback=lambda i, m: mse_trace.append((offset + i, test_mse(m))))
    wall = time.perf_counter() - t0
    tll = float(np.mean(predictive_log_density(model, Xte, yte, key, cfg["eval_samples"])))
    metrics = Metrics(test_mse(model), tll, [(offset + i, v) for i, v, _ in elbo_trace], wall)
    return metrics, mse_trace


def run_regress(cfg: dict, seed: int, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    X, y = _load_regression(cfg, seed)
    results, trace_rows = {}, []
    for split in range(cfg["splits"]):
        ds = prepare(X, y, seed + split)
        for name in cfg["models"]:
            metrics, trace = regress_once(cfg, name, ds, seed + split)
            results.setdefault(name, []).append(metrics)
            trace_rows += [(name, split, step, mse) for step, mse in trace]
    summary = {"version": METRICS_VERSION, "seed": seed, "models": {n: summarise(m) for n, m in results.items()}}
    write_csv(out / "regress_trace.csv", ["model", "split", "step", "test_mse"], trace_rows)
    _write_json(out / "regress_metrics.json", summary)
    return summary
