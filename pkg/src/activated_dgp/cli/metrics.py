"""Evaluation metrics and their JSON summaries."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

METRICS_VERSION = 1


@dataclass
class Metrics:
    mse: float
    tll: float
    elbo_trace: list = field(default_factory=list)
    wall_time: float = 0.0

    def __post_init__(self):
        if not self.mse >= 0:
            raise ValueError("mse must be non-negative")
        steps = [s for s, _ in self.elbo_trace]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError("trace steps must increase")


def mse(pred, target) -> float:
    pred, target = np.asarray(pred, dtype=float), np.asarray(target, dtype=float)
    return float(np.mean((pred.reshape(target.shape) - target) ** 2))


def smoothed(values, window: int) -> np.ndarray:
    """Trailing moving average; the first window-1 entries average what is available."""
    values = np.asarray(values, dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(1, len(values) + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def summarise(runs: list) -> dict:
    """Mean and standard deviation of MSE and TLL over splits."""
    mses = np.array([r.mse for r in runs])
    tlls = np.array([r.tll for r in runs])
    return {
        "mse_mean": float(mses.mean()),
        "mse_std": float(mses.std()),
        "mse_median": float(np.median(mses)),
        "tll_mean": float(tlls.mean()),
        "tll_std": float(tlls.std()),
        "per_split": [{"mse": r.mse, "tll": r.tll, "wall_time": r.wall_time} for r in runs],
    }
