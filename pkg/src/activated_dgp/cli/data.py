"""Datasets, train/test splitting and normalisation."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

TRAIN_FRACTION = 0.9


class DataError(ValueError):
    """Input data is missing or malformed."""


@dataclass(frozen=True)
class Affine:
    """x -> (x - shift) / scale, column-wise."""

    shift: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, A: np.ndarray) -> "Affine":
        scale = A.std(axis=0)
        return cls(A.mean(axis=0), np.where(scale > 0, scale, 1.0))

    @classmethod
    def identity(cls, width: int) -> "Affine":
        return cls(np.zeros(width), np.ones(width))

    def apply(self, A):
        return (np.asarray(A) - self.shift) / self.scale

    def invert(self, A):
        return np.asarray(A) * self.scale + self.shift

    def to_dict(self) -> dict:
        return {"shift": self.shift.tolist(), "scale": self.scale.tolist()}


@dataclass(frozen=True)
class Dataset:
    """Normalised train/test split plus the transforms that produced it."""

    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    x_norm: Affine
    y_norm: Affine

    @property
    def input_dim(self) -> int:
        return self.X_train.shape[1]


def split_indices(n: int, seed: int, train_fraction: float = TRAIN_FRACTION):
    order = np.random.default_rng(seed).permutation(n)
    cut = int(round(train_fraction * n))
    return order[:cut], order[cut:]


def prepare(X, y, seed: int, classification: bool = False,
            train_fraction: float = TRAIN_FRACTION) -> Dataset:
    """Seeded 90/10 split; statistics come from the training rows only.

    Regression targets are standardised too; 0/1 labels are left alone.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(len(X), -1)
    if train_fraction >= 1.0:
        train, test = np.arange(len(X)), np.arange(0)
    else:
        train, test = split_indices(len(X), seed, train_fraction)
    x_norm = Affine.fit(X[train])
    y_norm = Affine.identity(y.shape[1]) if classification else Affine.fit(y[train])
    return Dataset(x_norm.apply(X[train]), y_norm.apply(y[train]),
                   x_norm.apply(X[test]), y_norm.apply(y[test]), x_norm, y_norm)


def read_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Numeric CSV with a header row; the last column is the target."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataError(f"{path}: need a header and at least one data row")
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric value ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header) or data.shape[1] < 2:
        raise DataError(f"{path}: ragged rows or fewer than two columns")
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite values")
    return data[:, :-1], data[:, -1]


def write_csv(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in row])


def banana_path() -> Path:
    return Path(str(resources.files("activated_dgp") / "data" / "banana.csv"))


def make_banana(num: int = 400, seed: int = 0, noise: float = 0.2):
    """Two interleaved crescents in 2-D with 0/1 labels."""
    rng = np.random.default_rng(seed)
    labels = np.arange(num) % 2
    theta = rng.uniform(0.0, np.pi, num)
    upper = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    lower = np.stack([1.0 - np.cos(theta), 0.5 - np.sin(theta)], axis=1)
    X = np.where(labels[:, None] == 0, upper, lower) + noise * rng.standard_normal((num, 2))
    return X, labels.astype(float)


def make_network_data(num: int = 308, input_dim: int = 6, seed: int = 0, noise_std: float = 0.1,
                      activation=None):
    """Regression data from a fixed random 3-layer activated network plus Gaussian noise.

    The default activation is the rescaled softplus used by the models.
    """
    from ..deepgp.network import DenseNet
    from ..spectra import ShapeFunction

    rng = np.random.default_rng(seed)
    activation = activation or ShapeFunction.softplus()
    net = DenseNet.init(rng, input_dim, [50, 50, 50], [5, 5, 1], activation)
    X = rng.standard_normal((num, input_dim))
    f = np.asarray(net.forward(X))[:, 0]
    f = (f - f.mean()) / f.std()
    return X, f + noise_std * rng.standard_normal(num)
