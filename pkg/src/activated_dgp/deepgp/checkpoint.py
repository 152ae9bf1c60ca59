"""JSON checkpoints for deep GP models.

Only parameters are stored; spectra are recomputed from the shape
descriptors when the model is loaded.
"""
from __future__ import annotations

import json
from pathlib import Path

import jax.numpy as jnp
import numpy as np

from ..inducing import ActivatedInducing, PseudoPointInducing
from ..kernels import ZonalKernel
from ..spectra import ShapeFunction
from ..svgp import GaussianVariational
from .model import BernoulliProbit, DeepGPModel, GaussianLikelihood, GPLayer
from .network import SchemaError, check_header

MODEL_FORMAT = "activated-dgp/deep-gp"
MODEL_VERSION = 1


def _arr(x):
    return np.asarray(x).tolist()


def _layer_to_dict(layer: GPLayer) -> dict:
    k, ind = layer.kernel, layer.inducing
    if isinstance(ind, ActivatedInducing):
        inducing = {
            "type": "activated",
            "raw": _arr(ind.raw),
            "activation": ind.activation.to_dict(),
            "truncation": ind.truncation,
            "allow_mismatch": ind.allow_mismatch,
        }
    else:
        inducing = {"type": "pseudo", "raw": _arr(ind.raw)}
    return {
        "kernel": {
            "shape": k.shape.to_dict(),
            "dim": k.dim,
            "amplitude": float(k.amplitude),
            "input_scales": _arr(k.input_scales),
            "bias": float(k.bias),
        },
        "inducing": inducing,
        "q": {"means": _arr(layer.q.means), "chol": _arr(layer.q.chol_factors)},
        "mean_const": _arr(layer.mean_const),
        "use_mean": layer.use_mean,
    }


def _layer_from_dict(spec: dict) -> GPLayer:
    ks = spec["kernel"]
    kernel = ZonalKernel.create(ShapeFunction.from_dict(ks["shape"]), int(ks["dim"]),
                                float(ks["amplitude"]), ks["input_scales"], float(ks["bias"]))
    ind_spec = spec["inducing"]
    raw = np.asarray(ind_spec["raw"], dtype=float).reshape(-1, kernel.dim)
    if ind_spec["type"] == "activated":
        ind = ActivatedInducing.create(raw, ShapeFunction.from_dict(ind_spec["activation"]), kernel,
                                       int(ind_spec["truncation"]), bool(ind_spec.get("allow_mismatch", False)))
    elif ind_spec["type"] == "pseudo":
        ind = PseudoPointInducing.create(raw)
    else:
        raise SchemaError(f"unknown inducing type {ind_spec['type']!r}")
    M = raw.shape[0]
    means = np.asarray(spec["q"]["means"], dtype=float).reshape(M, -1)
    chol = np.asarray(spec["q"]["chol"], dtype=float).reshape(means.shape[1], M, M)
    q = GaussianVariational(jnp.asarray(means), jnp.asarray(chol))
    mean_const = jnp.asarray(np.asarray(spec["mean_const"], dtype=float).reshape(means.shape[1]))
    return GPLayer(kernel, ind, q, mean_const, bool(spec.get("use_mean", True)))


def model_to_dict(model: DeepGPModel, seed: int | None = None) -> dict:
    lik = model.likelihood
    if isinstance(lik, GaussianLikelihood):
        likelihood = {"type": "gaussian", "noise_var": float(lik.noise_var)}
    else:
        likelihood = {"type": "probit"}
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "seed": seed,
        "likelihood": likelihood,
        "layers": [_layer_to_dict(layer) for layer in model.layers],
    }


def model_from_dict(data: dict) -> DeepGPModel:
    check_header(data, MODEL_FORMAT, MODEL_VERSION)
    try:
        lik = data["likelihood"]
        if lik["type"] == "gaussian":
            likelihood = GaussianLikelihood.create(float(lik["noise_var"]))
        elif lik["type"] == "probit":
            likelihood = BernoulliProbit()
        else:
            raise SchemaError(f"unknown likelihood {lik['type']!r}")
        layers = tuple(_layer_from_dict(spec) for spec in data["layers"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed model checkpoint: {exc}") from exc
    return DeepGPModel(layers, likelihood).validate()


def save_model(model: DeepGPModel, path, seed: int | None = None):
    Path(path).write_text(json.dumps(model_to_dict(model, seed), indent=1))


def load_model(path) -> DeepGPModel:
    return model_from_dict(json.loads(Path(path).read_text()))
