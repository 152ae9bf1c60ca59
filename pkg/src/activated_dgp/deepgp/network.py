"""Feed-forward network equivalent to the posterior mean of an activated deep GP.

A layer maps h to ``features(h)^T @ weight_out + mean_const`` where the
features are r * g~(w_m . unit) on the bias-augmented, normalised input.
``export_nn`` and ``import_nn`` convert between the two views.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import jax
import jax.numpy as jnp
import numpy as np

from ..inducing import ActivatedInducing, _normalise_rows, cuu, ridge_features
from ..kernels import lift
from ..linalg import robust_cholesky
from ..spectra import ShapeFunction, activation_spectrum
from ..svgp import GaussianVariational
from .model import DeepGPModel, GPLayer, layer_output_weights

NET_FORMAT = "activated-dgp/dense-net"
NET_VERSION = 1
# Sigma_p = IMPORT_COV_SCALE * C_uu after import
IMPORT_COV_SCALE = 1e-5


class SchemaError(ValueError):
    """A serialised model does not match the expected format or version."""


class UnsupportedInducingError(TypeError):
    """Export needs activated inducing variables in every layer."""


@dataclass(frozen=True)
class DenseLayer:
    raw_in: jax.Array
    weight_out: jax.Array
    mean_const: jax.Array
    log_scales: jax.Array
    log_bias: jax.Array
    activation: ShapeFunction
    truncation: int
    bias_sign: float = 1.0
    radial: bool = True

    @property
    def weight_in(self):
        return _normalise_rows(self.raw_in)

    @property
    def input_scales(self):
        return jnp.exp(self.log_scales)

    @property
    def bias(self):
        return self.bias_sign * jnp.exp(self.log_bias)

    @property
    def width(self) -> int:
        return self.raw_in.shape[0]

    @property
    def dim(self) -> int:
        return self.raw_in.shape[1]

    @property
    def output_dim(self) -> int:
        return self.weight_out.shape[1]

    def features(self, H):
        X = lift(H, self.input_scales, self.bias)
        spectrum = activation_spectrum(self.activation, self.dim, self.truncation)
        return ridge_features(self.weight_in, spectrum, X, self.radial)

    def __call__(self, H):
        return self.features(H).T @ self.weight_out + self.mean_const


jax.tree_util.register_dataclass(
    DenseLayer,
    data_fields=["raw_in", "weight_out", "mean_const", "log_scales", "log_bias"],
    meta_fields=["activation", "truncation", "bias_sign", "radial"],
)


@dataclass(frozen=True)
class DenseNet:
    layers: tuple

    @classmethod
    def init(cls, rng: np.random.Generator, input_dim: int, widths, output_dims,
             activation: ShapeFunction | None = None, truncation: int = 10, bias: float = 1.0):
        """Random network: unit directions and N(0, 1/M) output weights."""
        activation = activation or ShapeFunction.relu()
        if len(widths) != len(output_dims):
            raise ValueError("need one width per output dimension")
        layers, d_in = [], input_dim
        for M, P in zip(widths, output_dims):
            w = rng.standard_normal((M, d_in + 1))
            layers.append(DenseLayer(
                jnp.asarray(w / np.linalg.norm(w, axis=1, keepdims=True)),
                jnp.asarray(rng.standard_normal((M, P)) / np.sqrt(M)),
                jnp.zeros(P),
                jnp.zeros(d_in),
                jnp.log(jnp.asarray(abs(bias), dtype=float)),
                activation,
                int(truncation),
                float(np.sign(bias)),
            ))
            d_in = P
        return cls(tuple(layers)).validate()

    def validate(self) -> "DenseNet":
        if not self.layers:
            raise ValueError("network has no layers")
        for below, above in zip(self.layers[:-1], self.layers[1:]):
            if below.output_dim != above.dim - 1:
                raise ValueError("layer output does not match next layer input")
        return self

    @property
    def depth(self) -> int:
        return len(self.layers)

    def forward(self, X):
        H = jnp.asarray(X, dtype=float)
        for layer in self.layers:
            H = layer(H)
        return H

    __call__ = forward

    def composite_maps(self) -> list:
        """Linear maps between consecutive hidden units, W_{l+1}[:, :P] diag(s) V_l^T.

        Each has rank at most the bottleneck width P_l.
        """
        maps = []
        for below, above in zip(self.layers[:-1], self.layers[1:]):
            W = above.weight_in[:, :-1] * above.input_scales[None, :]
            maps.append(np.asarray(W @ below.weight_out.T))
        return maps

    def to_dict(self) -> dict:
        layers = []
        for layer in self.layers:
            layers.append({
                "shape": {"width": layer.width, "input_dim": layer.dim, "output_dim": layer.output_dim},
                "weight_in": np.asarray(layer.weight_in).tolist(),
                "weight_out": np.asarray(layer.weight_out).tolist(),
                "mean_const": np.asarray(layer.mean_const).tolist(),
                "input_scales": np.asarray(layer.input_scales).tolist(),
                "bias": float(layer.bias),
                "activation": layer.activation.to_dict(),
                "truncation": layer.truncation,
                "radial": layer.radial,
            })
        return {"format": NET_FORMAT, "version": NET_VERSION, "layers": layers}

    @classmethod
    def from_dict(cls, data: dict) -> "DenseNet":
        check_header(data, NET_FORMAT, NET_VERSION)
        layers = []
        for i, spec in enumerate(data["layers"]):
            try:
                shape = spec["shape"]
                M, d, P = shape["width"], shape["input_dim"], shape["output_dim"]
                w_in = np.asarray(spec["weight_in"], dtype=float).reshape(M, d)
                w_out = np.asarray(spec["weight_out"], dtype=float).reshape(M, P)
                mean = np.asarray(spec["mean_const"], dtype=float).reshape(P)
                scales = np.asarray(spec["input_scales"], dtype=float).reshape(d - 1)
                bias = float(spec["bias"])
                layers.append(DenseLayer(
                    jnp.asarray(w_in), jnp.asarray(w_out), jnp.asarray(mean),
                    jnp.log(jnp.asarray(scales)), jnp.log(jnp.asarray(abs(bias))),
                    ShapeFunction.from_dict(spec["activation"]), int(spec["truncation"]),
                    float(np.sign(bias)), bool(spec.get("radial", True)),
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"layer {i}: {exc}") from exc
        return cls(tuple(layers)).validate()

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "DenseNet":
        return cls.from_dict(json.loads(Path(path).read_text()))


jax.tree_util.register_dataclass(DenseNet, data_fields=["layers"], meta_fields=[])


def check_header(data: dict, fmt: str, version: int):
    if not isinstance(data, dict) or data.get("format") != fmt:
        raise SchemaError(f"expected a {fmt!r} document")
    if data.get("version") != version:
        raise SchemaError(f"unsupported {fmt} version {data.get('version')!r}, expected {version}")


def export_nn(model: DeepGPModel) -> DenseNet:
    """The network computing the posterior mean of ``model``.

    weight_out is amplitude * C_uu^{-1} mu, so the kernel amplitude is folded
    into the output weights.
    """
    layers = []
    for i, layer in enumerate(model.layers):
        ind = layer.inducing
        if not isinstance(ind, ActivatedInducing):
            raise UnsupportedInducingError(f"layer {i} uses {type(ind).__name__}; only activated layers export")
        k = layer.kernel
        layers.append(DenseLayer(
            ind.raw, layer_output_weights(layer), layer.offset, k.log_scales, k.log_bias,
            ind.activation, ind.truncation, k.bias_sign, True,
        ))
    return DenseNet(tuple(layers))


def import_nn(net: DenseNet, template: DeepGPModel, cov_scale: float = IMPORT_COV_SCALE) -> DeepGPModel:
    """Deep GP whose posterior mean equals ``net``.

    Directions come from weight_in, mu_p = C_uu b_p with b_p = weight_out[:, p] / amplitude
    and Sigma_p = cov_scale * C_uu. Kernel amplitudes and the likelihood come
    from ``template``; input scales and bias come from the network.
    """
    if net.depth != template.depth:
        raise ValueError(f"network depth {net.depth} differs from template depth {template.depth}")
    layers = []
    for i, (dense, layer) in enumerate(zip(net.layers, template.layers)):
        if not dense.radial:
            raise ValueError(f"layer {i}: only radial (homogeneous) layers have a GP counterpart")
        if dense.dim != layer.kernel.dim or dense.output_dim != layer.output_dim:
            raise ValueError(
                f"layer {i}: network shape (d={dense.dim}, P={dense.output_dim}) does not match "
                f"template (d={layer.kernel.dim}, P={layer.output_dim})"
            )
        kernel = replace(layer.kernel, log_scales=dense.log_scales, log_bias=dense.log_bias,
                         bias_sign=dense.bias_sign)
        ind = ActivatedInducing.create(np.asarray(dense.weight_in), dense.activation, kernel,
                                       dense.truncation)
        C = cuu(ind, kernel)
        means = C @ (dense.weight_out / kernel.amplitude)
        L = robust_cholesky(C, kernel.amplitude) * jnp.sqrt(cov_scale)
        q = GaussianVariational(means, jnp.broadcast_to(L, (dense.output_dim,) + L.shape))
        layers.append(GPLayer(kernel, ind, q, jnp.asarray(dense.mean_const), layer.use_mean))
    return replace(template, layers=tuple(layers)).validate()
