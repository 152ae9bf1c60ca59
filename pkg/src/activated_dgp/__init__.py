"""Activated deep Gaussian processes.

Sparse variational (deep) GPs on the hypersphere whose interdomain inducing
variables turn the posterior mean into a ReLU/Softplus neural network.
"""
import jax

# all GP linear algebra assumes double precision
jax.config.update("jax_enable_x64", True)

__version__ = "0.1.0"
