"""
The posterior mean is a neural network
======================================

Build a random three-layer activated deep GP, read off the network that
computes its posterior mean, and go back again.
"""

import numpy as np

from activated_dgp.deepgp.builders import build_deep_gp
from activated_dgp.deepgp.model import mean_forward, total_kl
from activated_dgp.deepgp.network import DenseNet, export_nn, import_nn
from activated_dgp.spectra import ShapeFunction

rng = np.random.default_rng(0)
model = build_deep_gp(rng, 2, [16, 16, 16], [3, 3, 1], activation=ShapeFunction.softplus(), amplitude=1.5)

# give q(u) a random mean so the function is not identically zero
net = DenseNet.init(rng, 2, [16, 16, 16], [3, 3, 1], ShapeFunction.softplus())
model = import_nn(net, model)

X = rng.normal(size=(200, 2)) * 2
gp_mean = np.asarray(mean_forward(model, X))
print("max |net(x) - E[f(x)]| after import:", np.abs(np.asarray(net.forward(X)) - gp_mean).max())

exported = export_nn(model)
print("max |export(x) - E[f(x)]|:           ", np.abs(np.asarray(exported.forward(X)) - gp_mean).max())

# imported layers start with Sigma = 1e-5 C_uu: the mean is fixed, the KL is finite
print("KL(q || p) after import:", float(total_kl(model)))

## Low rank between layers
# hidden layers have 3 outputs, so the 16x16 maps between hidden units have rank 3
for i, A in enumerate(exported.composite_maps()):
    s = np.linalg.svd(A, compute_uv=False)
    print(f"layers {i}->{i + 1}: singular values", np.array2string(s[:5], precision=2))
