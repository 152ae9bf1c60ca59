"""
Spectra of zonal kernels and activations
========================================

Prints the arc-cosine eigenvalues and ReLU coefficients for the first ten
degrees, then shows how the truncated softplus approaches the real one as
more degrees are kept.
"""

import numpy as np

from activated_dgp.specfun import gegenbauer_series
from activated_dgp.spectra import ShapeFunction, activation_spectrum, kernel_spectrum

arc = ShapeFunction.arccosine()
relu = ShapeFunction.relu()

# odd degrees >= 3 vanish for both: the kernel and the ramp differ from an
# even function only by a linear term
for d in (3, 5, 7):
    lam = kernel_spectrum(arc, d, 9)
    sig = activation_spectrum(relu, d, 9)
    print(f"d={d}  source={lam.source.value}")
    print("  arc-cosine eigenvalues:", np.array2string(lam.values, precision=3))
    print("  ReLU coefficients:     ", np.array2string(sig.values, precision=3))

# the Matern kernel has no zeros, so it decays smoothly in n
mat = kernel_spectrum(ShapeFunction.matern52(0.5), 3, 9)
print("Matern-5/2 (lengthscale 0.5), d=3:", np.array2string(mat.values, precision=3))

## Truncated softplus
t = np.linspace(-1, 1, 2001)
softplus = ShapeFunction.softplus()
target = np.asarray(softplus(t))
for d in (3, 5, 15):
    errs = []
    for N in (5, 10, 25):
        spec = activation_spectrum(softplus, d, N)
        recon = np.asarray(gegenbauer_series(spec.addition_weights(), spec.sphere.alpha, t))
        errs.append(np.max(np.abs(recon - target)))
    print(f"d={d:2d} sup error at N=5,10,25:", ", ".join(f"{e:.2e}" for e in errs))
