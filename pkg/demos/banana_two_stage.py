"""
Two-stage training on the banana data
=====================================

Stage 1 fits the network with cross-entropy, stage 2 imports it as a deep GP
and maximises the ELBO. This is a shortened run (a few hundred steps per
stage); ``adgp banana`` runs the full configuration.
"""

import numpy as np

from activated_dgp.cli import experiments as ex
from activated_dgp.cli.data import banana_path, prepare, read_csv

cfg = ex.merged_config("banana", {"num_inducing": 50, "stage1": {"max_steps": 500}, "stage2": {"max_steps": 500},
                                  "smoothing_window": 50, "grid_size": 60})
X_raw, y_raw = read_csv(banana_path())
ds = prepare(X_raw, y_raw, seed=0, classification=True, train_fraction=1.0)

for depth in (1, 3):
    res = ex.banana_two_stage(cfg, ds.X_train, ds.y_train[:, 0], depth, seed=0)
    s = res["summary"]
    print(f"depth {depth}: train accuracy {s['stage1_train_accuracy']:.3f} -> {s['stage2_train_accuracy']:.3f}")
    print(f"  far-field mean |p - 0.5|: network {s['stage1_far_mean_abs_p_minus_half']:.3f}, "
          f"deep GP {s['stage2_far_mean_abs_p_minus_half']:.3f}")
    print(f"  smoothed ELBO {s['elbo_smoothed_start']:.1f} -> {s['elbo_smoothed_end']:.1f}"
          f"  ({s['wall_time']:.0f}s)")

    # coarse text picture of p(y=1|x) after stage 2
    p = res["p_stage2"].reshape(cfg["grid_size"], cfg["grid_size"])[::-6, ::3]
    for row in p:
        print("  " + "".join(" .:-=+*#%@"[min(int(v * 10), 9)] for v in row))
