"""The three percolation models at desk scale.

Boolean disks (exact union-find connectivity), confetti coloring (raster,
self-dual at p = 1/2), and the planar model with Pareto radii where big
grains are sampled exactly and then truncated with a computable error
bound.
"""

import numpy as np

from poissonlab.percolation import (
    BooleanModel,
    BooleanWorld,
    ConfettiModel,
    FixedRadius,
    GrainSpec,
    ParetoRadius,
    confetti_duality_check,
    crossing,
    estimate_critical,
    crossing_probability,
    one_arm_decay_fit,
    sample_boolean_config,
    sample_confetti_world,
    threshold_scan,
    truncate_radii,
)
from poissonlab.process import BoxWindow
from poissonlab.rng import stream

disk = GrainSpec("ball", FixedRadius(1.0))

# Threshold scan for the k=1 Boolean model on a 10x10 window.
scan = threshold_scan(BooleanModel(1.0, disk, k=1), np.linspace(0.2, 0.6, 9),
                      n=10.0, samples=300, seed=21)
for g, p, s in zip(scan.params, scan.estimates, scan.ses):
    print(f"gamma={g:.2f}: P(cross) = {p:.2f} +- {s:.2f}")

# Bisection for the crossing-probability-1/2 intensity.
rect = BoxWindow((0.0, 0.0), (12.0, 12.0))
est, ci = estimate_critical(
    lambda g, m, r: crossing_probability(
        BooleanModel(g, disk, k=1), rect, m, lambda i: stream(22, r, i)
    ),
    0.2, 0.6, tolerance=0.02, base_samples=150,
)
print(f"estimated critical intensity: {est:.3f} +- {ci:.3f}")

# Subcritical one-arm decay: log theta_s is linear in s.
fit = one_arm_decay_fit(BooleanModel(0.5 * est, disk, k=1),
                        np.arange(4, 13, 2), samples=6000, seed=23)
print(f"subcritical decay: slope {fit['slope']:.3f}, R^2 {fit['r2']:.3f}")

# Confetti at p = 1/2: crossing probability 1/2 and an exact duality XOR.
confetti = ConfettiModel(0.5, disk, disk)
crect = BoxWindow((0.0, 0.0), (8.0, 8.0))
hits = xor_ok = 0
for i in range(300):
    world = sample_confetti_world(confetti, crect, 0.1, stream(24, i))
    hits += crossing(world)
    xor_ok += confetti_duality_check(world)
print(f"confetti: P(cross at 1/2) ~ {hits / 300:.3f}; duality XOR {xor_ok}/300")

# Pareto radii: truncate at n^(1-eps) and compare against the analytic bound.
heavy = BooleanModel(0.4, GrainSpec("ball", ParetoRadius(0.5, 3.5)), k=1)
trect = BoxWindow((0.0, 0.0), (32.0, 32.0))
flips, bound = 0, 0.0
for i in range(400):
    cfg = sample_boolean_config(heavy, trect, stream(25, i), r_split=32.0**0.8)
    kept, bound = truncate_radii(cfg, heavy, 32, 0.2)
    flips += crossing(BooleanWorld(cfg, heavy, trect)) != crossing(
        BooleanWorld(kept, heavy, trect)
    )
print(f"truncation: flip rate {flips / 400:.4f} <= analytic bound {bound:.4f}")
