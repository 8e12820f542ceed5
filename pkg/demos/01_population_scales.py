"""Tour of the four cell-length populations and their densities.

An increment core of radius r is bored horizontally through a stand of
vertically aligned cells.  Four populations of lengths arise:

  W - true cell lengths in the tree          (what we want)
  Y - true lengths of cells touching the core (length-biased W)
  X - lengths observed in the core by an OFA  (cut-censored Y)
  V - lengths of uncut fibers in the core     (microscopy)

This script evaluates one fiber component on all four scales and checks the
bookkeeping that ties them together.
"""

import numpy as np

from fiberfit import (
    CoreGeometry,
    GgdParams,
    ScaleDensity,
    mean_w_component,
    moment_w,
    prob_uncut,
    tree_composition,
    MixtureParams,
)

geom = CoreGeometry(r=2.5)
fibers = GgdParams(b=2.4, d=3.3, k=1.5)

print("Fiber component: generalized gamma", (fibers.b, fibers.d, fibers.k))
print(f"Core radius r = {geom.r} mm, so no observed cell can exceed {geom.diameter} mm")
print()

# The length-bias weight pi*r + 2*w over-samples long cells on the Y scale.
# Undoing it gives the tree-scale mean, which is shorter than the core mean.
ey = fibers.mean()
ew = mean_w_component(fibers, geom)
print(f"mean on the core scale  E(Y) = {ey:.4f} mm")
print(f"mean in the tree        E(W) = {ew:.4f} mm  (length bias removed)")

m = {i: moment_w(i, fibers, geom) for i in (1, 2, 3, 4)}
sd = np.sqrt(m[2] - m[1] ** 2)
skew = (m[3] - 3 * m[1] * m[2] + 2 * m[1] ** 3) / sd**3
kurt = (m[4] - 4 * m[1] * m[3] + 6 * m[1] ** 2 * m[2] - 3 * m[1] ** 4) / sd**4
print(f"tree-scale sd = {sd:.4f}, skewness = {skew:.4f}, kurtosis = {kurt:.4f}")
print()

# Densities on each scale at a few lengths.  The X and V scales live on
# (0, 2r); W and Y extend beyond the core diameter.
grid = np.array([0.5, 1.5, 2.5, 3.5, 4.5])
rows = {}
for scale in ("W", "Y", "X", "V"):
    rows[scale] = ScaleDensity(scale, "fibers", fibers, geom).pdf(grid)

print("length (mm)   " + "".join(f"{g:>9.2f}" for g in grid))
for scale, vals in rows.items():
    print(f"f_{scale}(length)  " + "".join(f"{v:>9.4f}" for v in vals))
print()

# The uncut probability that produces the V scale drops from 1 to 0 across
# the core diameter.
ys = np.array([0.1, 1.0, 2.5, 4.0, 4.9])
print("uncut probability p_uc:", np.round(prob_uncut(ys, geom), 4))
print()

# Mixtures: fines (short cells) plus fibers.  The fines share in the core
# (eps) exceeds their share in the tree (eps_tilde is larger than eps here
# because E(W) accounting shifts the balance).
mix = MixtureParams(0.3, GgdParams(0.1, 1.5, 2.0), fibers)
eps_tilde, ew_mix = tree_composition(mix, geom)
print(f"fines share in the core   eps       = {mix.eps:.3f}")
print(f"fines share in the tree   eps_tilde = {eps_tilde:.3f}")
print(f"overall tree mean length  E(W)      = {ew_mix:.4f} mm")
