"""Microscopy workflow: uncut fiber lengths to tree-scale statistics.

Under a microscope one can tell whether a fiber was cut by the borer, so
the data are the lengths of *uncut* fibers only (population V).  Their
density is the core density times the uncut probability, renormalized;
fitting maximizes that conditional likelihood directly.
"""

import numpy as np

from fiberfit import (
    CoreGeometry,
    Dataset,
    FitConfig,
    GgdParams,
    ModelSpec,
    SimSpec,
    fit,
    micro_loglik,
    sample_v,
    summary_stats,
)

geom = CoreGeometry(r=2.5)
truth = GgdParams(b=2.4, d=3.3, k=1.5)

# 300 uncut fiber lengths, reproducible by seed
values = sample_v(SimSpec("V", truth, geom, n=300, seed=7))
data = Dataset(values, "V")
print(f"simulated n = {data.n} uncut fibers, range [{values.min():.3f}, {values.max():.3f}] mm")

model = ModelSpec("ggamma", "microscopy", geom)
result = fit(data, model, FitConfig(n_starts=5, seed=1))

print()
print("estimates (b, d, k):", np.round(result.theta_tilde, 4))
print("standard errors    :", np.round(result.se_tilde, 4))
print("log likelihood     :", round(result.loglik, 3))
print("convergence        :", result.convergence)

# The three shape parameters are weakly identified at n = 300 (their SEs are
# wide), but the tree-scale statistics they imply are pinned down well.
stats = summary_stats(result)
print()
print("tree-scale fiber statistics (plug-in, with delta-method SEs):")
print(f"  mean     {stats.fibers.mean:8.4f}  (se {stats.fibers.se_mean:.4f})")
print(f"  sd       {stats.fibers.sd:8.4f}  (se {stats.fibers.se_sd:.4f})")
print(f"  skewness {stats.fibers.skewness:8.4f}  (se {stats.fibers.se_skewness:.4f})")
print(f"  kurtosis {stats.fibers.kurtosis:8.4f}  (se {stats.fibers.se_kurtosis:.4f})")

true_stats = (2.4536, 0.6723, 0.0375, 2.7956)
print()
print("generating-parameter truth: mean, sd, skewness, kurtosis =", true_stats)

# Sanity: the fitted likelihood can only improve on the truth's likelihood
# for this realization.
ll_truth = micro_loglik(truth, data, geom).loglik
print(f"loglik at fit {result.loglik:.3f} >= loglik at truth {ll_truth:.3f}")
