"""What do the regularizers believe before seeing data?

Draws from the priors the penalties induce. The Hankel nuclear-norm prior
has a Gaussian approximation that can be sampled directly; the exact prior
needs a random-walk Metropolis chain. Kernel priors are plain Gaussians.

The striking feature is the bathtub: the Hankel prior is loose about the
first and last coefficients and tight about the middle ones, the opposite
of the decaying kernel priors. It also couples coefficients strongly.
"""

import numpy as np

from regid.kernels import Hyperparameters
from regid.prior_lab import (
    PriorSpec,
    run_metropolis,
    sample_exact,
    summarize_chain,
)

# Gaussian approximation at the size used throughout: m = 99, so p = 50.
spec = PriorSpec(kind="hankel_gaussian_approx", m=99, p=50, two_lambda=1.0)
draws = sample_exact(spec, count=200_000, seed=0)
sd = draws.std(axis=0, ddof=1)
print("approximate Hankel prior, std of g_k:")
for k in (1, 10, 50, 90, 99):
    print(f"  k = {k:2d}   {sd[k - 1]:.4f}")
print(f"bathtub ratio (ends over middle): {sd[0] / sd[49]:.1f}")

# The exact prior at a small size, sampled by Metropolis. The summary
# reports the std profile and one row of the correlation matrix.
spec9 = PriorSpec(kind="hankel_exact", m=9, p=5, two_lambda=1.0)
summary = run_metropolis(spec9, length=200_000, seed=1)
print(f"\nexact prior, m = 9: acceptance {summary.acceptance_rate:.1%}")
print("  std profile ", summary.coefficient_std.round(3))
print("  corr row 5  ", summary.correlation_row.round(2))

# A kernel prior for contrast: independent of position couplings, the
# variance simply decays, so draws look like stable impulse responses.
spec_tc = PriorSpec(kind="kernel_gaussian", m=99, two_lambda=1.0,
                    kernel_kind="tc",
                    eta=Hyperparameters(lam=1.0, alpha=0.9))
kdraws = sample_exact(spec_tc, count=50_000, seed=2)
ksd = kdraws.std(axis=0, ddof=1)
print("\ntc prior, std of g_k:")
for k in (1, 10, 50, 90, 99):
    print(f"  k = {k:2d}   {ksd[k - 1]:.4f}")

chain_summary = summarize_chain(kdraws, row_index=49)
row = chain_summary.correlation_row
print(f"corr(g_50, g_51) = {row[50]:.3f}, corr(g_50, g_90) = {row[89]:.3f} "
      "(smooth neighbor coupling, no bathtub)")
