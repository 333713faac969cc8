"""Kernel-regularized FIR estimation on one synthetic dataset.

Simulates a random 30th-order system, fits with the tc and its kernels
(hyperparameters tuned by marginal likelihood), and compares against
plain least squares. The fit metric is 100 * (1 - relative L2 error),
so 100 is exact and 0 is no better than predicting zero.
"""

import numpy as np

from regid.kernel_estimator import build_fir_regression, fit_kernel_estimate
from regid.simgen import fit_score, generate_input, generate_system, synthesize_dataset

rng = np.random.default_rng(7)
system = generate_system(30, rng)
u = generate_input(300, rng)
data = synthesize_dataset(system, u, snr=5.0, rng=rng)
print(f"system order {system.order}, slowest pole |p| = "
      f"{np.max(np.abs(system.poles)):.3f}, snr = {data.snr:.1f}")

m = 100
truth = system.fir

# Baseline: unregularized least squares on the same regression.
prob = build_fir_regression(u, data.y, m)
g_ls = np.linalg.lstsq(prob.Phi, prob.Y, rcond=None)[0]
print(f"\nleast squares        fit {fit_score(truth, g_ls):6.2f}")

for kind in ("tc", "its"):
    report = fit_kernel_estimate(u, data.y, kind, m=m)
    eta = report.eta_hat
    hyper = (f"lam {eta.lam:.3g}, alpha {eta.alpha:.3f}" if kind == "tc"
             else f"lam {eta.lam:.3g}, interval [{eta.alpha_min:.3f}, {eta.alpha_max:.3f}]")
    print(f"{kind:4s} kernel          fit {fit_score(truth, report.g_hat):6.2f}"
          f"   ({hyper}, {report.evaluations} likelihood evals)")

print("\nRegularization wins because 100 free coefficients at this noise "
      "level overfit badly; the kernel shrinks the tail toward zero.")
