"""A tour of the five stable-kernel regularizers.

Each kernel is a prior covariance over FIR coefficients. The point kinds
(tc, ss) commit to a single decay rate alpha; the integrated kinds (itc,
iss, its) average the point kernel over a rate interval, which trades a
little peak concentration for robustness to a wrong alpha.

Run:  python3 demos/01_kernel_gallery.py
"""

import numpy as np

from regid.kernels import (
    KERNEL_KINDS,
    Hyperparameters,
    build_regularization_matrix,
    stable_spline_atom,
    truncated_expansion_kernel,
)

np.set_printoptions(precision=4, suppress=True)

# Small matrices first so the structure is visible by eye.
print("=== 6x6 regularization matrices, lam=1 ===")
point = Hyperparameters(lam=1.0, alpha=0.8)
interval = Hyperparameters(lam=1.0, alpha_min=0.5, alpha_max=0.95)
for kind in KERNEL_KINDS:
    hyper = point if kind in ("tc", "ss") else interval
    P = build_regularization_matrix(kind, hyper, 6)
    print(f"\n{kind}:")
    print(P.entries)

# The diagonal is the prior variance of each coefficient: every kind decays,
# which is what encodes stability of the impulse response.
print("\n=== prior std of g_k, k = 1, 10, 20, 40 (m=50) ===")
print(f"{'kind':>5s}  {'k=1':>8s}  {'k=10':>8s}  {'k=20':>8s}  {'k=40':>8s}")
for kind in KERNEL_KINDS:
    hyper = point if kind in ("tc", "ss") else interval
    P = build_regularization_matrix(kind, hyper, 50)
    sd = np.sqrt(np.diag(P.entries))
    print(f"{kind:>5s}  {sd[0]:8.4f}  {sd[9]:8.4f}  {sd[19]:8.4f}  {sd[39]:8.4f}")

# The ss kernel admits a sine-basis expansion: a weighted sum of rank-one
# atoms rho_j rho_j^T. Truncating at J terms approximates tc, and the error
# shrinks monotonically as J grows.
print("\n=== sine expansion converging to tc (alpha=0.9, m=30) ===")
P_tc = build_regularization_matrix("tc", Hyperparameters(lam=1.0, alpha=0.9), 30)
for J in (5, 20, 80, 200):
    K = truncated_expansion_kernel(0.9, 30, J)
    err = np.max(np.abs(K - P_tc.entries)) / np.max(np.abs(P_tc.entries))
    print(f"  J = {J:3d}   relative sup error {err:.2e}")

atom = stable_spline_atom(1, 0.9, 30)
print(f"\nfirst atom: weight {atom.weight:.4f}, peak sample "
      f"{np.max(np.abs(atom.samples)):.4f}")
