"""regid: regularized least-squares system identification.

Library layout:

- ``kernels``            stable-kernel regularization matrices, sine expansion
- ``kernel_estimator``   ReLS estimator, marginal-likelihood tuning, kernel form
- ``hankel``             Hankel nuclear-norm estimator (ADMM + SVT), gamma tuning
- ``atomic``             pole-atom dictionary and weighted LASSO, gamma tuning
- ``prior_lab``          samplers for regularizer-induced priors (exact + MCMC)
- ``simgen``             random systems, datasets, fit metrics, benchmark driver
- ``cli``                command-line front end (the only module that touches disk)
"""

__version__ = "0.1.0"
