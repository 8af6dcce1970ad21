"""Renewal arrival processes with exact Laplace-Stieltjes transforms.

The only family implemented is Gamma with shape k and rate k*lam, so the
mean inter-arrival time is exactly 1/lam regardless of k.  k=1 is the
Poisson special case.  The transform interface is generic: anything with
lst / lst_deriv / sample / lam can be plugged into the overflow recursion.
"""

import numpy as np


class GammaArrivals:
    """Gamma(k, k*lam) renewal inter-arrival distribution.

    Args:
        lam: arrival rate (reciprocal of the mean inter-arrival time), > 0.
        k: Gamma shape parameter, > 0.  k=1 gives exponential inter-arrivals,
           k<1 more variable, k>1 less variable (variance is 1/(k*lam^2)).
    """

    family = "gamma"

    def __init__(self, lam, k=1.0):
        lam = float(lam)
        k = float(k)
        if lam <= 0.0:
            raise ValueError(f"arrival rate must be positive, got {lam}")
        if k <= 0.0:
            raise ValueError(f"Gamma shape must be positive, got {k}")
        self.lam = lam
        self.k = k
        self._beta = k * lam  # Gamma rate parameter

    def __repr__(self):
        return f"GammaArrivals(lam={self.lam}, k={self.k})"

    @property
    def mean(self):
        """Mean inter-arrival time, exactly 1/lam."""
        return 1.0 / self.lam

    @property
    def variance(self):
        """Variance of the inter-arrival time, 1/(k*lam^2)."""
        return 1.0 / (self.k * self.lam * self.lam)

    def lst(self, s):
        """Transform value E[exp(-s*T0)] = (k*lam/(k*lam+s))**k for s >= 0.

        Accepts a scalar or an ndarray; the scalar and array paths use the
        same floating-point operations, so results are bit-identical.
        """
        if np.any(np.asarray(s) < 0.0):
            raise ValueError("transform argument must be nonnegative")
        return np.power(self._beta / (self._beta + s), self.k)

    def lst_deriv(self, s):
        """Derivative of the transform; equals -1/lam at s=0."""
        if np.any(np.asarray(s) < 0.0):
            raise ValueError("transform argument must be nonnegative")
        return -(self.k / (self._beta + s)) * np.power(self._beta / (self._beta + s), self.k)

    def sample(self, rng, size=None):
        """Draw inter-arrival times using the caller-owned numpy Generator."""
        return rng.gamma(shape=self.k, scale=1.0 / self._beta, size=size)
