"""Geometric rate families and the closed-form tail program optimum.

The single-parameter family mu_n = mu * alpha * (1-alpha)^(n-1) allocates a
fixed share alpha of the remaining capacity to each next server.  When the
blocking ratio is (approximately) a constant ell, the delay-minimizing
series over all allocations of one unit of capacity is geometric with ratio
sqrt(ell) and first rate 1 - sqrt(ell).
"""

import math

import numpy as np

from .chain import Allocation, lst_sweep
from .errors import NoRootError


def geometric_allocation(alpha, mu=1.0, depth=15):
    """Allocation mu_n = mu * alpha * (1-alpha)^(n-1) with its geometric tail.

    The materialized prefix covers levels 1..depth; prefix plus tail mass
    equals mu up to rounding.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rates = mu * alpha * (1.0 - alpha) ** np.arange(depth)
    return Allocation(rates, total=mu, tail_ratio=1.0 - alpha)


def ell_alpha_curve(model, alphas, level, mu=1.0):
    """ell_level(alpha) = L_{level-1}(mu_level) along a geometric family.

    One value per alpha; used to chart how the per-level blocking ratio
    responds to the first-server share (level >= 1).
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    out = np.empty(len(alphas))
    for i, alpha in enumerate(alphas):
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0,1), got {alpha}")
        rates = mu * alpha * (1.0 - alpha) ** np.arange(level)
        v, _ = lst_sweep(model, rates[:-1], level - 1, [rates[-1]])
        out[i] = v[0]
    return out


def alpha_crossing(model, mu=1.0, lo=0.01, hi=0.99, tol=1e-8):
    """The alpha where the level-1 and level-2 blocking-ratio curves cross.

    For Poisson arrivals this equals 1 - sqrt(rho); located by bisection on
    ell_1(alpha) - ell_2(alpha).
    """

    def gap(alpha):
        e1 = ell_alpha_curve(model, [alpha], 1, mu)[0]
        e2 = ell_alpha_curve(model, [alpha], 2, mu)[0]
        return e1 - e2

    flo, fhi = gap(lo), gap(hi)
    if flo * fhi > 0.0:
        raise NoRootError(f"no curve crossing bracketed on [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = gap(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0.0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def tap_solution(ell, mu=1.0, depth=15):
    """Closed-form optimum of the constant-blocking tail program.

    With blocking p_n = ell^n the delay-minimizing series is geometric:
    mu_n = mu * (1 - sqrt(ell)) * ell^((n-1)/2), i.e. first share
    1 - sqrt(ell) and decay ratio sqrt(ell).
    """
    if not 0.0 < ell < 1.0:
        raise ValueError(f"ell must lie in (0,1), got {ell}")
    return geometric_allocation(1.0 - math.sqrt(ell), mu=mu, depth=depth)


def tap_objective_value(ell):
    """Objective of the tail program at its optimum: (1+sqrt(ell))/(1-sqrt(ell))."""
    if not 0.0 < ell < 1.0:
        raise ValueError(f"ell must lie in (0,1), got {ell}")
    root = math.sqrt(ell)
    return (1.0 + root) / (1.0 - root)
