"""Blocking probabilities, idle-server distribution, and expected delay.

All quantities are arrival-epoch (Palm) probabilities of the ordered
loss system: p_n is the chance an arrival finds servers 1..n all busy,
q_n = p_{n-1} - p_n the chance the fastest idle server is n.  The expected
delay over a depth-M truncation is sum q_n / mu_n plus a closed-form
residual for the geometric tail.
"""

import math
from dataclasses import dataclass

import numpy as np

from .chain import lst_sweep
from .errors import CapacityError, LevelError


@dataclass
class SystemMetrics:
    """Per-level metric bundle for a depth-M evaluation.

    p, q, ell, ell_lower are indexed 1..M (numpy arrays of length M);
    rho_eff is indexed 0..M (length M+1).  delay_total may be math.inf.
    """

    depth: int
    p: np.ndarray
    q: np.ndarray
    ell: np.ndarray
    ell_lower: np.ndarray
    rho_eff: np.ndarray
    delay_truncated: float
    residual: float
    delay_total: float


def blocking_probabilities(chain, depth):
    """p_1..p_depth from the product form p_n = ell_n * p_{n-1}, p_0 = 1."""
    if depth == 0:
        return np.empty(0)
    if depth > chain.allocation.depth:
        raise LevelError(
            f"depth {depth} beyond prefix length {chain.allocation.depth}"
        )
    return np.cumprod(chain.ell_table(depth))


def fastest_idle_distribution(p):
    """q_n = p_{n-1} - p_n with p_0 = 1; requires strictly decreasing p."""
    p = np.asarray(p, dtype=float)
    full = np.concatenate([[1.0], p])
    q = -np.diff(full)
    if np.any(q <= 0.0):
        raise ValueError("blocking probabilities must be strictly decreasing in (0,1)")
    return q


def ell_series(chain, depth):
    """(ell_1..ell_M, lower bounds ell_lower_n = L_{n-1}(mu - s_{n-1})).

    The lower-bound series evaluates each overflow transform at the whole
    remaining capacity; it is non-decreasing and squeezes ell from below,
    which is what makes the geometric tail residual trustworthy.
    """
    alloc = chain.allocation
    if depth > alloc.depth:
        raise LevelError(f"depth {depth} beyond prefix length {alloc.depth}")
    mu = alloc.total
    ell = np.array(chain.ell_table(depth), copy=True)
    lower = np.empty(depth)
    for n in range(1, depth + 1):
        rem = mu - alloc.partial_sum(n - 1)
        if rem <= 0.0:
            raise CapacityError(
                f"prefix exhausts capacity before level {n} (s_{n-1} >= mu)"
            )
        lower[n - 1] = chain.lst_bulk(n - 1, [rem])[0]
    return ell, lower


def effective_utilization(model, allocation, p):
    """rho_0..rho_M where rho_n = lam * p_n / (mu - s_n) and rho_0 = lam/mu."""
    p = np.asarray(p, dtype=float)
    depth = len(p)
    mu = allocation.total
    rho = np.empty(depth + 1)
    rho[0] = model.lam / mu
    for n in range(1, depth + 1):
        rem = mu - allocation.partial_sum(n)
        if rem <= 0.0:
            raise CapacityError(f"no remaining capacity after level {n}")
        rho[n] = model.lam * p[n - 1] / rem
    return rho


def residual_tail(p_m, mu_m, ell_m):
    """Delay contribution of the geometric tail, p_M (1+sqrt(ell)) / (mu_M sqrt(ell)).

    Assumes blocking continues as p_M * ell^(n-M) and rates as mu_M * ell^((n-M)/2).
    Returns math.inf when ell_m >= 1 (tail not summable).
    """
    if mu_m <= 0.0:
        raise ValueError(f"tail rate must be positive, got {mu_m}")
    if ell_m <= 0.0:
        raise ValueError(f"blocking ratio must be positive, got {ell_m}")
    if ell_m >= 1.0:
        return math.inf
    root = math.sqrt(ell_m)
    return p_m * (1.0 + root) / (mu_m * root)


def expected_delay(chain, depth):
    """(truncated delay, tail residual, total) for the chain's allocation.

    Truncated delay is sum_{n<=depth} q_n / mu_n; the residual closes the
    series under a sqrt(ell_M)-geometric tail.  An infinite residual
    propagates to the total as math.inf, never NaN.
    """
    rates = np.asarray(chain.allocation.rates[:depth], dtype=float)
    p = blocking_probabilities(chain, depth)
    q = fastest_idle_distribution(p)
    truncated = float(np.sum(q / rates))
    ell_m = float(chain.ell_table(depth)[-1])
    residual = residual_tail(float(p[-1]), float(rates[-1]), ell_m)
    return truncated, residual, truncated + residual


def compute_metrics(model, allocation, depth=None, n_max=None):
    """Full SystemMetrics bundle for prefix levels 1..depth.

    Requires s_depth < mu so the whole rho series is finite; allocations
    carrying a geometric tail always satisfy this.
    """
    from .chain import OverflowChain

    depth = depth if depth is not None else allocation.depth
    chain = OverflowChain(model, allocation, n_max=n_max or max(depth, 25))
    p = blocking_probabilities(chain, depth)
    q = fastest_idle_distribution(p)
    ell, ell_lower = ell_series(chain, depth)
    rho = effective_utilization(model, allocation, p)
    truncated, residual, total = expected_delay(chain, depth)
    return SystemMetrics(
        depth=depth,
        p=p,
        q=q,
        ell=ell,
        ell_lower=ell_lower,
        rho_eff=rho,
        delay_truncated=truncated,
        residual=residual,
        delay_total=total,
    )


def erlang_b(offered_load, n):
    """Erlang B blocking for M/M/n/n with homogeneous servers (recursion).

    Classical oracle: B(0) = 1, B(j) = a B(j-1) / (j + a B(j-1)).  Used to
    validate the product form in the Poisson homogeneous special case.
    """
    b = 1.0
    for j in range(1, n + 1):
        b = offered_load * b / (j + offered_load * b)
    return b
