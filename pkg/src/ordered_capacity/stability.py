"""Feasibility checks, the constructive feasible series, and finite-delay heuristics.

A rate series is feasible when every tail subsystem sees less effective
arrival rate than its remaining capacity: lam * p_n < mu - s_n for all n.
Feasibility is necessary for finite expected delay; the converse needs the
blocking ratio limit ell < 1 together with a service-rate tail that decays
slower than ell^n.  Verdicts here about the limit behaviour are heuristics
computed from a finite prefix and are labelled as such.
"""

from dataclasses import dataclass, field

import numpy as np

from .chain import Allocation, OverflowChain
from .errors import NoRootError
from .metrics import blocking_probabilities

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
INCONCLUSIVE = "inconclusive"


@dataclass
class StabilityReport:
    """Outcome of a depth-N feasibility scan.

    margins[n-1] = lam * p_n - (mu - s_n); negative means level n is feasible.
    verdict is "feasible" or "infeasible"; violation_level is the first level
    with a nonnegative margin (None when feasible).  ell_estimate is ell_N and
    decay_comparison lists mu_n / ell_N^n, rising values hinting the rate
    series decays slower than blocking.
    """

    checked_depth: int
    feasible_up_to: int
    margins: list
    verdict: str
    violation_level: int | None
    ell_estimate: float
    decay_comparison: list = field(default_factory=list)


@dataclass
class FiniteDelayReport:
    """Heuristic finite-delay diagnostics (the exact property concerns limits)."""

    ell_estimate: float
    tail_decay_ratio: float | None
    summand_partial_sums: list
    verdict: str


def is_feasible(chain, depth):
    """Scan lam * p_n < mu - s_n for n = 1..depth and report the first violation.

    If the condition holds at some level it holds at all shallower levels,
    so the first nonnegative margin settles the verdict for the prefix.
    """
    model = chain.model
    alloc = chain.allocation
    p = blocking_probabilities(chain, depth)
    margins = []
    violation = None
    for n in range(1, depth + 1):
        margin = model.lam * float(p[n - 1]) - (alloc.total - alloc.partial_sum(n))
        margins.append(margin)
        if margin >= 0.0 and violation is None:
            violation = n
    ell = chain.ell_table(depth)
    ell_n = float(ell[-1])
    decay = [alloc.rates[n - 1] / ell_n ** n for n in range(1, depth + 1)]
    feasible_up_to = (violation - 1) if violation is not None else depth
    return StabilityReport(
        checked_depth=depth,
        feasible_up_to=feasible_up_to,
        margins=margins,
        verdict=INFEASIBLE if violation is not None else FEASIBLE,
        violation_level=violation,
        ell_estimate=ell_n,
        decay_comparison=decay,
    )


def _bisect(f, lo, hi, tol=1e-12, max_iter=200):
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise NoRootError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if flo * fm < 0.0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def max_first_rate(model, mu):
    """The root m_1 of x = mu - lam * L_0(x); any mu_1 < m_1 is level-1 feasible.

    The transform is convex and decreasing, so with lam < mu the root is
    unique and positive; found by bisection to residual below 1e-10.
    """
    if model.lam >= mu:
        raise NoRootError(f"requires lam < mu, got lam={model.lam}, mu={mu}")
    root = _bisect(lambda x: x - (mu - model.lam * float(model.lst(x))), 0.0, mu)
    return root


def feasible_construction(model, mu, alpha, depth):
    """Build a non-increasing, strictly feasible prefix of length `depth`.

    Level by level, m_{n+1} solves x = mu - s_n - lam * p_n * L_n(x) and the
    next rate is alpha * min(m_{n+1}, mu_n), which keeps a (1-alpha) slack
    inside every feasibility margin.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    if model.lam >= mu:
        raise NoRootError(f"requires lam < mu, got lam={model.lam}, mu={mu}")
    rates = [alpha * max_first_rate(model, mu)]
    for n in range(1, depth):
        alloc = Allocation(rates, total=mu)
        chain = OverflowChain(model, alloc, n_max=max(depth, 25))
        p_n = float(np.prod(chain.ell_table(n)))
        s_n = alloc.partial_sum(n)

        def gap(x):
            l_n = float(chain.lst_bulk(n, [x])[0]) if x > 0.0 else 1.0
            return x - (mu - s_n - model.lam * p_n * l_n)

        m_next = _bisect(gap, 0.0, mu - s_n)
        rates.append(alpha * min(m_next, rates[-1]))
    return Allocation(rates, total=mu)


def finite_delay_diagnostics(chain, depth, n_terms=50):
    """Heuristic screen of the finite-delay condition sum ell^n / mu_n < inf.

    Uses ell_depth as the ell estimate and the allocation's geometric tail
    ratio (or the last observed rate ratio) as the decay rate.  Verdicts:
    plausible when the tail decays slower than ell, implausible when faster,
    inconclusive within 1% of the boundary or without tail information.
    """
    alloc = chain.allocation
    ell = float(chain.ell_table(depth)[-1])
    if alloc.tail_ratio is not None:
        ratio = alloc.tail_ratio
    elif alloc.depth >= 2:
        ratio = alloc.rates[-1] / alloc.rates[-2]
    else:
        ratio = None
    partial = []
    acc = 0.0
    for n in range(1, n_terms + 1):
        mu_n = alloc.rate(n) if (n <= alloc.depth or alloc.tail_ratio) else None
        if mu_n is None:
            break
        acc += ell ** n / mu_n
        partial.append(acc)
    if ell >= 1.0:
        verdict = INCONCLUSIVE  # ell_n < 1 holds exactly; >= 1 means lost precision
    elif ratio is None:
        verdict = INCONCLUSIVE
    elif ratio > ell * 1.01:
        verdict = "fd-plausible"
    elif ratio < ell * 0.99:
        verdict = "fd-implausible"
    else:
        verdict = INCONCLUSIVE
    return FiniteDelayReport(
        ell_estimate=ell,
        tail_decay_ratio=ratio,
        summand_partial_sums=partial,
        verdict=verdict,
    )
