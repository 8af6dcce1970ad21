"""Finite-horizon search for the delay-minimizing service-rate prefix.

The horizon-M program fixes mu_M by the tail-capacity equality
mu_M = (1 - sqrt(ell_M)) * (mu - s_{M-1}) and minimizes
sum_{n<=M} q_n g(mu_n) plus a geometric-tail residual over mu_1..mu_{M-1}.
The search pre-solves inside the one-parameter geometric family and then
runs cyclic coordinate descent with golden-section/parabolic scalar
searches, accelerated by whole-series tilt/scale moves and a pattern step.

The pinning equality has a positive solution only while the tail subsystem
runs below one-half effective utilization; at heavy load with small
horizons no prefix satisfies that, and the optimizer falls back to a
self-consistent variant where mu_M is a free coordinate and the tail decay
ratio is whatever exactly fills the remaining capacity.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import DEFAULT_N_MAX, Allocation, lst_sweep
from .errors import NumericDegeneracyError, OptimizerError
from .metrics import SystemMetrics, compute_metrics

_GOLD = 0.3819660112501051  # (3 - sqrt(5)) / 2


@dataclass
class OptimizerConfig:
    """Knobs for optimize_allocation; defaults follow the package conventions."""

    horizon: int = 15
    tol_rate: float = 1e-6
    tol_objective: float = 1e-8
    max_sweeps: int = 50
    restarts: int = 3
    objective: str = "delay"  # "delay", "deadline", or "custom"
    tau: float | None = None
    cost_fn: object = None  # per-rate convex cost g(mu) for "custom"
    seed: int = 0
    n_max: int = DEFAULT_N_MAX

    def validate(self):
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        if self.horizon > self.n_max:
            raise ValueError(f"horizon {self.horizon} exceeds n_max {self.n_max}")
        if self.tol_rate <= 0 or self.tol_objective <= 0:
            raise ValueError("tolerances must be positive")
        if self.objective not in ("delay", "deadline", "custom"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.objective == "deadline" and (self.tau is None or self.tau < 0):
            raise ValueError("deadline objective needs tau >= 0")
        if self.objective == "custom" and not callable(self.cost_fn):
            raise ValueError("custom objective needs a callable cost_fn")


@dataclass
class OptimizationResult:
    allocation: Allocation
    objective_value: float
    residual: float
    sweeps: int
    trace: list
    metrics: SystemMetrics
    converged: bool
    restarts_run: int = 1
    restart_objectives: list = field(default_factory=list)
    tail_pinning: str = "fixed-point"  # "free-tail" when no fixed point exists


def _ell_and_blocking(model, rates):
    """(ell_1..ell_M, p_1..p_M) for a full prefix via one vectorized sweep."""
    m = len(rates)
    if m == 1:
        ell = np.array([float(model.lst(rates[0]))])
    else:
        v, ell_head = lst_sweep(model, rates[:-1], m - 1, [rates[-1]])
        ell = np.append(ell_head, v[0])
    return ell, np.cumprod(ell)


def _cost(objective, tau, cost_fn):
    if objective == "delay":
        return lambda x: 1.0 / x
    if objective == "deadline":
        return lambda x: math.exp(-x * tau)
    return cost_fn


def _tail_cost(objective, g, p_m, mu_m, ell_m, ratio):
    """Residual sum_{n>M} q_n g(mu_n) under a geometric tail of decay `ratio`.

    Blocking is assumed to continue as p_M * ell_M^(n-M).  Closed form for
    the delay cost; numeric summation (converged to the last term below
    1e-16 of the accumulated value, comfortably inside the documented 1e-10)
    otherwise.  Infinite when ell_m >= ratio, i.e. a finite-delay-violating
    tail.
    """
    if ell_m >= 1.0 or ratio <= ell_m or ratio >= 1.0:
        return math.inf
    if objective == "delay":
        return p_m * (1.0 - ell_m) / (mu_m * (ratio - ell_m))
    acc = 0.0
    weight = p_m * (1.0 - ell_m)
    for j in range(1, 2_000_000):
        term = weight * ell_m ** (j - 1) * g(mu_m * ratio ** j)
        acc += term
        if j > 4 and term < 1e-16 * max(acc, 1e-300):
            return acc
    raise NumericDegeneracyError("tail cost summation did not converge")


def objective_value(model, rates, mu, objective="delay", tau=None, cost_fn=None):
    """Truncated objective sum q_n g(mu_n) plus the sqrt(ell_M)-tail residual.

    `rates` is a full prefix mu_1..mu_M (mu_M already pinned); for the delay
    cost this equals the expected-delay approximation, with the residual
    p_M (1+sqrt(ell_M)) / (mu_M sqrt(ell_M)).
    """
    rates = np.asarray(rates, dtype=float)
    if np.any(rates <= 0.0) or float(np.sum(rates)) >= mu:
        return math.inf
    g = _cost(objective, tau, cost_fn)
    ell, p = _ell_and_blocking(model, rates)
    q = np.concatenate([[1.0], p[:-1]]) - p
    if objective == "delay":
        head = float(np.sum(q / rates))
    else:
        head = float(sum(qn * g(rn) for qn, rn in zip(q, rates)))
    ell_m = float(ell[-1])
    tail = _tail_cost(objective, g, float(p[-1]), float(rates[-1]), ell_m,
                      math.sqrt(ell_m) if ell_m < 1.0 else 0.0)
    return head + tail


def tail_pinned_rate(model, prefix, mu, tol=1e-10, x0=None, max_iter=200):
    """The positive solution of mu_M = (1 - sqrt(L_{M-1}(mu_M))) (mu - s_{M-1}).

    x = 0 always satisfies the equation; the map x -> (1-sqrt(L(x)))*c is
    increasing and concave (transforms are log-convex), so a positive fixed
    point exists exactly when the slope at zero, c * E[T_{M-1}] / 2, exceeds
    one, i.e. the tail subsystem runs below one-half effective utilization.
    When it does not, 0.0 is returned: the equality cannot hold at any
    positive rate, because a sqrt(ell)-geometric tail needs capacity of at
    least twice the overflow rate it serves.

    Found by a damped fixed-point search: secant steps on the fixed-point
    residual, safeguarded by bisection of the bracket (the residual is
    positive left of the root and strictly negative at c).  The equation
    residual at exit is below tol.
    """
    prefix = list(prefix)
    level = len(prefix)
    c = mu - float(np.sum(prefix))
    if c <= 0.0:
        return 0.0
    ell, p = _ell_and_blocking(model, prefix)
    mean_overflow = 1.0 / (model.lam * float(p[-1])) if p[-1] > 0.0 else math.inf
    if c * mean_overflow <= 2.0:
        return 0.0  # slope at zero <= 1: only the trivial fixed point

    def transform(x):
        val = lst_sweep(model, prefix, level, [x])[0][0]
        return c * (1.0 - math.sqrt(val))

    x = x0 if (x0 is not None and 0.0 < x0 < c) else 0.25 * c
    lo, hi = 0.0, c
    f_prev = None
    x_prev = None
    history = []
    for _ in range(max_iter):
        f = transform(x) - x
        history.append((x, f))
        if abs(f) < tol * max(1.0, x):
            return x
        if f > 0.0:
            lo = x
        else:
            hi = x
        nxt = None
        if f_prev is not None and f != f_prev:
            nxt = x - f * (x - x_prev) / (f - f_prev)  # secant
        if nxt is None or not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        x_prev, f_prev = x, f
        x = nxt
        if x < 1e-15 * c or hi < 1e-15 * c:
            return 0.0
    raise NumericDegeneracyError(
        f"tail pinning did not converge in {max_iter} iterations; "
        f"last iterates {history[-3:]}"
    )


def sqrt_rho_heuristic(model, mu, depth=15):
    """Geometric allocation with first share 1 - sqrt(rho); Poisson only."""
    if model.k != 1.0:
        raise ValueError("sqrt-rho heuristic is defined for Poisson arrivals (k=1)")
    from .geometric import geometric_allocation

    rho = model.lam / mu
    if not 0.0 < rho < 1.0:
        raise ValueError(f"requires 0 < lam < mu, got rho={rho}")
    return geometric_allocation(1.0 - math.sqrt(rho), mu=mu, depth=depth)


def _brent_min(f, lo, hi, tol, max_iter=100):
    """Bounded scalar minimization: golden-section with parabolic steps.

    Tolerates f returning inf (falls back to golden-section steps there).
    """
    a, b = lo, hi
    x = w = v = a + _GOLD * (b - a)
    fx = fw = fv = f(x)
    d = e = b - a
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        tol1 = tol + 1e-12 * abs(x)
        if abs(x - m) <= 2.0 * tol1 - 0.5 * (b - a):
            break
        use_gold = True
        if abs(e) > tol1 and math.isfinite(fx) and math.isfinite(fw) and math.isfinite(fv):
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            if abs(p) < abs(0.5 * q * e) and q * (a - x) < p < q * (b - x):
                e = d
                d = p / q
                u = x + d
                if (u - a) < 2.0 * tol1 or (b - u) < 2.0 * tol1:
                    d = tol1 if x < m else -tol1
                use_gold = False
        if use_gold:
            e = (b - x) if x < m else (a - x)
            d = _GOLD * e
        u = x + d if abs(d) >= tol1 else x + (tol1 if d > 0.0 else -tol1)
        fu = f(u)
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv = w, fw
                w, fw = u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx


class _SearchObjective:
    """Objective over the search vector, in one of two tail modes.

    pinned: the vector is mu_1..mu_{M-1}; mu_M comes from the fixed-point
    pin and the tail decays at sqrt(ell_M) (capacity-exact at the pin).
    free-tail: the vector is mu_1..mu_M; the tail decay is the ratio that
    exactly fills the remaining capacity, 1 - mu_M / (mu - s_{M-1}).
    """

    def __init__(self, model, mu, cfg, mode):
        self.model = model
        self.mu = mu
        self.cfg = cfg
        self.mode = mode
        self.warm = None
        self.evals = 0

    @property
    def length(self):
        return self.cfg.horizon - 1 if self.mode == "pinned" else self.cfg.horizon

    def pin(self, prefix):
        return tail_pinned_rate(self.model, prefix, self.mu, tol=1e-10, x0=self.warm)

    def full_rates(self, vector):
        if self.mode != "pinned":
            return np.asarray(vector, dtype=float)
        mu_m = self.pin(vector)
        if mu_m <= 1e-13 * self.mu:
            return None
        self.warm = mu_m
        return np.append(vector, mu_m)

    def __call__(self, vector):
        vector = np.asarray(vector, dtype=float)
        if np.any(vector <= 0.0) or float(np.sum(vector)) >= self.mu:
            return math.inf
        full = self.full_rates(vector)
        if full is None:
            return math.inf
        self.evals += 1
        cfg = self.cfg
        if self.mode == "pinned":
            return objective_value(self.model, full, self.mu, objective=cfg.objective,
                                   tau=cfg.tau, cost_fn=cfg.cost_fn)
        g = _cost(cfg.objective, cfg.tau, cfg.cost_fn)
        ell, p = _ell_and_blocking(self.model, full)
        q = np.concatenate([[1.0], p[:-1]]) - p
        if cfg.objective == "delay":
            head = float(np.sum(q / full))
        else:
            head = float(sum(qn * g(rn) for qn, rn in zip(q, full)))
        c = self.mu - float(np.sum(full[:-1]))
        ratio = 1.0 - float(full[-1]) / c
        tail = _tail_cost(cfg.objective, g, float(p[-1]), float(full[-1]),
                          float(ell[-1]), ratio)
        return head + tail


def _geometric_prefix(alpha, mu, length):
    return mu * alpha * (1.0 - alpha) ** np.arange(length)


def _best_geometric_start(fobj, mu, alpha_hint):
    """Scan and refine the one-parameter geometric family before descending.

    The optimal series is near-geometric throughout, so a scalar search over
    the first-server share lands very close to the optimum and skips most of
    the slow valley that plain coordinate descent would crawl along.
    """
    length = fobj.length

    def by_alpha(alpha):
        if not 0.001 < alpha < 0.999:
            return math.inf
        return fobj(_geometric_prefix(alpha, mu, length))

    grid = np.linspace(0.02, 0.98, 25)
    values = [by_alpha(a) for a in grid]
    imin = int(np.argmin(values))
    fbest, abest = min((values[imin], float(grid[imin])), (by_alpha(alpha_hint), alpha_hint))
    if not math.isfinite(fbest):
        return None, math.inf
    lo = max(0.002, abest - 0.06)
    hi = min(0.998, abest + 0.06)
    ab, fb = _brent_min(by_alpha, lo, hi, 1e-7)
    if fb < fbest:
        abest, fbest = ab, fb
    return _geometric_prefix(abest, mu, length), fbest


def _descend(fobj, mu, start_rates, start_value, cfg, monotone_cone=False):
    """Cyclic coordinate descent with tilt/scale/pattern acceleration.

    With monotone_cone the search never leaves the non-increasing cone
    (coordinate moves bounded by their neighbours, whole-series moves
    rejected when they reorder the rates).  The pinned mode does not need
    this; its optimum is non-increasing on its own.
    """
    rates = np.asarray(start_rates, dtype=float).copy()
    length = len(rates)
    best = start_value if start_value is not None else fobj(rates)
    trace = [best]
    tolx = cfg.tol_rate * mu
    sweeps = 0
    converged = False
    for sweep in range(cfg.max_sweeps):
        sweeps = sweep + 1
        sweep_tolx = max(tolx, 1e-4 * mu) if sweep < 2 else tolx
        prev_rates = rates.copy()
        prev = best
        for n in range(length):
            others = float(np.sum(rates)) - rates[n]
            glo, ghi = 1e-9 * mu, mu - others - 1e-9 * mu
            if monotone_cone:
                if n + 1 < length:
                    glo = max(glo, rates[n + 1])
                if n >= 1:
                    ghi = min(ghi, rates[n - 1])
            if ghi <= glo:
                continue
            if sweep >= 2 and math.isfinite(best):
                lo = max(glo, rates[n] * 0.5)
                hi = min(ghi, rates[n] * 2.0)
            else:
                lo, hi = glo, ghi

            def h(x, n=n):
                trial = rates.copy()
                trial[n] = x
                return fobj(trial)

            for _ in range(6):
                xb, fb = _brent_min(h, lo, hi, sweep_tolx)
                if xb - lo < 4.0 * sweep_tolx and lo > glo * 1.001:
                    hi = xb
                    lo = max(glo, 0.4 * lo)
                elif hi - xb < 4.0 * sweep_tolx and hi < ghi * 0.999:
                    lo = xb
                    hi = min(ghi, 2.0 * hi)
                else:
                    break
            if fb < best:
                rates[n] = xb
                best = fb
        # tilt: reshape the decay rate of the whole series in one scalar search
        if math.isfinite(best):
            powers = np.arange(length)
            tilt_hi = 1.1
            if monotone_cone and length > 1:
                tilt_hi = min(tilt_hi, float(np.min(rates[:-1] / rates[1:])))

            def tilt(t):
                return fobj(rates * t ** powers)

            if tilt_hi > 0.9:
                tb, ftb = _brent_min(tilt, 0.9, tilt_hi, 1e-6)
                if ftb < best:
                    rates = rates * tb ** powers
                    best = ftb

            def scale(c):
                return fobj(rates * c)

            cb, fcb = _brent_min(scale, 0.9, min(1.1, 0.999 * mu / float(np.sum(rates))), 1e-6)
            if fcb < best:
                rates = rates * cb
                best = fcb
        # pattern step along the sweep displacement
        delta = rates - prev_rates
        if np.any(delta != 0.0):
            for gamma in (8.0, 4.0, 2.0, 1.0):
                trial = rates + gamma * delta
                if np.any(trial <= 0.0) or float(np.sum(trial)) >= mu:
                    continue
                if monotone_cone and np.any(np.diff(trial) > 0.0):
                    continue
                ft = fobj(trial)
                if ft < best:
                    rates, best = trial, ft
                    break
        trace.append(best)
        if math.isfinite(prev) and prev - best < cfg.tol_objective * max(1.0, abs(prev)):
            converged = True
            break
    return rates, best, trace, sweeps, converged


def optimize_allocation(model, mu, config=None):
    """Minimize the horizon-M objective over rate prefixes; returns the best run.

    Each run pre-solves within the geometric family (scalar search over the
    first-server share, warm-started from 1 - sqrt(rho) for Poisson arrivals)
    and then refines by coordinate descent, re-pinning mu_M after every
    coordinate move.  Additional restarts perturb the starting share; the
    best final objective wins.

    When no prefix admits a positive fixed-point tail rate (tail utilization
    above one half everywhere, as at heavy load with small horizons), the
    run switches to the free-tail mode: mu_M joins the search vector and the
    tail decays at the capacity-filling ratio.  Such results are flagged
    tail_pinning="free-tail".
    """
    cfg = config or OptimizerConfig()
    cfg.validate()
    if model.lam >= mu:
        raise OptimizerError(f"requires lam < mu, got lam={model.lam}, mu={mu}")
    rho = model.lam / mu
    if model.k == 1.0:
        alpha0 = 1.0 - math.sqrt(rho)
    else:
        alpha0 = 1.0 - math.sqrt(float(model.lst(0.5 * mu)))
    rng = np.random.default_rng(cfg.seed)
    fobj = _SearchObjective(model, mu, cfg, "pinned")
    start, start_value = _best_geometric_start(fobj, mu, alpha0)
    if start is None:
        fobj = _SearchObjective(model, mu, cfg, "free-tail")
        start, start_value = _best_geometric_start(fobj, mu, alpha0)
        if start is None:
            raise OptimizerError("objective infinite at every probed allocation")
    best = None
    restart_objectives = []
    for r in range(max(1, cfg.restarts)):
        if r == 0:
            run_start, run_value = start, start_value
        else:
            run_start = start * np.exp(0.05 * rng.standard_normal(len(start)))
            run_start = np.minimum.accumulate(run_start)  # keep it non-increasing
            run_value = None
        run = _descend(fobj, mu, run_start, run_value, cfg,
                       monotone_cone=(fobj.mode == "free-tail"))
        restart_objectives.append(run[1])
        if best is None or run[1] < best[1]:
            best = run
    vector, value, trace, sweeps, converged = best
    if not math.isfinite(value):
        raise OptimizerError("objective infinite at every probed allocation")
    full = fobj.full_rates(vector)
    if full is None:
        raise OptimizerError("final prefix lost its pinned tail rate")
    ell, p = _ell_and_blocking(model, full)
    # the capacity-exact tail descriptor; at the pinned fixed point this
    # equals sqrt(ell_M) up to the pinning tolerance
    c = mu - float(np.sum(full[:-1]))
    tail_ratio = 1.0 - float(full[-1]) / c
    allocation = Allocation(full, total=mu, tail_ratio=tail_ratio)
    metrics = compute_metrics(model, allocation, depth=cfg.horizon, n_max=cfg.n_max)
    if cfg.objective == "delay":
        q = np.concatenate([[1.0], p[:-1]]) - p
        residual = value - float(np.sum(q / full))
    else:
        residual = metrics.residual
    return OptimizationResult(
        allocation=allocation,
        objective_value=value,
        residual=residual,
        sweeps=sweeps,
        trace=trace,
        metrics=metrics,
        converged=converged,
        restarts_run=max(1, cfg.restarts),
        restart_objectives=restart_objectives,
        tail_pinning="fixed-point" if fobj.mode == "pinned" else "free-tail",
    )
