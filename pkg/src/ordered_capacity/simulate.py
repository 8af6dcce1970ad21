"""Discrete-event simulation of the ordered-entry loss system (first n servers).

Each arrival joins the lowest-indexed idle server and never switches;
arrivals finding all n servers busy leave (the depth-n truncation).  All
statistics are collected at arrival epochs, matching the analytic
arrival-epoch probabilities.  Standard errors come from batch means over
consecutive post-warmup arrivals.
"""

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError

_CHUNK = 1 << 16


@dataclass
class SimConfig:
    model: object
    rates: tuple
    arrivals: int = 1_000_000
    warmup: int = 10_000
    seed: int = 0
    batches: int = 50
    collect_gap_levels: tuple = ()

    def validate(self):
        if not self.rates or any(r <= 0.0 for r in self.rates):
            raise ValueError("rates must be a non-empty positive sequence")
        if self.arrivals <= self.warmup:
            raise ValueError("arrivals must exceed warmup")
        if self.batches < 2:
            raise ValueError("need at least 2 batches for standard errors")


@dataclass
class SimResult:
    """Arrival-epoch estimates for a depth-n truncation.

    p_hat[j-1] estimates P(servers 1..j busy); q_hat[j-1] = p_hat[j-2] -
    p_hat[j-1] holds exactly by construction.  overflow_mean[j] is the mean
    gap between consecutive arrivals finding servers 1..j busy (level 0 is
    the plain inter-arrival time).  Identical config and seed reproduce the
    result exactly.
    """

    n_servers: int
    observed: int
    p_hat: np.ndarray
    p_se: np.ndarray
    q_hat: np.ndarray
    delay_mean: float
    delay_se: float
    served: int
    blocked: int
    overflow_mean: np.ndarray
    overflow_count: np.ndarray
    gaps: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, SimResult):
            return NotImplemented
        same = (
            self.n_servers == other.n_servers
            and self.observed == other.observed
            and self.served == other.served
            and self.blocked == other.blocked
            and np.array_equal(self.p_hat, other.p_hat)
            and np.array_equal(self.p_se, other.p_se)
            and np.array_equal(self.q_hat, other.q_hat)
            and self.delay_mean == other.delay_mean
            and self.delay_se == other.delay_se
            and np.array_equal(self.overflow_mean, other.overflow_mean)
            and np.array_equal(self.overflow_count, other.overflow_count)
        )
        if not same:
            return False
        if set(self.gaps) != set(other.gaps):
            return False
        return all(np.array_equal(self.gaps[k], other.gaps[k]) for k in self.gaps)


class _Stream:
    """Chunked draws from one generator; consumption order is deterministic."""

    def __init__(self, draw):
        self._draw = draw
        self._buf = draw(_CHUNK)
        self._i = 0

    def next(self):
        if self._i == len(self._buf):
            self._buf = self._draw(_CHUNK)
            self._i = 0
        v = self._buf[self._i]
        self._i += 1
        return v


def simulate(config):
    """Run the event loop and return a SimResult."""
    config.validate()
    rates = tuple(float(r) for r in config.rates)
    n = len(rates)
    rng = np.random.default_rng(config.seed)
    arrivals_stream = _Stream(lambda k: config.model.sample(rng, k))
    service_stream = _Stream(lambda k: rng.exponential(1.0, k))

    observed = config.arrivals - config.warmup
    batches = config.batches
    batch_size = observed / batches

    idle = list(range(n))  # already a heap: 0..n-1
    busy = []  # (completion_time, server)
    t = 0.0
    # count_ge[b, j]: post-warmup arrivals in batch b with fastest idle > j
    count_ge = np.zeros((batches, n), dtype=np.int64)
    batch_n = np.zeros(batches, dtype=np.int64)
    delay_sum = np.zeros(batches)
    delay_cnt = np.zeros(batches, dtype=np.int64)
    last_overflow = np.full(n + 1, np.nan)
    gap_sum = np.zeros(n + 1)
    gap_cnt = np.zeros(n + 1, dtype=np.int64)
    gap_lists = {int(j): [] for j in config.collect_gap_levels}
    blocked = 0

    warmup = config.warmup
    for i in range(config.arrivals):
        t += arrivals_stream.next()
        while busy and busy[0][0] <= t:
            _, srv = heapq.heappop(busy)
            heapq.heappush(idle, srv)
        y = idle[0] + 1 if idle else n + 1  # fastest idle server, 1-based
        counting = i >= warmup
        if counting:
            b = int((i - warmup) * batches / observed)
            batch_n[b] += 1
            if y > 1:
                count_ge[b, : min(y - 1, n)] += 1
        # overflow gap bookkeeping at levels 0..y-1 (servers 1..j all busy)
        for j in range(min(y, n + 1)):
            prev = last_overflow[j]
            if not math.isnan(prev) and counting:
                gap = t - prev
                gap_sum[j] += gap
                gap_cnt[j] += 1
                if j in gap_lists:
                    gap_lists[j].append(gap)
            last_overflow[j] = t
        if idle:
            srv = heapq.heappop(idle)
            service = service_stream.next() / rates[srv]
            heapq.heappush(busy, (t + service, srv))
            if counting:
                delay_sum[b] += service
                delay_cnt[b] += 1
        elif counting:
            blocked += 1

    p_batch = count_ge / batch_n[:, None]
    p_hat = count_ge.sum(axis=0) / observed
    p_se = p_batch.std(axis=0, ddof=1) / math.sqrt(batches)
    q_hat = np.concatenate([[1.0], p_hat[:-1]]) - p_hat
    served = int(delay_cnt.sum())
    delay_mean = float(delay_sum.sum() / served) if served else math.nan
    valid = delay_cnt > 0
    if valid.sum() >= 2:
        d_batch = delay_sum[valid] / delay_cnt[valid]
        delay_se = float(d_batch.std(ddof=1) / math.sqrt(valid.sum()))
    else:
        delay_se = math.nan
    with np.errstate(invalid="ignore"):
        overflow_mean = np.where(gap_cnt > 0, gap_sum / np.maximum(gap_cnt, 1), np.nan)
    return SimResult(
        n_servers=n,
        observed=observed,
        p_hat=p_hat,
        p_se=p_se,
        q_hat=q_hat,
        delay_mean=delay_mean,
        delay_se=delay_se,
        served=served,
        blocked=blocked,
        overflow_mean=overflow_mean,
        overflow_count=gap_cnt,
        gaps={j: np.asarray(v) for j, v in gap_lists.items()},
    )


@dataclass
class OverflowStats:
    level: int
    count: int
    mean: float
    se: float
    gaps: np.ndarray

    def empirical_lst(self, s):
        """Estimate (value, standard error) of E[exp(-s T)] from the gaps."""
        x = np.exp(-s * self.gaps)
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def overflow_times(config, level, result=None):
    """Gap statistics at one overflow level, simulating if needed.

    Raises InsufficientDataError below 100 recorded gaps.
    """
    if level < 0 or level > len(config.rates):
        raise ValueError(f"level must be in 0..{len(config.rates)}")
    if result is None or level not in result.gaps:
        cfg = SimConfig(
            model=config.model,
            rates=config.rates,
            arrivals=config.arrivals,
            warmup=config.warmup,
            seed=config.seed,
            batches=config.batches,
            collect_gap_levels=tuple(set(config.collect_gap_levels) | {level}),
        )
        result = simulate(cfg)
    gaps = result.gaps[level]
    if len(gaps) < 100:
        raise InsufficientDataError(
            f"only {len(gaps)} overflow gaps recorded at level {level} (need 100)"
        )
    return OverflowStats(
        level=level,
        count=len(gaps),
        mean=float(gaps.mean()),
        se=float(gaps.std(ddof=1) / math.sqrt(len(gaps))),
        gaps=gaps,
    )


def merge_results(results):
    """Inverse-variance merge of independent replications (same server count).

    Returns (p_hat, p_se, delay_mean, delay_se); levels whose standard error
    is zero in any replication are merged by simple averaging.
    """
    if not results:
        raise ValueError("nothing to merge")
    n = results[0].n_servers
    if any(r.n_servers != n for r in results):
        raise ValueError("replications must share the server count")
    p = np.stack([r.p_hat for r in results])
    se = np.stack([r.p_se for r in results])
    with np.errstate(divide="ignore"):
        w = 1.0 / np.square(se)
    merged_p = np.empty(n)
    merged_se = np.empty(n)
    for j in range(n):
        if np.all(np.isfinite(w[:, j])):
            tot = w[:, j].sum()
            merged_p[j] = float((w[:, j] * p[:, j]).sum() / tot)
            merged_se[j] = float(math.sqrt(1.0 / tot))
        else:
            merged_p[j] = float(p[:, j].mean())
            merged_se[j] = 0.0
    dm = np.array([r.delay_mean for r in results])
    ds = np.array([r.delay_se for r in results])
    if np.all(ds > 0):
        wd = 1.0 / np.square(ds)
        delay_mean = float((wd * dm).sum() / wd.sum())
        delay_se = float(math.sqrt(1.0 / wd.sum()))
    else:
        delay_mean = float(dm.mean())
        delay_se = 0.0
    return merged_p, merged_se, delay_mean, delay_se
