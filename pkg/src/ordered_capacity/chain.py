"""Overflow-time transform recursion for an ordered loss system.

Level n of the chain is the stream of arrivals that find servers 1..n all
busy.  Its inter-overflow transform L_n obeys

    L_n(s) = L_{n-1}(mu_n + s) / (1 - L_{n-1}(s) + L_{n-1}(mu_n + s)),

with L_0 the external inter-arrival transform.  The recursion tree for a
single evaluation doubles per level, so the chain memoizes (level, argument)
pairs and also offers a vectorized bottom-up sweep used on hot paths.
"""

import math

import numpy as np

from .errors import CapacityError, LevelError, NumericDegeneracyError

DEFAULT_N_MAX = 25

# Below this the recursion denominator is considered degenerate; it is
# mathematically >= L_{n-1}(mu_n + s) > 0, so hitting the guard means the
# computation already lost all precision.
_DEN_GUARD = 1e-300


class Allocation:
    """A service-rate series: explicit positive prefix + optional geometric tail.

    The prefix lists mu_1..mu_M.  With tail_ratio r in (0,1) the series
    continues as mu_n = mu_M * r**(n-M) for n > M, carrying total mass
    mu_M * r / (1-r).  Everything allocated must fit inside `total`.

    Rates must be non-increasing (fastest server first); pass monotone=False
    only for diagnostic evaluations of out-of-order series.
    """

    def __init__(self, rates, total=None, tail_ratio=None, monotone=True):
        rates = tuple(float(r) for r in rates)
        if not rates:
            raise ValueError("allocation prefix must not be empty")
        if any(r <= 0.0 for r in rates):
            raise ValueError("all service rates must be strictly positive")
        if tail_ratio is not None:
            tail_ratio = float(tail_ratio)
            if not 0.0 < tail_ratio < 1.0:
                raise ValueError(f"tail ratio must lie in (0,1), got {tail_ratio}")
        if monotone:
            for a, b in zip(rates, rates[1:]):
                if b > a * (1.0 + 1e-12):
                    raise ValueError(
                        "rates must be non-increasing (fastest server first); "
                        "pass monotone=False for diagnostic use"
                    )
        tail_mass = 0.0
        if tail_ratio is not None:
            tail_mass = rates[-1] * tail_ratio / (1.0 - tail_ratio)
        allocated = math.fsum(rates) + tail_mass
        if total is None:
            total = allocated
        else:
            total = float(total)
            if allocated > total * (1.0 + 1e-9):
                raise CapacityError(
                    f"allocated mass {allocated} exceeds total capacity {total}"
                )
        self.rates = rates
        self.total = total
        self.tail_ratio = tail_ratio
        self._partial = np.cumsum(rates)

    def __repr__(self):
        head = ", ".join(f"{r:.6g}" for r in self.rates[:4])
        if len(self.rates) > 4:
            head += ", ..."
        tail = f", tail_ratio={self.tail_ratio:.6g}" if self.tail_ratio else ""
        return f"Allocation([{head}], total={self.total:.6g}{tail})"

    @property
    def depth(self):
        """Length of the explicit prefix."""
        return len(self.rates)

    def rate(self, n):
        """mu_n for 1-based n, following the geometric tail beyond the prefix."""
        if n < 1:
            raise LevelError(f"server index must be >= 1, got {n}")
        if n <= len(self.rates):
            return self.rates[n - 1]
        if self.tail_ratio is None:
            raise LevelError(f"level {n} beyond prefix of length {len(self.rates)}")
        return self.rates[-1] * self.tail_ratio ** (n - len(self.rates))

    def partial_sum(self, n):
        """s_n = mu_1 + ... + mu_n over the prefix (s_0 = 0)."""
        if n == 0:
            return 0.0
        if n > len(self.rates):
            raise LevelError(f"level {n} beyond prefix of length {len(self.rates)}")
        return float(self._partial[n - 1])

    def remaining(self, n):
        """Capacity left after the first n servers, total - s_n."""
        return self.total - self.partial_sum(n)

    def materialize(self, depth, monotone=True):
        """Return an Allocation whose prefix extends to `depth` using the tail."""
        if depth <= len(self.rates):
            return Allocation(self.rates[:depth], total=self.total,
                              tail_ratio=self.tail_ratio, monotone=monotone)
        if self.tail_ratio is None:
            raise LevelError(f"cannot extend tail-less prefix to depth {depth}")
        rates = list(self.rates)
        while len(rates) < depth:
            rates.append(rates[-1] * self.tail_ratio)
        return Allocation(rates, total=self.total, tail_ratio=self.tail_ratio,
                          monotone=monotone)

    def is_non_increasing(self):
        return all(a * (1.0 + 1e-12) >= b for a, b in zip(self.rates, self.rates[1:]))


def lst_sweep(model, rates, level, points):
    """Evaluate L_level at `points` with one bottom-up vectorized pass.

    Returns (values, ell) where ell[n-1] = L_{n-1}(mu_n) for n = 1..level,
    picked up for free on the way.  The per-level point arrays use a
    positional layout, P_{j-1} = [P_j | P_j + mu_j | mu_j], so children are
    located by offset and no sorting or hashing is needed.  The arithmetic
    is identical to the scalar recursion, so values agree bit for bit.
    """
    points = np.atleast_1d(np.asarray(points, dtype=float))
    if np.any(points < 0.0):
        raise ValueError("transform argument must be nonnegative")
    if level == 0:
        return model.lst(points), np.empty(0)
    pts = [None] * (level + 1)
    pts[level] = points
    for j in range(level, 0, -1):
        mu_j = rates[j - 1]
        pts[j - 1] = np.concatenate([pts[j], pts[j] + mu_j, [mu_j]])
    v = model.lst(pts[0])
    ell = np.empty(level)
    for j in range(1, level + 1):
        m = len(pts[j])
        ls = v[:m]
        lm = v[m:2 * m]
        ell[j - 1] = v[2 * m]
        den = 1.0 - ls + lm
        if np.min(den) <= _DEN_GUARD:
            raise NumericDegeneracyError(
                f"overflow recursion denominator underflow at level {j}"
            )
        v = lm / den
    return v, ell


class OverflowChain:
    """Memoized evaluator of L_n(s) and L_n'(s) for one model + allocation.

    A chain instance is bound to an arrival model and a rate prefix; values
    and derivatives are computed jointly (the derivative recursion needs the
    values at two shifted points) and cached per (level, exact argument).
    """

    def __init__(self, model, allocation, n_max=DEFAULT_N_MAX):
        self.model = model
        self.allocation = allocation
        self.n_max = int(n_max)
        self._memo = [dict() for _ in range(min(allocation.depth, self.n_max) + 1)]
        self._ell = None  # longest ell table computed so far

    @property
    def max_level(self):
        return min(self.allocation.depth, self.n_max)

    def _check_level(self, n):
        if n < 0:
            raise LevelError(f"level must be >= 0, got {n}")
        if n > self.max_level:
            raise LevelError(
                f"level {n} beyond max level {self.max_level} "
                f"(prefix length {self.allocation.depth}, n_max {self.n_max})"
            )

    def _eval(self, n, s):
        """(L_n(s), L_n'(s)) by the memoized scalar recursion."""
        if n == 0:
            return float(self.model.lst(s)), float(self.model.lst_deriv(s))
        memo = self._memo[n]
        hit = memo.get(s)
        if hit is not None:
            return hit
        mu_n = self.allocation.rates[n - 1]
        ls, dls = self._eval(n - 1, s)
        lm, dlm = self._eval(n - 1, mu_n + s)
        den = 1.0 - ls + lm
        if den <= _DEN_GUARD:
            raise NumericDegeneracyError(
                f"overflow recursion denominator underflow at level {n}, s={s}"
            )
        val = lm / den
        deriv = (dlm * (1.0 - ls) + dls * lm) / (den * den)
        memo[s] = (val, deriv)
        return val, deriv

    def lst(self, n, s):
        """L_n(s), the level-n overflow inter-arrival transform."""
        self._check_level(n)
        if s < 0.0:
            raise ValueError("transform argument must be nonnegative")
        return self._eval(n, float(s))[0]

    def lst_deriv(self, n, s):
        """L_n'(s) from the joint derivative recursion (nonpositive)."""
        self._check_level(n)
        if s < 0.0:
            raise ValueError("transform argument must be nonnegative")
        return self._eval(n, float(s))[1]

    def ell(self, n):
        """ell_n = L_{n-1}(mu_n), the per-level blocking ratio."""
        return float(self.ell_table(n)[n - 1])

    def ell_table(self, depth):
        """ell_1..ell_depth via the vectorized sweep (cached)."""
        self._check_level(depth)
        if depth < 1:
            raise LevelError("depth must be >= 1")
        if self._ell is None or len(self._ell) < depth:
            rates = self.allocation.rates[:depth]
            v, ell = lst_sweep(self.model, rates[:-1], depth - 1, [rates[-1]])
            self._ell = np.append(ell, v[0]) if depth > 1 else np.array([float(v[0])])
        return self._ell[:depth]

    def lst_bulk(self, n, points):
        """L_n at an array of points in one vectorized pass."""
        self._check_level(n)
        values, _ = lst_sweep(self.model, self.allocation.rates[:n], n, points)
        return values

    def mean_overflow_time(self, n):
        """E[T_n] = 1/(lam * p_n); equals -L_n'(0).  inf if p_n underflows."""
        self._check_level(n)
        if n == 0:
            return 1.0 / self.model.lam
        p_n = float(np.prod(self.ell_table(n)))
        if p_n <= 0.0:
            return math.inf
        return 1.0 / (self.model.lam * p_n)

    def ell_product_form(self, n):
        """ell_n by the iterated product identity (cross-check diagnostic).

        Computes L_{n-1}(mu_n) as L_0(s_n) divided by the product over
        i < n of [1 - L_{i-1}(sum_{k>i}^n mu_k) + L_{i-1}(sum_{k>=i}^n mu_k)].
        Numerically redundant with the direct recursion; kept as an
        independent route for validation.
        """
        self._check_level(n)
        rates = self.allocation.rates
        if n < 1:
            raise LevelError("product form defined for n >= 1")
        num = float(self.model.lst(math.fsum(rates[:n])))
        den = 1.0
        for i in range(1, n):
            hi = math.fsum(rates[i - 1:n])
            lo = math.fsum(rates[i:n])
            den *= 1.0 - self.lst(i - 1, lo) + self.lst(i - 1, hi)
        if den <= _DEN_GUARD:
            raise NumericDegeneracyError("product-form denominator underflow")
        return num / den
