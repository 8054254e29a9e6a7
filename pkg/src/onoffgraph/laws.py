"""Discrete positive-integer duration laws and the series functions used to invert them.

Three parametric families are supported, all with support {1, 2, ...}:

* geometric, survival (1-p)^(i-1)
* discrete Weibull, survival exp(-lambda * (i-1)^alpha)
* Pareto/Lomax, survival C^alpha / (C + i - 1)^alpha

Each law exposes its survival function, pmf, mean, an exact inverse-transform
sampler, and its residual (equilibrium) law.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import InfiniteMeanError, OutOfRangeError, ParameterError

DEFAULT_SERIES_TOL = 1e-12
DEFAULT_INVERT_TOL = 1e-10

_CACHE_BLOCK = 1024


def _as_index(i):
    arr = np.asarray(i)
    if np.any(arr < 1):
        raise ValueError("duration index must be >= 1")
    return arr.astype(np.float64)


class DurationLaw:
    """Shared behaviour of the parametric families."""

    def survival(self, i):
        """P(Z >= i) for integer i >= 1 (scalar or array)."""
        raise NotImplementedError

    def mean(self):
        raise NotImplementedError

    def _sample_candidate(self, u):
        raise NotImplementedError

    def pmf(self, k):
        """P(Z = k) = survival(k) - survival(k+1)."""
        k = np.asarray(k)
        return self.survival(k) - self.survival(k + 1)

    def residual(self):
        return ResidualLaw(self)

    def sample(self, u):
        """Inverse-transform sample: the unique i with survival(i+1) < u <= survival(i).

        The closed-form candidate only seeds a local search; the bracketing
        condition itself is enforced, which resolves floating-point boundary
        cases.
        """
        u = np.asarray(u, dtype=np.float64)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        if np.any(u <= 0.0) or np.any(u > 1.0):
            raise ValueError("u must lie in (0, 1]")
        i = np.maximum(np.nan_to_num(self._sample_candidate(u), nan=1.0), 1.0)
        i = i.astype(np.int64)
        for _ in range(128):
            too_big = self.survival(i) < u
            too_small = self.survival(i + 1) >= u
            if not (too_big.any() or too_small.any()):
                break
            i = i - too_big.astype(np.int64) + too_small.astype(np.int64)
            i = np.maximum(i, 1)
        return int(i[0]) if scalar else i

    def to_config(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Geometric(DurationLaw):
    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ParameterError(f"geometric p must be in (0,1), got {self.p}")

    def survival(self, i):
        return (1.0 - self.p) ** (_as_index(i) - 1.0)

    def mean(self):
        return 1.0 / self.p

    def _sample_candidate(self, u):
        return np.floor(np.log(u) / math.log1p(-self.p)) + 1.0

    def to_config(self):
        return {"kind": "geometric", "p": self.p}


@dataclass(frozen=True)
class Weibull(DurationLaw):
    lam: float
    alpha: float

    def __post_init__(self):
        if self.lam <= 0.0 or self.alpha <= 0.0:
            raise ParameterError(
                f"weibull needs lambda > 0 and alpha > 0, got ({self.lam}, {self.alpha})"
            )

    def survival(self, i):
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(-self.lam * (_as_index(i) - 1.0) ** self.alpha)

    def mean(self):
        return weibull_survival_sum(self.lam, self.alpha)

    def _sample_candidate(self, u):
        return np.floor((-np.log(u) / self.lam) ** (1.0 / self.alpha)) + 1.0

    def to_config(self):
        return {"kind": "weibull", "lambda": self.lam, "alpha": self.alpha}


@dataclass(frozen=True)
class Pareto(DurationLaw):
    C: float
    alpha: float

    def __post_init__(self):
        if self.C <= 0.0 or self.alpha <= 0.0:
            raise ParameterError(
                f"pareto needs C > 0 and alpha > 0, got ({self.C}, {self.alpha})"
            )

    def survival(self, i):
        return (self.C / (self.C + _as_index(i) - 1.0)) ** self.alpha

    def mean(self):
        if self.alpha <= 1.0:
            raise InfiniteMeanError(f"pareto mean is infinite for alpha={self.alpha} <= 1")
        return hurwitz_like(self.C, self.alpha)

    def _sample_candidate(self, u):
        return np.floor(self.C * (u ** (-1.0 / self.alpha) - 1.0)) + 1.0

    def to_config(self):
        return {"kind": "pareto", "C": self.C, "alpha": self.alpha}


class ResidualLaw:
    """Equilibrium law of a duration law: pmf(k) = survival(k) / mean.

    A cumulative table is cached for sampling and extended on demand in
    blocks, so heavy-tailed residuals get unbounded support without
    precomputation. Extension is guarded by a lock so the law can be shared
    across threads.
    """

    def __init__(self, law: DurationLaw):
        self.law = law
        self._mean = law.mean()
        self._lock = threading.Lock()
        self._cdf = np.cumsum(law.survival(np.arange(1, _CACHE_BLOCK + 1))) / self._mean

    def pmf(self, k):
        return self.law.survival(k) / self._mean

    def survival(self, k):
        """P(residual >= k) = 1 - sum_{l<k} pmf(l)."""
        k = np.asarray(k)
        kmax = int(np.max(k))
        if kmax > 1:
            self._extend(kmax - 1)
        cdf = self._cdf
        head = np.where(k > 1, cdf[np.minimum(k, kmax) - 2], 0.0)
        return np.maximum(1.0 - head, 0.0)

    def mean(self):
        # E[residual] = sum_k residual survival; rarely needed, summed directly
        k = 1
        total = 0.0
        while True:
            block = np.arange(k, k + 65536)
            vals = self.survival(block)
            total += vals.sum()
            if vals[-1] < 1e-15:
                return total
            k += 65536
            if k > 1 << 26:
                raise InfiniteMeanError("residual mean did not converge")

    def _extend(self, m):
        if m <= len(self._cdf):
            return
        with self._lock:
            while len(self._cdf) < m:
                lo = len(self._cdf) + 1
                block = np.arange(lo, lo + _CACHE_BLOCK)
                tail = self._cdf[-1] + np.cumsum(self.law.survival(block)) / self._mean
                self._cdf = np.concatenate([self._cdf, tail])

    def sample(self, u):
        u = np.asarray(u, dtype=np.float64)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        if np.any(u <= 0.0) or np.any(u > 1.0):
            raise ValueError("u must lie in (0, 1]")
        umax = float(u.max())
        while self._cdf[-1] < umax and 1.0 - self._cdf[-1] > 1e-15:
            self._extend(len(self._cdf) + _CACHE_BLOCK)
        i = np.searchsorted(self._cdf, u, side="left") + 1
        i = np.minimum(i, len(self._cdf))
        return int(i[0]) if scalar else i.astype(np.int64)


# ---------------------------------------------------------------------------
# Series functions: Riemann zeta, the Pareto normalization zeta(C, .), and chi
# ---------------------------------------------------------------------------


def _power_series_sum(C, alpha, tol):
    """sum_{i>=1} C^alpha / (C + i - 1)^alpha with certified truncation.

    The tail is replaced by the midpoint integral; the Euler-Maclaurin
    remainder bounds the error.
    """
    if alpha <= 1.0:
        raise OutOfRangeError(f"series diverges for alpha={alpha} <= 1")
    scale = C**alpha
    total = 0.0
    m = 0
    block = 4096
    while True:
        i = np.arange(m + 1, m + block + 1, dtype=np.float64)
        total += float(np.sum((C + i - 1.0) ** (-alpha)))
        m += block
        x = C + m - 0.5
        tail = x ** (1.0 - alpha) / (alpha - 1.0)
        err = scale * alpha * x ** (-alpha - 1.0) / 12.0
        if err <= tol:
            return scale * (total + tail)
        if m >= 1 << 26:
            # alpha extremely close to 1; accept the best certified value
            return scale * (total + tail)
        block = min(block * 2, 1 << 22)


def zeta_like(alpha, tol=DEFAULT_SERIES_TOL):
    """Riemann zeta as the series sum_{i>=1} i^-alpha, alpha > 1."""
    return _power_series_sum(1.0, alpha, tol)


def hurwitz_like(C, alpha, tol=DEFAULT_SERIES_TOL):
    """zeta(C, alpha) := sum_{i>=1} C^alpha / (C + i - 1)^alpha, alpha > 1."""
    if C <= 0.0:
        raise ParameterError(f"C must be positive, got {C}")
    return _power_series_sum(C, alpha, tol)


def weibull_survival_sum(lam, alpha, tol=DEFAULT_SERIES_TOL):
    """sum_{i>=1} exp(-lam * (i-1)^alpha); equals chi(alpha) when lam = 1."""
    if lam <= 0.0 or alpha <= 0.0:
        raise OutOfRangeError(f"series needs lam > 0, alpha > 0, got ({lam}, {alpha})")
    total = 0.0
    m = 0
    block = 256
    with np.errstate(over="ignore", under="ignore"):
        while True:
            i = np.arange(m, m + block, dtype=np.float64)  # i = (index - 1)
            total += float(np.sum(np.exp(-lam * i**alpha)))
            m += block
            # tail sum_{y>=m} exp(-lam y^alpha) <= integral_{m-1}^inf
            a = np.float64(m - 1)
            bound = (
                special.gamma(1.0 / alpha)
                / (alpha * lam ** (1.0 / alpha))
                * special.gammaincc(1.0 / alpha, float(lam * a**alpha))
            )
            if bound <= tol:
                return total
            if m >= 1 << 22:
                # alpha so small that the sum is astronomically large; the
                # partial sum is already far beyond any inversion target
                return total
            block = min(block * 2, 1 << 20)


def chi_like(alpha, tol=DEFAULT_SERIES_TOL):
    """chi(alpha) := sum_{i>=1} exp(-(i-1)^alpha), alpha > 0."""
    return weibull_survival_sum(1.0, alpha, tol)


def _invert_decreasing(fn, target, lo, hi, limit, tol, name):
    """Invert a strictly decreasing function with range (limit, inf)."""
    if not np.isfinite(target) or target <= limit:
        raise OutOfRangeError(
            f"target {target} is outside the range of {name} (must exceed {limit})"
        )
    # expand the bracket until fn(lo) >= target >= fn(hi)
    for _ in range(200):
        if fn(hi) <= target:
            break
        hi *= 2.0
    for _ in range(200):
        if fn(lo) >= target:
            break
        lo = limit + (lo - limit) / 2.0 if limit > 0 else lo / 2.0
    flo, fhi = fn(lo), fn(hi)
    if not (flo >= target >= fhi):
        raise OutOfRangeError(f"could not bracket target {target} for {name}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if abs(fm - target) <= tol or hi - lo < 1e-14 * max(1.0, mid):
            return mid
        if fm > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def invert_zeta_like(target, tol=DEFAULT_INVERT_TOL):
    """alpha with zeta(alpha) = target; requires target > 1."""
    return _invert_decreasing(
        lambda a: zeta_like(a), target, 1.0 + 1e-6, 64.0, 1.0, tol, "zeta"
    )


def invert_hurwitz_like(C, target, tol=DEFAULT_INVERT_TOL):
    """alpha with zeta(C, alpha) = target; requires target > 1."""
    return _invert_decreasing(
        lambda a: hurwitz_like(C, a), target, 1.0 + 1e-6, 64.0, 1.0, tol, "hurwitz"
    )


def invert_chi_like(target, tol=DEFAULT_INVERT_TOL):
    """alpha with chi(alpha) = target; requires target > 1 + exp(-1).

    chi(alpha) -> 1 + e^-1 as alpha -> inf because the i = 2 term never
    decays, so targets at or below that level are unreachable.
    """
    return _invert_decreasing(
        lambda a: chi_like(a), target, 1e-6, 64.0, 1.0 + math.exp(-1.0), tol, "chi"
    )


def sample_duration(law, u):
    """Inverse-transform sample from a DurationLaw or ResidualLaw."""
    return law.sample(u)


# ---------------------------------------------------------------------------
# Config text representation
# ---------------------------------------------------------------------------


def law_from_config(cfg: dict) -> DurationLaw:
    """Build a law from {"kind": ..., ...} as used in config files."""
    kind = cfg.get("kind")
    if kind == "geometric":
        return Geometric(p=float(cfg["p"]))
    if kind == "weibull":
        return Weibull(lam=float(cfg["lambda"]), alpha=float(cfg["alpha"]))
    if kind == "pareto":
        return Pareto(C=float(cfg["C"]), alpha=float(cfg["alpha"]))
    raise ParameterError(f"unknown law kind {kind!r}")
