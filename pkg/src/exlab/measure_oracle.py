"""Limit-measure evaluation: boxes under the seed-times-compounding measure,
cylinder probabilities under the multi-step limit measure, and truncation
certificates for the limit sampler.

The measures here live over extreme states rescaled to the Pareto scale.
Seeds land with intensity ``nu_alpha``, the measure on ``(0, inf]`` with
``nu_alpha((x, inf]) = x**-alpha``, and each seed ``x`` is multiplied by an
independent compounding factor ``Y`` (a functional of the multiplicative
walk, e.g. one multiplier or the running supremum).  The pair ``(seed,
seed * Y)`` then follows the product measure

    nu(dx, dy) = nu_alpha(dx) P[x Y in dy],

whose boxes have the closed form

    nu([0, x] x (y, inf]) = y**-a E[Y^a 1{Y > y/x}] - x**-a P[Y > y/x],

and in particular ``nu([0, inf] x (y, inf]) = y**-a E[Y^a]``.  The
multi-step analogue chains ``m`` multipliers from a seed:

    mu(dx_0, dx_1..m) = nu_alpha(dx_0) P[seed-started walk in dx_1..m],

evaluated here on products of intervals by importance sampling (draw the
seed from the normalized restriction of ``nu_alpha`` to the queried first
interval, weight by that interval's mass — exact, zero bias).

``truncation_error_bound`` applies the box formula with ``Y`` = running
supremum to certify a seed cutoff ``delta`` for the limit sampler: it
bounds the expected number of discarded seed clusters that would have
risen above a given level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._rng import chunk_sizes, proportion_ci, root_generator, split
from .distributions import TailDistribution

__all__ = [
    "Interval",
    "MuCylinderEstimate",
    "ProductMeasureSpec",
    "auto_truncation_delta",
    "mu_cylinder",
    "nu_alpha_mass",
    "nu_box",
    "truncation_error_bound",
]


def nu_alpha_mass(alpha: float, lo: float, hi: float = math.inf) -> float:
    """``nu_alpha((lo, hi])`` = ``lo**-alpha - hi**-alpha``; requires lo > 0."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not 0 < lo <= hi:
        raise ValueError("need 0 < lo <= hi")
    return lo**-alpha - (0.0 if math.isinf(hi) else hi**-alpha)


@dataclass(frozen=True)
class Interval:
    """One coordinate interval of a cylinder, with explicit endpoint openness.

    Endpoint openness matters only where the coordinate law has atoms — in
    practice at 0, where a dead walk sits exactly.  ``hi = inf`` with
    ``hi_open=False`` means the interval reaches the point at infinity.
    """

    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise ValueError("interval needs lo <= hi")

    @classmethod
    def above(cls, a: float) -> "Interval":
        """``(a, inf]``."""
        return cls(a, math.inf, lo_open=True)

    @classmethod
    def closed(cls, lo: float, hi: float) -> "Interval":
        """``[lo, hi]``."""
        return cls(lo, hi)

    @classmethod
    def everything(cls) -> "Interval":
        """``[0, inf]`` — no constraint on a nonnegative coordinate."""
        return cls(0.0, math.inf)

    def contains(self, v: np.ndarray) -> np.ndarray:
        lo_ok = v > self.lo if self.lo_open else v >= self.lo
        hi_ok = v < self.hi if self.hi_open else v <= self.hi
        return lo_ok & hi_ok


@dataclass(frozen=True, eq=False)
class ProductMeasureSpec:
    """The compounding law ``Y`` paired with the tail exponent ``alpha``.

    Two representations: a deterministic value (closed forms), or an
    empirical sample kept sorted with suffix sums of ``Y**alpha`` so that
    the tail moment ``E[Y^alpha 1{Y > u}]`` and tail probability
    ``P[Y > u]`` cost O(log n) per query — they are hit repeatedly by the
    truncation auto-tuner.
    """

    alpha: float
    value: float | None = None
    sample: np.ndarray | None = None
    _suffix: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if (self.value is None) == (self.sample is None):
            raise ValueError("give exactly one of value (deterministic) or sample")
        if self.value is not None and (self.value < 0 or not math.isfinite(self.value)):
            raise ValueError("deterministic Y must be finite and nonnegative")

    @classmethod
    def from_deterministic(cls, alpha: float, value: float) -> "ProductMeasureSpec":
        return cls(alpha=alpha, value=float(value))

    @classmethod
    def from_sample(cls, alpha: float, sample) -> "ProductMeasureSpec":
        arr = np.sort(np.asarray(sample, dtype=float))
        if arr.size == 0:
            raise ValueError("empirical Y sample is empty")
        if arr[0] < 0 or not np.isfinite(arr[-1]):
            raise ValueError("Y sample must be finite and nonnegative")
        powered = arr**alpha
        suffix = np.zeros(arr.size + 1)
        suffix[:-1] = np.cumsum(powered[::-1])[::-1] / arr.size
        return cls(alpha=alpha, sample=arr, _suffix=suffix)

    # -- O(log n) tail queries -------------------------------------------

    def tail_prob(self, u: float) -> float:
        """``P[Y > u]``."""
        if self.value is not None:
            return 1.0 if self.value > u else 0.0
        idx = int(np.searchsorted(self.sample, u, side="right"))
        return (self.sample.size - idx) / self.sample.size

    def tail_moment(self, u: float) -> float:
        """``E[Y^alpha 1{Y > u}]``."""
        if self.value is not None:
            return self.value**self.alpha if self.value > u else 0.0
        idx = int(np.searchsorted(self.sample, u, side="right"))
        return float(self._suffix[idx])

    def moment(self) -> float:
        """``E[Y^alpha]``."""
        return self.tail_moment(-1.0)


def nu_box(spec: ProductMeasureSpec, x: float, y: float) -> float:
    """``nu([0, x] x (y, inf])`` for the seed-times-compounding measure.

    ``x`` may be ``inf`` (the full seed range), giving ``y**-a E[Y^a]``.
    The formula is evaluated analytically for deterministic ``Y`` and as a
    sample average otherwise.  ``y = 0`` is outside the measure's domain
    (the measure is infinite there) and is refused rather than extrapolated.
    """
    if not x > 0 or math.isnan(x):
        raise ValueError("x must be positive (possibly inf)")
    if not y > 0 or math.isnan(y):
        raise ValueError("y must be positive")
    a = spec.alpha
    ratio = y / x  # 0.0 when x = inf
    x_term = 0.0 if math.isinf(x) else x**-a * spec.tail_prob(ratio)
    return max(0.0, y**-a * spec.tail_moment(ratio) - x_term)


@dataclass(frozen=True, eq=False)
class MuCylinderEstimate:
    """Importance-sampled cylinder mass under the multi-step limit measure."""

    value: float
    ci: tuple[float, float]
    seed_mass: float
    hit_rate: float
    n_reps: int
    m: int


def mu_cylinder(
    alpha: float,
    G: TailDistribution,
    m: int,
    cylinder: Sequence[Interval],
    n_reps: int = 100_000,
    rng: np.random.Generator | None = None,
    ci_level: float = 0.99,
) -> MuCylinderEstimate:
    """Mass of ``I_0 x I_1 x ... x I_m`` under the ``m``-step limit measure.

    Draws the seed ``x_0`` from ``nu_alpha`` restricted to ``I_0``
    (normalized — exact importance sampling), multiplies ``m`` iid factors
    from ``G``, and averages the indicator that every coordinate lands in
    its interval; the result is the hit rate times ``nu_alpha(I_0)``.  The
    first interval must be bounded away from 0, where ``nu_alpha`` has
    infinite mass.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(cylinder) != m + 1:
        raise ValueError(f"cylinder needs m + 1 = {m + 1} intervals, got {len(cylinder)}")
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    first = cylinder[0]
    if first.lo <= 0:
        raise ValueError(
            "first interval touches 0: the seed measure has infinite mass there; "
            "query a first interval bounded away from 0"
        )
    if rng is None:
        rng = root_generator(None)
    mass = nu_alpha_mass(alpha, first.lo, first.hi)
    lo_pow = first.lo**-alpha
    hits = 0
    sizes = chunk_sizes(n_reps)
    for size, stream in zip(sizes, split(rng, len(sizes))):
        u = stream.random(size)
        x = (lo_pow - u * mass) ** (-1.0 / alpha)
        ok = first.contains(x)  # endpoint openness is measure-null but kept exact
        t = x
        for j in range(1, m + 1):
            t = t * np.asarray(G.sample(stream, size), dtype=float)
            ok &= cylinder[j].contains(t)
        hits += int(np.count_nonzero(ok))
    rate, lo, hi = proportion_ci(hits, n_reps, ci_level)
    return MuCylinderEstimate(
        value=mass * rate,
        ci=(mass * lo, mass * hi),
        seed_mass=mass,
        hit_rate=rate,
        n_reps=n_reps,
        m=m,
    )


def truncation_error_bound(
    sup_spec: ProductMeasureSpec,
    s_max: float,
    q: float,
    a: float,
    delta: float,
) -> float:
    """Certified cost of ignoring limit-process seeds at or below ``delta``.

    Seeds arrive on a ``[0, s_max]`` window with intensity
    ``(s_max / q) nu_alpha``; a discarded seed ``i <= delta`` matters at
    level ``a`` only if its compounded cluster climbs above ``a``, i.e. if
    ``i * sup > a`` with ``sup`` the walk supremum the spec describes.  By
    the box formula with ``Y = sup``, the expected number of such clusters
    is at most

        (s_max / q) * a**-alpha * E[sup^alpha 1{sup > a / delta}],

    which this returns.  It decreases monotonically to 0 as ``delta``
    drops and is 0 outright once ``a / delta`` clears the supremum's
    range.  The caller must have certified ``E[sup^alpha]`` finite (the
    supremum-statistics route refuses to produce samples otherwise).
    """
    if s_max <= 0 or q < 1:
        raise ValueError("need s_max > 0 and q >= 1")
    if a <= 0 or delta <= 0:
        raise ValueError("need level a > 0 and delta > 0")
    return (s_max / q) * a**-sup_spec.alpha * sup_spec.tail_moment(a / delta)


def auto_truncation_delta(
    sup_spec: ProductMeasureSpec,
    s_max: float,
    q: float,
    a: float,
    tol: float,
    delta_max: float | None = None,
    iters: int = 60,
) -> float:
    """Largest seed cutoff whose truncation bound stays within ``tol``.

    Bisects on ``log delta`` below ``delta_max`` (default ``a``), relying
    on the bound's monotonicity.  Always terminates: once ``a / delta``
    exceeds the supremum's range the bound is exactly 0.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    hi = a if delta_max is None else delta_max
    if hi <= 0:
        raise ValueError("delta_max must be positive")
    if truncation_error_bound(sup_spec, s_max, q, a, hi) <= tol:
        return hi
    lo = hi
    while truncation_error_bound(sup_spec, s_max, q, a, lo) > tol:
        lo /= 2.0
        if lo < 1e-300:  # pragma: no cover - tol <= 0 is rejected above
            raise RuntimeError("truncation bound does not reach the tolerance")
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if truncation_error_bound(sup_spec, s_max, q, a, mid) <= tol:
            lo = mid
        else:
            hi = mid
    return lo
