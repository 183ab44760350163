"""Multiplicative random walk started from a high level, and its cluster
constants.

Right after an extreme excursion the rescaled chain evolves, in the limit,
as ``T_n = T_0 * m_1 * ... * m_n`` with iid nonnegative multipliers drawn
from the domain-of-attraction law of the kernel (module ``kernels``).  The
walk is transient when the multipliers carry an atom at zero (the walk dies
at a Geometric time) or drift downward in log scale; its running supremum
then has finite statistics, and three derived constants control the
clustering of extremes:

* ``c`` — the scale of the regularly varying tail of a cycle maximum,
  ``c = P[sup <= 1] + E[sup^alpha; sup > 1]`` where ``sup`` is the running
  supremum of the multiplier products;
* ``theta_stationary = c - E[sup^alpha]`` — the extremal index written
  against the stationary law;
* ``theta_regenerative = E[sup^alpha] / (q - 1)`` — the same index written
  against the mean renewal spacing ``q``.

The module simulates the walk, estimates the supremum statistics by
chunked lock-step Monte Carlo with an explicit truncation policy, takes
analytic shortcuts where the law is degenerate, and packages the results
with provenance and confidence intervals.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from ._rng import chunk_sizes, map_chunks, mean_ci, proportion_ci, root_generator, split
from .distributions import SPEC_VERSION, TailDistribution

__all__ = [
    "LimitConstants",
    "SupStatistics",
    "TailChainPath",
    "Transience",
    "check_transience",
    "constant_c",
    "extremal_index",
    "simulate_tail_chain",
    "sup_sample",
    "sup_statistics",
]

#: simulation defaults: stop a path once its product falls below KILL_EPSILON,
#: but never before HORIZON_MIN steps (an early dip may still be followed by a
#: new maximum), and never run past the horizon.
KILL_EPSILON = 1e-12
HORIZON_MIN = 64
DEFAULT_HORIZON = 4096


class Transience(str, enum.Enum):
    """Why (or whether) the multiplicative walk dies out."""

    BY_ATOM = "transient_by_atom"  # multipliers hit exact zero with positive probability
    BY_DRIFT = "transient_by_drift"  # E log multiplier < 0, walk drifts to zero
    NOT_TRANSIENT = "not_transient"  # products provably do not vanish
    INCONCLUSIVE = "inconclusive"  # Monte Carlo drift estimate straddles zero

    def is_transient(self) -> bool:
        return self in (Transience.BY_ATOM, Transience.BY_DRIFT)


@dataclass(frozen=True)
class TailChainPath:
    """One simulated path of the multiplicative walk.

    ``products[i]`` is the product of the first ``i + 1`` multipliers; the
    walk values are ``start_value * products``.  ``death_time`` is the first
    1-based step whose product is exactly zero (``inf`` if none was
    observed).  ``truncated`` is True when the recorded running supremum
    could still be exceeded by the unsimulated remainder of the path; it is
    False after death, and after a kill-threshold stop when the multiplier
    law is bounded by 1 (the products can then never rise again).
    """

    multipliers: np.ndarray
    products: np.ndarray
    start_value: float
    death_time: float
    truncated: bool

    def __post_init__(self) -> None:
        if self.multipliers.shape != self.products.shape:
            raise ValueError("multipliers and products must have equal length")
        if self.start_value < 0:
            raise ValueError("start_value must be nonnegative")
        if math.isfinite(self.death_time):
            step = int(self.death_time)
            if not (1 <= step <= self.products.size) or self.products[step - 1] != 0.0:
                raise ValueError("death_time does not point at the first zero product")

    @property
    def values(self) -> np.ndarray:
        """The walk values ``start_value * products`` (step 0 excluded)."""
        return self.start_value * self.products

    def __len__(self) -> int:
        return int(self.products.size)


def simulate_tail_chain(
    dist: TailDistribution,
    start_value: float = 1.0,
    horizon: int = DEFAULT_HORIZON,
    kill_epsilon: float = KILL_EPSILON,
    rng: np.random.Generator | None = None,
    horizon_min: int = HORIZON_MIN,
) -> TailChainPath:
    """Simulate one multiplicative-walk path.

    The path stops at the first of: a multiplier product hitting exact zero
    (death), the product dropping below ``kill_epsilon`` at step
    ``>= horizon_min`` (kill), or ``horizon`` steps.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if kill_epsilon <= 0:
        raise ValueError("kill_epsilon must be positive")
    if start_value < 0:
        raise ValueError("start_value must be nonnegative")
    if rng is None:
        rng = root_generator(None)

    mult_parts: list[np.ndarray] = []
    prod_parts: list[np.ndarray] = []
    carry = 1.0
    n_done = 0
    block = 16
    death = math.inf
    stopped = False
    while not stopped and n_done < horizon:
        m = min(block, horizon - n_done)
        block = min(block * 4, 4096)
        x = np.asarray(dist.sample(rng, m), dtype=float)
        p = carry * np.cumprod(x)
        steps = n_done + 1 + np.arange(m)
        dead = p == 0.0
        stop = dead | ((p < kill_epsilon) & (steps >= horizon_min))
        if stop.any():
            cut = int(np.argmax(stop))
            x, p = x[: cut + 1], p[: cut + 1]
            if dead[cut]:
                death = float(steps[cut])
            stopped = True
        mult_parts.append(x)
        prod_parts.append(p)
        n_done += x.size
        carry = float(p[-1])
    products = np.concatenate(prod_parts)
    final = float(products[-1])
    truncated = not (
        math.isfinite(death) or (final < kill_epsilon and dist.upper_bound() <= 1.0)
    )
    return TailChainPath(
        multipliers=np.concatenate(mult_parts),
        products=products,
        start_value=float(start_value),
        death_time=death,
        truncated=truncated,
    )


def check_transience(
    dist: TailDistribution,
    alpha: float | None = None,
    n_probe: int = 100_000,
    rng: np.random.Generator | None = None,
    force_monte_carlo: bool = False,
) -> Transience:
    """Decide whether the multiplicative walk dies out almost surely.

    An atom at zero is decisive on its own; otherwise the sign of
    ``E log multiplier`` decides (closed form where available, else a Monte
    Carlo estimate whose 99% CI must exclude zero).  ``alpha`` is accepted
    for signature uniformity with the estimators; whether the walk dies does
    not depend on it.
    """
    del alpha
    if dist.point_mass_at_zero > 0:
        return Transience.BY_ATOM
    drift = None if force_monte_carlo else dist.mean_log()
    if drift is not None:
        return Transience.BY_DRIFT if drift < 0 else Transience.NOT_TRANSIENT
    if rng is None:
        rng = root_generator(None)
    logs = np.log(np.asarray(dist.sample(rng, n_probe), dtype=float))
    _, lo, hi = mean_ci(logs, level=0.99)
    if hi < 0:
        return Transience.BY_DRIFT
    if lo > 0:
        return Transience.NOT_TRANSIENT
    return Transience.INCONCLUSIVE


# ---------------------------------------------------------------------------
# supremum statistics


def _sup_death_batch(
    dist: TailDistribution,
    horizon: int,
    n: int,
    rng: np.random.Generator,
    kill_epsilon: float,
    horizon_min: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Lock-step simulation of ``n`` paths.

    Returns per-path running suprema of the products over steps >= 1 and
    per-path death steps (``inf`` when no exact zero was observed).  Paths
    are compacted out of the working arrays as they stop, so the cost is
    proportional to the total number of alive steps, not ``n * horizon``.
    """
    sup = np.zeros(n)
    death = np.full(n, math.inf)
    idx = np.arange(n)
    prod = np.ones(n)
    run = np.zeros(n)
    step = 0
    while idx.size and step < horizon:
        step += 1
        x = np.asarray(dist.sample(rng, idx.size), dtype=float)
        prod = prod * x
        run = np.maximum(run, prod)
        dead = prod == 0.0
        drop = dead | (prod < kill_epsilon) if step >= horizon_min else dead
        if drop.any():
            death[idx[dead]] = step
            sup[idx[drop]] = run[drop]
            keep = ~drop
            idx, prod, run = idx[keep], prod[keep], run[keep]
    if idx.size:
        sup[idx] = run
    return sup, death


def _collect_sups(
    dist: TailDistribution,
    horizon: int,
    n_reps: int,
    rng: np.random.Generator,
    kill_epsilon: float,
    horizon_min: int,
    threads: int,
) -> np.ndarray:
    """Chunked collection of per-path suprema with per-chunk RNG streams."""
    sizes = chunk_sizes(n_reps)
    streams = split(rng, len(sizes))
    jobs = [
        (dist, horizon, m, stream, kill_epsilon, horizon_min)
        for m, stream in zip(sizes, streams)
    ]
    parts = map_chunks(_chunk_sups, jobs, threads=threads)
    return np.concatenate(parts)


def _chunk_sups(dist, horizon, m, stream, kill_epsilon, horizon_min) -> np.ndarray:
    return _sup_death_batch(dist, horizon, m, stream, kill_epsilon, horizon_min)[0]


def sup_sample(
    dist: TailDistribution,
    n_reps: int,
    rng: np.random.Generator | None = None,
    horizon: int = DEFAULT_HORIZON,
    *,
    kill_epsilon: float = KILL_EPSILON,
    horizon_min: int = HORIZON_MIN,
    threads: int = 1,
) -> np.ndarray:
    """Draw iid copies of the walk's running supremum over steps >= 1.

    The raw-sample companion to :func:`sup_statistics`, for consumers that
    need the supremum's empirical law itself (tail-moment queries, limit
    measures) rather than summary statistics.  The walk must be transient,
    or the truncation policy would bite arbitrarily often.
    """
    verdict = check_transience(dist)
    if not verdict.is_transient():
        raise ValueError(f"transience check failed ({verdict.value})")
    if rng is None:
        rng = root_generator(None)
    return _collect_sups(dist, horizon, n_reps, rng, kill_epsilon, horizon_min, threads)


def _bootstrap_mean_ci(
    values: np.ndarray, level: float, rng: np.random.Generator, n_resamples: int = 400
) -> tuple[float, float, float]:
    """Percentile-bootstrap CI for a mean (for heavy-tailed summands whose
    variance may be infinite, where the normal approximation is not
    trustworthy)."""
    n = values.size
    means = np.empty(n_resamples)
    for i in range(n_resamples):
        means[i] = values[rng.integers(0, n, size=n)].mean()
    lo, hi = np.quantile(means, [(1 - level) / 2, (1 + level) / 2])
    return float(values.mean()), float(lo), float(hi)


@dataclass(frozen=True)
class SupStatistics:
    """Monte Carlo statistics of the walk's running supremum.

    ``sup_moment`` is ``E[sup^alpha]`` over the (truncated) infinite
    horizon, ``sup_moment_above_1`` restricts to paths whose supremum
    exceeds 1, and ``c``/``theta_stationary`` are the per-path combinations
    ``1{sup<=1} + sup^alpha 1{sup>1}`` and ``(1 - sup^alpha) 1{sup<=1}``,
    estimated on the same paths so the identities ``c = p_sup_le_1 +
    sup_moment_above_1`` and ``theta_stationary = c - sup_moment`` hold
    exactly.
    """

    alpha: float
    p_sup_le_1: float
    p_sup_le_1_ci: tuple[float, float]
    sup_moment: float
    sup_moment_ci: tuple[float, float]
    sup_moment_above_1: float
    sup_moment_above_1_ci: tuple[float, float]
    c: float
    c_ci: tuple[float, float]
    theta_stationary: float
    theta_stationary_ci: tuple[float, float]
    n_reps: int
    horizon: int
    ci_method: str
    ci_level: float
    doubling_gap: float | None


def sup_statistics(
    dist: TailDistribution,
    alpha: float,
    horizon: int = DEFAULT_HORIZON,
    n_reps: int = 100_000,
    rng: np.random.Generator | None = None,
    *,
    kill_epsilon: float = KILL_EPSILON,
    horizon_min: int = HORIZON_MIN,
    validate_by_doubling: bool = True,
    ci_level: float = 0.99,
    threads: int = 1,
) -> SupStatistics:
    """Estimate the running-supremum statistics of the multiplicative walk.

    Refuses when the walk is not certifiably transient (the supremum may
    then be infinite) and when ``E multiplier^alpha >= 1`` (which forces
    ``E sup^alpha = inf``).  Confidence intervals use the normal
    approximation when ``E multiplier^(2 alpha) < 1`` guarantees a finite
    variance for ``sup^alpha``; otherwise a percentile bootstrap.  With
    ``validate_by_doubling`` the whole estimate is repeated at twice the
    horizon and the two ``sup_moment`` values must agree within the sum of
    their CI half-widths, a self-consistency check on the truncation
    policy.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if n_reps < 2:
        raise ValueError("n_reps must be at least 2")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    verdict = check_transience(dist)
    if not verdict.is_transient():
        raise ValueError(
            f"transience check failed ({verdict.value}): the running supremum "
            "may be unbounded, so its statistics are not estimable"
        )
    step_moment = dist.moment(alpha)
    if step_moment >= 1.0:
        raise ValueError(
            f"E[multiplier^alpha] = {step_moment} >= 1 forces an infinite "
            "supremum moment; the cluster constants are undefined"
        )
    if rng is None:
        rng = root_generator(None)

    sups = _collect_sups(dist, horizon, n_reps, rng, kill_epsilon, horizon_min, threads)
    heavy = dist.moment(2.0 * alpha) >= 1.0

    def build(sups: np.ndarray, boot_rng: np.random.Generator | None):
        sup_pow = sups**alpha
        le1 = sups <= 1.0
        above = np.where(le1, 0.0, sup_pow)
        c_contrib = np.where(le1, 1.0, sup_pow)
        theta_contrib = np.where(le1, 1.0 - sup_pow, 0.0)
        p, p_lo, p_hi = proportion_ci(int(le1.sum()), sups.size, ci_level)
        if heavy:
            mom = _bootstrap_mean_ci(sup_pow, ci_level, boot_rng)
            abv = _bootstrap_mean_ci(above, ci_level, boot_rng)
            cc = _bootstrap_mean_ci(c_contrib, ci_level, boot_rng)
        else:
            mom = mean_ci(sup_pow, ci_level)
            abv = mean_ci(above, ci_level)
            cc = mean_ci(c_contrib, ci_level)
        th = mean_ci(theta_contrib, ci_level)  # bounded in [0, 1]: normal CI is safe
        return p, (p_lo, p_hi), mom, abv, cc, th

    boot_rng = split(rng, 1)[0] if heavy else None
    p, p_ci, mom, abv, cc, th = build(sups, boot_rng)

    doubling_gap = None
    if validate_by_doubling:
        sups2 = _collect_sups(
            dist, 2 * horizon, n_reps, rng, kill_epsilon, horizon_min, threads
        )
        boot_rng2 = split(rng, 1)[0] if heavy else None
        _, _, mom2, _, _, _ = build(sups2, boot_rng2)
        doubling_gap = abs(mom[0] - mom2[0])
        allowed = (mom[2] - mom[1]) / 2 + (mom2[2] - mom2[1]) / 2
        if doubling_gap > allowed:
            raise RuntimeError(
                "supremum statistics are not stable under horizon doubling "
                f"(gap {doubling_gap:.3g} > allowed {allowed:.3g}); "
                "increase horizon"
            )

    return SupStatistics(
        alpha=float(alpha),
        p_sup_le_1=p,
        p_sup_le_1_ci=p_ci,
        sup_moment=mom[0],
        sup_moment_ci=(mom[1], mom[2]),
        sup_moment_above_1=abv[0],
        sup_moment_above_1_ci=(abv[1], abv[2]),
        c=cc[0],
        c_ci=(cc[1], cc[2]),
        theta_stationary=th[0],
        theta_stationary_ci=(th[1], th[2]),
        n_reps=int(n_reps),
        horizon=int(horizon),
        ci_method="bootstrap" if heavy else "normal",
        ci_level=float(ci_level),
        doubling_gap=doubling_gap,
    )


# ---------------------------------------------------------------------------
# cluster constants


@dataclass(frozen=True)
class LimitConstants:
    """The cluster constants of a multiplier law, with provenance.

    ``step_moment`` is the closed-form ``E[multiplier^alpha]``; the
    supremum fields are either analytic (degenerate laws) or Monte Carlo
    estimates with confidence intervals under ``ci``.  ``q`` (the mean
    renewal spacing of the driving chain) and ``theta_regenerative`` are
    filled later via :meth:`with_q` once cycle statistics are known.
    """

    alpha: float
    step_moment: float
    sup_moment: float
    p_sup_le_1: float
    sup_moment_above_1: float
    c: float
    theta_stationary: float
    q: float | None = None
    theta_regenerative: float | None = None
    provenance: str = "analytic"
    n_reps: int | None = None
    ci: dict[str, tuple[float, float]] | None = field(default=None)

    def __post_init__(self) -> None:
        tol = 1e-9 * max(1.0, abs(self.c))
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0.0 <= self.p_sup_le_1 <= 1.0:
            raise ValueError("p_sup_le_1 must lie in [0, 1]")
        if abs(self.c - (self.p_sup_le_1 + self.sup_moment_above_1)) > tol:
            raise ValueError("c must equal p_sup_le_1 + sup_moment_above_1")
        if abs(self.theta_stationary - (self.c - self.sup_moment)) > tol:
            raise ValueError("theta_stationary must equal c - sup_moment")
        if not -tol <= self.theta_stationary <= 1.0 + tol:
            raise ValueError("theta_stationary must lie in [0, 1]")
        if self.step_moment > 1.0 + 1e-9:
            raise ValueError(
                "step_moment > 1 contradicts a finite supremum moment"
            )
        if self.q is not None and self.q < 1.0:
            raise ValueError("q must be >= 1")
        if self.provenance not in ("analytic", "monte_carlo"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def with_q(self, q: float) -> "LimitConstants":
        """Fill in the renewal spacing and the regenerative extremal index."""
        if q <= 1.0:
            raise ValueError(
                f"regenerative extremal-index formula undefined for q = {q} <= 1"
            )
        return replace(
            self, q=float(q), theta_regenerative=self.sup_moment / (float(q) - 1.0)
        )

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "spec_version": SPEC_VERSION,
            "alpha": self.alpha,
            "step_moment": self.step_moment,
            "sup_moment": self.sup_moment,
            "p_sup_le_1": self.p_sup_le_1,
            "sup_moment_above_1": self.sup_moment_above_1,
            "c": self.c,
            "theta_stationary": self.theta_stationary,
            "q": self.q,
            "theta_regenerative": self.theta_regenerative,
            "provenance": self.provenance,
            "n_reps": self.n_reps,
            "ci": None
            if self.ci is None
            else {k: list(v) for k, v in self.ci.items()},
        }
        return doc

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "LimitConstants":
        version = doc.get("spec_version", SPEC_VERSION)
        if version != SPEC_VERSION:
            raise ValueError(f"unsupported spec_version {version}")
        ci = doc.get("ci")
        return cls(
            alpha=doc["alpha"],
            step_moment=doc["step_moment"],
            sup_moment=doc["sup_moment"],
            p_sup_le_1=doc["p_sup_le_1"],
            sup_moment_above_1=doc["sup_moment_above_1"],
            c=doc["c"],
            theta_stationary=doc["theta_stationary"],
            q=doc.get("q"),
            theta_regenerative=doc.get("theta_regenerative"),
            provenance=doc.get("provenance", "analytic"),
            n_reps=doc.get("n_reps"),
            ci=None if ci is None else {k: (v[0], v[1]) for k, v in ci.items()},
        )


def constant_c(
    dist: TailDistribution,
    alpha: float,
    horizon: int = DEFAULT_HORIZON,
    n_reps: int = 200_000,
    rng: np.random.Generator | None = None,
    *,
    kill_epsilon: float = KILL_EPSILON,
    horizon_min: int = HORIZON_MIN,
    force_monte_carlo: bool = False,
    validate_by_doubling: bool = True,
    ci_level: float = 0.99,
    threads: int = 1,
) -> LimitConstants:
    """Assemble the cluster constants for a multiplier law.

    Uses the analytic route for degenerate laws (the supremum is then a
    known constant), otherwise Monte Carlo via :func:`sup_statistics`.
    ``q`` is left unset; fill it with :meth:`LimitConstants.with_q` once
    renewal statistics are available.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    verdict = check_transience(dist)
    if not verdict.is_transient():
        raise ValueError(
            f"transience check failed ({verdict.value}); the cluster "
            "constants are undefined"
        )
    value = dist.deterministic_value()
    if value is not None and not force_monte_carlo:
        sup = float(value)  # the supremum of v^n over n >= 1 for v < 1, or 0
        sup_pow = sup**alpha
        return LimitConstants(
            alpha=float(alpha),
            step_moment=float(dist.moment(alpha)),
            sup_moment=sup_pow,
            p_sup_le_1=1.0,
            sup_moment_above_1=0.0,
            c=1.0,
            theta_stationary=1.0 - sup_pow,
            provenance="analytic",
        )
    st = sup_statistics(
        dist,
        alpha,
        horizon=horizon,
        n_reps=n_reps,
        rng=rng,
        kill_epsilon=kill_epsilon,
        horizon_min=horizon_min,
        validate_by_doubling=validate_by_doubling,
        ci_level=ci_level,
        threads=threads,
    )
    return LimitConstants(
        alpha=float(alpha),
        step_moment=float(dist.moment(alpha)),
        sup_moment=st.sup_moment,
        p_sup_le_1=st.p_sup_le_1,
        sup_moment_above_1=st.sup_moment_above_1,
        c=st.c,
        theta_stationary=st.theta_stationary,
        provenance="monte_carlo",
        n_reps=st.n_reps,
        ci={
            "p_sup_le_1": st.p_sup_le_1_ci,
            "sup_moment": st.sup_moment_ci,
            "sup_moment_above_1": st.sup_moment_above_1_ci,
            "c": st.c_ci,
            "theta_stationary": st.theta_stationary_ci,
        },
    )


def extremal_index(
    constants: LimitConstants, q: float | None = None
) -> tuple[float, float | None]:
    """Both extremal-index formulas from assembled constants.

    Returns ``(theta_stationary, theta_regenerative)``; the regenerative
    value is ``None`` when no renewal spacing ``q`` is available, and
    ``q <= 1`` is an error (the formula divides by ``q - 1``).
    """
    q_eff = q if q is not None else constants.q
    theta_s = constants.c - constants.sup_moment
    if q_eff is None:
        return theta_s, None
    if q_eff <= 1.0:
        raise ValueError(
            f"regenerative extremal-index formula undefined for q = {q_eff} <= 1"
        )
    return theta_s, constants.sup_moment / (q_eff - 1.0)
