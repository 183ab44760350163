"""Exceedance point patterns and the limiting cluster-Poisson sampler.

The empirical object is the scaled exceedance pattern of a simulated path:
points ``(j/n, X_j/b_n)`` kept above a mark floor.  Its limit under the
regenerative asymptotics is a cluster Poisson process: Poisson seed points
``(time, seed mark)`` — time uniform over the window, seed marks Pareto
above a cutoff ``delta`` — each compounded into a vertical *stack* of marks
by an independent run of the multiplicative tail walk.  This module builds
both, counts points in boxes, extracts cluster-size distributions, and
compares empirical and limit replicates box by box.

The unrestricted limit has infinitely many stacks (seed marks accumulate
at 0), so it is only ever represented through the exact ``delta``-restricted
sampler; the companion certificate from :mod:`exlab.measure_oracle` bounds
the expected number of discarded stacks that would still have been visible.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import chi2_contingency

from ._rng import root_generator
from .distributions import TailDistribution, pareto
from .kernels import ChainPath, KernelSpec, step_columns
from .measure_oracle import ProductMeasureSpec, nu_alpha_mass, truncation_error_bound
from .tail_chain import (
    DEFAULT_HORIZON,
    HORIZON_MIN,
    KILL_EPSILON,
    check_transience,
    sup_sample,
)

__all__ = [
    "PATTERN_KINDS",
    "BoxResult",
    "ClusterSizeDistribution",
    "ClusterStack",
    "ComparisonReport",
    "PointPattern",
    "box_count",
    "build_Nn",
    "cluster_size_distribution",
    "compare_patterns",
    "export_pattern_csv",
    "replicate_Nn",
    "sample_limit",
]

PATTERN_KINDS = ("empirical_Nn", "limit_eta_delta", "limit_eta")

#: refuse to materialize patterns beyond this expected stack count
MAX_EXPECTED_STACKS = 2 * 10**7


def _resolve_window(window, delta: float | None = None) -> tuple[float, float]:
    """Normalize ``window`` to ``(s_max, mark_floor)``.

    A bare number is accepted for the limit samplers, where the mark floor
    defaults to ``delta / 2`` — low enough to retain stack points that fall
    below the seed cutoff but above any queryable level.
    """
    if isinstance(window, (int, float)):
        if delta is None:
            raise ValueError("window must be a (s_max, mark_floor) pair")
        window = (float(window), delta / 2.0)
    s_max, mark_floor = window
    s_max = float(s_max)
    if mark_floor is None:
        if delta is None:
            raise ValueError("window must carry an explicit mark_floor")
        mark_floor = delta / 2.0
    mark_floor = float(mark_floor)
    if not (s_max > 0 and math.isfinite(s_max)):
        raise ValueError("window needs s_max > 0")
    if not (mark_floor > 0):
        raise ValueError(
            "window needs mark_floor > 0: the pattern is only a finite "
            "(Radon) object on marks bounded away from 0"
        )
    return s_max, mark_floor


@dataclass(frozen=True, eq=False)
class PointPattern:
    """A finite pattern of (time, mark) points on ``[0, s_max] x (mark_floor, inf]``.

    ``stack_ids`` groups the points of a limit pattern into vertical stacks
    (one id per seed); it is ``None`` for empirical patterns.
    """

    times: np.ndarray
    marks: np.ndarray
    window: tuple[float, float]
    kind: str
    stack_ids: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        marks = np.asarray(self.marks, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)
        if self.kind not in PATTERN_KINDS:
            raise ValueError(f"kind must be one of {PATTERN_KINDS}, got {self.kind!r}")
        s_max, mark_floor = _resolve_window(self.window)
        object.__setattr__(self, "window", (s_max, mark_floor))
        if times.shape != marks.shape or times.ndim != 1:
            raise ValueError("times and marks must be 1-d arrays of equal length")
        if times.size:
            if times.min() < 0 or times.max() > s_max * (1 + 1e-12) + 1e-12:
                raise ValueError("pattern times must lie in [0, s_max]")
            if not (marks > mark_floor).all():
                raise ValueError("pattern marks must exceed the mark floor")
        if self.stack_ids is not None:
            ids = np.asarray(self.stack_ids, dtype=int)
            object.__setattr__(self, "stack_ids", ids)
            if ids.shape != times.shape:
                raise ValueError("stack_ids must align with the points")

    @property
    def s_max(self) -> float:
        return self.window[0]

    @property
    def mark_floor(self) -> float:
        return self.window[1]

    @property
    def n_points(self) -> int:
        return int(self.times.size)

    @property
    def points(self) -> np.ndarray:
        """The points as an ``(n, 2)`` array of (time, mark) rows."""
        return np.column_stack([self.times, self.marks])


@dataclass(frozen=True, eq=False)
class ClusterStack:
    """One vertical stack of the limit pattern.

    ``marks[j]`` is the seed mark times the walk's value at step ``j``; the
    walk starts at 1, so ``marks[0] == seed_mark``.  ``truncated`` is False
    when the stack ended by an exact hit of 0 (its length is then the full
    stack length) and True when the walk was cut off by the numerical kill
    rule or the step horizon.
    """

    time: float
    seed_mark: float
    marks: np.ndarray
    truncated: bool = False

    def __post_init__(self) -> None:
        marks = np.asarray(self.marks, dtype=float)
        object.__setattr__(self, "marks", marks)
        if self.time < 0:
            raise ValueError("stack time must be nonnegative")
        if marks.size == 0 or marks[0] != self.seed_mark:
            raise ValueError("marks[0] must equal seed_mark (the walk starts at 1)")
        if not (marks > 0).all():
            raise ValueError("stack marks must be positive (death at 0 ends the stack)")

    def __len__(self) -> int:
        return int(self.marks.size)


# ---------------------------------------------------------------------------
# empirical pattern


def build_Nn(path: ChainPath, n: int, b_n: float, window) -> PointPattern:
    """Scaled exceedance pattern of a path: points ``(j/n, X_j/b_n)``.

    Keeps every index ``j`` with ``j/n <= s_max`` whose scaled state exceeds
    the mark floor.  The path must cover the whole time window.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if not (b_n > 0 and math.isfinite(b_n)):
        raise ValueError("b_n must be positive and finite")
    s_max, mark_floor = _resolve_window(window)
    last = int(math.floor(s_max * n + 1e-9))
    need = last + 1
    states = np.asarray(path.states, dtype=float)
    if states.size < need:
        raise ValueError(
            f"path too short: the window [0, {s_max}] at n={n} needs {need} "
            f"states but the path has {states.size}"
        )
    scaled = states[:need] / b_n
    keep = np.flatnonzero(scaled > mark_floor)
    return PointPattern(
        times=keep / n,
        marks=scaled[keep],
        window=(s_max, mark_floor),
        kind="empirical_Nn",
        meta={"n": int(n), "b_n": float(b_n)},
    )


def replicate_Nn(
    kernel: KernelSpec,
    n: int,
    b_n: float,
    window,
    n_reps: int,
    rng: np.random.Generator | None = None,
) -> list[PointPattern]:
    """Independent copies of the empirical pattern, simulated lock-step.

    Runs ``n_reps`` chains side by side (one vectorized transition per time
    index) and records only the exceedances, so the cost is the stepping
    itself — full paths are never stored.  All chains start from a fresh
    draw of the return distribution.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be a positive integer")
    if n < 1:
        raise ValueError("n must be a positive integer")
    if not (b_n > 0 and math.isfinite(b_n)):
        raise ValueError("b_n must be positive and finite")
    s_max, mark_floor = _resolve_window(window)
    if rng is None:
        rng = root_generator(None)
    last = int(math.floor(s_max * n + 1e-9))
    level = mark_floor * b_n
    states = np.asarray(kernel.h_return.sample(rng, n_reps), dtype=float)
    rep_chunks: list[np.ndarray] = []
    time_chunks: list[np.ndarray] = []
    mark_chunks: list[np.ndarray] = []
    for j in range(last + 1):
        hit = np.flatnonzero(states > level)
        if hit.size:
            rep_chunks.append(hit)
            time_chunks.append(np.full(hit.size, j))
            mark_chunks.append(states[hit] / b_n)
        if j < last:
            states = step_columns(kernel, states, rng)
    if rep_chunks:
        reps = np.concatenate(rep_chunks)
        times = np.concatenate(time_chunks) / n
        marks = np.concatenate(mark_chunks)
        order = np.argsort(reps, kind="stable")
        reps, times, marks = reps[order], times[order], marks[order]
        counts = np.bincount(reps, minlength=n_reps)
        splits = np.split(np.arange(reps.size), np.cumsum(counts)[:-1])
    else:
        times = marks = np.empty(0)
        splits = [np.empty(0, dtype=int)] * n_reps
    meta = {"n": int(n), "b_n": float(b_n)}
    return [
        PointPattern(
            times=times[rows],
            marks=marks[rows],
            window=(s_max, mark_floor),
            kind="empirical_Nn",
            meta=dict(meta),
        )
        for rows in splits
    ]


# ---------------------------------------------------------------------------
# limit sampler


def _compound_stacks(
    dist: TailDistribution,
    seeds: np.ndarray,
    rng: np.random.Generator,
    *,
    kill_epsilon: float = KILL_EPSILON,
    horizon: int = DEFAULT_HORIZON,
    horizon_min: int = HORIZON_MIN,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Run one multiplicative walk per seed; collect ``seed * walk`` marks.

    Lock-step over all stacks with compaction: a stack leaves the working
    set when its walk hits exactly 0 (complete stack) or is cut off by the
    kill rule / horizon (truncated stack).  Returns the per-stack mark
    arrays — ``marks[0]`` is the seed itself — and the truncation flags.
    """
    k = seeds.size
    ids_chunks = [np.arange(k)]
    mark_chunks = [seeds.astype(float, copy=True)]
    truncated = np.zeros(k, dtype=bool)
    idx = np.arange(k)
    prod = np.ones(k)
    step = 0
    while idx.size and step < horizon:
        step += 1
        z = np.asarray(dist.sample(rng, idx.size), dtype=float)
        prod = prod * z
        live = prod != 0.0
        if live.any():
            ids_chunks.append(idx[live])
            mark_chunks.append(seeds[idx[live]] * prod[live])
        if step >= horizon_min:
            kill = live & (prod < kill_epsilon)
        else:
            kill = np.zeros(idx.size, dtype=bool)
        truncated[idx[kill]] = True
        keep = live & ~kill
        idx, prod = idx[keep], prod[keep]
    if idx.size:
        truncated[idx] = True
    flat_ids = np.concatenate(ids_chunks)
    flat_marks = np.concatenate(mark_chunks)
    order = np.argsort(flat_ids, kind="stable")  # stable: keeps step order
    counts = np.bincount(flat_ids, minlength=k)
    per_stack = np.split(flat_marks[order], np.cumsum(counts)[:-1])
    return per_stack, truncated


def _draw_seeds(
    alpha: float, lo: float, hi: float, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Seed marks from the Pareto intensity restricted to ``(lo, hi]``."""
    if math.isinf(hi):
        return lo * np.asarray(pareto(alpha).sample(rng, size), dtype=float)
    mass = nu_alpha_mass(alpha, lo, hi)
    u = rng.random(size)
    return (lo**-alpha - u * mass) ** (-1.0 / alpha)


def sample_limit(
    alpha: float,
    q: float,
    G: TailDistribution,
    window,
    delta: float,
    mode: str = "eta_delta",
    rng: np.random.Generator | None = None,
    *,
    sup_spec: ProductMeasureSpec | None = None,
    n_sup: int = 20_000,
    kill_epsilon: float = KILL_EPSILON,
    horizon: int = DEFAULT_HORIZON,
) -> tuple[PointPattern, list[ClusterStack]]:
    """Sample the limiting cluster-Poisson pattern with seed cutoff ``delta``.

    A Poisson number of stacks — mean ``(s_max/q) * delta**-alpha`` — is
    placed uniformly in time; each stack's seed mark is ``delta`` times a
    Pareto(``alpha``) draw, compounded downward by an independent
    multiplicative walk with step law ``G``.  The pattern keeps the marks
    above the window's floor; the stacks keep every positive mark generated.

    ``mode="eta_delta"`` is the exact restricted limit: nothing below the
    cutoff exists in the target object, so no approximation is involved.
    ``mode="eta_approx"`` uses the same sampler as a stand-in for the
    unrestricted limit and adds the certified truncation bound (from
    :func:`exlab.measure_oracle.truncation_error_bound`) to
    ``meta["truncation_error_bound"]``: the expected number of discarded
    stacks per window whose peak would have cleared
    ``meta["truncation_bound_level"]`` — the larger of ``delta`` and the
    mark floor, which is the smallest level the certificate covers.  (At
    levels below the seed cutoff a discarded stack can be visible through
    its seed mark alone, which no walk-based bound counts, so choose
    ``delta`` at or below the lowest level you will query.)  This mode
    requires a walk whose step law certifies a finite alpha-moment of the
    running supremum.
    """
    if mode not in ("eta_delta", "eta_approx"):
        raise ValueError(f"mode must be 'eta_delta' or 'eta_approx', got {mode!r}")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if q < 1:
        raise ValueError("q must be >= 1 (mean renewal spacing in steps)")
    if delta is None or not (delta > 0):
        raise ValueError(
            "delta must be positive: the unrestricted limit has infinitely "
            "many stacks (seed marks accumulate at 0); pick a cutoff, e.g. "
            "via exlab.measure_oracle.auto_truncation_delta"
        )
    s_max, mark_floor = _resolve_window(window, delta)
    verdict = check_transience(G)
    if not verdict.is_transient():
        raise ValueError(
            f"transience check failed ({verdict.value}): the compounding walk "
            "must die out for the stacks to be finite above any positive level"
        )
    if rng is None:
        rng = root_generator(None)

    meta: dict = {"alpha": float(alpha), "q": float(q), "delta": float(delta)}
    if mode == "eta_approx":
        step_moment = G.moment(alpha)
        if step_moment >= 1.0:
            raise ValueError(
                f"E[multiplier^alpha] = {step_moment} >= 1 forces an infinite "
                "supremum moment; the unrestricted limit cannot be certified"
            )
        if sup_spec is None:
            sup_spec = ProductMeasureSpec.from_sample(
                alpha, sup_sample(G, n_sup, rng.spawn(1)[0])
            )
        bound_level = max(delta, mark_floor)
        meta["truncation_bound_level"] = bound_level
        meta["truncation_error_bound"] = truncation_error_bound(
            sup_spec, s_max, q, bound_level, delta
        )

    mean_stacks = (s_max / q) * delta**-alpha
    if mean_stacks > MAX_EXPECTED_STACKS:
        raise ValueError(
            f"expected stack count {mean_stacks:.3g} is too large to "
            "materialize; increase delta or shrink the window"
        )
    k = int(rng.poisson(mean_stacks))
    stack_times = np.sort(rng.uniform(0.0, s_max, size=k))
    seeds = _draw_seeds(alpha, delta, math.inf, k, rng)
    per_stack, truncated = _compound_stacks(
        G, seeds, rng, kill_epsilon=kill_epsilon, horizon=horizon
    )
    stacks = [
        ClusterStack(
            time=float(stack_times[i]),
            seed_mark=float(seeds[i]),
            marks=per_stack[i],
            truncated=bool(truncated[i]),
        )
        for i in range(k)
    ]

    id_chunks, time_chunks, mark_chunks = [], [], []
    for i, marks in enumerate(per_stack):
        keep = marks > mark_floor
        m = int(keep.sum())
        if m:
            id_chunks.append(np.full(m, i))
            time_chunks.append(np.full(m, stack_times[i]))
            mark_chunks.append(marks[keep])
    pattern = PointPattern(
        times=np.concatenate(time_chunks) if time_chunks else np.empty(0),
        marks=np.concatenate(mark_chunks) if mark_chunks else np.empty(0),
        window=(s_max, mark_floor),
        kind="limit_eta_delta" if mode == "eta_delta" else "limit_eta",
        stack_ids=np.concatenate(id_chunks) if id_chunks else np.empty(0, dtype=int),
        meta=meta,
    )
    return pattern, stacks


# ---------------------------------------------------------------------------
# counting and clustering


def box_count(pattern: PointPattern, s: float, a: float) -> int:
    """Number of points in ``[0, s] x (a, inf]``."""
    s_max, mark_floor = pattern.window
    if not (0 <= s <= s_max * (1 + 1e-12) + 1e-12):
        raise ValueError(f"s={s} is outside the observed time window [0, {s_max}]")
    if a <= mark_floor:
        raise ValueError(
            f"level a={a} is at or below the mark floor {mark_floor}: points "
            "down there were discarded, so the count would be wrong"
        )
    return int(np.count_nonzero((pattern.times <= s) & (pattern.marks > a)))


@dataclass(frozen=True, eq=False)
class ClusterSizeDistribution:
    """Per-cluster exceedance counts at a fixed level."""

    per_cluster: np.ndarray
    level: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.per_cluster, dtype=int)
        object.__setattr__(self, "per_cluster", arr)
        if arr.size and arr.min() < 1:
            raise ValueError("cluster sizes are positive by construction")

    @property
    def n_clusters(self) -> int:
        return int(self.per_cluster.size)

    @property
    def sizes(self) -> np.ndarray:
        """Distinct sizes, ascending."""
        return np.unique(self.per_cluster)

    @property
    def counts(self) -> np.ndarray:
        """Cluster counts aligned with :attr:`sizes`."""
        return np.unique(self.per_cluster, return_counts=True)[1]


def cluster_size_distribution(
    pattern: PointPattern, a: float, gap: float | None = None
) -> ClusterSizeDistribution:
    """Cluster sizes at level ``a``.

    For limit patterns the clusters are the stacks themselves (exact): the
    size is the number of marks above ``a`` in a stack, and stacks with no
    such mark do not form a cluster.  For empirical patterns, runs
    declustering: exceedances of ``a`` separated in scaled time by less
    than ``gap`` belong to one cluster.  ``gap`` must be given for
    empirical patterns — the regenerative choice is (mean cycle length)/n,
    i.e. ``q/n``, aligning empirical clusters with the limit's stacks;
    ``gap=0`` makes every exceedance its own cluster.
    """
    s_max, mark_floor = pattern.window
    if a <= mark_floor:
        raise ValueError(
            f"level a={a} is at or below the mark floor {mark_floor}: points "
            "down there were discarded, so cluster sizes would be wrong"
        )
    if pattern.kind == "empirical_Nn":
        if gap is None:
            raise ValueError(
                "empirical declustering needs a gap (in scaled time); the "
                "regenerative choice is q/n with q the mean cycle length"
            )
        if gap < 0:
            raise ValueError("gap must be nonnegative")
        t = np.sort(pattern.times[pattern.marks > a])
        if t.size == 0:
            return ClusterSizeDistribution(np.empty(0, dtype=int), a)
        breaks = np.flatnonzero(np.diff(t) >= gap)
        edges = np.concatenate([[0], breaks + 1, [t.size]])
        return ClusterSizeDistribution(np.diff(edges), a)
    if pattern.stack_ids is None:
        raise ValueError("limit pattern lacks stack_ids; cannot form clusters")
    above = pattern.marks > a
    if not above.any():
        return ClusterSizeDistribution(np.empty(0, dtype=int), a)
    sizes = np.bincount(pattern.stack_ids[above])
    return ClusterSizeDistribution(sizes[sizes > 0], a)


# ---------------------------------------------------------------------------
# replicate comparison


def _two_sample_chi2(
    a: np.ndarray, b: np.ndarray, min_pooled: float = 10.0
) -> tuple[float | None, str]:
    """Two-sample chi-square on integer count samples, with bin merging.

    Bins are the observed count values; adjacent bins are merged left to
    right until each holds at least ``min_pooled`` pooled observations, so
    expected cell counts stay large enough for the chi-square reference.
    Returns ``(p_value, note)``; ``p_value`` is None for degenerate boxes.
    """
    vmax = int(max(a.max(initial=0), b.max(initial=0)))
    if vmax == 0:
        return None, "degenerate: zero counts on both sides"
    ha = np.bincount(a, minlength=vmax + 1)
    hb = np.bincount(b, minlength=vmax + 1)
    groups_a, groups_b = [], []
    acc_a = acc_b = 0
    for i in range(vmax + 1):
        acc_a += ha[i]
        acc_b += hb[i]
        if acc_a + acc_b >= min_pooled:
            groups_a.append(acc_a)
            groups_b.append(acc_b)
            acc_a = acc_b = 0
    if acc_a + acc_b:
        if groups_a:
            groups_a[-1] += acc_a
            groups_b[-1] += acc_b
        else:
            groups_a, groups_b = [acc_a], [acc_b]
    if len(groups_a) < 2:
        return None, "degenerate: counts concentrate in a single bin"
    _, p, _, _ = chi2_contingency(np.array([groups_a, groups_b]))
    return float(p), ""


@dataclass(frozen=True)
class BoxResult:
    """Comparison outcome for one box ``[0, s] x (a, inf]``."""

    s: float
    a: float
    p_value: float | None
    note: str
    mean_empirical: float
    mean_limit: float


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """Per-box chi-square comparisons with a Bonferroni summary verdict."""

    results: tuple[BoxResult, ...]
    level: float
    verdict: str

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"

    @property
    def n_tested(self) -> int:
        return sum(1 for r in self.results if r.p_value is not None)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "family_level": self.level,
            "n_tested": self.n_tested,
            "boxes": [
                {
                    "s": r.s,
                    "a": r.a,
                    "p_value": r.p_value,
                    "note": r.note,
                    "mean_empirical": r.mean_empirical,
                    "mean_limit": r.mean_limit,
                }
                for r in self.results
            ],
        }


def compare_patterns(
    empirical_reps: Sequence[PointPattern],
    limit_reps: Sequence[PointPattern],
    boxes: Sequence[tuple[float, float]],
    *,
    level: float = 0.01,
) -> ComparisonReport:
    """Compare box-count distributions of two replicate collections.

    For each box ``(s, a)`` the counts across replicates form one integer
    sample per side; a two-sample chi-square tests whether the two count
    distributions agree.  The verdict applies a Bonferroni correction at
    family level ``level`` over the non-degenerate boxes, so a true match
    is called "consistent" with probability at least ``1 - level``.
    """
    if len(empirical_reps) < 500 or len(limit_reps) < 500:
        raise ValueError(
            "need at least 500 replicates per side for a stable comparison "
            f"(got {len(empirical_reps)} and {len(limit_reps)})"
        )
    if not boxes:
        raise ValueError("need at least one (s, a) box")
    if not (0 < level < 1):
        raise ValueError("level must be in (0, 1)")
    results = []
    for s, a in boxes:
        counts_e = np.array([box_count(p, s, a) for p in empirical_reps])
        counts_l = np.array([box_count(p, s, a) for p in limit_reps])
        p_value, note = _two_sample_chi2(counts_e, counts_l)
        results.append(
            BoxResult(
                s=float(s),
                a=float(a),
                p_value=p_value,
                note=note,
                mean_empirical=float(counts_e.mean()),
                mean_limit=float(counts_l.mean()),
            )
        )
    tested = [r.p_value for r in results if r.p_value is not None]
    if tested and min(tested) < level / len(tested):
        verdict = "inconsistent"
    else:
        verdict = "consistent"
    return ComparisonReport(results=tuple(results), level=level, verdict=verdict)


# ---------------------------------------------------------------------------
# serialization


def export_pattern_csv(pattern: PointPattern, dest) -> None:
    """Write the pattern as CSV: ``time,mark`` plus ``stack_id`` when present.

    Floats are written with ``repr`` so reading them back reproduces the
    exact values.
    """
    own = isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__")
    handle = open(dest, "w", newline="") if own else dest
    try:
        writer = csv.writer(handle)
        if pattern.stack_ids is not None:
            writer.writerow(["time", "mark", "stack_id"])
            for t, m, i in zip(pattern.times, pattern.marks, pattern.stack_ids):
                writer.writerow([repr(float(t)), repr(float(m)), int(i)])
        else:
            writer.writerow(["time", "mark"])
            for t, m in zip(pattern.times, pattern.marks):
                writer.writerow([repr(float(t)), repr(float(m))])
    finally:
        if own:
            handle.close()
