"""Regenerative-cycle decomposition and cycle-based extreme-value estimators.

A positive recurrent path splits at its atom visits into an initial segment
``C_0`` and iid cycles ``C_1, C_2, ...``, each starting from a fresh
return-law draw and ending with the next state inside the atom set.  The
module decomposes simulated paths into such cycles, harvests iid cycles
directly by lock-step simulation, estimates the mean renewal spacing ``q``,
fits the tail of the cycle-maximum law (``t * P[max / b(t) > x] ~ c *
x^-alpha``), and checks the limiting law of the running maximum
``P[M_n <= b_n x] -> exp(-c x^-alpha / q)``.

The initial cycle is recorded but excluded from every estimator: it does
not start from the return law and is asymptotically negligible.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from ._rng import chunk_sizes, mean_ci, proportion_ci, root_generator, split
from .distributions import ScalingFunction
from .kernels import DEFAULT_CYCLE_CAP, ChainPath, CycleCapError, KernelSpec, step_columns
from .tail_chain import LimitConstants

__all__ = [
    "CycleDecomposition",
    "CycleRecord",
    "CycleTailFit",
    "MaxLawCheck",
    "TailCurve",
    "cycle_max_tail_fit",
    "decompose",
    "export_cycles_csv",
    "extremal_component",
    "harvest_cycles",
    "max_distribution_check",
]


@dataclass(frozen=True)
class CycleRecord:
    """One cycle: ``tau_A + 1`` states, the last of which is in the atom set.

    ``tau_t`` is the downcrossing time against the extremal boundary in
    force (the first in-cycle index at or below it; the atom set always
    counts as below).  ``max_value`` is the maximum over the whole cycle,
    ``max_extremal`` over the states strictly before the downcrossing
    (zero when the cycle starts at or below the boundary).
    """

    start: int
    length: int
    tau_A: int
    tau_t: int
    max_value: float
    max_extremal: float
    first_state: float

    def __post_init__(self) -> None:
        if self.start < 0:
            raise ValueError("start must be nonnegative")
        if self.length != self.tau_A + 1:
            raise ValueError("length must equal tau_A + 1")
        if not 0 <= self.tau_t <= self.tau_A:
            raise ValueError("tau_t must lie in [0, tau_A]")
        if self.max_extremal > self.max_value:
            raise ValueError("max_extremal cannot exceed max_value")


class _RecordSeq:
    """Lazy sequence view over the complete cycles of a decomposition."""

    def __init__(self, decomp: "CycleDecomposition"):
        self._d = decomp

    def __len__(self) -> int:
        return int(self._d.tau_A.size)

    def __getitem__(self, k: int) -> CycleRecord:
        d = self._d
        if k < 0:
            k += len(self)
        if not 0 <= k < len(self):
            raise IndexError(k)
        return CycleRecord(
            start=int(d.start[k]),
            length=int(d.tau_A[k]) + 1,
            tau_A=int(d.tau_A[k]),
            tau_t=int(d.tau_t[k]),
            max_value=float(d.max_value[k]),
            max_extremal=float(d.max_extremal[k]),
            first_state=float(d.first_state[k]),
        )

    def __iter__(self) -> Iterator[CycleRecord]:
        for k in range(len(self)):
            yield self[k]


@dataclass(frozen=True, eq=False)
class CycleDecomposition:
    """A path split into its initial cycle and complete iid cycles.

    Column arrays describe the complete cycles ``C_1 .. C_K`` (the initial
    cycle sits apart in ``initial_cycle``).  ``S`` holds the renewal
    indices ``S_0 .. S_K``; ``S_k - 1`` is the index of the ``k``-th atom
    visit and ``S_k`` is where cycle ``k + 1`` starts.  ``q_hat`` is the
    mean renewal spacing ``mean(S_k - S_{k-1})`` with a 99% CI (``nan``
    when no complete cycle exists).
    """

    initial_cycle: CycleRecord
    S: np.ndarray
    start: np.ndarray
    tau_A: np.ndarray
    tau_t: np.ndarray
    max_value: np.ndarray
    max_extremal: np.ndarray
    first_state: np.ndarray
    q_hat: float
    q_ci: tuple[float, float]
    threshold: float | None
    discarded_tail_states: int

    def __post_init__(self) -> None:
        k = self.tau_A.size
        for name in ("start", "tau_t", "max_value", "max_extremal", "first_state"):
            if getattr(self, name).size != k:
                raise ValueError("cycle columns must have equal length")
        if self.S.size != k + 1:
            raise ValueError("S must hold one renewal index per cycle plus the initial one")
        if np.any(np.diff(self.S) != self.tau_A + 1):
            raise ValueError("renewal recursion violated: S_k - S_{k-1} != tau_A_k + 1")
        if np.any(self.tau_t > self.tau_A) or np.any(self.tau_t < 0):
            raise ValueError("tau_t must lie in [0, tau_A]")
        if np.any(self.max_extremal > self.max_value):
            raise ValueError("max_extremal cannot exceed max_value")
        if not math.isnan(self.q_hat) and self.q_hat < 1.0:
            raise ValueError("q_hat must be >= 1")

    @property
    def n_cycles(self) -> int:
        """Number of complete cycles (the initial cycle not included)."""
        return int(self.tau_A.size)

    @property
    def cycles(self) -> _RecordSeq:
        return _RecordSeq(self)


def _first_crossing(states: np.ndarray, flags: np.ndarray, threshold: float | None) -> np.ndarray:
    """Boolean mask of states at/below the extremal boundary in force.

    The atom set always counts as crossed, so a downcrossing can never come
    later than the atom entry, whatever threshold is supplied.
    """
    if threshold is None:
        return flags
    return flags | (states <= threshold)


def decompose(path: ChainPath, threshold: float | None = None) -> CycleDecomposition:
    """Split a simulated path into regenerative cycles.

    ``threshold`` is the absolute downcrossing level ``t * y(t)`` in force
    for this analysis pass; ``None`` means the atom boundary itself, under
    which the downcrossing and the atom entry coincide.  States after the
    last atom visit form an incomplete cycle and are discarded.  A path
    that never visits the atom admits no decomposition.
    """
    states = np.asarray(path.states, dtype=float)
    flags = np.asarray(path.atom_flags, dtype=bool)
    if states.size == 0:
        raise ValueError("cannot decompose an empty path")
    atom_idx = np.flatnonzero(flags)
    if atom_idx.size == 0:
        raise ValueError(
            "no regeneration observed: the path never enters the atom set"
        )
    trunc = states[: int(atom_idx[-1]) + 1]
    cross = _first_crossing(trunc, flags[: trunc.size], threshold)
    cross_idx = np.flatnonzero(cross)

    # initial cycle C_0: indices 0 .. atom_idx[0]
    end0 = int(atom_idx[0])
    tau_t0 = int(cross_idx[0])
    initial = CycleRecord(
        start=0,
        length=end0 + 1,
        tau_A=end0,
        tau_t=tau_t0,
        max_value=float(trunc[: end0 + 1].max()),
        max_extremal=float(trunc[:tau_t0].max()) if tau_t0 > 0 else 0.0,
        first_state=float(trunc[0]),
    )

    S = atom_idx + 1
    starts = S[:-1]
    tau_A = atom_idx[1:] - starts
    if starts.size:
        max_value = np.maximum.reduceat(trunc, starts)
        first_state = trunc[starts]
        pos = np.searchsorted(cross_idx, starts, side="left")
        tau_t = cross_idx[pos] - starts
        max_extremal = np.zeros(starts.size)
        m = tau_t > 0
        if m.any():
            pairs = np.empty(2 * int(m.sum()), dtype=np.intp)
            pairs[0::2] = starts[m]
            pairs[1::2] = starts[m] + tau_t[m]
            max_extremal[m] = np.maximum.reduceat(trunc, pairs)[0::2]
    else:
        max_value = np.empty(0)
        first_state = np.empty(0)
        tau_t = np.empty(0, dtype=np.intp)
        max_extremal = np.empty(0)

    gaps = np.diff(S)
    if gaps.size:
        q_hat, q_lo, q_hi = mean_ci(gaps.astype(float), level=0.99)
    else:
        q_hat, q_lo, q_hi = math.nan, math.nan, math.nan
    return CycleDecomposition(
        initial_cycle=initial,
        S=S.astype(np.intp),
        start=starts.astype(np.intp),
        tau_A=tau_A.astype(np.intp),
        tau_t=np.asarray(tau_t, dtype=np.intp),
        max_value=np.asarray(max_value, dtype=float),
        max_extremal=max_extremal,
        first_state=np.asarray(first_state, dtype=float),
        q_hat=q_hat,
        q_ci=(q_lo, q_hi),
        threshold=threshold,
        discarded_tail_states=int(states.size - trunc.size),
    )


def extremal_component(
    cycle: CycleRecord, path: ChainPath, threshold: float | None = None
) -> np.ndarray:
    """The states of a cycle strictly before its downcrossing.

    With ``threshold=None`` the downcrossing recorded on the cycle is used;
    a numeric threshold recomputes it against that level.  Returns an empty
    array when the cycle starts at or below the boundary.  Later in-cycle
    states are excluded even if large.
    """
    states = np.asarray(path.states, dtype=float)
    flags = np.asarray(path.atom_flags, dtype=bool)
    stop = cycle.start + cycle.length
    if stop > states.size or states[cycle.start] != cycle.first_state:
        raise ValueError("cycle does not belong to the given path")
    if threshold is None:
        tau = cycle.tau_t
    else:
        seg = states[cycle.start : stop]
        crossed = _first_crossing(seg, flags[cycle.start : stop], threshold)
        tau = int(np.argmax(crossed))
    return states[cycle.start : cycle.start + tau].copy()


def harvest_cycles(
    kernel: KernelSpec,
    n_cycles: int,
    rng: np.random.Generator | None = None,
    threshold: float | None = None,
    cycle_cap: int = DEFAULT_CYCLE_CAP,
) -> CycleDecomposition:
    """Simulate ``n_cycles`` iid return-law-started cycles directly.

    Each cycle starts from a fresh draw of the kernel's return law and runs
    until the state enters the atom set, which reproduces the law of the
    complete cycles of one long path without materializing that path.  One
    extra cycle is generated to stand in as the (excluded) initial cycle,
    so all ``n_cycles`` requested cycles enter the estimators.  Cycles are
    simulated lock-step in columns, finished columns compacted away.
    """
    if n_cycles < 1:
        raise ValueError("n_cycles must be >= 1")
    if rng is None:
        rng = root_generator(None)
    total = n_cycles + 1
    sizes = chunk_sizes(total)
    streams = split(rng, len(sizes))
    cols: dict[str, list[np.ndarray]] = {
        k: [] for k in ("tau_A", "tau_t", "max_value", "max_extremal", "first_state")
    }
    for m, stream in zip(sizes, streams):
        part = _harvest_chunk(kernel, m, stream, threshold, cycle_cap)
        for k, arr in part.items():
            cols[k].append(arr)
    tau_A = np.concatenate(cols["tau_A"]).astype(np.intp)
    tau_t = np.concatenate(cols["tau_t"]).astype(np.intp)
    max_value = np.concatenate(cols["max_value"])
    max_extremal = np.concatenate(cols["max_extremal"])
    first_state = np.concatenate(cols["first_state"])

    lengths = tau_A + 1
    S = np.cumsum(lengths)
    initial = CycleRecord(
        start=0,
        length=int(lengths[0]),
        tau_A=int(tau_A[0]),
        tau_t=int(tau_t[0]),
        max_value=float(max_value[0]),
        max_extremal=float(max_extremal[0]),
        first_state=float(first_state[0]),
    )
    q_hat, q_lo, q_hi = mean_ci(lengths[1:].astype(float), level=0.99)
    return CycleDecomposition(
        initial_cycle=initial,
        S=S.astype(np.intp),
        start=S[:-1].astype(np.intp),
        tau_A=tau_A[1:],
        tau_t=tau_t[1:],
        max_value=max_value[1:],
        max_extremal=max_extremal[1:],
        first_state=first_state[1:],
        q_hat=q_hat,
        q_ci=(q_lo, q_hi),
        threshold=threshold,
        discarded_tail_states=0,
    )


def _harvest_chunk(
    kernel: KernelSpec,
    m: int,
    rng: np.random.Generator,
    threshold: float | None,
    cycle_cap: int,
) -> dict[str, np.ndarray]:
    a_max = kernel.atom_upper
    x = np.asarray(kernel.h_return.sample(rng, m), dtype=float)
    out = {
        "tau_A": np.zeros(m, dtype=np.intp),
        "tau_t": np.zeros(m, dtype=np.intp),
        "max_value": x.copy(),
        "max_extremal": np.zeros(m),
        "first_state": x.copy(),
    }
    idx = np.arange(m)
    runmax = x.copy()
    premax = np.zeros(m)
    tau_t = np.zeros(m, dtype=np.intp)
    crossed = _first_crossing(x, x <= a_max, threshold)
    done = x <= a_max  # atom on the very first state: a one-state cycle
    step = 0
    while True:
        if done.any():
            fin = idx[done]
            out["tau_A"][fin] = step
            out["tau_t"][fin] = tau_t[done]
            out["max_value"][fin] = runmax[done]
            out["max_extremal"][fin] = premax[done]
            keep = ~done
            idx, x, runmax = idx[keep], x[keep], runmax[keep]
            premax, tau_t, crossed = premax[keep], tau_t[keep], crossed[keep]
        if not idx.size:
            break
        if step >= cycle_cap:
            raise CycleCapError(cycle_cap, float(x.max()))
        step += 1
        x = step_columns(kernel, x, rng)
        new_cross = ~crossed & _first_crossing(x, x <= a_max, threshold)
        premax[new_cross] = runmax[new_cross]
        tau_t[new_cross] = step
        crossed |= new_cross
        runmax = np.maximum(runmax, x)
        done = x <= a_max
    return out


# ---------------------------------------------------------------------------
# cycle-maximum tail fit


@dataclass(frozen=True, eq=False)
class TailCurve:
    """The scaled exceedance curve and fit at one value of ``t``.

    ``scaled_exceedance[i] = t * P_hat[max / b(t) > x[i]]``; grid points
    with zero observed exceedances are flagged and excluded from the fit.
    ``c_hat`` comes from the intercept with the power constrained to
    ``alpha_constraint`` of the parent fit; ``alpha_hat`` is the free
    least-squares slope.  Standard errors propagate the exact covariance of
    the nested exceedance counts.
    """

    t: float
    x: np.ndarray
    scaled_exceedance: np.ndarray
    zero_count: np.ndarray
    c_hat: float
    c_se: float
    alpha_hat: float
    alpha_se: float


@dataclass(frozen=True, eq=False)
class CycleTailFit:
    """Tail fit of the cycle-maximum law, full-cycle and extremal-component.

    Headline numbers are read at the largest ``t`` of the grid (deepest
    into the limit); ``per_t`` holds every fitted curve so stability across
    ``t`` can be judged, and ``stable`` records whether all per-``t``
    ``c_hat`` values agree with the headline one within 3 joint SE.
    """

    c_hat: float
    c_se: float
    alpha_hat: float
    alpha_se: float
    extremal_c_hat: float
    extremal_c_se: float
    extremal_alpha_hat: float
    extremal_alpha_se: float
    alpha_constraint: float
    per_t: tuple[TailCurve, ...]
    per_t_extremal: tuple[TailCurve, ...]
    stable: bool
    n_cycles: int


def _log_count_covariance(p_hat: np.ndarray, n: int) -> np.ndarray:
    """Covariance of ``log P_hat`` for nested exceedance events.

    For thresholds sorted increasingly the events are nested decreasingly,
    so for i <= j: Cov(P_hat_i, P_hat_j) = P_j (1 - P_i) / n, and on the
    log scale (delta method) Cov(log P_hat_i, log P_hat_j) = (1 - P_i) /
    (n P_i) -- it depends only on the more frequent event.
    """
    m = p_hat.size
    diag = (1.0 - p_hat) / (n * p_hat)
    cov = np.empty((m, m))
    for i in range(m):
        cov[i, i:] = diag[i]
        cov[i:, i] = diag[i]
    return cov


def _fit_curve(
    maxima_sorted: np.ndarray,
    t: float,
    b_t: float,
    x_grid: np.ndarray,
    alpha_constraint: float | None,
) -> TailCurve:
    n = maxima_sorted.size
    levels = x_grid * b_t
    counts = n - np.searchsorted(maxima_sorted, levels, side="right")
    p_hat = counts / n
    scaled = t * p_hat
    zero = counts == 0
    used = ~zero
    if used.sum() < 2:
        raise ValueError(
            f"too few exceedances at t={t:g}: need at least two x-grid points "
            "with nonzero counts (increase the cycle count or lower x/t)"
        )
    lx = np.log(x_grid[used])
    y = np.log(scaled[used])
    cov = _log_count_covariance(p_hat[used], n)

    # free least-squares slope: alpha_hat = -slope of y on log x
    lbar = lx.mean()
    denom = float(((lx - lbar) ** 2).sum())
    if denom == 0.0:
        raise ValueError("x_grid must contain at least two distinct usable points")
    w = (lx - lbar) / denom
    slope = float(w @ y)
    alpha_hat = -slope
    alpha_se = float(np.sqrt(w @ cov @ w))

    a = alpha_constraint if alpha_constraint is not None else alpha_hat
    u = np.full(lx.size, 1.0 / lx.size)
    log_c = float(np.mean(y + a * lx))
    log_c_se = float(np.sqrt(u @ cov @ u))
    c_hat = math.exp(log_c)
    return TailCurve(
        t=float(t),
        x=np.asarray(x_grid, dtype=float),
        scaled_exceedance=scaled,
        zero_count=zero,
        c_hat=c_hat,
        c_se=c_hat * log_c_se,
        alpha_hat=alpha_hat,
        alpha_se=alpha_se,
    )


def cycle_max_tail_fit(
    decomp: CycleDecomposition,
    b: ScalingFunction,
    t_grid,
    x_grid,
    alpha: float | None = None,
    min_cycles: int = 1000,
) -> CycleTailFit:
    """Fit ``t * P[cycle max / b(t) > x] ~ c * x^-alpha`` on a grid.

    At each ``t`` the empirical scaled exceedance curve over ``x_grid`` is
    fitted in log-log scale: the free slope estimates ``alpha``, and the
    intercept with the power constrained to ``alpha`` (the supplied value,
    or the largest-``t`` free slope when not given) estimates ``c``.
    Headline estimates are read at the largest ``t``.  The same fit runs on
    the extremal-component maxima, whose downcrossing threshold is the one
    the decomposition was built with.
    """
    if decomp.n_cycles < min_cycles:
        raise ValueError(
            f"need at least {min_cycles} complete cycles, got {decomp.n_cycles}"
        )
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    x_grid = np.sort(np.asarray(x_grid, dtype=float))
    if t_grid.size == 0 or x_grid.size < 2:
        raise ValueError("t_grid must be nonempty and x_grid needs >= 2 points")
    if np.any(x_grid <= 0):
        raise ValueError("x_grid must be positive")

    full_sorted = np.sort(decomp.max_value)
    ext_sorted = np.sort(decomp.max_extremal)
    t_top = float(t_grid[-1])

    if alpha is None:
        probe = _fit_curve(full_sorted, t_top, b(t_top), x_grid, None)
        alpha_constraint = probe.alpha_hat
    else:
        alpha_constraint = float(alpha)

    per_t = tuple(
        _fit_curve(full_sorted, float(t), b(float(t)), x_grid, alpha_constraint)
        for t in t_grid
    )
    per_t_ext = tuple(
        _fit_curve(ext_sorted, float(t), b(float(t)), x_grid, alpha_constraint)
        for t in t_grid
    )
    head = per_t[-1]
    head_ext = per_t_ext[-1]
    stable = all(
        abs(cur.c_hat - head.c_hat) <= 3.0 * math.sqrt(cur.c_se**2 + head.c_se**2)
        for cur in per_t
    )
    return CycleTailFit(
        c_hat=head.c_hat,
        c_se=head.c_se,
        alpha_hat=head.alpha_hat,
        alpha_se=head.alpha_se,
        extremal_c_hat=head_ext.c_hat,
        extremal_c_se=head_ext.c_se,
        extremal_alpha_hat=head_ext.alpha_hat,
        extremal_alpha_se=head_ext.alpha_se,
        alpha_constraint=alpha_constraint,
        per_t=per_t,
        per_t_extremal=per_t_ext,
        stable=stable,
        n_cycles=decomp.n_cycles,
    )


# ---------------------------------------------------------------------------
# running-maximum limit law


@dataclass(frozen=True, eq=False)
class MaxLawCheck:
    """Empirical vs limiting law of the scaled running maximum.

    ``empirical[i]`` estimates ``P[M_n <= b_n x[i]]`` from independent
    replicates; ``limit[i] = exp(-c x^-alpha / q)``.
    """

    n: int
    n_reps: int
    b_n: float
    x: np.ndarray
    empirical: np.ndarray
    empirical_ci: np.ndarray
    limit: np.ndarray
    sup_distance: float


def max_distribution_check(
    kernel: KernelSpec,
    n: int,
    x_grid,
    n_reps: int,
    constants: LimitConstants,
    rng: np.random.Generator | None = None,
    b: ScalingFunction | None = None,
) -> MaxLawCheck:
    """Compare ``P[M_n <= b_n x]`` with its limit ``exp(-c x^-alpha / q)``.

    Simulates ``n_reps`` independent return-law-started paths of ``n``
    states lock-step and reports the empirical CDF of ``M_n / b_n`` on
    ``x_grid`` next to the limiting law assembled from ``constants``
    (which must have ``q`` filled).
    """
    if n < 1 or n_reps < 1:
        raise ValueError("n and n_reps must be >= 1")
    if constants.q is None:
        raise ValueError("constants must include the renewal spacing q")
    if rng is None:
        rng = root_generator(None)
    x_grid = np.sort(np.asarray(x_grid, dtype=float))
    if np.any(x_grid <= 0):
        raise ValueError("x_grid must be positive")
    if b is None:
        h = kernel.h_return
        if h.family == "pareto" and math.isclose(h.alpha, constants.alpha):
            b = ScalingFunction.analytic(constants.alpha)
        else:
            b = ScalingFunction.from_pilot(h, split(rng, 1)[0])
    b_n = b(float(n))

    counts = np.zeros(x_grid.size, dtype=np.int64)
    sizes = chunk_sizes(n_reps)
    for m, stream in zip(sizes, split(rng, len(sizes))):
        x = np.asarray(kernel.h_return.sample(stream, m), dtype=float)
        runmax = x.copy()
        for _ in range(n - 1):
            x = step_columns(kernel, x, stream)
            np.maximum(runmax, x, out=runmax)
        counts += (runmax[:, None] <= b_n * x_grid[None, :]).sum(axis=0)

    empirical = counts / n_reps
    ci = np.array(
        [proportion_ci(int(k), n_reps, 0.99)[1:] for k in counts], dtype=float
    )
    limit = np.exp(-(constants.c / constants.q) * x_grid ** (-constants.alpha))
    return MaxLawCheck(
        n=int(n),
        n_reps=int(n_reps),
        b_n=float(b_n),
        x=x_grid,
        empirical=empirical,
        empirical_ci=ci,
        limit=limit,
        sup_distance=float(np.max(np.abs(empirical - limit))),
    )


# ---------------------------------------------------------------------------
# export


def export_cycles_csv(decomp: CycleDecomposition, dest: str | Path | io.TextIOBase) -> None:
    """Write one row per cycle (the initial cycle first) to CSV.

    Columns: ``start, tau_A, tau_t, max_value, max_extremal, first_state``.
    """
    own = isinstance(dest, (str, Path))
    fh: Any = open(dest, "w", newline="") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(
            ["start", "tau_A", "tau_t", "max_value", "max_extremal", "first_state"]
        )
        c0 = decomp.initial_cycle
        writer.writerow(
            [c0.start, c0.tau_A, c0.tau_t, repr(c0.max_value), repr(c0.max_extremal), repr(c0.first_state)]
        )
        for k in range(decomp.n_cycles):
            writer.writerow(
                [
                    int(decomp.start[k]),
                    int(decomp.tau_A[k]),
                    int(decomp.tau_t[k]),
                    repr(float(decomp.max_value[k])),
                    repr(float(decomp.max_extremal[k])),
                    repr(float(decomp.first_state[k])),
                ]
            )
    finally:
        if own:
            fh.close()
