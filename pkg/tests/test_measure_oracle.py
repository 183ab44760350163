"""Tests for the limit-measure evaluators.

Oracles:
 - closed forms for deterministic compounding factors: Y = 1 collapses the
   box measure to the plain Pareto measure nu_alpha on (y, x]; Y = 0.5 with
   alpha = 1 gives nu([0, inf] x (2, inf]) = 0.5 * 0.5 = 0.25; Y = 0 kills
   every box;
 - a hand-evaluated three-point discrete Y (closed-form sums), checked
   against both the sample-average route and the cylinder sampler;
 - direct two-dimensional Monte Carlo integration of the defining
   integral, with the seed drawn from a restriction of nu_alpha chosen so
   the truncation is exactly lossless (seed * max(Y) below the level);
 - the deterministic-contraction tail chain: mu((1,inf] x (a,inf]) =
   (max(1, a/rho))**-alpha;
 - an independently simulated missed-cluster count for the truncation
   certificate (fresh walk suprema, Poisson seed counts on a band).
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exlab._rng import root_generator
from exlab.distributions import lognormal, point, user_table
from exlab.measure_oracle import (
    Interval,
    ProductMeasureSpec,
    auto_truncation_delta,
    mu_cylinder,
    nu_alpha_mass,
    nu_box,
    truncation_error_bound,
)
from exlab.tail_chain import sup_sample

# a bounded three-point compounding law used by several cross-checks
Y3_VALUES = np.array([0.3, 0.8, 2.0])
Y3_PROBS = np.array([0.5, 0.3, 0.2])


def nu_box_threepoint(alpha, x, y):
    """Closed form of the box formula for the three-point Y above."""
    keep = Y3_VALUES > y / x
    moment = float((Y3_PROBS * Y3_VALUES**alpha)[keep].sum())
    prob = float(Y3_PROBS[keep].sum())
    x_term = 0.0 if math.isinf(x) else x**-alpha * prob
    return y**-alpha * moment - x_term


@pytest.fixture(scope="module")
def logn_sup():
    """Running-supremum sample of the downward-drifting lognormal walk."""
    return sup_sample(lognormal(-0.5, 0.5), 20_000, root_generator(31))


# ---------------------------------------------------------------------------
# nu_alpha_mass and ProductMeasureSpec mechanics


def test_nu_alpha_mass():
    assert nu_alpha_mass(1.0, 1.0) == 1.0
    assert nu_alpha_mass(1.0, 2.0, 4.0) == 0.25
    assert nu_alpha_mass(2.0, 0.5) == 4.0
    with pytest.raises(ValueError, match="lo"):
        nu_alpha_mass(1.0, 0.0, 2.0)
    with pytest.raises(ValueError, match="alpha"):
        nu_alpha_mass(-1.0, 1.0)


def test_spec_tail_queries_small_sample():
    spec = ProductMeasureSpec.from_sample(2.0, [3.0, 1.0, 2.0])  # sorted internally
    assert spec.moment() == pytest.approx((1 + 4 + 9) / 3)
    assert spec.tail_moment(1.5) == pytest.approx((4 + 9) / 3)
    assert spec.tail_moment(2.0) == pytest.approx(9 / 3)  # strict inequality
    assert spec.tail_moment(3.0) == 0.0
    assert spec.tail_prob(2.0) == pytest.approx(1 / 3)
    assert spec.tail_prob(0.5) == 1.0
    tied = ProductMeasureSpec.from_sample(1.0, [2.0, 2.0, 3.0])
    assert tied.tail_prob(2.0) == pytest.approx(1 / 3)


def test_spec_validation():
    with pytest.raises(ValueError, match="exactly one"):
        ProductMeasureSpec(alpha=1.0)
    with pytest.raises(ValueError, match="exactly one"):
        ProductMeasureSpec(alpha=1.0, value=1.0, sample=np.ones(3))
    with pytest.raises(ValueError, match="empty"):
        ProductMeasureSpec.from_sample(1.0, [])
    with pytest.raises(ValueError, match="finite and nonnegative"):
        ProductMeasureSpec.from_sample(1.0, [1.0, -2.0])
    with pytest.raises(ValueError, match="finite and nonnegative"):
        ProductMeasureSpec.from_sample(1.0, [1.0, math.inf])
    with pytest.raises(ValueError, match="alpha"):
        ProductMeasureSpec.from_deterministic(0.0, 1.0)


# ---------------------------------------------------------------------------
# nu_box closed forms


@pytest.mark.parametrize("alpha", [1.0, 2.5])
def test_nu_box_unit_compounding_is_pareto_mass(alpha):
    spec = ProductMeasureSpec.from_deterministic(alpha, 1.0)
    assert nu_box(spec, 4.0, 2.0) == 2.0**-alpha - 4.0**-alpha
    assert nu_box(spec, math.inf, 2.0) == 2.0**-alpha
    assert nu_box(spec, 2.0, 2.0) == 0.0
    assert nu_box(spec, 1.0, 2.0) == 0.0


def test_nu_box_half_compounding_full_seed_range():
    spec = ProductMeasureSpec.from_deterministic(1.0, 0.5)
    assert nu_box(spec, math.inf, 2.0) == 0.25


def test_nu_box_zero_compounding_kills_every_box():
    spec = ProductMeasureSpec.from_deterministic(2.0, 0.0)
    for x in (0.5, 3.0, math.inf):
        for y in (0.1, 1.0, 7.0):
            assert nu_box(spec, x, y) == 0.0


def test_nu_box_validation():
    spec = ProductMeasureSpec.from_deterministic(1.0, 1.0)
    with pytest.raises(ValueError, match="y must be positive"):
        nu_box(spec, 1.0, 0.0)
    with pytest.raises(ValueError, match="x must be positive"):
        nu_box(spec, 0.0, 1.0)
    with pytest.raises(ValueError, match="x must be positive"):
        nu_box(spec, math.nan, 1.0)


def test_nu_box_empirical_full_seed_range_is_plain_moment(logn_sup):
    spec = ProductMeasureSpec.from_sample(2.0, logn_sup)
    got = nu_box(spec, math.inf, 3.0)
    assert got == pytest.approx(3.0**-2 * float(np.mean(logn_sup**2)), rel=1e-12)


def test_nu_box_empirical_matches_threepoint_closed_form():
    rng = root_generator(40)
    draws = user_table(Y3_VALUES, Y3_PROBS).sample(rng, 1_000_000)
    spec = ProductMeasureSpec.from_sample(1.5, draws)
    for x in (0.5, 2.0, 10.0, math.inf):
        for y in (0.4, 1.0, 3.0):
            want = nu_box_threepoint(1.5, x, y)
            # sample-frequency noise only: |p_hat - p| ~ n^{-1/2}
            assert nu_box(spec, x, y) == pytest.approx(want, abs=5e-3 * max(1.0, want))


# ---------------------------------------------------------------------------
# nu_box vs direct two-dimensional Monte Carlo integration


def direct_nu_box_mc(spec, x, y, n, rng):
    """Integrate nu_alpha(ds) P[s Y > y] over [0, x] by brute force.

    Seeds are drawn from nu_alpha restricted to (s0, x] with
    s0 = y / max(Y): below s0 no seed can clear the level, so the
    restriction discards exactly zero mass and the estimate is unbiased.
    """
    alpha = spec.alpha
    if spec.value is not None:
        if spec.value == 0.0:
            return 0.0, 0.0
        y_draws = np.full(n, spec.value)
        y_max = spec.value
    else:
        y_draws = spec.sample[rng.integers(0, spec.sample.size, size=n)]
        y_max = float(spec.sample[-1])
    s0 = y / y_max
    if s0 >= x:
        return 0.0, 0.0
    mass = s0**-alpha - (0.0 if math.isinf(x) else x**-alpha)
    u = rng.random(n)
    seeds = (s0**-alpha - u * mass) ** (-1.0 / alpha)
    p = float(np.mean(seeds * y_draws > y))
    return mass * p, mass * math.sqrt(p * (1 - p) / n)


def test_nu_box_matches_direct_integration_deterministic():
    spec = ProductMeasureSpec.from_deterministic(1.0, 0.5)
    rng = root_generator(41)
    for x in (3.0, 10.0, math.inf):
        for y in (0.7, 2.0):
            got, se = direct_nu_box_mc(spec, x, y, 400_000, rng)
            assert abs(got - nu_box(spec, x, y)) <= max(4 * se, 1e-12)


def test_nu_box_matches_direct_integration_empirical(logn_sup):
    spec = ProductMeasureSpec.from_sample(2.0, logn_sup)
    rng = root_generator(42)
    for x in (0.8, 2.0, math.inf):
        for y in (0.5, 1.0, 4.0):
            got, se = direct_nu_box_mc(spec, x, y, 400_000, rng)
            want = nu_box(spec, x, y)
            assert abs(got - want) <= max(4 * se, 1e-12), (x, y, got, want)


# ---------------------------------------------------------------------------
# nu_box structural invariants


def test_nu_box_monotone_and_scaling(logn_sup):
    spec = ProductMeasureSpec.from_sample(2.0, logn_sup)
    xs = [0.3, 1.0, 3.0, 30.0, math.inf]
    ys = [0.2, 1.0, 5.0]
    for y in ys:
        vals = [nu_box(spec, x, y) for x in xs]
        assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))
    for x in xs:
        vals = [nu_box(spec, x, y) for y in ys]
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))
    for lam in (2.0, 10.0):
        for x in (1.0, 4.0):
            for y in (0.5, 2.0):
                assert nu_box(spec, lam * x, lam * y) == pytest.approx(
                    lam**-2 * nu_box(spec, x, y), rel=1e-12
                )


@settings(deadline=None, max_examples=60)
@given(
    data=st.lists(st.floats(0.0, 50.0, allow_nan=False, width=32), min_size=1, max_size=40),
    x1=st.floats(0.1, 100.0),
    x2=st.floats(0.1, 100.0),
    y=st.floats(0.1, 100.0),
    alpha=st.sampled_from([0.5, 1.0, 2.0]),
)
def test_nu_box_property_nonnegative_monotone(data, x1, x2, y, alpha):
    spec = ProductMeasureSpec.from_sample(alpha, data)
    lo_x, hi_x = sorted((x1, x2))
    a = nu_box(spec, lo_x, y)
    b = nu_box(spec, hi_x, y)
    assert 0.0 <= a <= b + 1e-12 * max(1.0, abs(b))


# ---------------------------------------------------------------------------
# mu_cylinder


def test_mu_cylinder_deterministic_chain_closed_form():
    # one step of Y = 0.5 from seeds above 1: mass of {x0 > 1, 0.5 x0 > a}
    rng = root_generator(50)
    for a, want in ((2.0, 0.25), (0.3, 1.0)):
        est = mu_cylinder(
            1.0, point(0.5), 1, [Interval.above(1.0), Interval.above(a)],
            n_reps=200_000, rng=rng,
        )
        assert est.ci[0] <= want <= est.ci[1]
        assert abs(est.value - want) < 0.02


def test_mu_cylinder_marginalization_is_exact():
    est = mu_cylinder(
        1.0, point(0.5), 1, [Interval.above(1.0), Interval.everything()],
        n_reps=5000, rng=root_generator(51),
    )
    assert est.value == 1.0
    assert est.hit_rate == 1.0
    assert est.seed_mass == 1.0


def test_mu_cylinder_dead_chain_is_exact_zero():
    est = mu_cylinder(
        1.0, point(0.0), 2,
        [Interval.above(1.0), Interval.above(0.0), Interval.everything()],
        n_reps=5000, rng=root_generator(52),
    )
    assert est.value == 0.0
    assert est.hit_rate == 0.0


def test_mu_cylinder_matches_nu_box_one_step():
    # restriction trick: seeds below y/max(Y) contribute nothing, so the
    # cylinder over (y/max(Y), x] equals the full box [0, x] x (y, inf]
    alpha, x, y = 1.5, 2.0, 1.0
    want = nu_box_threepoint(alpha, x, y)
    est = mu_cylinder(
        alpha,
        user_table(Y3_VALUES, Y3_PROBS),
        1,
        [Interval(y / 2.0, x, lo_open=True), Interval.above(y)],
        n_reps=400_000,
        rng=root_generator(53),
    )
    assert est.ci[0] <= want <= est.ci[1]
    assert abs(est.value - want) < 0.02


def test_mu_cylinder_validation():
    ivs = [Interval.above(1.0), Interval.above(1.0)]
    with pytest.raises(ValueError, match="touches 0"):
        mu_cylinder(1.0, point(0.5), 1, [Interval.above(0.0), Interval.above(1.0)])
    with pytest.raises(ValueError, match="touches 0"):
        mu_cylinder(1.0, point(0.5), 1, [Interval.closed(0.0, 5.0), Interval.above(1.0)])
    with pytest.raises(ValueError, match="m \\+ 1"):
        mu_cylinder(1.0, point(0.5), 2, ivs)
    with pytest.raises(ValueError, match="m must be"):
        mu_cylinder(1.0, point(0.5), 0, [Interval.above(1.0)])
    with pytest.raises(ValueError, match="n_reps"):
        mu_cylinder(1.0, point(0.5), 1, ivs, n_reps=0)


def test_mu_cylinder_seed_reproducible():
    ivs = [Interval.above(1.0), Interval.above(0.5)]
    a = mu_cylinder(1.0, point(0.5), 1, ivs, n_reps=40_000, rng=root_generator(7))
    b = mu_cylinder(1.0, point(0.5), 1, ivs, n_reps=40_000, rng=root_generator(7))
    assert a.value == b.value and a.ci == b.ci


def test_interval_semantics():
    iv = Interval(1.0, 2.0, lo_open=True)
    got = iv.contains(np.array([1.0, 1.5, 2.0, 2.5]))
    assert got.tolist() == [False, True, True, False]
    assert Interval.everything().contains(np.array([0.0, math.inf])).all()
    with pytest.raises(ValueError, match="lo <= hi"):
        Interval(3.0, 1.0)
    with pytest.raises(ValueError, match="NaN"):
        Interval(math.nan, 1.0)


# ---------------------------------------------------------------------------
# truncation certificate


def test_truncation_bound_deterministic_contraction_is_zero():
    spec = ProductMeasureSpec.from_deterministic(1.0, 0.5)
    # sup = 0.5 never clears a/delta when delta < a/0.5
    assert truncation_error_bound(spec, 10.0, 3.0, 1.0, 1.9) == 0.0
    assert truncation_error_bound(spec, 10.0, 3.0, 1.0, 2.0) == 0.0  # strict
    got = truncation_error_bound(spec, 10.0, 3.0, 1.0, 2.5)
    assert got == pytest.approx((10.0 / 3.0) * 0.5)


def test_truncation_bound_monotone_to_zero(logn_sup):
    spec = ProductMeasureSpec.from_sample(2.0, logn_sup)
    deltas = [2.0**-k for k in range(0, 21)]
    bounds = [truncation_error_bound(spec, 1.0, 2.0, 1.0, d) for d in deltas]
    assert all(a >= b for a, b in zip(bounds, bounds[1:]))
    assert bounds[-1] == 0.0  # a/delta beyond the sample range
    assert bounds[0] > 0.0


def test_truncation_bound_validation(logn_sup):
    spec = ProductMeasureSpec.from_sample(2.0, logn_sup)
    with pytest.raises(ValueError, match="s_max"):
        truncation_error_bound(spec, 0.0, 2.0, 1.0, 0.5)
    with pytest.raises(ValueError, match="s_max"):
        truncation_error_bound(spec, 1.0, 0.5, 1.0, 0.5)
    with pytest.raises(ValueError, match="delta"):
        truncation_error_bound(spec, 1.0, 2.0, 1.0, 0.0)


def test_truncation_bound_dominates_simulated_missed_clusters(logn_sup):
    # independent route: Poisson seed counts on the band (delta/2, delta],
    # inverse-CDF seeds, fresh walk suprema; count clusters clearing a
    alpha, s_max, q, a, delta = 2.0, 1.0, 2.0, 1.0, 0.5
    spec = ProductMeasureSpec.from_sample(alpha, logn_sup)
    bound = truncation_error_bound(spec, s_max, q, a, delta)
    assert bound > 0.0

    rng = root_generator(60)
    lam = (s_max / q) * nu_alpha_mass(alpha, delta / 2.0, delta)
    windows = 3000
    counts = rng.poisson(lam, size=windows)
    total = int(counts.sum())
    lo_pow = (delta / 2.0) ** -alpha
    u = rng.random(total)
    seeds = (lo_pow - u * nu_alpha_mass(alpha, delta / 2.0, delta)) ** (-1.0 / alpha)
    sups = sup_sample(lognormal(-0.5, 0.5), total, root_generator(61))
    missed = seeds * sups > a
    per_window = np.add.reduceat(
        np.concatenate([missed.astype(float), [0.0]]),
        np.concatenate([[0], np.cumsum(counts)]),
    )[:windows]
    # reduceat quirk: empty windows copy the next value; zero them
    per_window[counts == 0] = 0.0
    mean = float(per_window.mean())
    se = float(per_window.std(ddof=1)) / math.sqrt(windows)
    assert mean > 0.0, "test should exercise a regime with actual misses"
    assert bound >= mean - 3 * se


def test_auto_truncation_delta(logn_sup):
    spec = ProductMeasureSpec.from_sample(2.0, logn_sup)
    tol = 1e-3
    d = auto_truncation_delta(spec, 1.0, 2.0, 1.0, tol)
    assert 0 < d <= 1.0
    assert truncation_error_bound(spec, 1.0, 2.0, 1.0, d) <= tol
    if d < 1.0:
        assert truncation_error_bound(spec, 1.0, 2.0, 1.0, 1.25 * d) > tol


def test_auto_truncation_delta_deterministic_boundary():
    spec = ProductMeasureSpec.from_deterministic(1.0, 0.5)
    # bound jumps from 0 to 0.5 at delta = a/0.5 = 2
    d = auto_truncation_delta(spec, 1.0, 1.0, 1.0, tol=0.1, delta_max=10.0)
    assert 1.99 < d <= 2.0
    assert truncation_error_bound(spec, 1.0, 1.0, 1.0, d) == 0.0
    # already-satisfied cutoff returned unchanged
    assert auto_truncation_delta(spec, 1.0, 1.0, 1.0, tol=0.6, delta_max=5.0) == 5.0
