"""Hard-instance generators and certified hardness checkers."""

import math

import numpy as np
import pytest

from dpsco import (
    Ball,
    Dataset,
    GrowthReport,
    Instance,
    LossConstants,
    LowerBoundSpec,
    PackingSpec,
    QuadraticAnchor,
    Quadratic1D,
    RngStream,
    SuperefficiencyParams,
    exact_minimizer,
    excess_risk,
    growth_closure_check,
    interpolation_certificate,
    is_interpolating,
    loss_gradient,
    loss_value,
    make_lower_bound_instance,
    make_margin_classification,
    make_noiseless_least_squares,
    make_noisy_least_squares,
    make_packing,
    modulus_oracle,
    pinch_check,
    population_value,
    stability_bound_check,
    superefficiency_construct,
)

# -------------------------------------------------------------- spec types


def test_lower_bound_spec_validation():
    LowerBoundSpec(d=2, n=10, k=5, v=[1.0, 0.0], H=1.0)
    with pytest.raises(ValueError):
        LowerBoundSpec(d=2, n=10, k=0, v=[1.0, 0.0], H=1.0)
    with pytest.raises(ValueError):
        LowerBoundSpec(d=2, n=10, k=11, v=[1.0, 0.0], H=1.0)
    with pytest.raises(ValueError):
        LowerBoundSpec(d=2, n=10, k=5, v=[0.0, 0.0], H=1.0)  # off state
    with pytest.raises(ValueError):
        LowerBoundSpec(d=2, n=10, k=5, v=[1.0, 0.0], H=0.0)


def test_packing_spec_validation():
    PackingSpec(D=1.0, gamma=0.5, d=3)
    with pytest.raises(ValueError):
        PackingSpec(D=0.0, gamma=0.1, d=1)
    with pytest.raises(ValueError):
        PackingSpec(D=1.0, gamma=0.6, d=1)  # above D/2
    with pytest.raises(ValueError):
        PackingSpec(D=1.0, gamma=0.25, d=4)


def test_superefficiency_params_validation():
    p = SuperefficiencyParams.from_epsilon(0.3, anchor=1.0)
    assert p.r == math.ceil(1.0 / 0.3) == 4
    with pytest.raises(ValueError):
        SuperefficiencyParams(r=0, anchor=1.0)
    with pytest.raises(ValueError):
        SuperefficiencyParams(r=1, anchor=1.0, t=1.5)
    with pytest.raises(ValueError):
        SuperefficiencyParams(r=1, anchor=1.0, c0=0.0)
    with pytest.raises(ValueError):
        SuperefficiencyParams.from_epsilon(0.0, anchor=1.0)


# -------------------------------------------------------------- generators


def test_noiseless_least_squares_interpolates_with_growth():
    inst = make_noiseless_least_squares(2, 16, [0.5, 0.0], 2.0)
    assert interpolation_certificate(inst) == 0.0
    assert excess_risk(inst, inst.optimum.point) == 0.0
    assert inst.constants.growth == 2.0
    assert inst.constants.H == 2.0
    # deterministic: the generator ignores its rng argument
    again = make_noiseless_least_squares(2, 16, [0.5, 0.0], 2.0, rng=RngStream(99))
    assert np.array_equal(inst.dataset.points, again.dataset.points)
    with pytest.raises(ValueError):
        make_noiseless_least_squares(2, 16, [3.0, 0.0], 1.0, radius=1.0)


def test_noisy_least_squares_breaks_interpolation():
    inst = make_noisy_least_squares(2, 64, [0.5, 0.0], 1.0, 0.5, RngStream(40, 0))
    assert not is_interpolating(inst)
    assert interpolation_certificate(inst) > 1e-3
    assert excess_risk(inst, inst.optimum.point) == 0.0  # mean is still optimal
    with pytest.raises(ValueError):
        make_noisy_least_squares(2, 64, [0.5, 0.0], 1.0, 0.0, RngStream(40, 0))


def test_margin_classification_witness_is_slack():
    inst = make_margin_classification(3, 40, 0.25, RngStream(41, 0))
    assert interpolation_certificate(inst) == 0.0
    assert population_value(inst, inst.optimum.point) == 0.0
    assert np.all(np.abs(inst.dataset.labels) == 1.0)
    witness = inst.optimum.point
    fam = inst.family
    # a margin/2 move along any feature direction keeps every loss at zero
    for i in range(inst.n):
        a = inst.dataset.points[i]
        label = float(inst.dataset.labels[i])
        for sign in (1.0, -1.0):
            x = witness + sign * (0.25 / 2.0) * a
            assert loss_value(fam, x, a, label=label) == 0.0
            assert np.all(loss_gradient(fam, x, a, label=label) == 0.0)
    with pytest.raises(ValueError):
        make_margin_classification(3, 10, 0.0, RngStream(0))


def test_lower_bound_instance_population_risk():
    spec = LowerBoundSpec(d=2, n=10, k=5, v=[1.0, 0.0], H=1.0)
    inst = make_lower_bound_instance(spec)
    # (k H / 2n) ||x - v||^2 at x = 0 is 5/20 = 0.25
    assert population_value(inst, [0.0, 0.0]) == 0.25
    assert inst.constants.growth == 0.5
    assert interpolation_certificate(inst) == 0.0
    rng = np.random.default_rng(42)
    for _ in range(50):
        x = rng.standard_normal(2)
        expect = (spec.k * spec.H / (2.0 * spec.n)) * float(np.sum((x - inst.optimum.point) ** 2))
        assert abs(population_value(inst, x) - expect) <= 1e-12 * max(1.0, expect)
    # k = n reduces to the plain anchored quadratic
    full = make_lower_bound_instance(LowerBoundSpec(d=2, n=10, k=10, v=[1.0, 0.0], H=1.0))
    plain = make_noiseless_least_squares(2, 10, [1.0, 0.0], 1.0)
    for _ in range(20):
        x = rng.standard_normal(2)
        assert abs(population_value(full, x) - population_value(plain, x)) <= 1e-12


def test_packing_one_dimensional_worked_example():
    pts = make_packing(PackingSpec(D=1.0, gamma=0.25, d=1))
    assert np.array_equal(pts, np.array([[-0.5], [-0.25], [0.0], [0.25], [0.5]]))
    assert pts.shape[0] >= 1.0 / (2 * 0.25)


def test_packing_separation_and_containment():
    for d in (1, 2, 3):
        spec = PackingSpec(D=2.0, gamma=0.5, d=d)
        pts = make_packing(spec)
        assert pts.shape[0] >= 2
        assert np.all(np.linalg.norm(pts, axis=1) <= spec.D / 2 + 1e-12)
        diffs = pts[:, None, :] - pts[None, :, :]
        dist = np.linalg.norm(diffs, axis=2)
        np.fill_diagonal(dist, np.inf)
        assert dist.min() >= spec.gamma - 1e-12


# ------------------------------------------------------------- checkers


def test_superefficiency_worked_example():
    base = make_noiseless_least_squares(1, 100, [0.0], 1.0, radius=1.0)
    report = superefficiency_construct(base, SuperefficiencyParams.from_epsilon(1.0, anchor=1.0))
    assert report.base_minimizer == 0.0
    assert report.shift == 0.01  # one swapped anchor moves the mean by D/n
    assert report.lower_bound == 0.01
    assert report.upper_bound == 0.08
    assert report.passed
    assert not is_interpolating(report.instance)


def test_superefficiency_sandwich_across_sizes():
    for n in (100, 1000):
        base = make_noiseless_least_squares(1, n, [0.0], 1.0, radius=1.0)
        for r in range(1, 11):
            rep = superefficiency_construct(base, SuperefficiencyParams(r=r, anchor=1.0))
            assert rep.passed
            assert rep.lower_bound - 1e-12 <= rep.shift <= rep.upper_bound + 1e-12


def test_superefficiency_indicator_family():
    base = make_lower_bound_instance(LowerBoundSpec(d=1, n=50, k=10, v=[-0.5], H=1.0))
    rep = superefficiency_construct(base, SuperefficiencyParams(r=2, anchor=0.8))
    assert rep.passed
    # swapped rows were active: 8 anchors stay at -0.5, 2 move to +0.8
    assert rep.shift == pytest.approx((8 * -0.5 + 2 * 0.8) / 10 - (-0.5), abs=1e-12)


def test_superefficiency_preconditions():
    good = make_noiseless_least_squares(1, 100, [0.0], 1.0, radius=1.0)
    with pytest.raises(ValueError):  # not interpolating
        superefficiency_construct(
            make_noisy_least_squares(1, 100, [0.0], 1.0, 0.3, RngStream(42, 0)),
            SuperefficiencyParams(r=1, anchor=1.0),
        )
    with pytest.raises(ValueError):  # r >= n
        superefficiency_construct(good, SuperefficiencyParams(r=100, anchor=1.0))
    with pytest.raises(ValueError):  # anchor outside the domain
        superefficiency_construct(good, SuperefficiencyParams(r=1, anchor=2.0))
    with pytest.raises(ValueError):  # population minimizer above zero
        superefficiency_construct(
            make_noiseless_least_squares(1, 100, [0.3], 1.0),
            SuperefficiencyParams(r=1, anchor=1.0),
        )
    with pytest.raises(ValueError):  # one-dimensional oracle
        superefficiency_construct(
            make_noiseless_least_squares(2, 100, [0.0, 0.0], 1.0),
            SuperefficiencyParams(r=1, anchor=1.0),
        )


def test_modulus_oracle_worked_example():
    base = make_noiseless_least_squares(1, 100, [0.0], 1.0, radius=1.0)
    report = modulus_oracle(base, 3)
    assert report.values == (0.0, 0.01, 0.02, 0.03)
    assert report.anchor_magnitude == 1.0
    assert modulus_oracle(base, 0).values == (0.0,)


def test_modulus_is_monotone_and_dominates_the_swap_rate():
    gen = RngStream(43, 0).generator()
    pts = np.clip(0.3 * gen.standard_normal(60), -0.9, 0.9)
    base = Instance(
        family=QuadraticAnchor(H=1.0),
        dataset=Dataset(pts),
        domain=Ball(np.zeros(1), 1.0),
        constants=LossConstants(L=2.0, H=1.0, growth=1.0),
    )
    rep = modulus_oracle(base, 10)
    vals = rep.values
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    # each extra swap can move the mean by at least (D - max|anchor|)/n
    slack = (1.0 - float(np.abs(pts).max())) / 60
    for j in range(1, 11):
        assert vals[j] >= j * slack - 1e-12


def test_modulus_indicator_enumeration():
    base = make_lower_bound_instance(LowerBoundSpec(d=1, n=4, k=2, v=[-0.5], H=1.0))
    rep = modulus_oracle(base, 1)
    # best single swap: turn an active -0.5 anchor into +1 (j_on = 1):
    # new mean (-0.5 + 1) / 2 = 0.25, shift 0.75 from the base mean -0.5
    assert rep.values[1] == pytest.approx(0.75, abs=1e-15)


def test_modulus_validation():
    base = make_noiseless_least_squares(1, 10, [0.0], 1.0)
    with pytest.raises(ValueError):
        modulus_oracle(base, -1)
    with pytest.raises(ValueError):
        modulus_oracle(base, 10)
    with pytest.raises(ValueError):
        modulus_oracle(make_noiseless_least_squares(2, 10, [0.0, 0.0], 1.0), 2)


def _anchored(pts):
    return Instance(
        family=QuadraticAnchor(H=1.0),
        dataset=Dataset(np.asarray(pts, dtype=float)),
        domain=Ball(np.zeros(1), 1.0),
        constants=LossConstants(L=2.0, H=1.0, growth=1.0),
    )


def test_stability_worked_example():
    constants = LossConstants(L=2.0, H=1.0, growth=1.0)
    base = make_noiseless_least_squares(1, 100, [0.0], 1.0, radius=1.0)
    pts = base.dataset.points.copy()
    pts[-1] = 1.0
    swapped = _anchored(pts)
    report = stability_bound_check(base, swapped, 1, constants)
    assert report.bound == 0.08  # 4 k L / (lambda n) = 4 * 2 / 100
    assert report.distance == pytest.approx(0.01, abs=1e-15)
    assert report.differing == 1
    assert report.passed
    same = stability_bound_check(base, base, 1, constants)
    assert same.distance == 0.0 and same.differing == 0


def test_stability_holds_over_random_single_swaps():
    constants = LossConstants(L=2.0, H=1.0, growth=1.0)
    gen = RngStream(44, 0).generator()
    n = 100
    for _ in range(1000):
        pts = np.clip(0.4 * gen.standard_normal(n), -1.0, 1.0)
        base = _anchored(pts)
        swapped_pts = pts.copy()
        swapped_pts[int(gen.integers(0, n))] = float(gen.uniform(-1.0, 1.0))
        report = stability_bound_check(base, _anchored(swapped_pts), 1, constants)
        assert report.passed


def test_stability_validation():
    constants = LossConstants(L=2.0, H=1.0, growth=1.0)
    base = make_noiseless_least_squares(1, 10, [0.0], 1.0)
    pts = base.dataset.points.copy()
    pts[0], pts[1] = 0.5, 0.5
    with pytest.raises(ValueError):  # two rows differ but k = 1
        stability_bound_check(base, _anchored(pts), 1, constants)
    with pytest.raises(ValueError):  # sizes differ
        stability_bound_check(base, make_noiseless_least_squares(1, 11, [0.0], 1.0), 1, constants)
    with pytest.raises(ValueError):  # no growth to divide by
        stability_bound_check(base, base, 1, LossConstants(L=2.0, H=1.0, growth=0.0))


def test_growth_closure_keeps_the_declared_coefficient_at_zero_removals():
    base = make_noiseless_least_squares(1, 100, [0.0], 1.0)
    report = growth_closure_check(base, 0)
    assert report.coefficient == 1.0
    assert report.bound == 1.0  # lambda exactly: no removal, no discount
    assert report.passed and report.removed == 0


def test_growth_closure_worked_example():
    base = make_noiseless_least_squares(1, 100, [0.0], 1.0)
    report = growth_closure_check(base, 1)
    assert report.coefficient == 0.99
    assert report.bound == 0.99  # lambda - H r / n at the default eps = 1/r
    assert report.passed


def test_growth_closure_indicator_drops_active_rows_first():
    inst = make_lower_bound_instance(LowerBoundSpec(d=1, n=10, k=5, v=[0.5], H=1.0))
    report = growth_closure_check(inst, 2)
    assert report.coefficient == pytest.approx(0.3, abs=1e-15)
    assert report.bound == pytest.approx(0.3, abs=1e-15)
    assert report.passed


def test_growth_closure_bound_property_and_validation():
    base = make_noiseless_least_squares(1, 50, [0.0], 1.0)
    for r in (0, 1, 5, 20):
        rep = growth_closure_check(base, r)
        assert rep.coefficient >= base.constants.growth - base.constants.H * r / 50 - 1e-12
    with pytest.raises(ValueError):
        growth_closure_check(base, 50)
    with pytest.raises(ValueError):
        growth_closure_check(base, 1, eps=0.0)
    margin_inst = make_margin_classification(2, 8, 0.25, RngStream(45, 0))
    with pytest.raises(ValueError):
        growth_closure_check(margin_inst, 1)


def test_pinch_worked_example():
    report = pinch_check(Quadratic1D(1.0, 0.0), Quadratic1D(1.0, 1.0))
    assert report.x_star == 0.5
    assert report.lower == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert report.upper == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert report.lower - 1e-12 <= report.x_star <= report.upper + 1e-12
    assert report.gradient_lower_ok and report.gradient_upper_ok and report.passed


def test_pinch_equal_minimizers_collapse():
    report = pinch_check(Quadratic1D(2.0, 0.7), Quadratic1D(5.0, 0.7))
    assert report.x_star == 0.7
    assert report.lower == report.upper == 0.7
    assert report.passed


def test_pinch_holds_over_random_pairs():
    gen = RngStream(46, 0).generator()
    for _ in range(1000):
        h = Quadratic1D(float(gen.uniform(0.1, 10.0)), float(2.0 * gen.standard_normal()))
        g = Quadratic1D(float(gen.uniform(0.1, 10.0)), float(2.0 * gen.standard_normal()))
        report = pinch_check(h, g)
        assert report.passed
        assert report.lower - 1e-12 <= report.x_star <= report.upper + 1e-12


def test_pinch_validation():
    with pytest.raises(ValueError):
        Quadratic1D(0.0, 1.0)


def test_growth_report_is_a_plain_record():
    rep = GrowthReport(coefficient=1.0, bound=0.9, removed=1, passed=True, method="x")
    assert rep.coefficient == 1.0 and rep.passed
