import math
from fractions import Fraction

import numpy as np
import pytest

from ramscov.covariogram import directional_variation
from ramscov.grid import PixelSet, Window
from ramscov.models import (
    BooleanModel1D,
    BooleanModel2D,
    Grain,
    IntervalSet,
    covariogram_samples,
    estimate_covariogram_at,
    estimate_specific_covariogram,
    estimate_specific_perimeter,
    estimate_volume_fraction,
    intervals_from_pixels,
    intervals_to_pixels,
    lebesgue_density,
    model_from_dict,
    simulate,
)
from ramscov.polytope import necessary_conditions, sigma_gamma


def within(est, exact, k=3.0):
    return abs(est.value - exact) <= k * est.stderr


# ------------------------------------------------------------------ intervals

def test_interval_set_invariants():
    with pytest.raises(ValueError):
        IntervalSet(((0.0, 1.0), (0.5, 2.0)))
    with pytest.raises(ValueError):
        IntervalSet(((1.0, 1.0),))
    merged = IntervalSet.from_union([0.0, 0.5, 2.0, 3.0], [1.0, 1.5, 3.0, 4.0])
    assert merged.intervals == ((0.0, 1.5), (2.0, 4.0))


def test_interval_perimeter_examples():
    X = IntervalSet(((0.0, 0.5), (0.7, 1.0)))
    assert X.perimeter(0.0, 1.0) == 2
    assert IntervalSet().perimeter(0.0, 1.0) == 0
    assert X.measure(0.0, 1.0) == pytest.approx(0.8)


def test_intervals_from_pixels_examples():
    A = PixelSet(2, 1, {(0,), (1,), (2,)})
    assert intervals_from_pixels(A).intervals == ((0.0, 1.5),)
    assert intervals_from_pixels(PixelSet.empty(3, 1)).intervals == ()
    with pytest.raises(Exception):
        intervals_from_pixels(PixelSet(1, 2, {(0, 0)}))


def test_interval_perimeter_matches_directional_variation():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        A = PixelSet.from_mask(rng.random(30) < 0.5, n, (int(rng.integers(-10, 5)),))
        a, b = sorted(int(v) for v in rng.integers(-12, 30, size=2))
        if a == b:
            continue
        W = Window.box(n, (a,), (b,))
        X = intervals_from_pixels(A)
        assert X.perimeter(a / n, b / n) == directional_variation(A, 0, W)
        assert intervals_to_pixels(X, n) == A


@pytest.mark.parametrize("x, expected", [(0.25, 1), (0.5, Fraction(1, 2)), (0.0, Fraction(1, 2)), (0.6, 0), (2.0, 0)])
def test_lebesgue_density(x, expected):
    X = IntervalSet(((0.0, 0.5), (0.7, 1.0)))
    assert lebesgue_density(X, x) == expected


# ------------------------------------------------------------------- models

def test_model_validation_and_config():
    with pytest.raises(ValueError):
        BooleanModel1D(-1.0)
    with pytest.raises(ValueError):
        BooleanModel1D(1.0, Grain("disk", 1.0))
    with pytest.raises(ValueError):
        Grain("fixed", 0.0)
    m = model_from_dict({"type": "boolean1d", "lambda": 2, "grain": {"kind": "exponential", "param": 0.5}, "seed": 4})
    assert m == BooleanModel1D(2.0, Grain("exponential", 0.5), 4)
    assert model_from_dict(m.to_dict()) == m
    m2 = model_from_dict({"type": "boolean2d", "lambda": 3, "grain": {"kind": "disk", "param": 0.1}, "n": 8})
    assert model_from_dict(m2.to_dict()) == m2
    with pytest.raises(ValueError):
        model_from_dict({"type": "mosaic", "lambda": 1})


def test_closed_forms_1d():
    m = BooleanModel1D(1.0, Grain("fixed", 1.0))
    q = math.exp(-1)
    assert m.volume_fraction() == pytest.approx(1 - q)
    assert m.s2(0.0) == pytest.approx(1 - q)
    assert m.s2(5.0) == pytest.approx((1 - q) ** 2)
    assert m.specific_perimeter() == pytest.approx(2 * q)
    e = BooleanModel1D(2.0, Grain("exponential", 0.5))
    assert e.s2(0.0) == pytest.approx(e.volume_fraction())
    assert e.s2(50.0) == pytest.approx(e.volume_fraction() ** 2)


def test_simulate_zero_intensity_and_determinism():
    assert len(simulate(BooleanModel1D(0.0))) == 0
    assert len(simulate(BooleanModel2D(0.0, n=8))) == 0
    m = BooleanModel1D(3.0, Grain("exponential", 0.2), seed=11)
    assert simulate(m, replicate=5) == simulate(m, replicate=5)
    assert simulate(m, replicate=5) != simulate(m, replicate=6)
    m2 = BooleanModel2D(30.0, Grain("disk", 0.08), n=16, seed=2)
    assert simulate(m2, replicate=1) == simulate(m2, replicate=1)


def test_realization_does_not_depend_on_window_extent():
    m = BooleanModel1D(2.0, Grain("fixed", 0.4), seed=9)
    for r in range(20):
        small = simulate(m, (0.0, 1.0), replicate=r)
        large = simulate(m, (-3.0, 4.0), replicate=r).restrict(0.0, 1.0)
        assert small == large


def test_rasterization_invariant():
    m = BooleanModel1D(4.0, Grain("exponential", 0.1), seed=3)
    n = 10**4
    checked = 0
    for r in range(50):
        X = simulate(m, replicate=r)
        inner = [x for x in X.endpoints if 0.0 < x < 1.0]
        ends = np.sort(np.array(inner + [0.0, 1.0]))
        if np.min(np.diff(ends)) < 3.0 / n:
            continue  # two endpoints would snap together
        A = intervals_to_pixels(X, n)
        assert X.perimeter(0.0, 1.0) == directional_variation(A, 0, Window.unit(n, 1))
        checked += 1
    assert checked > 40


def test_high_intensity_coverage():
    m = BooleanModel1D(10.0, Grain("fixed", 1.0), seed=1)
    est = estimate_volume_fraction(m, 2000)
    assert est.value == pytest.approx(1 - math.exp(-10), abs=1e-3)
    assert est.value <= 1


def test_zero_shift_estimate_equals_volume_fraction():
    m = BooleanModel1D(1.5, Grain("fixed", 0.5), seed=21)
    vf = estimate_volume_fraction(m, 500)
    curve = estimate_specific_covariogram(m, 0.1, 8, 500)
    assert curve.origin == vf.value
    m2 = BooleanModel2D(20.0, Grain("square", 0.125), n=8, seed=2)
    assert estimate_specific_covariogram(m2, None, 2, 100).origin == estimate_volume_fraction(m2, 100).value


def test_exponential_grain_covariogram_and_perimeter():
    m = BooleanModel1D(2.0, Grain("exponential", 0.4), seed=5)
    ys = [0.0, 0.1, 0.3, 0.8]
    for y, est in zip(ys, estimate_covariogram_at(m, ys, 4000)):
        assert within(est, float(m.s2(y))), (y, est, float(m.s2(y)))
    per = estimate_specific_perimeter(m, 4000)
    assert within(per, m.specific_perimeter())


def test_estimated_curve_even_and_passes_necessary_conditions():
    m = BooleanModel1D(1.0, Grain("fixed", 1.0), seed=8)
    curve = estimate_specific_covariogram(m, 0.05, 20, 2000)
    K = curve.K
    for k in range(1, K + 1):
        a, b = curve.values[K + k], curve.values[K - k]
        assert abs(a - b) <= 3 * (curve.stderr[K + k] + curve.stderr[K - k])
    assert necessary_conditions(curve) == []


def test_estimator_without_replicate_spread():
    m = BooleanModel1D(1.0, seed=0)
    curve = estimate_specific_covariogram(m, 0.5, 1, 1)
    assert curve.stderr is None
    assert estimate_specific_perimeter(m, 1).stderr is None


def test_sigma_estimates_increase_towards_perimeter():
    m = BooleanModel1D(1.0, Grain("fixed", 1.0), seed=13)
    curve = estimate_specific_covariogram(m, Fraction(1, 20), 16, 4000)
    per = estimate_specific_perimeter(m, 4000)
    W = Window.unit(20, 1)
    eps = [Fraction(16, 20), Fraction(8, 20), Fraction(4, 20), Fraction(2, 20), Fraction(1, 20)]
    vals = [sigma_gamma(curve, 0, W, e) for e in eps]
    # the exact σ_γ is (2/ε)(1-ε) q (1 - e^{-ε}); noise is far below the gaps
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= per.value + 3 * per.stderr


def test_specific_perimeter_zero_intensity():
    assert estimate_specific_perimeter(BooleanModel1D(0.0), 10).value == 0


def test_2d_square_grains_match_point_coverage():
    # cells are tested at their centers, so lattice S2 equals the continuum one
    lam, s, n = 15.0, 0.25, 8
    m = BooleanModel2D(lam, Grain("square", s), n=n, seed=4)
    q = math.exp(-lam * s * s)
    shifts = [(0, 0), (1, 0), (1, 1), (3, 0)]
    samples = covariogram_samples(m, shifts, 1500)
    for col, (a, b) in enumerate(shifts):
        y0, y1 = a / n, b / n
        overlap = max(0.0, s - abs(y0)) * max(0.0, s - abs(y1))
        exact = 1 - 2 * q + math.exp(-lam * (2 * s * s - overlap))
        mean = samples[:, col].mean()
        se = samples[:, col].std(ddof=1) / math.sqrt(len(samples))
        assert abs(mean - exact) <= 3 * se, (a, b, mean, exact)


def test_2d_perimeter_estimate_is_face_count():
    m = BooleanModel2D(10.0, Grain("disk", 0.1), n=16, seed=3)
    est = estimate_specific_perimeter(m, 3)
    from ramscov.covariogram import perimeter_B

    vals = [float(perimeter_B(simulate(m, replicate=r), Window.unit(16, 2))) for r in range(3)]
    assert est.value == pytest.approx(sum(vals) / 3)
