import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ricegrade.grading import (
    OFF_GRADE,
    admixture_rate,
    assign_grade,
    broken_rates,
    classify_completeness,
    classify_variety,
    compute_batch_avg_whole_length,
    SampleReport,
)
from ricegrade.varieties import DEFAULT_STANDARDS, VARIETIES, Branch, CompletenessClass, VarietyCode

W, S, T = CompletenessClass.WHOLE, CompletenessClass.SIZEABLE_BROKEN, CompletenessClass.TINY_BROKEN
rate = st.floats(0, 1)


class FakeGrain:
    def __init__(self, long_mm, short_mm=2.0, area=1.0):
        self.long_axis_mm, self.short_axis_mm, self.area_mm2 = long_mm, short_mm, area


@pytest.mark.parametrize("long_mm, short_mm, expected", [
    (5.5, 2.0, W),
    (4.0, 2.4, S),
    (3.0, 1.5, T),
    (4.9725, 1.2, W),  # exactly 0.75 x 6.63 stays whole
    (3.0, 2.0, S),  # retained on the 2.0 mm sieve
    (2.0, 1.0, T),
])
def test_wc_completeness(long_mm, short_mm, expected):
    assert classify_completeness((long_mm, short_mm), 6.63) is expected


def test_dust_excluded():
    assert classify_completeness((1.2, 0.8), 6.63) is None


def test_completeness_rejects_bad_average():
    with pytest.raises(ValueError):
        classify_completeness((1, 1), 0)


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 3), st.floats(1, 8))
def test_completeness_monotone_in_length(l1, l2, short, avg):
    lo, hi = sorted((l1, l2))
    if classify_completeness((lo, short), avg) is W:
        assert classify_completeness((hi, short), avg) is W


def test_batch_average():
    gd = VARIETIES[VarietyCode.GD]
    assert compute_batch_avg_whole_length([(6.74, 1.7)] * 4, gd) == pytest.approx(6.74)
    assert compute_batch_avg_whole_length([(6.8, 1.7), (6.7, 1.7), (3.0, 1.7)], "GD") == pytest.approx(6.75, abs=1e-9)
    assert compute_batch_avg_whole_length([(3.0, 1.7)] * 3, "GD") == 6.74
    with pytest.raises(ValueError):
        compute_batch_avg_whole_length([], "GD")


def test_broken_rate_examples():
    grains = [(FakeGrain(6), W), (FakeGrain(3), S), (FakeGrain(2), T)]
    x1, x2 = broken_rates(grains, [8.0, 1.5, 0.5])
    assert x1 == pytest.approx(0.05, abs=1e-12) and x2 == pytest.approx(0.20, abs=1e-12)
    assert broken_rates([(FakeGrain(6), W)] * 3) == (0.0, 0.0)
    x1, _ = broken_rates([(FakeGrain(6), W), (FakeGrain(2), T)], [9.5, 0.5])
    assert x1 == pytest.approx(0.05, abs=1e-12)
    with pytest.raises(ValueError):
        broken_rates([(FakeGrain(6), W)], [0.0])


def test_area_proxy():
    grains = [(FakeGrain(6, area=9.0), W), (FakeGrain(2, area=1.0), T)]
    assert broken_rates(grains) == pytest.approx((0.1, 0.1))


@given(st.lists(st.tuples(st.floats(0.01, 100), st.sampled_from([W, S, T])), min_size=1, max_size=40))
def test_small_broken_never_exceeds_broken(items):
    x1, x2 = broken_rates([(FakeGrain(1), c) for _, c in items], [m for m, _ in items])
    assert 0 <= x1 <= x2 <= 1 + 1e-12


@pytest.mark.parametrize("code", list(VarietyCode))
def test_centroids_recovered(code):
    v = VARIETIES[code]
    got, dist = classify_variety((v.avg_length_mm, v.avg_width_mm))
    assert got is code and dist == 0.0


def test_classify_near_wn():
    # standardized distances: WN 0.259, WC 0.387, GD 1.440, YB 2.224, PJX 2.297, NM 2.627
    code, dist = classify_variety((6.78, 2.30))
    assert code is VarietyCode.WN
    assert dist == pytest.approx(0.259, abs=1e-3)


def test_admixture():
    gd = (6.74, 1.74)
    nm = (4.45, 2.86)
    assert admixture_rate([gd] * 10, "GD") == 0.0
    assert admixture_rate([gd] * 95 + [nm] * 5, "GD") == pytest.approx(0.05)
    assert admixture_rate([gd] * 7, "NM") == 1.0
    with pytest.raises(ValueError):
        admixture_rate([], "GD")


def test_grade_examples():
    assert assign_grade("Indica", 0.008, 0.12, 0.015, 0.03) == 1
    assert assign_grade("Japonica", 0.018, 0.18, 0.055, 0.03) == 3
    assert assign_grade("Indica", 0.0, 0.35, 0.0, 0.0) == OFF_GRADE
    # 5% small broken is above every Indica small-broken limit
    assert assign_grade("Indica", 0.05, 0.12, 0.0, 0.0) == OFF_GRADE
    assert assign_grade("GlutinousIndica", 0.025, 0.25, 0.9, 0.0) == 2


def test_glutinous_ignores_chalk():
    for d in (0.0, 0.5, 1.0):
        assert assign_grade(Branch.GLUTINOUS_JAPONICA, 0.01, 0.05, d, 0.0) == 1


@given(rate, rate, rate, rate, st.sampled_from(list(Branch)), st.integers(0, 3), st.floats(0, 1))
def test_grade_monotone(x1, x2, d, adm, branch, which, factor):
    rates = [x1, x2, d, adm]
    before = assign_grade(branch, *rates)
    rates[which] *= factor
    after = assign_grade(branch, *rates)
    order = lambda g: 99 if g == OFF_GRADE else g  # noqa: E731
    assert order(after) <= order(before)


def test_boundary_sweep():
    for row in DEFAULT_STANDARDS:
        at = [row.max_small_broken_rate, row.max_broken_rate, row.max_chalk_rate or 0.0, row.max_admixture_rate]
        assert assign_grade(row.branch, *at) == row.level
        for i in range(4):
            if i == 2 and row.max_chalk_rate is None:
                continue
            bumped = list(at)
            bumped[i] += 0.001
            assert assign_grade(row.branch, *bumped) != row.level


def test_sample_report_invariants():
    with pytest.raises(ValueError):
        SampleReport("GD", 3, {"Whole": 2}, 0.0, 0.0)
    with pytest.raises(ValueError):
        SampleReport("GD", 1, {"Whole": 1}, 0.2, 0.1)
