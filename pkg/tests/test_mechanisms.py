import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from medianlab.mechanisms import (
    Instance,
    TieBreak,
    cmp_mechanism,
    cmp_median,
    coordinate_median,
    deviation_cost_delta,
    median_mechanism,
)

coords = st.integers(-50, 50).map(float)
clouds = st.tuples(st.integers(1, 9), st.integers(1, 4)).flatmap(
    lambda s: hnp.arrays(np.float64, s, elements=coords)
)


class TestInstance:
    def test_one_dimensional_input_is_a_column(self):
        assert Instance([0.0, 1.0, 5.0]).points.shape == (3, 1)

    def test_points_are_read_only(self):
        P = Instance([[1.0, 2.0]])
        with pytest.raises(ValueError):
            P.points[0, 0] = 3.0

    @pytest.mark.parametrize("w", [[1.0, 0.0], [1.0, -2.0], [1.0]])
    def test_bad_weights(self, w):
        with pytest.raises(ValueError):
            Instance([[0.0], [1.0]], w)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            Instance([[np.inf]])

    def test_total_weight(self):
        assert Instance([[0.0], [1.0]]).total_weight == 2.0
        assert Instance([[0.0], [1.0]], [0.5, 2.0]).total_weight == 2.5

    def test_with_point_copies(self):
        P = Instance([[0.0], [4.0]])
        Q = P.with_point(1, [7.0])
        assert Q.points[1, 0] == 7.0 and P.points[1, 0] == 4.0

    def test_with_point_bad_index(self):
        with pytest.raises(IndexError):
            Instance([[0.0]]).with_point(3, [1.0])

    def test_equality(self):
        assert Instance([[1.0]], meta={"a": 1}) == Instance([[1.0]], meta={"a": 1})
        assert Instance([[1.0]]) != Instance([[1.0]], [2.0])


class TestCoordinateMedian:
    def test_odd_count(self, backend):
        assert coordinate_median([[0.0], [1.0], [5.0]]).tolist() == [1.0]

    def test_even_tie_rules(self, backend):
        P = [[0.0, 0.0], [2.0, 4.0]]
        assert coordinate_median(P, TieBreak.LOWER).tolist() == [0.0, 0.0]
        assert coordinate_median(P, "upper").tolist() == [2.0, 4.0]

    def test_output_need_not_be_an_input_point(self, backend):
        assert coordinate_median([[1.0, 9.0], [5.0, 2.0], [3.0, 7.0]]).tolist() == [3.0, 7.0]
        assert coordinate_median([[1.0, 2.0], [5.0, 9.0], [3.0, 7.0]]).tolist() == [3.0, 7.0]

    def test_weights_shift_the_median(self, backend):
        assert coordinate_median(Instance([[0.0], [10.0]], [1.0, 3.0])).tolist() == [10.0]

    def test_unknown_tie_rule(self):
        with pytest.raises(ValueError):
            coordinate_median([[0.0]], "middle")


@settings(max_examples=150, deadline=None)
@given(clouds, st.integers(-20, 20).map(float), st.sampled_from([0.5, 2.0, 3.0, 0.25]))
def test_median_equivariance(P, shift, alpha):
    for tb in TieBreak:
        med = coordinate_median(P, tb)
        assert np.array_equal(coordinate_median(P + shift, tb), med + shift)
        assert np.array_equal(coordinate_median(alpha * P, tb), alpha * med)


@settings(max_examples=150, deadline=None)
@given(clouds)
def test_median_is_permutation_invariant_and_balanced(P):
    med = coordinate_median(P)
    assert np.array_equal(coordinate_median(P[::-1]), med)
    n = P.shape[0]
    assert np.all((P <= med).sum(axis=0) >= n / 2)
    assert np.all((P >= med).sum(axis=0) >= n / 2)


@settings(max_examples=100, deadline=None)
@given(clouds)
def test_reflection_swaps_tie_rules(P):
    assert np.array_equal(coordinate_median(-P, TieBreak.LOWER), -coordinate_median(P, TieBreak.UPPER))


class TestCMP:
    def test_heavy_prediction_still_below_half(self, backend):
        P = np.zeros((100, 1))
        assert cmp_median(P, [7.0], 0.99).tolist() == [0.0]

    def test_prediction_crosses_half(self, backend):
        assert cmp_median([[0.0], [0.0], [10.0]], [10.0], 2 / 3).tolist() == [10.0]

    def test_zero_weight_is_plain_median(self, backend):
        P = [[1.0, 9.0], [5.0, 2.0], [3.0, 7.0], [0.0, 0.0]]
        assert np.array_equal(cmp_median(P, [100.0, 100.0], 0.0), coordinate_median(P))

    def test_matches_explicit_copies(self, backend):
        rng = np.random.default_rng(3)
        P = rng.integers(-5, 5, size=(10, 3)).astype(float)
        pred = np.array([2.0, -1.0, 4.0])
        copies = np.vstack([P] + [pred] * 5)
        assert np.array_equal(cmp_median(P, pred, 0.5), coordinate_median(copies))

    @pytest.mark.parametrize("c", [-0.1, 1.0])
    def test_rejects_c(self, c):
        with pytest.raises(ValueError):
            cmp_median([[0.0]], [0.0], c)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            cmp_median([[0.0, 1.0]], [0.0], 0.5)

    def test_callable_prediction(self):
        mech = cmp_mechanism(0.5, lambda d: np.full(d, 3.0))
        assert mech(Instance([[0.0, 0.0], [4.0, 4.0]])).tolist() == [3.0, 3.0]


@settings(max_examples=100, deadline=None)
@given(clouds, st.floats(0.0, 0.99), st.data())
def test_cmp_lies_between_median_and_prediction(P, c, data):
    pred = data.draw(hnp.arrays(np.float64, P.shape[1], elements=coords))
    med = coordinate_median(P)
    out = cmp_median(P, pred, c)
    assert np.all(out >= np.minimum(med, pred)) and np.all(out <= np.maximum(med, pred))


class TestDeviation:
    def test_truthful_report(self):
        P = [[0.0, 1.0], [3.0, 2.0], [5.0, 5.0]]
        assert deviation_cost_delta(P, 1, [3.0, 2.0], median_mechanism(), 2) == 0.0

    def test_pushing_median_away_hurts(self, backend):
        assert deviation_cost_delta([[0.0], [4.0], [10.0]], 0, [5.0], median_mechanism(), 2) == 1.0

    def test_pulling_median_past_hurts(self, backend):
        assert deviation_cost_delta([[0.0], [4.0], [10.0]], 2, [-1.0], median_mechanism(), 2) == 4.0

    def test_mean_is_manipulable(self):
        def mean(P):
            return P.points.mean(axis=0)

        assert deviation_cost_delta([[0.0], [4.0], [10.0]], 2, [16.0], mean, 2) < 0
