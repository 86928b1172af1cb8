import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medianlab.bounds import lb_params, lb_ratio
from medianlab.instances import (
    Distribution,
    GeneratorSpec,
    GenKind,
    InstanceFormatError,
    gen_lb_instance,
    gen_lb_instance_weighted,
    gen_linf_instance,
    gen_random_instance,
    generate,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    save_instance,
)
from medianlab.mechanisms import Instance, TieBreak, coordinate_median
from medianlab.norms import social_cost
from medianlab.optfac import empirical_ratio


class TestGeneralFamily:
    def test_median_is_origin(self):
        P = gen_lb_instance(2, 100, 10_000)
        assert np.all(coordinate_median(P, TieBreak.LOWER) == 0.0)

    def test_ratio_close_to_closed_form(self):
        P = gen_lb_instance(2, 100, 10_000)
        rep = empirical_ratio(P, 2, optimum=np.ones(100))
        assert rep.empirical_ratio == pytest.approx(lb_ratio(2, 100), rel=0.02)

    def test_dimension_too_small(self):
        with pytest.raises(ValueError, match="too small"):
            gen_lb_instance(2, 3, 100)

    def test_population_too_small(self):
        with pytest.raises(ValueError, match="too small"):
            gen_lb_instance(2, 100, 1)

    @pytest.mark.parametrize("q", [1, "inf"])
    def test_needs_interior_q(self, q):
        with pytest.raises(ValueError):
            gen_lb_instance(q, 100, 100)

    def test_type_structure(self):
        P = gen_lb_instance(3, 50, 600, seed=4)
        par = lb_params(3)
        k = P.meta["k"]
        n1 = P.meta["type1_count"]
        assert k == math.floor(par.a_star * 50)
        assert np.all((P.points[:n1] > 0).sum(axis=1) == k)
        assert np.allclose(P.points[:n1][P.points[:n1] > 0], par.type1_coord)
        assert np.all(P.points[n1:] == 1.0)
        assert abs(P.meta["type1_rounding"]) <= 0.5

    def test_seed_changes_layout_not_counts(self):
        a, b = gen_lb_instance(2, 40, 500, seed=1), gen_lb_instance(2, 40, 500, seed=2)
        assert a.meta["type1_count"] == b.meta["type1_count"]
        assert not np.array_equal(a.points, b.points)
        assert social_cost(a, np.ones(40), 2) == pytest.approx(social_cost(b, np.ones(40), 2))

    def test_weighted_variant_is_exact(self):
        P = gen_lb_instance_weighted(2, 64)
        assert P.total_weight == pytest.approx(1.0)
        rep = empirical_ratio(P, 2, optimum=np.ones(64))
        assert rep.empirical_ratio == pytest.approx(lb_ratio(2, 64), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([1.5, 2.0, 3.0, 5.0]), st.integers(8, 300), st.integers(50, 2000), st.integers(0, 10**6))
def test_every_generated_instance_has_median_at_origin(q, d, n, seed):
    try:
        P = gen_lb_instance(q, d, n, seed)
    except ValueError:
        return  # infeasible (d, n) combinations are rejected, never silently built
    assert np.all(coordinate_median(P, TieBreak.LOWER) == 0.0)


class TestMaxNormFamily:
    def test_stated_fractions_put_the_median_at_ones(self):
        # d of every 2d-1 points are Type I, each positive in one coordinate;
        # every coordinate is therefore positive for more than half the points
        P = gen_linf_instance(10, 19)
        assert np.all(coordinate_median(P, TieBreak.LOWER) == 1.0)
        assert empirical_ratio(P, "inf").empirical_ratio == pytest.approx(1.0)

    @pytest.mark.parametrize("d", [2, 10, 100])
    def test_balanced_fractions(self, d):
        P = gen_linf_instance(d, 0, counts="balanced")
        assert np.all(coordinate_median(P, TieBreak.LOWER) == 0.0)
        rep = empirical_ratio(P, "inf", optimum=np.ones(d))
        assert rep.empirical_ratio == pytest.approx(3 - 2 / d, abs=1e-9)

    def test_count_rounding(self):
        P = gen_linf_instance(10, 20)
        assert P.n == 38 and P.meta["type1_count"] == 20

    def test_each_coordinate_gets_equal_share(self):
        P = gen_linf_instance(5, 45, seed=3)
        assert np.all((P.points == 2.0).sum(axis=0) == 5)

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            gen_linf_instance(3, counts="other")


class TestRandom:
    def test_deterministic(self):
        spec = GeneratorSpec(GenKind.RANDOM, 2, 3, 10, seed=5)
        assert generate(spec) == generate(spec)

    def test_uniform_support(self):
        P = gen_random_instance(GeneratorSpec(GenKind.RANDOM, 2, 2, 5))
        assert np.all((P.points >= 0) & (P.points <= 1))

    def test_gaussian_mean(self):
        P = gen_random_instance(GeneratorSpec(GenKind.RANDOM, 2, 3, 100, seed=7, distribution=Distribution.GAUSSIAN))
        assert np.all(np.abs(P.points.mean(axis=0)) < 0.5)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            GeneratorSpec(GenKind.RANDOM, 2, 0, 10)
        with pytest.raises(ValueError, match="floor"):
            GeneratorSpec(GenKind.LB_GENERAL, 2, 3, 10)


class TestPersistence:
    @pytest.mark.parametrize("hex_floats", [False, True])
    def test_round_trip(self, tmp_path, hex_floats):
        P = gen_lb_instance(2.5, 30, 101, seed=9)
        path = save_instance(P, tmp_path / "x.inst.json", hex_floats=hex_floats)
        Q = load_instance(path)
        assert Q == P
        assert Q.points.tobytes() == P.points.tobytes()

    def test_weights_round_trip(self, tmp_path):
        P = Instance([[0.1, 0.2], [1 / 3, 2.0]], [0.7, 1e-3], {"note": "w"})
        assert load_instance(save_instance(P, tmp_path / "w.inst.json")) == P

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "bad.inst.json"
        path.write_text(json.dumps({"version": "1", "points": [[0, 1], [2]]}))
        with pytest.raises(InstanceFormatError, match="dimension"):
            load_instance(path)

    def test_missing_version(self):
        with pytest.raises(InstanceFormatError, match="version"):
            instance_from_dict({"points": [[0.0]]})

    def test_wrong_version(self):
        with pytest.raises(InstanceFormatError, match="version"):
            instance_from_dict({"version": "7", "points": [[0.0]]})

    def test_not_json(self, tmp_path):
        path = tmp_path / "junk.inst.json"
        path.write_text("{")
        with pytest.raises(InstanceFormatError):
            load_instance(path)

    @pytest.mark.parametrize("bad", [[["a"]], [[True]], []])
    def test_bad_coordinates(self, bad):
        with pytest.raises(InstanceFormatError):
            instance_from_dict({"version": "1", "points": bad})

    def test_header_mismatch(self):
        with pytest.raises(InstanceFormatError):
            instance_from_dict({"version": "1", "n": 3, "points": [[0.0]]})

    def test_bad_weights(self):
        with pytest.raises(InstanceFormatError):
            instance_from_dict({"version": "1", "points": [[0.0]], "weights": [-1.0]})

    def test_numpy_meta_is_serialized(self):
        P = Instance([[0.0]], meta={"k": np.int64(3), "v": np.float64(0.5), "a": np.arange(2)})
        doc = instance_to_dict(P)
        assert doc["meta"] == {"k": 3, "v": 0.5, "a": [0, 1]}
        json.dumps(doc)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(-1e12, 1e12, allow_nan=False), min_size=3, max_size=3), min_size=1, max_size=6))
def test_decimal_round_trip_is_bit_exact(rows):
    P = Instance(rows)
    Q = instance_from_dict(json.loads(json.dumps(instance_to_dict(P))))
    assert Q.points.tobytes() == P.points.tobytes()
