import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_space
from fairspace.errors import FairspaceError, SpaceValidationError
from fairspace.io import space_from_dict, space_to_dict
from fairspace.spaces import (
    SpaceMap, from_embedding, induce_group_space, line_space, perturb, pushforward, shortest_path_closure,
    validate_space,
)


def test_two_point_space_is_valid():
    s = validate_space([[0, 1], [1, 0]], [0.5, 0.5], ["A", "A"])
    assert s.n == 2 and s.k == 1
    assert validate_space([[0, 1], [1, 0]], groups=[1, 3]).k == 2
    assert s.diameter == 1.0


def test_default_measure_is_uniform():
    s = validate_space([[0, 2], [2, 0]], groups=[1, 2])
    assert np.allclose(s.measure, 0.5)


def test_asymmetry_rejected():
    with pytest.raises(SpaceValidationError) as exc:
        validate_space([[0, 1], [2, 0]], [0.5, 0.5], ["A", "A"])
    assert "ASYMMETRY" in exc.value.codes


def test_triangle_violation_rejected():
    D = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
    with pytest.raises(SpaceValidationError) as exc:
        validate_space(D, groups=["A"] * 3)
    assert exc.value.codes == ["TRIANGLE_VIOLATION"]


def test_all_violations_are_collected():
    D = [[1, -1], [2, 0]]
    with pytest.raises(SpaceValidationError) as exc:
        validate_space(D, [0.7, 0.7], ["A", "A"])
    assert {"NONZERO_DIAGONAL", "NEGATIVE_DISTANCE", "ASYMMETRY", "BAD_MEASURE"} <= set(exc.value.codes)


def test_empty_group_rejected():
    with pytest.raises(SpaceValidationError) as exc:
        validate_space([[0, 1], [1, 0]], groups=["A", "C"], group_names=["A", "B", "C"])
    assert "EMPTY_GROUP" in exc.value.codes


def test_embedding_mismatch_rejected():
    with pytest.raises(SpaceValidationError) as exc:
        validate_space([[0, 2], [2, 0]], groups=["A", "A"], embedding=[[0.0], [1.0]])
    assert "EMBEDDING_MISMATCH" in exc.value.codes


def test_triangle_tolerance_is_relative():
    eps = 1e-12
    D = np.array([[0, 1, 2 + eps], [1, 0, 1], [2 + eps, 1, 0]]) * 1e6
    validate_space(D, groups=["A"] * 3)


def test_single_point_groups_at_same_location():
    s = line_space([0.0, 0.0], ["A", "B"])
    assert induce_group_space(s).dist[0, 1] == 0.0


def test_group_space_forced_coupling():
    s = line_space([0.0, 3.0], ["A", "B"])
    G = induce_group_space(s)
    assert G.dist[0, 1] == pytest.approx(3.0, abs=1e-12)
    assert [float(m) for m in G.measure] == [0.5, 0.5]


def test_group_space_two_couplings():
    s = line_space([0.0, 2.0, 1.0, 3.0], ["A", "A", "B", "B"])
    assert induce_group_space(s).dist[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_single_group_space():
    G = induce_group_space(line_space([0.0, 1.0, 4.0]))
    assert G.dist.shape == (1, 1) and G.dist[0, 0] == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 9), k=st.integers(1, 3), uniform=st.booleans())
def test_group_space_bounded_by_diameter(seed, n, k, uniform):
    s = random_space(np.random.default_rng(seed), n, k=k, uniform=uniform)
    G = induce_group_space(s)
    assert np.all(G.dist <= s.diameter + 1e-9)
    assert np.allclose(G.dist, G.dist.T) and np.all(np.diag(G.dist) == 0)
    assert sum(G.rational_measure) == 1


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 8), uniform=st.booleans())
def test_serialisation_round_trip(seed, n, uniform):
    s = random_space(np.random.default_rng(seed), n, uniform=uniform)
    back = space_from_dict(space_to_dict(s))
    assert back.ids == s.ids and np.array_equal(back.groups, s.groups)
    assert np.array_equal(back.dist, s.dist) and np.array_equal(back.measure, s.measure)
    as_matrix = validate_space(s.dist, s.measure, s.groups, s.ids)
    back = space_from_dict(space_to_dict(as_matrix))
    assert np.array_equal(back.dist, s.dist)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 8), radius=st.floats(0.01, 2.0))
def test_perturb_embedding_moves_distances_by_at_most_two_radius(seed, n, radius):
    s = random_space(np.random.default_rng(seed), n)
    p = perturb(s, radius, seed=seed)
    assert np.all(np.abs(p.dist - s.dist) <= 2 * radius + 1e-9)
    assert np.array_equal(perturb(s, radius, seed=seed).dist, p.dist)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_perturb_zero_radius_is_identity(seed):
    s = random_space(np.random.default_rng(seed), 5)
    assert perturb(s, 0.0, seed=seed) is s


def test_perturb_two_point_interval():
    s = line_space([0.0, 1.0])
    for seed in range(50):
        d = perturb(s, 0.1, seed=seed).dist[0, 1]
        assert 0.8 <= d <= 1.2


def test_perturb_matrix_mode_stays_metric():
    D = np.array([[0, 1, 2, 3], [1, 0, 1, 2], [2, 1, 0, 1], [3, 2, 1, 0]], dtype=float)
    s = validate_space(D, groups=["A", "A", "B", "B"])
    for seed in range(20):
        p = perturb(s, 0.3, seed=seed)
        assert p.embedding is None
        assert np.all(np.abs(p.dist - D) <= 0.3 * D / 3 + 1e-12)


def test_perturb_negative_radius():
    with pytest.raises(FairspaceError) as exc:
        perturb(line_space([0.0, 1.0]), -0.1)
    assert exc.value.code == "NEGATIVE_RADIUS"


def test_shortest_path_closure_repairs_triangle():
    D = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
    assert shortest_path_closure(D)[0, 2] == 2.0


def test_subspace_renormalises_exactly():
    s = line_space([0, 1, 2, 3], ["A", "A", "B", "B"], measure=[0.1, 0.2, 0.3, 0.4])
    sub = s.group_subspace(2)
    assert sub.ids == (s.ids[2], s.ids[3])
    assert [float(f) for f in sub.rational_measure] == pytest.approx([3 / 7, 4 / 7])


def test_space_map_flags_and_errors():
    X = line_space([0.0, 1.0, 2.0], ids=["a", "b", "c"])
    Y = line_space([0.0, 1.0], ids=["u", "v"])
    f = SpaceMap.from_assignment(X, Y, {"a": "u", "b": "v", "c": "v"})
    assert f.rich and not f.injective
    assert f.assignment == {"a": "u", "b": "v", "c": "v"}
    with pytest.raises(FairspaceError) as exc:
        SpaceMap.from_assignment(X, Y, {"a": "u", "b": "v"})
    assert exc.value.code == "NOT_TOTAL"
    with pytest.raises(FairspaceError):
        SpaceMap.from_assignment(X, Y, {"a": "u", "b": "v", "c": "w"})


def test_composition_and_pushforward():
    X = line_space([0.0, 1.0, 2.0], ["A", "B", "B"], ids=["a", "b", "c"])
    Y = line_space([0.0, 5.0], ids=["u", "v"])
    f = SpaceMap.from_assignment(X, Y, {"a": "u", "b": "v", "c": "v"})
    img = pushforward(f, X, Y)
    assert img.ids == X.ids and np.array_equal(img.groups, X.groups)
    assert img.dist.tolist() == [[0, 5, 5], [5, 0, 0], [5, 0, 0]]
    g = SpaceMap.identity(X)
    assert g.then(f).assignment == f.assignment


def test_from_embedding_sorted_group_labels():
    s = from_embedding([[0.0], [1.0], [2.0]], ["z", "a", "z"])
    assert s.group_names == ("a", "z")
    assert s.groups.tolist() == [2, 1, 2]
