import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccbf.field import (BoxClearance, CylinderClearance, DistanceField, LinearBound,
                        LinkDiskClearance, OffManifold, SphereClearance, link_disk_clearance,
                        normal_from_gradient, planar_chain, softmin, softmin_weights)
from oracles import central_difference, naive_softmin


def test_softmin_of_equal_values_is_exact():
    for m in (1, 2, 7):
        assert softmin([2.5] * m, 0.3) == 2.5


def test_softmin_huge_gap():
    assert abs(softmin([0.0, 1e9], 0.1) - 0.1 * math.log(2)) <= 1e-12


def test_softmin_small_example():
    expected = 3.0 - math.log((1.0 + math.exp(-2.0)) / 2.0)
    assert softmin([3.0, 5.0], 1.0) == pytest.approx(expected, abs=1e-14)
    assert expected == pytest.approx(3.5662, abs=1e-4)


def test_softmin_weights_examples():
    np.testing.assert_array_equal(softmin_weights([4.0], 0.2), [1.0])
    np.testing.assert_array_equal(softmin_weights([0.0, 0.0], 0.7), [0.5, 0.5])
    np.testing.assert_array_equal(softmin_weights([0.0, 1e9], 0.1), [1.0, 0.0])


@pytest.mark.parametrize("fn", [softmin, softmin_weights])
def test_softmin_errors(fn):
    with pytest.raises(ValueError):
        fn([], 0.1)
    with pytest.raises(ValueError):
        fn([1.0], 0.0)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(st.lists(finite, min_size=1, max_size=30), st.floats(1e-3, 10.0))
def test_softmin_bounds(values, h):
    g = np.array(values)
    s = softmin(g, h)
    tol = 1e-12 * (1.0 + abs(g.min()))
    assert s >= g.min() - tol
    assert s - g.min() <= h * math.log(g.size) + tol


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=1, max_size=20), st.floats(0.5, 5.0))
def test_softmin_matches_naive_where_representable(values, h):
    assert softmin(values, h) == pytest.approx(naive_softmin(values, h), abs=1e-12)


def test_single_linear_bound():
    f = DistanceField([LinearBound(0, 2.0, upper=True, scale=0.02)], h=0.01, delta=1e-9)
    D, g = f.evaluate([1.0, 5.0, -3.0])
    assert D == pytest.approx(0.02, abs=1e-8)
    np.testing.assert_array_equal(g, [-0.02, 0.0, 0.0])


def test_degree_scaled_bound():
    p = LinearBound(1, 0.5, upper=False, scale=0.02, degrees=True)
    v, g = p.value_grad(np.array([0.0, 0.6]))
    assert v == pytest.approx(0.02 * math.degrees(0.1))
    assert g[1] == pytest.approx(0.02 * 180 / math.pi)


def test_sphere_distance_and_normal():
    f = DistanceField([SphereClearance((1.0, 1.0), 0.5, (0, 1))], h=0.1, delta=0.05)
    q = np.array([4.0, 5.0])
    D, g = f.evaluate(q)
    assert D == pytest.approx(5.0 - 0.5 - 0.05)
    np.testing.assert_allclose(g, [0.6, 0.8])
    np.testing.assert_allclose(f.normal(q), [0.6, 0.8])


def test_two_identical_primitives_match_one():
    p = SphereClearance((0.0, 0.0), 1.0, (0, 1))
    one = DistanceField([p], h=0.1, delta=0.2)
    two = DistanceField([p, p], h=0.1, delta=0.2)
    q = np.array([2.0, -1.0])
    assert two.value(q) == one.value(q)
    np.testing.assert_allclose(two.evaluate(q)[1], one.evaluate(q)[1], atol=1e-15)


def test_normal_examples():
    np.testing.assert_allclose(normal_from_gradient([3.0, 4.0]), [0.6, 0.8])
    with pytest.raises(OffManifold):
        normal_from_gradient([0.0, 0.0])


def test_zero_gradient_raises_off_manifold():
    # centre of a sphere: every direction is equally far
    f = DistanceField([SphereClearance((0.0, 0.0), 0.1, (0, 1))], h=0.1, delta=0.05)
    with pytest.raises(OffManifold):
        f.normal([0.0, 0.0])


def test_non_finite_configuration_rejected():
    f = DistanceField([SphereClearance((0.0, 0.0), 0.1, (0, 1))], h=0.1, delta=0.05)
    with pytest.raises(ValueError):
        f.evaluate([np.nan, 0.0])


def test_margin_rule():
    prims = [SphereClearance((float(k), 0.0), 0.1, (0, 1)) for k in range(4)]
    assert DistanceField(prims, h=0.1, delta=0.1 * math.log(4)).margin_ok()
    assert not DistanceField(prims, h=0.1, delta=0.1).margin_ok()


def test_positive_d_certifies_every_clearance():
    rng = np.random.default_rng(0)
    prims = [SphereClearance(tuple(rng.uniform(-2, 2, 2)), 0.3, (0, 1)) for _ in range(6)]
    f = DistanceField(prims, h=0.05, delta=0.05 * math.log(6))
    for q in rng.uniform(-3, 3, size=(2000, 2)):
        if f.value(q) > 0:
            assert f.clearances(q)[0].min() > 0


def test_box_clearance():
    b = BoxClearance((0.0, 0.0), (1.0, 0.5), (0, 1))
    assert b.value_grad(np.array([3.0, 0.0]))[0] == pytest.approx(2.0)
    assert b.value_grad(np.array([4.0, 4.5]))[0] == pytest.approx(5.0)
    v, g = b.value_grad(np.array([0.0, 0.3]))
    assert v == pytest.approx(-0.2)
    np.testing.assert_array_equal(g, [0.0, 1.0])
    rounded = BoxClearance((0.0, 0.0), (1.0, 0.5), (0, 1), rounding=0.2)
    assert rounded.value_grad(np.array([3.0, 0.0]))[0] == pytest.approx(2.0)
    # diagonally off the corner the distance is measured from the rounding arc centre
    q = np.array([1.0, 0.5]) + 0.5 * np.array([1.0, 1.0]) / math.sqrt(2)
    assert rounded.value_grad(q)[0] == pytest.approx(np.linalg.norm(q - [0.8, 0.3]) - 0.2)


def test_cylinder_ignores_height_and_follows_partner():
    c = CylinderClearance(0.5, (0, 1), center=(1.0, 0.0))
    q = np.array([4.0, 4.0, 10.0])
    v, g = c.value_grad(q)
    assert v == pytest.approx(4.5)
    assert g[2] == 0.0
    pair = CylinderClearance(0.5, (0, 1), partner=(3, 4))
    q = np.array([0.0, 0.0, 1.0, 3.0, 4.0, 1.0])
    v, g = pair.value_grad(q)
    assert v == pytest.approx(4.5)
    np.testing.assert_allclose(g[[0, 1]], -g[[3, 4]])


def _mixed_field():
    prims = [
        SphereClearance((0.3, -0.2, 1.0), 0.4, (0, 1, 2)),
        SphereClearance((1.0, 1.0, 1.0), 0.2, (3, 4, 5)),
        BoxClearance((0.0, 0.0, 1.0), (0.2, 0.5, 1.0), (0, 1, 2)),
        BoxClearance((0.5, 0.5, 0.5), (0.3, 0.3, 0.3), (3, 4, 5), rounding=0.1),
        CylinderClearance(0.2, (0, 1), center=(-1.0, 0.5)),
        CylinderClearance(0.5, (0, 1), partner=(3, 4)),
        LinearBound(2, 0.0, upper=False),
        LinearBound(5, 3.0, upper=True, scale=2.0),
    ]
    return DistanceField(prims, h=0.05, delta=0.05 * math.log(len(prims)))


def test_batched_clearances_match_scalar_reference():
    f = _mixed_field()
    rng = np.random.default_rng(4)
    for q in rng.uniform(-2, 3, size=(200, 6)):
        vals, grads = f.clearances(q)
        for k, p in enumerate(f.primitives):
            v, g = p.value_grad(q)
            assert vals[k] == pytest.approx(v, abs=1e-14)
            np.testing.assert_allclose(grads[k], g, atol=1e-14)


def test_field_gradient_matches_finite_differences():
    f = _mixed_field()
    rng = np.random.default_rng(5)
    checked = 0
    for q in rng.uniform(-2, 3, size=(400, 6)):
        vals = f.clearances(q)[0]
        # stay away from kinks (box faces, sphere centres)
        if np.min(np.abs(vals)) < 1e-3:
            continue
        g = f.evaluate(q)[1]
        fd = central_difference(f.value, q)
        assert np.linalg.norm(fd - g) <= 1e-4 * max(np.linalg.norm(g), 1e-12)
        checked += 1
    assert checked > 100


def test_planar_chain():
    origins, theta = planar_chain([0.0, math.pi / 2], 1.0)
    np.testing.assert_allclose(origins, [[0, 0], [1, 0], [1, 1]], atol=1e-15)
    np.testing.assert_allclose(theta, [0.0, math.pi / 2])


def test_link_disk_decreases_toward_disk():
    # arm along +x, disk above link 1; raising joint 1 closes the gap
    disk = ((0.35, 1.0), 0.2)
    F0, g = link_disk_clearance([0.0, 0.0, 0.0, 0.0], 1, disk=disk)
    F1, _ = link_disk_clearance([0.1, 0.0, 0.0, 0.0], 1, disk=disk)
    expected = (1.0 - 0.075 - 0.2) ** 2
    assert F0 == pytest.approx(expected)
    assert F1 < F0
    assert g[0] < 0
    np.testing.assert_array_equal(g[1:], 0.0)


def test_link_disk_touching_is_zero():
    F, g = link_disk_clearance([0.0] * 4, 2, disk=((1.0, 0.075), 0.0))
    assert F == 0.0
    np.testing.assert_array_equal(g, 0.0)


def test_link_disk_gradient_finite_differences():
    rng = np.random.default_rng(6)
    checked = 0
    while checked < 100:
        q = rng.uniform(-math.pi, math.pi, 4)
        k = int(rng.integers(1, 5))
        p = LinkDiskClearance(k, (1.5, 1.3), 0.5)
        F, g = p.value_grad(q)
        if F < 1e-4:
            continue
        fd = central_difference(lambda x: p.value_grad(x)[0], q)
        assert np.linalg.norm(fd - g) <= 1e-4 * np.linalg.norm(g)
        checked += 1


def test_link_index_range():
    with pytest.raises(ValueError):
        LinkDiskClearance(5, (1.5, 1.3), 0.5).value_grad(np.zeros(4))


def test_dict_round_trip():
    f = _mixed_field()
    back = DistanceField.from_dict(f.to_dict())
    assert back.primitives == f.primitives
    q = np.linspace(-1, 2, 6)
    assert back.value(q) == f.value(q)


def test_field_rejects_bad_parameters():
    with pytest.raises(ValueError):
        DistanceField([], h=0.1, delta=0.1)
    with pytest.raises(ValueError):
        DistanceField([LinearBound(0, 0.0, False)], h=0.0, delta=0.1)
