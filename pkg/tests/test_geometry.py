import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loopcast.errors import DegenerateGeometry, InvalidInput, SamplingFailure
from loopcast.geometry import (
    LensRegion, PunctureSet, Side, cone_status, lens_contains, move_region, reach, sample_region, side_of_line,
)
from loopcast.harness import random_config


def brute_reach(pts):
    return min(math.dist(p, q) for i, p in enumerate(pts) for q in pts[:i]) / 2


@pytest.mark.parametrize("pts, expect", [
    ([(1.35, 1.35), (-1.35, 1.35), (-1.35, -1.35), (1.35, -1.35)], 1.35),
    ([(0, 0), (2, 0)], 1.0),
    ([(1.3, 0.6), (-1.3, 0.6), (1.3, -0.6), (-1.3, -0.6)], 0.6),
])
def test_reach_examples(pts, expect):
    assert reach(pts) == pytest.approx(expect, abs=1e-15)
    assert PunctureSet(pts).reach == pytest.approx(brute_reach(pts), abs=1e-15)


def test_reach_single_and_duplicates():
    assert math.isinf(reach([(0, 0)]))
    with pytest.raises(InvalidInput):
        PunctureSet([(0, 0), (0, 0)])


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=2, max_size=8, unique=True))
def test_reach_matches_brute_force(pts):
    if brute_reach(pts) == 0:
        return
    assert reach(pts) == pytest.approx(brute_reach(pts), rel=1e-12)


def test_side_of_line():
    assert side_of_line((0, 0), (1, 0), (0, 1)) == Side.LEFT
    assert side_of_line((0, 0), (1, 0), (0, -1)) == Side.RIGHT
    assert side_of_line((0, 0), (1, 0), (5, 0)) == Side.ON


def test_lens_examples():
    lens = LensRegion((0, 0), (1, 0), 1.0)
    assert lens_contains(lens, (0.5, 0))
    assert not lens_contains(lens, (0, 0))
    empty = LensRegion((0, 0), (3, 0), 1.0)
    assert empty.empty
    assert not lens_contains(empty, (1.5, 0))


def test_region_without_punctures_is_lens():
    E = move_region((0, 0), (0.5, 0.2), (1, 0), 1.0, PunctureSet([(10, 10)]))
    assert E.cuts == ()
    g = np.random.default_rng(0).uniform(-1, 2, (2000, 2))
    assert all(E.contains(p) == E.lens.contains(p) for p in g)


def test_region_cut_matches_grid_oracle():
    a, b, z = (-0.5, 0.0), (0.5, 0.0), (0.0, 0.1)
    E = move_region(a, (0, 0.5), b, 1.0, PunctureSet([z]))
    assert E.cut is not None and E.cut.keep_inside
    assert not E.contains((0, -0.5))
    # brute-force membership: inside the lens, z strictly inside triangle (a, p, b)
    xs = np.linspace(-1, 1, 200)
    ys = np.linspace(-1, 1, 200)
    mism = 0
    for x in xs:
        for y in ys:
            in_lens = math.dist((x, y), a) < 1 and math.dist((x, y), b) < 1
            c1 = (x - a[0]) * (z[1] - a[1]) - (y - a[1]) * (z[0] - a[0])
            c2 = (b[0] - x) * (z[1] - y) - (b[1] - y) * (z[0] - x)
            c3 = (a[0] - b[0]) * (z[1] - b[1]) - (a[1] - b[1]) * (z[0] - b[0])
            in_tri = (c1 > 0 and c2 > 0 and c3 > 0) or (c1 < 0 and c2 < 0 and c3 < 0)
            mism += E.contains((x, y)) != (in_lens and in_tri)
    assert mism == 0


def test_coincident_neighbours_give_disk(rng):
    E = move_region((0, 0), (0.3, 0), (0, 0), 1.0, PunctureSet([(5, 5)]))
    pts = np.array([sample_region(E, rng) for _ in range(100_000)])
    assert np.hypot(*pts.T).max() < 1
    # uniform disk: per-coordinate sd 1/2, so 3 sigma of the mean is 3*0.5/sqrt(1e5)
    assert np.abs(pts.mean(axis=0)).max() < 0.02


def test_half_lens_draws_are_members(rng):
    E = move_region((-0.5, 0), (0, -0.5), (0.5, 0), 1.0, PunctureSet([(0, 0.1)]))
    assert not E.cut.keep_inside
    for _ in range(10_000):
        assert E.contains(sample_region(E, rng))


def test_empty_region_raises(rng):
    E = move_region((0, 0), (1, 0), (3, 0), 1.0, PunctureSet([(9, 9)]))
    with pytest.raises(SamplingFailure):
        sample_region(E, rng)


def test_degenerate_collinear_neighbours():
    with pytest.raises(DegenerateGeometry):
        move_region((-0.5, 0), (0, 0.5), (0.5, 0), 1.0, PunctureSet([(0, 0)]))


def test_two_punctures_in_lens_rejected():
    with pytest.raises(AssertionError):
        move_region((-0.5, 0), (0, 0.5), (0.5, 0), 1.0, PunctureSet([(0, 0.1), (0, -0.1)]))


def test_lens_guard_misses_far_puncture():
    # z lies outside the lens but inside triangle(v_prev, p, v_next) for p high in the lens
    a, b, z = (-0.9, 0.0), (0.9, 0.0), (-0.8, 0.01)
    assert not LensRegion(a, b, 1.0).contains(z)
    lit = move_region(a, (0, -0.2), b, 1.0, PunctureSet([z]), guard="lens")
    safe = move_region(a, (0, -0.2), b, 1.0, PunctureSet([z]))
    assert lit.cuts == ()
    assert lit.contains((0, 0.4)) and not safe.contains((0, 0.4))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_region_symmetry(seed):
    rng = np.random.default_rng(seed)
    a, c, b, zs = random_config(rng)
    E = move_region(a, c, b, 1.0, zs)
    try:
        cbar = sample_region(E, rng)
        E2 = move_region(a, cbar, b, 1.0, zs)
    except (DegenerateGeometry, SamplingFailure):
        return
    assert E2.contains(c)
    probes = rng.uniform(-3, 3, (200, 2))
    assert all(E.contains(q) == E2.contains(q) for q in probes)


def test_cone_status_boundary():
    # p on the line through v_prev and z
    assert cone_status(-1.0, 0.0, 1.0, 0.0, 0.0, 0.5, 1.0, 1.0) == 0
