import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loopcast.errors import InvalidInput
from loopcast.loops import (
    GnParams, PLLoop, check_state, circle, densify, discretize, dump_loop, load_loop, loop_distance, validate_state,
)

unit_square = [(0, 0), (1, 0), (1, 1), (0, 1)]


def test_lengths():
    assert PLLoop(unit_square).length() == 4
    assert PLLoop(np.zeros((5, 2))).length() == 0
    sq = PLLoop([(1.35, 1.35), (-1.35, 1.35), (-1.35, -1.35), (1.35, -1.35)])
    assert sq.length() == pytest.approx(10.8, abs=1e-12)


def test_loop_is_immutable():
    lp = PLLoop(unit_square)
    with pytest.raises(ValueError):
        lp.vertices[0, 0] = 5


def test_discretize_square():
    lp = discretize(unit_square, 7)
    assert len(lp) == 8
    expect = [(0, 0), (0.5, 0), (1, 0), (1, 0.5), (1, 1), (0.5, 1), (0, 1), (0, 0.5)]
    assert np.allclose(lp.vertices, expect)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 80))
def test_discretize_shortens(seed, n):
    V = np.random.default_rng(seed).uniform(-3, 3, (12, 2))
    assert discretize(V, n).length() <= PLLoop(V).length() + 1e-12


def test_discretize_square_reference(square_params):
    lp = discretize(square_params.cls.reference, 59)
    assert len(lp) == 60
    assert (lp.edge_lengths() < 20 / 60).all()


def test_validate_state(square_params):
    p = square_params
    lp = discretize(p.cls.reference, p.n)
    assert validate_state(lp, p)
    V = lp.vertices.copy()
    d = V[1] - V[0]
    V[1] = V[0] + d / np.hypot(*d) * p.edge_bound
    chk = check_state(PLLoop(V), p)
    assert not chk.ok and 0 in chk.long_edges
    small = discretize(circle((5, 5), 0.5), p.n)
    chk = check_state(small, p)
    assert not chk.class_ok and chk.note == "class mismatch"


def test_params_constraints():
    Z = [(1.35, 1.35), (-1.35, 1.35), (-1.35, -1.35), (1.35, -1.35)]
    with pytest.raises(InvalidInput, match="increase n"):
        GnParams.build(Z, circle((0, 0), 2.5), 10, 20)
    with pytest.raises(InvalidInput, match="below R"):
        GnParams.build(Z, circle((0, 0), 2.5), 59, 10)
    with pytest.raises(InvalidInput, match="trivial"):
        GnParams.build(Z, circle((5, 5), 0.5), 59, 20)


def test_load_dump_roundtrip(tmp_path):
    lp = PLLoop(circle((0, 0), 1, 10))
    dump_loop(lp, tmp_path / "l.json")
    assert np.array_equal(load_loop(tmp_path / "l.json").vertices, lp.vertices)


def test_load_reports_line(tmp_path):
    (tmp_path / "bad.json").write_text('[[0, 0],\n [1, 0],\n [1, ]]\n')
    with pytest.raises(InvalidInput, match=r"bad.json:3:"):
        load_loop(tmp_path / "bad.json")


def test_load_accepts_vertices_object(tmp_path):
    (tmp_path / "s.json").write_text('{"vertices": [[0, 0], [1, 0], [0, 1]], "length": 3.4}')
    assert load_loop(tmp_path / "s.json").vertices.shape == (3, 2)
    (tmp_path / "x.json").write_text('{"points": []}')
    with pytest.raises(InvalidInput, match="vertices"):
        load_loop(tmp_path / "x.json")
    (tmp_path / "y.json").write_text('[[0, "a"]]')
    with pytest.raises(InvalidInput):
        load_loop(tmp_path / "y.json")


def test_distance_to_shifted_self():
    c = circle((0, 0), 2, 30)
    assert loop_distance(c, np.roll(c, 7, axis=0)) == 0


def brute_dfd_closed(P, Q):
    # recursive coupling search for tiny closed curves
    from functools import lru_cache
    P2, best = list(P) + [P[0]], math.inf
    for k in range(len(Q)):
        Qk = list(np.roll(Q, -k, axis=0)) + [Q[k]]

        @lru_cache(None)
        def c(i, j):
            d = math.dist(P2[i], Qk[j])
            if i == 0 and j == 0:
                return d
            opts = []
            if i > 0:
                opts.append(c(i - 1, j))
            if j > 0:
                opts.append(c(i, j - 1))
            if i > 0 and j > 0:
                opts.append(c(i - 1, j - 1))
            return max(d, min(opts))

        best = min(best, c(len(P2) - 1, len(Qk) - 1))
    return best


def test_distance_translated_square():
    sq = np.array(unit_square, dtype=float)
    for d in (0.3, 1.7):
        got = loop_distance(sq, sq + [d, 0])
        assert got == pytest.approx(d)
        assert got == pytest.approx(brute_dfd_closed(sq, sq + [d, 0]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_distance_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    P, Q = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    assert loop_distance(P, Q) == pytest.approx(brute_dfd_closed(P, Q))


def test_distance_triangle_inequality():
    rng = np.random.default_rng(9)
    for _ in range(50):
        P, Q, S = (rng.normal(size=(8, 2)) for _ in range(3))
        assert loop_distance(P, S) <= loop_distance(P, Q) + loop_distance(Q, S) + 1e-9


def test_densify_keeps_image():
    sq = np.array(unit_square, dtype=float)
    D = densify(sq, 9)
    assert len(D) == 9
    assert PLLoop(D).length() == pytest.approx(4.0)
