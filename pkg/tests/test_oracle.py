import itertools
import math

import numpy as np
import pytest

from loopcast import homotopy as H
from loopcast import oracle
from loopcast.errors import DegenerateGeometry, IntegrityError, InvalidInput
from loopcast.geometry import PunctureSet
from loopcast.harness import PRESETS
from loopcast.loops import GnParams, circle, discretize

DELTA = 1e-6


def offset_proxy(Z, seq, sides, turns):
    """Loop passing each puncture of ``seq`` at distance DELTA, keeping it on the given side."""
    pts = []
    m = len(seq)
    for i in range(m):
        z = np.asarray(Z[seq[i]], dtype=float)
        if m == 1:
            d = np.array([1.0, 0.0])
        else:
            d = z - np.asarray(Z[seq[i - 1]], dtype=float)
            d /= np.linalg.norm(d)
        off = sides[i] * np.array([d[1], -d[0]])
        phi0 = math.atan2(off[1], off[0])
        steps = max(2, int(abs(turns[i]) / 0.3) + 2)
        end = steps if m > 1 else steps - 1
        for t in np.linspace(0.0, turns[i], steps)[:end]:
            pts.append(z + DELTA * np.array([math.cos(phi0 + t), math.sin(phi0 + t)]))
    return np.array(pts)


def geometric_turn(Z, seq, i, side):
    a, z, b = (np.asarray(Z[seq[j % len(seq)]], dtype=float) for j in (i - 1, i, i + 1))
    u, v = z - a, b - z
    c, d = u[0] * v[1] - u[1] * v[0], u @ v
    if c == 0 and d < 0:
        return side * math.pi
    return math.atan2(c, d)


def brute_shortest(Z, T, target, max_len=4):
    """Minimum perimeter over cyclic puncture sequences and side choices in the target class."""
    best = math.inf
    K = len(Z)
    for k in range(-2, 3):
        if k:
            for j in range(K):
                try:
                    if H.cyclic_word(offset_proxy(Z, [j], [int(np.sign(k))], [2 * math.pi * k]), T) == target:
                        best = min(best, 0.0)
                except DegenerateGeometry:
                    pass
    for L in range(2, max_len + 1):
        for seq in itertools.product(range(K), repeat=L):
            if any(seq[i] == seq[(i + 1) % L] for i in range(L)):
                continue
            per = sum(math.dist(Z[seq[i]], Z[seq[(i + 1) % L]]) for i in range(L))
            if per >= best:
                continue
            for sides in itertools.product((-1, 1), repeat=L):
                turns = [geometric_turn(Z, seq, i, sides[i]) for i in range(L)]
                try:
                    w = H.cyclic_word(offset_proxy(Z, seq, sides, turns), T)
                except DegenerateGeometry:
                    continue
                if w == target:
                    best = per
                    break
    return best


def test_square():
    sl = oracle.shortest_loop(PRESETS["square"].params())
    assert sl.certified
    assert sl.length == pytest.approx(10.8, abs=1e-9)
    assert sorted(map(tuple, sl.polygon.tolist())) == sorted(PRESETS["square"].punctures)


def test_bowtie():
    sl = oracle.shortest_loop(PRESETS["bowtie"].params())
    assert sl.certified
    assert sl.length == pytest.approx(2 * (math.sqrt(8.2) + 1.2), abs=1e-6)
    pins = list(sl.pins)
    assert any(pins[k:] + pins[:k] == [0, 2, 1, 3] for k in range(4))


@pytest.mark.parametrize("turns", [1, 2, -1])
def test_single_puncture_collapses(turns):
    ref = np.vstack([circle((0, 0), 1.0, 64)] * abs(turns))
    if turns < 0:
        ref = ref[::-1]
    p = GnParams.build([(0.0, 0.0)], ref, 300, 20.0)
    sl = oracle.shortest_loop(p)
    assert sl.certified and sl.length == 0.0
    assert sl.turns[0] == pytest.approx(2 * math.pi * turns)


def test_trivial_class_rejected():
    with pytest.raises(InvalidInput, match="trivial"):
        GnParams.build(PRESETS["square"].punctures, circle((9, 9), 0.5), 59, 20)


@pytest.mark.parametrize("name", ["square", "bowtie"])
def test_multistart_agreement(name):
    p = PRESETS[name].params()
    ref = p.cls.reference
    results = []
    for k, d in enumerate(np.linspace(100, 1000, 10).astype(int)):
        V = np.roll(discretize(ref, d - 1).vertices, 7 * k, axis=0)
        results.append(oracle.shorten_from(V, p))
    first = results[0]
    zset = set(map(tuple, p.punctures.points.tolist()))
    for r in results:
        assert r.certified
        assert abs(r.length - first.length) <= 1e-9
        assert oracle.same_polygon(r.polygon, first.polygon)
        assert set(map(tuple, r.polygon.tolist())) <= zset


def test_shortening_is_monotone():
    p = PRESETS["bowtie"].params()
    sh = oracle._Shortener(discretize(p.cls.reference, 499).vertices, p.punctures.points)
    prev = sh.length()
    for _ in range(50):
        changed = sh.sweep()
        cur = sh.length()
        if changed:
            assert cur < prev
        else:
            assert cur == prev
            break
        prev = cur


def test_budget_exhaustion_not_certified():
    p = PRESETS["square"].params()
    sl = oracle.shortest_loop(p, max_passes=1)
    assert not sl.certified and sl.note


def random_case(seed):
    rng = np.random.default_rng(seed)
    while True:
        Z = rng.uniform(-2, 2, (3, 2))
        if min(math.dist(Z[i], Z[j]) for i in range(3) for j in range(i)) > 0.8:
            break
    c = rng.uniform(-1, 1, 2)
    t = 2 * np.pi * np.arange(300) / 300
    r = rng.uniform(0.8, 2.5) * (1 + 0.35 * np.sin(2 * t + rng.uniform(0, 6)) + 0.2 * np.cos(3 * t))
    ref = np.column_stack([c[0] + r * np.cos(t), c[1] + r * np.sin(t)])
    if rng.random() < 0.5:
        ref = ref[::-1]
    return Z, ref


@pytest.mark.parametrize("seed", range(12))
def test_matches_brute_force(seed):
    Z, ref = random_case(seed)
    T = H.build_crossing_structure(PunctureSet(Z))
    if not H.cyclic_word(ref, T):
        pytest.skip("reference is contractible for this draw")
    L = float(np.hypot(*np.diff(np.vstack([ref, ref[:1]]), axis=0).T).sum())
    R = L + 1
    p = GnParams.build(Z, ref, int(R / PunctureSet(Z).reach) + 2, R)
    sl = oracle.shortest_loop(p)
    assert sl.certified
    assert sl.length == pytest.approx(brute_shortest(Z, p.structure, p.cls.target), abs=1e-9)


def test_brute_force_reproduces_presets():
    p = PRESETS["bowtie"].params()
    Z = p.punctures.points.tolist()
    assert brute_shortest(Z, p.structure, p.cls.target) == pytest.approx(2 * (math.sqrt(8.2) + 1.2))


def test_certify_floor():
    sl = oracle.shortest_loop(PRESETS["square"].params())
    rep = oracle.certify_floor([11.0, 12.0, 15.0], sl)
    assert rep["min_excess"] == pytest.approx(0.2) and rep["median_excess"] == pytest.approx(1.2)
    with pytest.raises(IntegrityError):
        oracle.certify_floor([11.0, 10.0], sl)
    assert oracle.certify_floor([], sl) == {"count": 0}
