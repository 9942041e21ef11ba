import json
import math

import numpy as np
import pytest

from loopcast import homotopy as H
from loopcast import mcmc
from loopcast.errors import IntegrityError, InvalidInput
from loopcast.loops import GnParams, PLLoop, check_state, circle, discretize


def cfg_for(p, **kw):
    kw.setdefault("iterations", 10)
    kw.setdefault("thin", 1)
    return mcmc.SamplerConfig(p, **kw)


def test_config_validation(square_params):
    p = square_params
    with pytest.raises(InvalidInput):
        cfg_for(p, eps=p.edge_bound * 1.01)
    with pytest.raises(InvalidInput):
        cfg_for(p, thin=0)
    with pytest.raises(InvalidInput):
        cfg_for(p, sweep_mode="nope")
    with pytest.raises(InvalidInput):
        cfg_for(p, guard="nope")
    assert cfg_for(p).eps == p.edge_bound


def test_save_count_arithmetic(square_params):
    cfg = cfg_for(square_params, burnin=5, iterations=5, thin=5)
    tr = mcmc.run(cfg, discretize(square_params.cls.reference, 59))
    assert cfg.n_saves == 1 and len(tr) == 1
    assert tr.steps == [10 * 60]


def test_integration_run(square_params):
    p = square_params
    tr = mcmc.run(cfg_for(p, iterations=1000, thin=100, seed=3), discretize(p.cls.reference, 59))
    assert len(tr) == 10
    for lp in tr.loops:
        assert check_state(lp, p).ok
        assert lp.length() >= 10.8


def test_same_seed_same_trace(square_params):
    p = square_params
    init = discretize(p.cls.reference, 59)
    a = mcmc.run(cfg_for(p, iterations=200, thin=50, seed=11), init)
    b = mcmc.run(cfg_for(p, iterations=200, thin=50, seed=11), init)
    c = mcmc.run(cfg_for(p, iterations=200, thin=50, seed=12), init)
    assert all(np.array_equal(x.vertices, y.vertices) for x, y in zip(a.loops, b.loops))
    assert not np.array_equal(a.loops[-1].vertices, c.loops[-1].vertices)


def test_sweep_visits_every_vertex(square_params):
    p = square_params
    st = mcmc.ChainState.start(discretize(p.cls.reference, 59), 0)
    before = st.loop.vertices.copy()
    st = mcmc.sweep(st, cfg_for(p))
    assert st.counts.sum() == 60 and st.step_count == 60
    moved = (st.loop.vertices != before).any(axis=1).sum()
    assert moved == st.counts[mcmc.MOVED]


def test_sweeps_reproducible(square_params):
    p = square_params
    init = discretize(p.cls.reference, 59)
    s1 = mcmc.sweep(mcmc.sweep(mcmc.ChainState.start(init, 4), cfg_for(p)), cfg_for(p))
    s2 = mcmc.sweep(mcmc.sweep(mcmc.ChainState.start(init, 4), cfg_for(p)), cfg_for(p))
    assert np.array_equal(s1.loop.vertices, s2.loop.vertices)


def test_single_steps_keep_class_near_puncture():
    # a small loop around one puncture: the puncture is inside most lenses
    p = GnParams.build([(0.0, 0.0)], circle((0, 0), 0.3, 64), 5, 3.0)
    cfg = cfg_for(p)
    st = mcmc.ChainState.start(discretize(p.cls.reference, 5), 2)
    rng = np.random.default_rng(0)
    target = p.cls.target
    for _ in range(10_000):
        st = mcmc.step(st, int(rng.integers(0, 6)), cfg)
        assert H.cyclic_word(st.loop, p.structure) == target
        assert (st.loop.edge_lengths() < p.edge_bound).all()
    assert st.counts[mcmc.MOVED] > 9000


def test_step_rejects_bad_index(square_params):
    st = mcmc.ChainState.start(discretize(square_params.cls.reference, 59), 0)
    with pytest.raises(InvalidInput):
        mcmc.step(st, 60, cfg_for(square_params))


def test_uniform_index_miss_probability():
    p = GnParams.build([(0.0, 0.0)], circle((0, 0), 1.0), 9, 20.0)
    V0 = np.array(discretize(p.cls.reference, 9).vertices)
    P = p.punctures.points
    rng = np.random.default_rng(1)
    counts = np.zeros(3, dtype=np.int64)
    trials, misses = 10_000, 0
    for _ in range(trials):
        V = V0.copy()
        mcmc._advance(V, P, p.edge_bound, 10, mcmc.UNIFORM_INDEX, True, rng, counts)
        misses += (V[0] == V0[0]).all()
    q = (9 / 10) ** 10
    sd = math.sqrt(trials * q * (1 - q))
    assert abs(misses - trials * q) < 3 * sd


def test_lens_guard_leaks_class(square_params):
    p = square_params
    cfg = cfg_for(p, iterations=300, thin=300, seed=1, guard="lens", check_word_every=1)
    with pytest.raises(IntegrityError, match="class mismatch"):
        mcmc.run(cfg, discretize(p.cls.reference, 59))


def test_triangle_guard_holds_with_per_sweep_checks(square_params):
    p = square_params
    cfg = cfg_for(p, iterations=300, thin=300, seed=1, check_word_every=1)
    tr = mcmc.run(cfg, discretize(p.cls.reference, 59))
    assert check_state(tr.loops[-1], p).ok


def test_invalid_initial_state(square_params):
    with pytest.raises(InvalidInput, match="not in G_n"):
        mcmc.run(cfg_for(square_params), PLLoop(circle((0, 0), 2.5, 60)) .translated((0, 9)))


def test_trace_roundtrip(tmp_path, square_params):
    p = square_params
    tr = mcmc.run(cfg_for(p, iterations=30, thin=10), discretize(p.cls.reference, 59))
    mcmc.write_trace(tr, tmp_path / "t.jsonl")
    back = mcmc.read_trace(tmp_path / "t.jsonl")
    assert back.n == 59 and back.steps == tr.steps and back.lengths == tr.lengths
    assert all(np.array_equal(a.vertices, b.vertices) for a, b in zip(tr.loops, back.loops))
    rec = json.loads((tmp_path / "t.jsonl").read_text().splitlines()[0])
    assert set(rec) == {"step", "length", "rate", "vertices"}


def test_trace_mixed_n(tmp_path):
    lines = [json.dumps({"step": 1, "length": 1, "rate": 0, "vertices": [[0, 0], [1, 0], [0, 1]]}),
             json.dumps({"step": 2, "length": 1, "rate": 0, "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]]})]
    (tmp_path / "t.jsonl").write_text("\n".join(lines) + "\n")
    with pytest.raises(InvalidInput, match=":2: mixed"):
        mcmc.read_trace(tmp_path / "t.jsonl")


def test_trace_bad_record(tmp_path):
    (tmp_path / "t.jsonl").write_text('{"step": 1}\n')
    with pytest.raises(InvalidInput, match=":1: bad trace record"):
        mcmc.read_trace(tmp_path / "t.jsonl")
