"""Metropolis-within-Gibbs chain on G_n.

One step picks a vertex, draws its new position uniformly from the move
region spanned by its two neighbours, and always accepts: the region is the
same set for the old and the new position, so the uniform law on G_n is
stationary. A degenerate configuration or an exhausted rejection budget leaves
the state unchanged, which keeps the kernel reversible.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from . import loops as loops_mod
from .errors import IntegrityError, InvalidInput
from .geometry import BOUNDARY, REJECTION_BUDGET, cone_status, cross_sign, in_lens
from .loops import GnParams, PLLoop
from .ratefn import RadialRate, loop_rate

log = logging.getLogger(__name__)

MOVED = 0
DEGENERATE = 1
FAILED = 2

PERMUTATION = 0
UNIFORM_INDEX = 1

SWEEP_MODES = {"permutation": PERMUTATION, "uniform": UNIFORM_INDEX}
GUARDS = {"triangle": True, "lens": False}


@njit(cache=True)
def _step(V, k, P, eps, guard_all, rng, rel, stat):
    m = V.shape[0]
    ax, ay = V[(k - 1) % m, 0], V[(k - 1) % m, 1]
    bx, by = V[(k + 1) % m, 0], V[(k + 1) % m, 1]
    cx, cy = V[k, 0], V[k, 1]
    lim = 4.0 * eps * eps
    nrel = 0
    for j in range(P.shape[0]):
        zx, zy = P[j, 0], P[j, 1]
        if guard_all:
            near = (zx - ax) ** 2 + (zy - ay) ** 2 < lim and (zx - bx) ** 2 + (zy - by) ** 2 < lim
        else:
            near = in_lens(ax, ay, bx, by, eps, zx, zy)
        if not near:
            continue
        if cross_sign(ax, ay, zx, zy, bx, by) == 0:
            return DEGENERATE
        st = cone_status(ax, ay, bx, by, zx, zy, cx, cy)
        if st == BOUNDARY:
            return DEGENERATE
        rel[nrel] = j
        stat[nrel] = st
        nrel += 1
    dx, dy = bx - ax, by - ay
    d = math.hypot(dx, dy)
    if d > 0.0:
        ux, uy = dx / d, dy / d
    else:
        ux, uy = 1.0, 0.0
    hl = eps - 0.5 * d
    hw = math.sqrt(max(eps * eps - 0.25 * d * d, 0.0))
    mx, my = 0.5 * (ax + bx), 0.5 * (ay + by)
    for _ in range(REJECTION_BUDGET):
        u = (2.0 * rng.random() - 1.0) * hl
        w = (2.0 * rng.random() - 1.0) * hw
        px = mx + u * ux - w * uy
        py = my + u * uy + w * ux
        if not in_lens(ax, ay, bx, by, eps, px, py):
            continue
        ok = True
        for t in range(nrel):
            j = rel[t]
            if cone_status(ax, ay, bx, by, P[j, 0], P[j, 1], px, py) != stat[t]:
                ok = False
                break
        if ok:
            V[k, 0] = px
            V[k, 1] = py
            return MOVED
    return FAILED


@njit(cache=True)
def _advance(V, P, eps, count, mode, guard_all, rng, counts):
    """``count`` sweeps (permutation mode) or single steps (uniform mode)."""
    m = V.shape[0]
    rel = np.empty(P.shape[0], dtype=np.int64)
    stat = np.empty(P.shape[0], dtype=np.int64)
    perm = np.arange(m)
    for _ in range(count):
        if mode == PERMUTATION:
            for i in range(m - 1, 0, -1):
                j = rng.integers(0, i + 1)
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp
            for i in range(m):
                counts[_step(V, perm[i], P, eps, guard_all, rng, rel, stat)] += 1
        else:
            k = rng.integers(0, m)
            counts[_step(V, k, P, eps, guard_all, rng, rel, stat)] += 1


@njit(cache=True)
def _track_vertex(V, P, eps, steps, every, vertex, guard_all, rng, counts, out):
    """Uniform-index steps recording ``V[vertex]`` every ``every`` steps."""
    m = V.shape[0]
    rel = np.empty(P.shape[0], dtype=np.int64)
    stat = np.empty(P.shape[0], dtype=np.int64)
    j = 0
    for s in range(steps):
        k = rng.integers(0, m)
        counts[_step(V, k, P, eps, guard_all, rng, rel, stat)] += 1
        if (s + 1) % every == 0:
            out[j, 0] = V[vertex, 0]
            out[j, 1] = V[vertex, 1]
            j += 1


@dataclass
class SamplerConfig:
    params: GnParams
    iterations: int
    thin: int
    burnin: int = 0
    seed: int = 0
    eps: Optional[float] = None
    sweep_mode: str = "permutation"
    check_word_every: int = 0
    guard: str = "triangle"

    def __post_init__(self):
        bound = self.params.edge_bound
        if self.eps is None:
            self.eps = bound
        if not (0 < self.eps <= bound):
            raise InvalidInput(f"eps must lie in (0, R/(n+1)] = (0, {bound:.6g}]")
        if not self.eps < self.params.punctures.reach:
            raise InvalidInput("eps must be below reach(Z)")
        if self.iterations < 1 or self.thin < 1 or self.burnin < 0:
            raise InvalidInput("iterations and thin must be >= 1, burnin >= 0")
        if self.sweep_mode not in SWEEP_MODES:
            raise InvalidInput(f"sweep_mode must be one of {sorted(SWEEP_MODES)}")
        if self.guard not in GUARDS:
            raise InvalidInput(f"guard must be one of {sorted(GUARDS)}")

    @property
    def n_saves(self) -> int:
        return self.iterations // self.thin


@dataclass
class ChainState:
    loop: PLLoop
    rng: np.random.Generator
    step_count: int = 0
    counts: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))

    @classmethod
    def start(cls, loop: PLLoop, seed: int) -> "ChainState":
        return cls(loop, np.random.default_rng(seed))


def _advance_state(state: ChainState, cfg: SamplerConfig, count: int, mode: int):
    V = np.array(state.loop.vertices)
    _advance(
        V, cfg.params.punctures.points, float(cfg.eps), count, mode,
        GUARDS[cfg.guard], state.rng, state.counts,
    )
    state.loop = PLLoop(V)
    state.step_count += count * (len(V) if mode == PERMUTATION else 1)
    return state


def step(state: ChainState, k: int, cfg: SamplerConfig) -> ChainState:
    """Move vertex ``k`` once; degenerate geometry is a counted no-op."""
    V = np.array(state.loop.vertices)
    m = len(V)
    if not 0 <= k < m:
        raise InvalidInput(f"vertex index {k} out of range")
    P = cfg.params.punctures.points
    rel = np.empty(len(P), dtype=np.int64)
    stat = np.empty(len(P), dtype=np.int64)
    code = _step(V, k, P, float(cfg.eps), GUARDS[cfg.guard], state.rng, rel, stat)
    state.counts[code] += 1
    state.loop = PLLoop(V)
    state.step_count += 1
    return state


def sweep(state: ChainState, cfg: SamplerConfig) -> ChainState:
    """Move every vertex once, in a fresh random order."""
    return _advance_state(state, cfg, 1, PERMUTATION)


@dataclass
class ChainTrace:
    steps: list = field(default_factory=list)
    loops: list = field(default_factory=list)
    lengths: list = field(default_factory=list)
    rates: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    n: Optional[int] = None

    def __len__(self):
        return len(self.loops)

    def append(self, step_no, loop, length, rate, distance, counts):
        self.steps.append(int(step_no))
        self.loops.append(loop)
        self.lengths.append(float(length))
        self.rates.append(float(rate))
        self.distances.append(distance)
        self.degenerate.append(int(counts[DEGENERATE]))
        self.failed.append(int(counts[FAILED]))

    def tail(self, k: int) -> "ChainTrace":
        out = ChainTrace(n=self.n)
        for name in ("steps", "loops", "lengths", "rates", "distances", "degenerate", "failed"):
            setattr(out, name, getattr(self, name)[-k:] if k else [])
        return out


def run(cfg: SamplerConfig, initial: PLLoop, shortest=None) -> ChainTrace:
    """Burn in, then save every ``thin`` iterations; saves are revalidated in G_n."""
    p = cfg.params
    chk = loops_mod.check_state(initial, p)
    if not chk.ok:
        raise InvalidInput(f"initial loop is not in G_n: {_describe(chk)}")
    state = ChainState.start(initial, cfg.seed)
    mode = SWEEP_MODES[cfg.sweep_mode]
    rr = RadialRate(p.R)
    _advance_chunked(state, cfg, cfg.burnin, mode, p)
    trace = ChainTrace(n=p.n)
    for _ in range(cfg.n_saves):
        _advance_chunked(state, cfg, cfg.thin, mode, p)
        chk = loops_mod.check_state(state.loop, p)
        if not chk.ok:
            raise IntegrityError(f"saved state left G_n at step {state.step_count}: {_describe(chk)}")
        dist = loops_mod.loop_distance(state.loop, shortest) if shortest is not None else None
        trace.append(
            state.step_count, state.loop, state.loop.length(),
            loop_rate(rr, state.loop), dist, state.counts,
        )
    log.info("chain done: %d saves, counts moved/degenerate/failed = %s", len(trace), state.counts.tolist())
    return trace


def _advance_chunked(state, cfg, count, mode, p):
    every = cfg.check_word_every
    done = 0
    while done < count:
        chunk = count - done if every <= 0 else min(every, count - done)
        _advance_state(state, cfg, chunk, mode)
        done += chunk
        if every > 0:
            chk = loops_mod.check_state(state.loop, p)
            if not chk.ok:
                raise IntegrityError(f"state left G_n at step {state.step_count}: {_describe(chk)}")


def _describe(chk) -> str:
    parts = []
    if chk.long_edges:
        parts.append(f"edges too long at {chk.long_edges[:5]}")
    if chk.on_puncture:
        parts.append(f"vertices on punctures at {chk.on_puncture[:5]}")
    if not chk.class_ok:
        parts.append(chk.note or "class mismatch")
    return "; ".join(parts)


def write_trace(trace: ChainTrace, path) -> None:
    with open(path, "w") as fh:
        for s, loop, L, rate in zip(trace.steps, trace.loops, trace.lengths, trace.rates):
            rec = {"step": s, "length": L, "rate": rate, "vertices": loop.vertices.tolist()}
            fh.write(json.dumps(rec) + "\n")


def read_trace(path) -> ChainTrace:
    trace = ChainTrace()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                loop = PLLoop(rec["vertices"])
                trace.append(rec["step"], loop, rec["length"], rec.get("rate", math.nan), None, [0, 0, 0])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise InvalidInput(f"{path}:{lineno}: bad trace record ({exc})") from None
            if trace.n is None:
                trace.n = loop.n
            elif trace.n != loop.n:
                raise InvalidInput(f"{path}:{lineno}: mixed vertex counts in trace")
    return trace
