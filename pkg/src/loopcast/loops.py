"""Piecewise-linear loops with uniform traversal times, and the state space G_n."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from . import homotopy
from .errors import DegenerateGeometry, InvalidInput
from .geometry import PunctureSet, as_points


@dataclass(frozen=True, eq=False)
class PLLoop:
    """Loop through ``vertices`` (v_0..v_n) closed by the edge [v_n, v_0].

    Every edge is traversed in time 1/(n+1).
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = as_points(self.vertices).copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def n(self) -> int:
        return len(self.vertices) - 1

    def __len__(self):
        return len(self.vertices)

    def edges(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    def edge_lengths(self) -> np.ndarray:
        e = self.edges()
        return np.hypot(e[:, 0], e[:, 1])

    def length(self) -> float:
        return float(self.edge_lengths().sum())

    def shifted(self, k: int) -> "PLLoop":
        return PLLoop(np.roll(self.vertices, -k, axis=0))

    def reversed(self) -> "PLLoop":
        return PLLoop(self.vertices[::-1])

    def translated(self, t) -> "PLLoop":
        return PLLoop(self.vertices + np.asarray(t, dtype=float))

    def to_list(self):
        return self.vertices.tolist()


def length(loop: PLLoop) -> float:
    return loop.length()


def load_loop(path) -> PLLoop:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if isinstance(data, dict):
        if "vertices" not in data:
            raise InvalidInput(f"{path}: object has no 'vertices' key")
        data = data["vertices"]
    try:
        return PLLoop(data)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"{path}: not a list of 2-D points ({exc})") from None


def dump_loop(loop, path) -> None:
    verts = loop.vertices if isinstance(loop, PLLoop) else np.asarray(loop)
    Path(path).write_text(json.dumps(verts.tolist()) + "\n")


def discretize(vertices, n: int) -> PLLoop:
    """Constant-speed resampling of a closed polygon at t_i = i/(n+1)."""
    V = as_points(getattr(vertices, "vertices", vertices))
    if n < 2:
        raise InvalidInput("n must be at least 2")
    W = np.vstack([V, V[:1]])
    seg = np.hypot(*np.diff(W, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0.0:
        raise InvalidInput("cannot discretize a zero-length polygon")
    s = total * np.arange(n + 1) / (n + 1)
    x = np.interp(s, cum, W[:, 0])
    y = np.interp(s, cum, W[:, 1])
    return PLLoop(np.column_stack([x, y]))


def circle(center, radius, m=256, start_angle=0.0) -> np.ndarray:
    t = start_angle + 2.0 * np.pi * np.arange(m) / m
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


@dataclass(frozen=True)
class ClassSpec:
    reference: PLLoop
    structure: homotopy.CrossingStructure
    target: tuple = field(init=False)

    def __post_init__(self):
        word = homotopy.cyclic_word(self.reference, self.structure)
        if not word:
            raise InvalidInput("class is trivial: the reference loop is contractible")
        object.__setattr__(self, "target", word)


@dataclass(frozen=True)
class GnParams:
    n: int
    R: float
    punctures: PunctureSet
    cls: ClassSpec

    def __post_init__(self):
        if self.n < 2:
            raise InvalidInput("n must be at least 2")
        if not self.R > 0:
            raise InvalidInput("R must be positive")
        if self.edge_bound >= self.punctures.reach:
            raise InvalidInput(
                f"R/(n+1) = {self.edge_bound:.6g} must be below reach(Z) = {self.punctures.reach:.6g}; increase n"
            )
        L = self.cls.reference.length()
        if L >= self.R:
            raise InvalidInput(f"reference loop length {L:.6g} must be below R = {self.R:.6g}")

    @property
    def edge_bound(self) -> float:
        return self.R / (self.n + 1)

    @property
    def structure(self):
        return self.cls.structure

    @classmethod
    def build(cls, punctures, reference, n, R):
        Z = punctures if isinstance(punctures, PunctureSet) else PunctureSet(punctures)
        ref = reference if isinstance(reference, PLLoop) else PLLoop(reference)
        T = homotopy.build_crossing_structure(Z)
        return cls(n, float(R), Z, ClassSpec(ref, T))


@dataclass
class StateCheck:
    long_edges: list
    on_puncture: list
    class_ok: bool
    note: str = ""

    @property
    def ok(self) -> bool:
        return not self.long_edges and not self.on_puncture and self.class_ok


def check_state(loop: PLLoop, p: GnParams) -> StateCheck:
    """Each membership criterion of G_n evaluated separately."""
    if loop.n != p.n:
        return StateCheck([], [], False, f"expected {p.n + 1} vertices, got {loop.n + 1}")
    long_edges = np.flatnonzero(~(loop.edge_lengths() < p.edge_bound)).tolist()
    V, Zp = loop.vertices, p.punctures.points
    hits = (V[:, None, 0] == Zp[None, :, 0]) & (V[:, None, 1] == Zp[None, :, 1])
    on_puncture = np.flatnonzero(hits.any(axis=1)).tolist()
    note = ""
    if on_puncture:
        class_ok = False
    else:
        try:
            class_ok = homotopy.cyclic_word(loop, p.structure) == p.cls.target
            if not class_ok:
                note = "class mismatch"
        except DegenerateGeometry as exc:
            class_ok = False
            note = f"degenerate word: {exc}"
    return StateCheck(long_edges, on_puncture, class_ok, note)


def validate_state(loop: PLLoop, p: GnParams) -> bool:
    return check_state(loop, p).ok


@njit(cache=True)
def _dfd_closed(P, Q, shift):
    """Discrete Frechet distance of P closed at P[0] and Q rotated by ``shift`` closed likewise."""
    p = P.shape[0] + 1
    q = Q.shape[0] + 1
    m = Q.shape[0]
    prev = np.empty(q)
    cur = np.empty(q)
    for i in range(p):
        pi = i % P.shape[0]
        for j in range(q):
            qj = (j + shift) % m
            d = math.hypot(P[pi, 0] - Q[qj, 0], P[pi, 1] - Q[qj, 1])
            if i == 0 and j == 0:
                cur[j] = d
            elif i == 0:
                cur[j] = max(cur[j - 1], d)
            elif j == 0:
                cur[j] = max(prev[j], d)
            else:
                cur[j] = max(min(prev[j], cur[j - 1], prev[j - 1]), d)
        for j in range(q):
            prev[j] = cur[j]
    return prev[q - 1]


@njit(cache=True)
def _cyclic_dfd(P, Q):
    best = np.inf
    for k in range(Q.shape[0]):
        d = _dfd_closed(P, Q, k)
        if d < best:
            best = d
    return best


def densify(vertices: np.ndarray, count: int) -> np.ndarray:
    """Insert midpoints of the longest edges until the loop has ``count`` vertices."""
    V = [np.asarray(v, dtype=float) for v in vertices]
    while len(V) < count:
        lens = [math.dist(V[i], V[(i + 1) % len(V)]) for i in range(len(V))]
        i = int(np.argmax(lens))
        V.insert(i + 1, 0.5 * (V[i] + V[(i + 1) % len(V)]))
    return np.array(V)


def loop_distance(loop0, loop1) -> float:
    """Cyclic discrete Frechet distance between vertex sequences.

    A computable stand-in for the free-loop distance (an upper bound up to one
    edge length). Loops with different vertex counts are densified first.
    """
    P = np.ascontiguousarray(getattr(loop0, "vertices", loop0), dtype=float)
    Q = np.ascontiguousarray(getattr(loop1, "vertices", loop1), dtype=float)
    if len(P) < len(Q):
        P = densify(P, len(Q))
    elif len(Q) < len(P):
        Q = densify(Q, len(P))
    return float(_cyclic_dfd(P, Q))


def aligned_sup_distance(loop0: PLLoop, loop1: PLLoop) -> float:
    d = loop0.vertices - loop1.vertices
    return float(np.hypot(d[:, 0], d[:, 1]).max())
