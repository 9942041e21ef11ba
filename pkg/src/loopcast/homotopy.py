"""Free-homotopy invariant of loops in a punctured plane.

The plane is cut by a crossing structure: the edges of a triangulation of the
punctures plus one ray per hull vertex along its outer-angle bisector (or, when
all punctures are collinear, the segments of the line, its two outward rays,
and two perpendicular rays per puncture). Every primitive carries a symbol;
the signed sequence of transversal crossings of a loop is its word, and two
loops are freely homotopic exactly when their cyclically reduced words agree
up to rotation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateGeometry, InvalidInput
from .geometry import PunctureSet

SEGMENT = 0
RAY = 1

POSITIVE = 1
NEGATIVE = -1
NULL = 0

Symbol = tuple  # (edge id, +1 | -1)
Word = tuple  # tuple of Symbols


@dataclass(frozen=True)
class CrossingStructure:
    """Oriented primitives; edge ``k`` carries symbol ``e<k>``.

    ``start`` holds segment starts / ray origins, ``end`` segment ends,
    ``direction`` unit directions for both kinds.
    """

    kind: np.ndarray
    start: np.ndarray
    end: np.ndarray
    direction: np.ndarray
    endpoints: tuple  # puncture indices per primitive, (i, j) or (i,)
    source: PunctureSet

    def __len__(self):
        return len(self.kind)

    def describe(self):
        out = []
        for k in range(len(self)):
            if self.kind[k] == SEGMENT:
                out.append(("segment", tuple(self.start[k]), tuple(self.end[k])))
            else:
                out.append(("ray", tuple(self.start[k]), tuple(self.direction[k])))
        return out


def _key(p):
    return (float(p[0]), float(p[1]))


def _unit(v):
    return v / np.hypot(v[0], v[1])


def _incircle(a, b, c, d):
    m = np.array([
        [a[0] - d[0], a[1] - d[1], (a[0] - d[0]) ** 2 + (a[1] - d[1]) ** 2],
        [b[0] - d[0], b[1] - d[1], (b[0] - d[0]) ** 2 + (b[1] - d[1]) ** 2],
        [c[0] - d[0], c[1] - d[1], (c[0] - d[0]) ** 2 + (c[1] - d[1]) ** 2],
    ])
    return float(np.linalg.det(m))


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _delaunay_edges(pts: np.ndarray):
    """Delaunay triangles with cocircular ties broken toward the lexicographically smallest diagonal."""
    from scipy.spatial import Delaunay

    tri = Delaunay(pts)
    if len(np.unique(tri.simplices)) != len(pts):
        raise InvalidInput("triangulation dropped a puncture (nearly degenerate configuration)")
    tris = {frozenset(map(int, s)) for s in tri.simplices}
    scale = float(np.ptp(pts, axis=0).max()) ** 4
    for _ in range(100 * len(pts) + 100):
        edge_tris = {}
        for t in tris:
            for e in _tri_edges(t):
                edge_tris.setdefault(e, []).append(t)
        flipped = False
        for e, ts in sorted(edge_tris.items(), key=lambda kv: sorted(kv[0])):
            if len(ts) != 2:
                continue
            i, j = sorted(e)
            k = next(iter(ts[0] - e))
            l = next(iter(ts[1] - e))
            a, b, c, d = pts[i], pts[j], pts[k], pts[l]
            if abs(_incircle(a, b, c, d)) > 1e-10 * scale:
                continue
            # flip only inside a strictly convex quadrilateral
            if _orient(c, d, a) * _orient(c, d, b) >= 0:
                continue
            cur = tuple(sorted((_key(a), _key(b))))
            alt = tuple(sorted((_key(c), _key(d))))
            if alt < cur:
                tris -= {ts[0], ts[1]}
                tris |= {frozenset((k, l, i)), frozenset((k, l, j))}
                flipped = True
                break
        if not flipped:
            return tris
    raise InvalidInput("cocircular tie-breaking did not settle")


def _tri_edges(t):
    a, b, c = sorted(t)
    return (frozenset((a, b)), frozenset((b, c)), frozenset((a, c)))


def _boundary_cycle(pts, tris):
    """Hull boundary (including collinear boundary punctures) in CCW order."""
    count = {}
    for t in tris:
        for e in _tri_edges(t):
            count[e] = count.get(e, 0) + 1
    nxt = {}
    for t in tris:
        a, b, c = tuple(t)
        if _orient(pts[a], pts[b], pts[c]) < 0:
            b, c = c, b
        for u, v in ((a, b), (b, c), (c, a)):
            if count[frozenset((u, v))] == 1:
                nxt[u] = v
    start = min(nxt, key=lambda i: _key(pts[i]))
    cycle = [start]
    while nxt[cycle[-1]] != start:
        cycle.append(nxt[cycle[-1]])
    return cycle


def build_crossing_structure(Z: PunctureSet) -> CrossingStructure:
    pts = Z.points
    K = len(pts)
    if K == 0:
        raise InvalidInput("no punctures")
    segs, rays = [], []
    if Z.collinear:
        order = sorted(range(K), key=lambda i: _key(pts[i]))
        if K == 1:
            d = np.array([1.0, 0.0])
        else:
            d = _unit(pts[order[-1]] - pts[order[0]])
        perp = np.array([-d[1], d[0]])
        for i, j in zip(order, order[1:]):
            segs.append((i, j))
        rays.append((order[0], -d))
        rays.append((order[-1], d))
        for i in order:
            rays.append((i, perp))
            rays.append((i, -perp))
    else:
        tris = _delaunay_edges(pts)
        edges = set()
        for t in tris:
            edges.update(_tri_edges(t))
        for e in edges:
            i, j = sorted(e, key=lambda q: _key(pts[q]))
            segs.append((i, j))
        cycle = _boundary_cycle(pts, tris)
        m = len(cycle)
        for idx, i in enumerate(cycle):
            p = pts[i]
            u1 = _unit(pts[cycle[idx - 1]] - p)
            u2 = _unit(pts[cycle[(idx + 1) % m]] - p)
            s = u1 + u2
            if np.hypot(*s) < 1e-12:
                # straight angle on a hull edge: outward normal
                s = np.array([u2[1], -u2[0]])
            else:
                s = -s
            rays.append((i, _unit(s)))
    segs.sort(key=lambda ij: (_key(pts[ij[0]]), _key(pts[ij[1]])))
    rays.sort(key=lambda r: (_key(pts[r[0]]), _key(r[1])))
    n = len(segs) + len(rays)
    kind = np.empty(n, dtype=np.int64)
    start = np.empty((n, 2))
    end = np.full((n, 2), np.nan)
    direction = np.empty((n, 2))
    endpoints = []
    for k, (i, j) in enumerate(segs):
        kind[k] = SEGMENT
        start[k], end[k] = pts[i], pts[j]
        direction[k] = _unit(pts[j] - pts[i])
        endpoints.append((i, j))
    for k, (i, d) in enumerate(rays, start=len(segs)):
        kind[k] = RAY
        start[k] = pts[i]
        direction[k] = d
        endpoints.append((i,))
    for arr in (kind, start, end, direction):
        arr.setflags(write=False)
    return CrossingStructure(kind, start, end, direction, tuple(endpoints), Z)


class CrossingRecord(NamedTuple):
    edge_id: int
    kind: int  # POSITIVE / NEGATIVE / NULL
    t_left: float
    t_right: float


def _vertices(loop) -> np.ndarray:
    v = getattr(loop, "vertices", loop)
    return np.asarray(v, dtype=float)


def _sign(x):
    return np.sign(x).astype(np.int64)


def crossing_records(loop, T: CrossingStructure) -> list:
    """Connected components of loop ∩ T with their side-change classification.

    Raises DegenerateGeometry when the loop meets a puncture or runs along a
    primitive; a vertex resting on a primitive is a (possibly null) touch.
    """
    V = _vertices(loop)
    m = len(V)
    W = np.roll(V, -1, axis=0)
    records = []
    for k in range(len(T)):
        a = T.start[k]
        d = T.direction[k]
        # side of each vertex w.r.t. the primitive's supporting line
        side = _sign(d[0] * (V[:, 1] - a[1]) - d[1] * (V[:, 0] - a[0]))
        along = (V - a) @ d
        if T.kind[k] == SEGMENT:
            length = float(np.hypot(*(T.end[k] - a)))
            on_prim = (side == 0) & (along > 0) & (along < length)
            at_end = np.all(V == a, axis=1) | np.all(V == T.end[k], axis=1)
        else:
            length = np.inf
            on_prim = (side == 0) & (along > 0)
            at_end = np.all(V == a, axis=1)
        if at_end.any():
            i = int(np.flatnonzero(at_end)[0])
            raise DegenerateGeometry(f"vertex {i} sits on a puncture", vertex=i)
        nxt_side = np.roll(side, -1)
        nxt_along = np.roll(along, -1)
        flat = (side == 0) & (nxt_side == 0)
        span = flat & (np.minimum(along, nxt_along) < length) & (np.maximum(along, nxt_along) > 0)
        if span.any():
            i = int(np.flatnonzero(span)[0])
            raise DegenerateGeometry(f"edge {i} runs along primitive {k}", vertex=i)
        # transversal edge crossings
        for i in np.flatnonzero(side * nxt_side == -1):
            p, q = V[i], W[i]
            e = q - p
            so = _sign(np.array(e[0] * (a[1] - p[1]) - e[1] * (a[0] - p[0])))
            if T.kind[k] == SEGMENT:
                b = T.end[k]
                sb = _sign(np.array(e[0] * (b[1] - p[1]) - e[1] * (b[0] - p[0])))
                if so == 0 or sb == 0:
                    raise DegenerateGeometry(f"edge {i} passes through a puncture", vertex=int(i))
                if so == sb:
                    continue
            else:
                sd = _sign(np.array(e[0] * d[1] - e[1] * d[0]))
                if so == 0:
                    raise DegenerateGeometry(f"edge {i} passes through a puncture", vertex=int(i))
                # the ray meets the edge's line ahead of its origin iff the
                # origin and the direction point to opposite sides
                if so == sd:
                    continue
            sp = side[i]
            denom = sp * 1.0
            dp = d[0] * (p[1] - a[1]) - d[1] * (p[0] - a[0])
            dq = d[0] * (q[1] - a[1]) - d[1] * (q[0] - a[0])
            u = dp / (dp - dq)
            t = (i + u) / m
            kind = POSITIVE if denom > 0 else NEGATIVE
            records.append(CrossingRecord(k, kind, t, t))
        # vertices resting on the primitive
        for i in np.flatnonzero(on_prim):
            before, after = side[i - 1], side[(i + 1) % m]
            if before == 0 or after == 0:
                raise DegenerateGeometry(f"loop runs along primitive {k} at vertex {i}", vertex=int(i))
            if before > 0 and after < 0:
                kind = POSITIVE
            elif before < 0 and after > 0:
                kind = NEGATIVE
            else:
                kind = NULL
            t = i / m
            records.append(CrossingRecord(k, kind, t, t))
    records.sort(key=lambda r: (r.t_right, r.edge_id))
    return records


def word_of(loop, T: CrossingStructure) -> Word:
    return tuple((r.edge_id, r.kind) for r in crossing_records(loop, T) if r.kind != NULL)


def inverse(w: Sequence) -> Word:
    return tuple((k, -s) for k, s in reversed(w))


def reduce(w: Iterable) -> Word:
    out = []
    for k, s in w:
        if out and out[-1][0] == k and out[-1][1] == -s:
            out.pop()
        else:
            out.append((k, s))
    return tuple(out)


def canonical_rotation(w: Sequence) -> Word:
    w = tuple(w)
    if not w:
        return w
    return min(w[i:] + w[:i] for i in range(len(w)))


def cyclic_reduce(w: Iterable) -> Word:
    """Cyclically reduced word in canonical (lexicographically least) rotation."""
    r = list(reduce(w))
    lo, hi = 0, len(r)
    while hi - lo >= 2 and r[lo][0] == r[hi - 1][0] and r[lo][1] == -r[hi - 1][1]:
        lo += 1
        hi -= 1
    return canonical_rotation(r[lo:hi])


def cyclic_word(loop, T: CrossingStructure) -> Word:
    return cyclic_reduce(word_of(loop, T))


def freely_homotopic(loop0, loop1, T: CrossingStructure) -> bool:
    return cyclic_word(loop0, T) == cyclic_word(loop1, T)


def homotopic(loop0, loop1, T: CrossingStructure) -> bool:
    """Based homotopy for loops sharing a basepoint (vertex 0) face."""
    return reduce(word_of(loop0, T)) == reduce(word_of(loop1, T))


def format_word(w: Sequence) -> str:
    if not w:
        return "ε"
    return " ".join(f"e{k}" if s > 0 else f"e{k}^-1" for k, s in w)


def parse_word(text: str) -> Word:
    text = text.strip()
    if text in ("", "ε"):
        return ()
    out = []
    for tok in text.split():
        inv = tok.endswith("^-1")
        body = tok[:-3] if inv else tok
        if not body.startswith("e") or not body[1:].isdigit():
            raise InvalidInput(f"bad word token {tok!r}")
        out.append((int(body[1:]), -1 if inv else 1))
    return tuple(out)
