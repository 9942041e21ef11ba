"""Exact shortest loop in the closure of a free homotopy class.

The shortest free loop is a polygon whose vertices are punctures. It is found
by pulling a dense discretisation of the reference loop taut: a free vertex is
replaced by the convex chain its triangle (prev, v, next) wraps around the
punctures it contains (nothing if it contains none), and a vertex pinned on a
puncture is released as soon as the string bends away from that puncture.
Every modification shortens the polygon. The limit passes through punctures,
so the class is certified on a proxy loop offset slightly off each puncture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import homotopy
from .errors import IntegrityError, InvalidInput
from .loops import GnParams, PLLoop, discretize

MAX_PASSES = 1000
CONVERGED = 1e-12


@dataclass
class _Vertex:
    pos: np.ndarray
    pin: int = -1  # puncture index, -1 for a free vertex
    side: int = 0  # +1: puncture on the left of the path, -1: on the right
    theta: float = 0.0  # continuous turning angle at a pin

    @property
    def pinned(self):
        return self.pin >= 0


def _cross(u, v):
    return u[0] * v[1] - u[1] * v[0]


def _turn(u, v):
    """Signed angle rotating direction u onto v, in (-pi, pi]."""
    return math.atan2(_cross(u, v), u[0] * v[0] + u[1] * v[1])


def _taut_chain(a, b, cands, o):
    """Chain of points from a to b hugging ``cands`` on the side of the chord facing away.

    ``o`` is the orientation of the removed vertex relative to a->b; the
    chain keeps every candidate on the side -sign(o) of its travel direction.
    """
    s = 1 if o > 0 else -1
    cur = a
    remaining = list(cands) + [(b, -1)]
    chain = []
    while True:
        best = None
        for q, j in remaining:
            if best is None:
                best = (q, j)
                continue
            c = _cross(best[0] - cur, q - cur) * s
            if c > 0:
                best = (q, j)
            elif c == 0:
                dq = np.dot(q - cur, q - cur)
                db = np.dot(best[0] - cur, best[0] - cur)
                if np.dot(q - cur, best[0] - cur) > 0 and dq < db:
                    best = (q, j)
        if best[1] == -1:
            return chain
        chain.append(best)
        remaining = [r for r in remaining if r[1] != best[1]]
        cur = best[0]


class _Shortener:
    def __init__(self, vertices, Z: np.ndarray):
        self.Z = Z
        self.V = [_Vertex(np.array(v, dtype=float)) for v in vertices]

    def length(self):
        V = self.V
        if len(V) < 2:
            return 0.0
        return sum(math.dist(V[i].pos, V[(i + 1) % len(V)].pos) for i in range(len(V)))

    def _triangle_punctures(self, a, v, b, exclude):
        o = _cross(b.pos - a.pos, v.pos - a.pos)
        out = []
        for j, z in enumerate(self.Z):
            if j in exclude:
                continue
            if (z == a.pos).all() or (z == b.pos).all():
                continue
            c1 = _cross(v.pos - a.pos, z - a.pos)
            c2 = _cross(b.pos - v.pos, z - v.pos)
            c3 = _cross(a.pos - b.pos, z - b.pos)
            if o > 0 and c1 <= 0 and c2 <= 0 and c3 <= 0:
                out.append((z, j))
            elif o < 0 and c1 >= 0 and c2 >= 0 and c3 >= 0:
                out.append((z, j))
        return o, out

    def _rotate_out(self, a, old_dir, new_dir):
        if a.pinned and np.any(old_dir) and np.any(new_dir):
            a.theta += _turn(old_dir, new_dir)

    def _rotate_in(self, b, old_dir, new_dir):
        if b.pinned and np.any(old_dir) and np.any(new_dir):
            b.theta -= _turn(old_dir, new_dir)

    def straighten(self, i) -> bool:
        """Replace vertex i by the taut chain between its neighbours."""
        V = self.V
        m = len(V)
        v = V[i]
        if m == 1:
            return False
        a, b = V[i - 1], V[(i + 1) % m]
        if m == 2:
            # loop a -> v -> a collapses onto a
            if a.pinned:
                a.theta += math.copysign(math.pi, a.theta if a.theta != 0 else a.side) + (v.theta if v.pinned else 0.0)
            del V[i]
            return True
        exclude = {x.pin for x in (a, v, b) if x.pinned}
        o, cands = self._triangle_punctures(a, v, b, exclude)
        if o == 0 or not cands:
            new = []
        else:
            new = _taut_chain(a.pos, b.pos, cands, o)
        first = new[0][0] if new else b.pos
        last = new[-1][0] if new else a.pos
        self._rotate_out(a, v.pos - a.pos, first - a.pos)
        self._rotate_in(b, b.pos - v.pos, b.pos - last)
        side = -1 if o > 0 else 1
        pts = [a.pos] + [q for q, _ in new] + [b.pos]
        inserted = []
        for k, (q, j) in enumerate(new, start=1):
            th = _turn(pts[k] - pts[k - 1], pts[k + 1] - pts[k])
            inserted.append(_Vertex(np.array(q), j, side, th))
        V[i:i + 1] = inserted
        self._merge_coincident()
        return True

    def _merge_coincident(self):
        V = self.V
        changed = True
        while changed and len(V) > 1:
            changed = False
            for i in range(len(V)):
                j = (i + 1) % len(V)
                if i != j and (V[i].pos == V[j].pos).all():
                    a, b = V[i], V[j]
                    if a.pinned or b.pinned:
                        keep = a if a.pinned else b
                        th = (a.theta if a.pinned else 0.0) + (b.theta if b.pinned else 0.0)
                        if a.pinned and b.pinned:
                            th += math.pi * keep.side
                        keep.theta = th
                    else:
                        keep = a
                    V[i] = keep
                    del V[j]
                    changed = True
                    break

    def releasable(self, v: _Vertex) -> bool:
        return v.pinned and v.theta * v.side < 0

    def sweep(self) -> bool:
        changed = False
        i = 0
        while i < len(self.V):
            v = self.V[i]
            if len(self.V) == 1:
                break
            if not v.pinned or self.releasable(v):
                before = len(self.V)
                if self.straighten(i):
                    changed = True
                    if len(self.V) < before:
                        continue
            i += 1
        return changed


@dataclass
class ShortestLoop:
    polygon: np.ndarray
    pins: tuple
    turns: tuple
    sides: tuple
    length: float
    class_word: tuple
    certified: bool = True
    passes: int = 0
    note: str = ""

    def as_loop(self) -> PLLoop:
        return PLLoop(self.polygon)


def proxy_loop(polygon, sides, turns, delta: float, arc_step: float = math.pi / 8) -> np.ndarray:
    """Loop following ``polygon`` at distance ``delta`` from each pinned puncture.

    At a pin with turn theta the proxy sweeps an arc of angle theta around the
    puncture, on the side opposite to it; a one-vertex polygon becomes a small
    circle traversed theta/(2 pi) times.
    """
    P = np.asarray(polygon, dtype=float)
    m = len(P)
    out = []
    for i in range(m):
        z = P[i]
        if m == 1:
            d_in = np.array([1.0, 0.0])
        else:
            d_in = z - P[i - 1]
            d_in = d_in / np.hypot(*d_in)
        rn = np.array([d_in[1], -d_in[0]])
        start = math.atan2(*(sides[i] * rn)[::-1])
        th = turns[i]
        k = max(1, int(math.ceil(abs(th) / arc_step)))
        for t in np.linspace(0.0, th, k + 1):
            if m == 1 and t == th and k > 0 and len(out) > 0:
                continue
            ang = start + t
            out.append(z + delta * np.array([math.cos(ang), math.sin(ang)]))
    return np.array(out)


def _shorten(vertices, Z, max_passes=MAX_PASSES):
    sh = _Shortener(vertices, Z)
    prev = sh.length()
    for npass in range(1, max_passes + 1):
        changed = sh.sweep()
        cur = sh.length()
        if cur > prev + 1e-9:
            raise IntegrityError(f"shortening increased length {prev} -> {cur}")
        if not changed or (prev - cur < CONVERGED and not any(
            (not v.pinned) or sh.releasable(v) for v in sh.V
        )):
            return sh, npass, True
        prev = cur
    return sh, max_passes, False


def _result(sh, T, target, delta, passes, converged):
    V = sh.V
    free = [v for v in V if not v.pinned]
    if free and len(V) > 1:
        converged = False
    keep = [v for v in V if not (v.pinned and v.theta == 0.0 and len(V) > 1)] or V
    poly = np.array([v.pos for v in V])
    sides = [v.side if v.pinned else 1 for v in V]
    turns = [v.theta if v.pinned else 0.0 for v in V]
    proxy = proxy_loop(poly, sides, turns, delta)
    try:
        word = homotopy.cyclic_word(proxy, T)
    except Exception:
        word = None
    certified = converged and word == target
    out_poly = np.array([v.pos for v in keep])
    length = float(sum(math.dist(out_poly[i], out_poly[(i + 1) % len(out_poly)]) for i in range(len(out_poly)))) if len(out_poly) > 1 else 0.0
    note = "" if certified else ("did not converge" if not converged else "proxy class mismatch")
    return ShortestLoop(
        out_poly, tuple(v.pin for v in keep), tuple(v.theta for v in keep), tuple(v.side for v in keep),
        length, word if word is not None else (), certified, passes, note,
    )


def shorten_from(vertices, p: GnParams, delta=None, max_passes=MAX_PASSES) -> ShortestLoop:
    Z = p.punctures.points
    delta = 1e-6 * min(p.punctures.reach, 1.0) if delta is None else delta
    sh, passes, ok = _shorten(vertices, Z, max_passes)
    return _result(sh, p.structure, p.cls.target, delta, passes, ok)


def same_polygon(P, Q, tol=1e-9) -> bool:
    """Equal up to cyclic rotation (same orientation)."""
    P, Q = np.asarray(P), np.asarray(Q)
    if P.shape != Q.shape:
        return False
    return any(np.abs(np.roll(Q, -k, axis=0) - P).max() <= tol for k in range(len(Q)))


def shortest_loop(p: GnParams, densities=(256, 1024), max_passes=MAX_PASSES) -> ShortestLoop:
    """Shortest loop from several starting discretisations; agreement certifies it."""
    if not p.cls.target:
        raise InvalidInput("class is trivial")
    results = [shorten_from(discretize(p.cls.reference, d - 1).vertices, p, max_passes=max_passes) for d in densities]
    best = min(results, key=lambda r: r.length)
    agree = all(
        abs(r.length - best.length) <= 1e-9 and same_polygon(r.polygon, best.polygon) for r in results
    )
    if not agree:
        best.certified = False
        best.note = "multi-start disagreement"
    elif not all(r.certified for r in results):
        best.certified = False
        best.note = next(r.note for r in results if not r.certified)
    return best


def certify_floor(lengths, sl: ShortestLoop, tol=1e-9) -> dict:
    """Check every saved length against the class infimum; returns excess statistics."""
    L = np.asarray(list(lengths), dtype=float)
    if L.size == 0:
        return {"count": 0}
    excess = L - sl.length
    if np.any(excess < -tol):
        i = int(np.argmin(excess))
        raise IntegrityError(f"saved loop {i} has length {L[i]:.12g} below the shortest loop {sl.length:.12g}")
    return {
        "count": int(L.size),
        "min_excess": float(excess.min()),
        "median_excess": float(np.median(excess)),
        "max_excess": float(excess.max()),
    }
