"""Planar primitives: punctures, side tests, lens regions and the vertex move region.

Everything works on float64 coordinates with exact signs of floating-point
cross products. Regions are open sets; points on a boundary are never members.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .errors import DegenerateGeometry, InvalidInput, SamplingFailure

REJECTION_BUDGET = 10_000

# status codes shared with the compiled chain kernel
INSIDE = 1
OUTSIDE = -1
BOUNDARY = 0


class Side(enum.IntEnum):
    RIGHT = -1
    ON = 0
    LEFT = 1


def as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"non-finite coordinates {p!r}")
    return arr


def as_points(pts) -> np.ndarray:
    arr = np.asarray(pts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInput(f"expected a list of [x, y] pairs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("non-finite coordinates")
    return arr


@njit(cache=True)
def cross_sign(ax, ay, bx, by, qx, qy):
    """Sign of (b - a) x (q - a)."""
    c = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
    if c > 0.0:
        return 1
    if c < 0.0:
        return -1
    return 0


@njit(cache=True)
def in_lens(ax, ay, bx, by, radius, px, py):
    r2 = radius * radius
    return (px - ax) ** 2 + (py - ay) ** 2 < r2 and (px - bx) ** 2 + (py - by) ** 2 < r2


@njit(cache=True)
def cone_status(ax, ay, bx, by, zx, zy, px, py):
    """Where ``p`` lies relative to the shadow cone of puncture ``z``.

    The cone is H = H1 & H2 with H1 the open half plane bounded by the line
    a-z not containing b, and H2 the one bounded by b-z not containing a.
    It is exactly the set of p for which z is inside triangle (a, p, b).
    Returns INSIDE, OUTSIDE (not in the closure) or BOUNDARY. The caller
    must have rejected collinear a, z, b.
    """
    s1 = cross_sign(ax, ay, zx, zy, px, py)
    s1b = cross_sign(ax, ay, zx, zy, bx, by)
    s2 = cross_sign(bx, by, zx, zy, px, py)
    s2a = cross_sign(bx, by, zx, zy, ax, ay)
    if s1 == s1b or s2 == s2a:
        return OUTSIDE
    if s1 == 0 or s2 == 0:
        return BOUNDARY
    return INSIDE


@dataclass(frozen=True)
class PunctureSet:
    points: np.ndarray
    reach: float = field(init=False)
    hull: tuple = field(init=False)
    collinear: bool = field(init=False)

    def __post_init__(self):
        pts = as_points(self.points)
        if len(pts) == 0:
            raise InvalidInput("at least one puncture is required")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "reach", reach(pts))
        object.__setattr__(self, "collinear", _all_collinear(pts))
        object.__setattr__(self, "hull", () if self.collinear else _hull_ccw(pts))

    def __len__(self):
        return len(self.points)

    def to_list(self):
        return self.points.tolist()


def reach(points) -> float:
    """Half the minimum pairwise distance; +inf for a single puncture."""
    pts = as_points(points)
    if len(pts) == 0:
        raise InvalidInput("at least one puncture is required")
    if len(pts) == 1:
        return math.inf
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    iu = np.triu_indices(len(pts), 1)
    dmin = d[iu].min()
    if dmin == 0.0:
        raise InvalidInput("duplicate punctures")
    return 0.5 * float(dmin)


def _all_collinear(pts: np.ndarray) -> bool:
    if len(pts) <= 2:
        return True
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    p0, p1 = pts[order[0]], pts[order[-1]]
    d = p1 - p0
    c = d[0] * (pts[:, 1] - p0[1]) - d[1] * (pts[:, 0] - p0[0])
    scale = float(np.dot(d, d))
    return bool(np.all(np.abs(c) <= 1e-12 * scale))


def _hull_ccw(pts: np.ndarray) -> tuple:
    from scipy.spatial import ConvexHull

    return tuple(int(i) for i in ConvexHull(pts).vertices)


def side_of_line(anchor, direction, query) -> Side:
    a, d, q = as_point(anchor), as_point(direction), as_point(query)
    if d[0] == 0.0 and d[1] == 0.0:
        raise InvalidInput("zero direction")
    return Side(cross_sign(a[0], a[1], a[0] + d[0], a[1] + d[1], q[0], q[1]))


@dataclass(frozen=True)
class LensRegion:
    """Intersection of the open balls B(center1, radius) and B(center2, radius)."""

    center1: tuple
    center2: tuple
    radius: float

    @property
    def empty(self) -> bool:
        return math.dist(self.center1, self.center2) >= 2.0 * self.radius

    def contains(self, p) -> bool:
        return lens_contains(self, p)

    def box(self):
        """Oriented bounding box as (center, unit axis, half-length, half-width)."""
        c1 = np.asarray(self.center1, dtype=float)
        c2 = np.asarray(self.center2, dtype=float)
        d = float(np.hypot(*(c2 - c1)))
        axis = (c2 - c1) / d if d > 0.0 else np.array([1.0, 0.0])
        half_len = self.radius - 0.5 * d
        half_wid = math.sqrt(max(self.radius**2 - 0.25 * d * d, 0.0))
        return 0.5 * (c1 + c2), axis, half_len, half_wid


def lens_contains(lens: LensRegion, p) -> bool:
    a, b = lens.center1, lens.center2
    q = as_point(p)
    return bool(in_lens(a[0], a[1], b[0], b[1], lens.radius, q[0], q[1]))


@dataclass(frozen=True)
class Cut:
    """Half-plane pair supported by lines through the neighbours and a puncture.

    ``line1``/``line2`` are (anchor, unit direction) pairs through v_prev-z and
    v_next-z. ``keep_inside`` keeps the open cone H, otherwise the complement
    of its closure.
    """

    puncture: tuple
    v_prev: tuple
    v_next: tuple
    keep_inside: bool

    @property
    def line1(self):
        return _line(self.v_prev, self.puncture)

    @property
    def line2(self):
        return _line(self.v_next, self.puncture)

    def admits(self, p) -> bool:
        a, b, z = self.v_prev, self.v_next, self.puncture
        st = cone_status(a[0], a[1], b[0], b[1], z[0], z[1], p[0], p[1])
        return st == (INSIDE if self.keep_inside else OUTSIDE)


def _line(anchor, through):
    d = np.subtract(through, anchor)
    return tuple(anchor), tuple(d / np.hypot(*d))


@dataclass(frozen=True)
class MoveRegion:
    lens: LensRegion
    cuts: tuple = ()

    @property
    def cut(self) -> Optional[Cut]:
        """The cut for the puncture inside the lens, if there is one."""
        for c in self.cuts:
            if lens_contains(self.lens, c.puncture):
                return c
        return None

    def contains(self, p) -> bool:
        q = as_point(p)
        if not lens_contains(self.lens, q):
            return False
        return all(c.admits(q) for c in self.cuts)


def relevant_punctures(v_prev, v_next, eps, punctures: np.ndarray) -> np.ndarray:
    """Indices of punctures that can lie in a triangle (v_prev, w, v_next) with w in the lens.

    Such a puncture is within max(eps, |v_next - v_prev|) < 2 eps of both
    neighbours; anything farther never changes side.
    """
    a, b = np.asarray(v_prev), np.asarray(v_next)
    lim = (2.0 * eps) ** 2
    da = ((punctures - a) ** 2).sum(axis=1)
    db = ((punctures - b) ** 2).sum(axis=1)
    return np.flatnonzero((da < lim) & (db < lim))


def move_region(v_prev, v_cur, v_next, eps: float, Z: PunctureSet, *, guard="triangle") -> MoveRegion:
    """Region from which a moved vertex is drawn without changing the loop's class.

    With ``guard="lens"`` only a puncture inside the lens gets a cut, which is
    the literal construction. The default ``"triangle"`` applies the same cut
    to every puncture that some triangle (v_prev, w, v_next), w in the lens,
    could contain. A puncture outside the lens can still be swept by such a
    triangle, so the lens-only rule can change the class.
    """
    a, c, b = as_point(v_prev), as_point(v_cur), as_point(v_next)
    lens = LensRegion(tuple(a), tuple(b), float(eps))
    pts = Z.points
    in_d = [j for j in range(len(pts)) if lens_contains(lens, pts[j])]
    if len(in_d) > 1:
        raise AssertionError(f"lens holds {len(in_d)} punctures; eps must be below reach")
    if guard == "lens":
        idx = in_d
    elif guard == "triangle":
        idx = relevant_punctures(a, b, eps, pts)
    else:
        raise InvalidInput(f"unknown guard {guard!r}")
    cuts = []
    for j in idx:
        z = pts[j]
        if cross_sign(a[0], a[1], z[0], z[1], b[0], b[1]) == 0:
            raise DegenerateGeometry(f"neighbours collinear with puncture {int(j)}")
        st = cone_status(a[0], a[1], b[0], b[1], z[0], z[1], c[0], c[1])
        if st == BOUNDARY:
            raise DegenerateGeometry(f"moved vertex on a cut line of puncture {int(j)}")
        cuts.append(Cut(tuple(z), tuple(a), tuple(b), st == INSIDE))
    return MoveRegion(lens, tuple(cuts))


def sample_region(region: MoveRegion, rng: np.random.Generator, budget: int = REJECTION_BUDGET) -> np.ndarray:
    """Uniform point of ``region`` by rejection from the lens bounding box."""
    if region.lens.empty:
        raise SamplingFailure("empty lens", attempts=0)
    center, axis, hl, hw = region.lens.box()
    normal = np.array([-axis[1], axis[0]])
    for attempt in range(1, budget + 1):
        u, w = rng.uniform(-1.0, 1.0, size=2)
        p = center + (u * hl) * axis + (w * hw) * normal
        if region.contains(p):
            return p
    raise SamplingFailure(f"no point accepted after {budget} attempts", attempts=budget)
