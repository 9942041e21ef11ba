"""Post-processing of saved chains: mean free loop, vertex density, concentration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import gaussian_kde

from .errors import IntegrityError, InvalidInput
from .loops import PLLoop, loop_distance

ALIGNMENT_NOTE = (
    "mean loop aligned by cyclic vertex shift only; the average of aligned loops "
    "need not lie in the sampled homotopy class"
)


def _vertex_arrays(samples):
    arrs = [np.asarray(getattr(s, "vertices", s), dtype=float) for s in samples]
    if not arrs:
        raise InvalidInput("no samples")
    m = len(arrs[0])
    if any(len(a) != m for a in arrs):
        raise InvalidInput("samples have mixed vertex counts")
    return arrs


def best_shift(anchor: np.ndarray, sample: np.ndarray) -> int:
    """Cyclic shift k minimising |roll(sample, -k) - anchor|^2."""
    m = len(anchor)
    idx = (np.arange(m)[:, None] + np.arange(m)[None, :]) % m
    d = ((sample[idx] - anchor[None, :, :]) ** 2).sum(axis=(1, 2))
    return int(np.argmin(d))


def mean_free_loop(samples) -> PLLoop:
    arrs = _vertex_arrays(samples)
    anchor = arrs[0]
    acc = np.zeros_like(anchor)
    for a in arrs:
        acc += np.roll(a, -best_shift(anchor, a), axis=0)
    return PLLoop(acc / len(arrs))


@dataclass
class DensityGrid:
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    nx: int
    ny: int
    values: np.ndarray  # shape (nx, ny), values[i, j] at (x_i, y_j)

    @property
    def dx(self):
        return (self.xmax - self.xmin) / self.nx

    @property
    def dy(self):
        return (self.ymax - self.ymin) / self.ny

    def centers(self):
        xs = self.xmin + (np.arange(self.nx) + 0.5) * self.dx
        ys = self.ymin + (np.arange(self.ny) + 0.5) * self.dy
        return xs, ys

    def integral(self) -> float:
        return float(self.values.sum() * self.dx * self.dy)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# xmin={self.xmin!r},xmax={self.xmax!r},ymin={self.ymin!r},ymax={self.ymax!r},nx={self.nx},ny={self.ny}\n")
            for row in self.values:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "DensityGrid":
        lines = Path(path).read_text().splitlines()
        head = dict(kv.split("=") for kv in lines[0].lstrip("# ").split(","))
        vals = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:] if ln])
        return cls(float(head["xmin"]), float(head["xmax"]), float(head["ymin"]), float(head["ymax"]),
                   int(head["nx"]), int(head["ny"]), vals)


@dataclass(frozen=True)
class GridSpec:
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    nx: int = 100
    ny: int = 100

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin and self.nx >= 1 and self.ny >= 1):
            raise InvalidInput("degenerate grid")

    @classmethod
    def around(cls, points, pad=0.5, nx=100, ny=100):
        P = np.asarray(points, dtype=float)
        lo, hi = P.min(axis=0) - pad, P.max(axis=0) + pad
        return cls(float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]), nx, ny)


def kde(samples, grid: GridSpec, bandwidth=None) -> DensityGrid:
    """Gaussian KDE of all vertex positions pooled; Scott's rule unless ``bandwidth`` is given.

    ``bandwidth`` is the kernel factor in the sense of scipy's ``bw_method``.
    """
    arrs = _vertex_arrays(samples)
    pts = np.vstack(arrs)
    xs = grid.xmin + (np.arange(grid.nx) + 0.5) * (grid.xmax - grid.xmin) / grid.nx
    ys = grid.ymin + (np.arange(grid.ny) + 0.5) * (grid.ymax - grid.ymin) / grid.ny
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    spread = np.ptp(pts, axis=0)
    if np.any(spread == 0.0):
        # singular covariance: fall back to an isotropic kernel of one cell width
        h = bandwidth if bandwidth is not None else max((grid.xmax - grid.xmin) / grid.nx, (grid.ymax - grid.ymin) / grid.ny)
        d2 = ((X.ravel()[:, None] - pts[None, :, 0]) ** 2 + (Y.ravel()[:, None] - pts[None, :, 1]) ** 2)
        vals = np.exp(-0.5 * d2 / h**2).sum(axis=1)
    else:
        est = gaussian_kde(pts.T, bw_method=bandwidth if bandwidth is not None else "scott")
        vals = est(np.vstack([X.ravel(), Y.ravel()]))
    vals = vals.reshape(grid.nx, grid.ny)
    out = DensityGrid(grid.xmin, grid.xmax, grid.ymin, grid.ymax, grid.nx, grid.ny, vals)
    total = out.integral()
    if not total > 0:
        raise InvalidInput("all density mass falls outside the grid")
    out.values = vals / total
    return out


def segment_distance(points, polygon) -> np.ndarray:
    """Distance from each point to the closed polygon's image."""
    P = np.asarray(points, dtype=float)
    A = np.asarray(polygon, dtype=float)
    if len(A) == 1:
        return np.hypot(*(P - A[0]).T)
    B = np.roll(A, -1, axis=0)
    d = B - A
    L2 = (d**2).sum(axis=1)
    L2 = np.where(L2 > 0, L2, 1.0)
    t = ((P[:, None, :] - A[None]) * d[None]).sum(axis=2) / L2[None]
    t = np.clip(t, 0.0, 1.0)
    Q = A[None] + t[..., None] * d[None]
    return np.sqrt(((P[:, None, :] - Q) ** 2).sum(axis=2)).min(axis=1)


def top_cells_near(grid: DensityGrid, polygon, radius: float, quantile: float = 0.9) -> float:
    """Fraction of cells at or above the density ``quantile`` lying within ``radius`` of the polygon."""
    xs, ys = grid.centers()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    thr = np.quantile(grid.values, quantile)
    sel = grid.values >= thr
    pts = np.column_stack([X[sel], Y[sel]])
    return float(np.mean(segment_distance(pts, polygon) <= radius))


def _stats(x):
    x = np.asarray(x, dtype=float)
    return {"min": float(x.min()), "median": float(np.median(x)), "mean": float(x.mean()), "max": float(x.max())}


@dataclass
class ConcentrationReport:
    deltas: list
    fractions: list
    length_stats: dict
    excess_over_lstar: dict
    lstar: float
    distance: str = "cyclic discrete Frechet (vertex sequences)"
    note: str = ALIGNMENT_NOTE
    distances: list = field(default_factory=list, repr=False)

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("distances")
        return json.dumps(d, indent=2, sort_keys=True)


def concentration_report(trace, sl, deltas, tol=1e-9) -> ConcentrationReport:
    deltas = [float(d) for d in deltas]
    if deltas != sorted(deltas):
        raise InvalidInput("deltas must be sorted ascending")
    loops = list(trace.loops)
    if not loops:
        raise InvalidInput("empty trace")
    lengths = np.array([lp.length() for lp in loops])
    if np.any(lengths < sl.length - tol):
        raise IntegrityError("saved loop shorter than the shortest loop of the class")
    dist = []
    for lp, d in zip(loops, getattr(trace, "distances", [None] * len(loops)) or [None] * len(loops)):
        dist.append(d if d is not None else loop_distance(lp, sl.polygon))
    dist = np.array(dist)
    fractions = [float(np.mean(dist <= d)) for d in deltas]
    return ConcentrationReport(
        deltas, fractions, _stats(lengths), _stats(lengths - sl.length), float(sl.length), distances=dist.tolist()
    )
