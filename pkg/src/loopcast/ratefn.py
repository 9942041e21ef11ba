"""Log-moment generating function of the uniform disk law and its Legendre dual.

For X uniform on the disk B_R, E exp(<X, eta>) depends only on s = |eta| and
equals 2 I_1(sR) / (sR). Both functions are radial, so everything here is a
function of one non-negative variable. The dual's effective domain is [0, R).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import InvalidInput

LOG2 = float(np.log(2.0))


def _log_i1_over_x(x):
    """log(2 I_1(x) / x) for x >= 0, stable for large x."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    small = x < 1e-4
    xs = x[small]
    # 2 I_1(x)/x = 1 + x^2/8 + x^4/192 + ...
    out[small] = np.log1p(xs * xs / 8.0 + xs**4 / 192.0)
    xl = x[~small]
    out[~small] = LOG2 + np.log(special.ive(1, xl)) + xl - np.log(xl)
    return out


def _bessel_ratio(x):
    """g(x) = I_2(x) / I_1(x), increasing from 0 to 1."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e-4
    out[small] = x[small] / 4.0
    xl = x[~small]
    out[~small] = special.ive(2, xl) / special.ive(1, xl)
    return out


def _bessel_ratio_prime(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e-4
    out[small] = 0.25
    xl = x[~small]
    i0, i1, i2 = special.ive(0, xl), special.ive(1, xl), special.ive(2, xl)
    out[~small] = 1.0 - i2 / (xl * i1) - i0 * i2 / (i1 * i1)
    return out


@dataclass(frozen=True)
class RadialRate:
    """Radial profiles of Lambda and Lambda* for the uniform law on B_R.

    ``s_max`` caps the dual variable near the edge of the domain; values
    computed at the cap are flagged as saturated.
    """

    R: float
    tol: float = 1e-10
    s_max_factor: float = 1e4

    def __post_init__(self):
        if not self.R > 0:
            raise InvalidInput("R must be positive")

    @property
    def s_max(self) -> float:
        return self.s_max_factor / self.R

    def lmgf(self, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < 0):
            raise InvalidInput("lmgf is defined here for s >= 0")
        out = _log_i1_over_x(s_arr * self.R)
        return float(out) if out.ndim == 0 else out

    def lmgf_prime(self, s):
        out = self.R * _bessel_ratio(np.asarray(s, dtype=float) * self.R)
        return float(out) if out.ndim == 0 else out

    def dual(self, r):
        """(value, maximizing s, saturated) arrays for the supremum over s >= 0."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0):
            raise InvalidInput("rate_star takes r >= 0")
        rho = r / self.R
        value = np.full_like(r, np.inf)
        s_opt = np.full_like(r, np.inf)
        saturated = np.zeros(r.shape, dtype=bool)
        inside = rho < 1.0
        if inside.any():
            x = _solve_ratio(rho[inside], self.s_max * self.R, self.tol * self.R)
            cap = x >= self.s_max * self.R
            s = x / self.R
            value[inside] = r[inside] * s - _log_i1_over_x(x)
            s_opt[inside] = s
            saturated[inside] = cap
        return value, s_opt, saturated

    def rate_star(self, r):
        value, _, _ = self.dual(r)
        return float(value[0]) if np.ndim(r) == 0 else value


def _solve_ratio(rho, x_cap, xtol):
    """Solve g(x) = rho on [0, x_cap] by safeguarded Newton; g is increasing."""
    rho = np.asarray(rho, dtype=float)
    lo = np.zeros_like(rho)
    hi = np.full_like(rho, x_cap)
    # asymptotic start: g(x) ~ x/4 near 0 and 1 - 3/(2x) at infinity
    x = np.where(rho < 0.5, 4.0 * rho, 1.5 / np.maximum(1.0 - rho, 1e-300))
    x = np.clip(x, 0.0, x_cap)
    capped = _bessel_ratio(np.full_like(rho, x_cap)) <= rho
    for _ in range(200):
        f = _bessel_ratio(x) - rho
        lo = np.where(f < 0, x, lo)
        hi = np.where(f > 0, x, hi)
        step = f / _bessel_ratio_prime(x)
        xn = x - step
        bad = ~((xn > lo) & (xn < hi))
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= xtol * np.maximum(1.0, x) * 1e-3
        x = xn
        if np.all(done | (f == 0)):
            break
    x = np.where(rho == 0, 0.0, x)
    return np.where(capped, x_cap, x)


def lmgf(rr: RadialRate, s):
    return rr.lmgf(s)


def rate_star(rr: RadialRate, r):
    return rr.rate_star(r)


def loop_rate(rr: RadialRate, loop) -> float:
    """Sum over edges of Lambda*(speed)/(n+1) with speed (n+1)|edge|."""
    lens = loop.edge_lengths()
    m = len(lens)
    speeds = m * lens
    if np.any(speeds >= rr.R):
        return float("inf")
    return float(rr.rate_star(speeds).sum() / m)
