"""Uniform-grid functions with exponential tail extrapolation."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import GridMismatch


@dataclass(frozen=True)
class Tail:
    """``(coeff + slope * t) * exp(rate * t)``; ``slope`` is nonzero only for
    a double exponent."""

    rate: float
    coeff: float
    slope: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", under="ignore"):
            return (self.coeff + self.slope * t) * np.exp(self.rate * t)


@dataclass(frozen=True, eq=False)
class GridFunction:
    t0: float
    dt: float
    values: np.ndarray
    left_tail: Tail | None = None
    right_tail: Tail | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.n - 1)

    def index_of(self, t: float) -> int:
        k = (t - self.t0) / self.dt
        i = int(round(k))
        if abs(k - i) > 1e-6 or not 0 <= i < self.n:
            raise GridMismatch(f"t={t} is not a node of the grid")
        return i

    def __call__(self, t):
        """Cubic-spline interpolation inside, tail extrapolation outside."""
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        inside = (t >= self.t0) & (t <= self.t_end)
        if np.any(inside):
            out[inside] = CubicSpline(self.t, self.values)(t[inside])
        left, right = t < self.t0, t > self.t_end
        if np.any(left):
            out[left] = self.left_tail(t[left]) if self.left_tail else self.values[0]
        if np.any(right):
            out[right] = self.right_tail(t[right]) if self.right_tail else self.values[-1]
        return out if out.ndim else float(out)

    def extended(self, n_left: int, n_right: int) -> np.ndarray:
        """Values on the grid padded by ``n_left`` / ``n_right`` tail nodes."""
        parts = []
        if n_left > 0:
            tl = self.t0 - self.dt * np.arange(n_left, 0, -1)
            parts.append(self.left_tail(tl) if self.left_tail else np.full(n_left, self.values[0]))
        parts.append(self.values)
        if n_right > 0:
            tr = self.t_end + self.dt * np.arange(1, n_right + 1)
            parts.append(self.right_tail(tr) if self.right_tail else np.full(n_right, self.values[-1]))
        return np.concatenate(parts)

    def tail_fit_errors(self, fraction: float = 0.1) -> tuple[float, float]:
        """Max relative error of each tail descriptor on the outer ``fraction``
        of the samples (nan where no tail is declared)."""
        m = max(2, int(self.n * fraction))
        t = self.t
        out = []
        for tail, sl in ((self.left_tail, slice(0, m)), (self.right_tail, slice(self.n - m, self.n))):
            if tail is None:
                out.append(math.nan)
                continue
            ref = self.values[sl]
            with np.errstate(divide="ignore", invalid="ignore"):
                rel = np.abs(tail(t[sl]) - ref) / np.abs(ref)
            out.append(float(np.nanmax(rel)))
        return out[0], out[1]

    def to_csv(self, name: str = "v") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", name])
        for ti, vi in zip(self.t, self.values):
            w.writerow([f"{ti:.17g}", f"{vi:.17g}"])
        return buf.getvalue()


def uniform_grid(L: float, dt: float) -> np.ndarray:
    """Symmetric grid on [-L, L] with 0 as a node; L/dt must be an integer."""
    n = L / dt
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise GridMismatch(f"L/dt must be an integer (L={L}, dt={dt})")
    n = int(round(n))
    return dt * np.arange(-n, n + 1)


def simpson(y: np.ndarray, dt: float) -> float:
    """Composite Simpson rule; falls back to a 3/8 panel for even sample counts."""
    n = y.size
    if n < 3:
        return float(np.sum(y) * dt) if n == 1 else float(0.5 * dt * (y[0] + y[-1]))
    if n % 2 == 1:
        return float(dt / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum()))
    head = 3 * dt / 8 * (y[0] + 3 * y[1] + 3 * y[2] + y[3])
    return float(head + simpson(y[3:], dt))


@dataclass(frozen=True)
class GridSpec:
    """Symmetric grid ``[-L, L]`` with spacing ``dt``."""

    L: float
    dt: float

    def __post_init__(self):
        if not (self.L > 0 and self.dt > 0):
            raise ValueError("L and dt must be positive")

    @property
    def n_half(self) -> int:
        return int(round(self.L / self.dt))

    @property
    def t(self) -> np.ndarray:
        return uniform_grid(self.L, self.dt)

    @classmethod
    def snapped(cls, L: float, dt: float) -> "GridSpec":
        """Round ``L`` up to a whole number of steps."""
        return cls(math.ceil(L / dt - 1e-9) * dt, dt)
