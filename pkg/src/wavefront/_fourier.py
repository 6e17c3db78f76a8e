"""Inverse transform of 1/chi on the imaginary axis with the xi=0 part removed.

    1/chi = 1/q + xi E / (q chi),   q(z) = z^2 - cz - d,   E(z) = e^{-chz} khat(z)

The first term inverts in closed form. The second decays like |u|^-4 and is
summed by the trapezoid rule in u, which for a period P much longer than the
decay length of v is accurate up to the truncation at |u| = U.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import NotHyperbolic, QuadratureTolExceeded

TRUNCATION_TOL = 1e-13
MAX_NODES = 1 << 23


def _emax(kernel, U: float) -> float:
    """Bound for sup_{|u| >= U} |khat(iu)|."""
    if kernel.family == "gaussian":
        return math.exp(-0.5 * kernel.sigma**2 * U * U)
    if kernel.family == "uniform":
        return min(1.0, 1.0 / (kernel.a * U))
    return 1.0


def truncation_bound(kernel, xi: float, d: float, U: float, extra_decay: bool = False) -> float:
    """Bound on (1/2pi) int_{|u|>U} |xi E / (q chi)| du for U^2 > 2 xi + d."""
    e = _emax(kernel, U)
    if extra_decay:
        e *= _emax(kernel, U)
    denom = U * U - xi * e
    if denom <= 0:
        return math.inf
    return xi * e / (math.pi * denom * U)


class FourierCorrection:
    """Correction ``v - v0`` sampled through a folded FFT, with direct sums
    available off the grid. ``convolved=True`` includes one more factor of
    khat, i.e. it returns the correction of ``K * v``."""

    def __init__(self, params, P: float, dt: float, tol: float = TRUNCATION_TOL):
        self.params = params
        c, d, xi, ch, k = params.c, params.d, params.xi, params.ch, params.kernel
        self.M = int(math.ceil(P / dt))
        self.dt = dt
        self.du = 2 * math.pi / (self.M * dt)
        U = max(8.0, math.sqrt(2 * (abs(xi) + d)) + 1.0)
        while truncation_bound(k, xi, d, U) > tol:
            U *= 1.25
            if U / self.du > MAX_NODES:
                break
        self.U = U
        self.K = int(math.ceil(U / self.du))
        self.error_bound = truncation_bound(k, xi, d, self.K * self.du)
        if self.error_bound > 1e-9:
            raise QuadratureTolExceeded("truncation bound above 1e-9", estimate=None,
                                        error_bound=self.error_bound)
        u = self.du * np.arange(0, self.K + 1)
        z = 1j * u
        kh = k.fourier(u)
        E = np.exp(-1j * u * ch) * kh
        q = z * z - c * z - d
        chi = q - xi * E
        if np.min(np.abs(chi)) < 1e-12:
            raise NotHyperbolic("chi vanishes on the imaginary axis")
        self.u = u
        self.G = xi * E / (q * chi)
        self.kh = kh

    def _weights(self, convolved: bool, shift: float):
        w = self.G * self.kh if convolved else self.G.copy()
        if shift:
            w = w * np.exp(-1j * self.u * shift)
        w[0] *= 0.5
        return w

    def on_grid(self, n_half: int | np.ndarray, convolved: bool = False, shift: float = 0.0) -> np.ndarray:
        """Values at t = j dt for j = -n_half..n_half, or for an integer index array."""
        j = np.arange(-n_half, n_half + 1) if np.isscalar(n_half) else np.asarray(n_half)
        if 2 * np.max(np.abs(j)) + 1 > self.M:
            raise ValueError("grid longer than the transform period")
        w = self._weights(convolved, shift)
        H = np.zeros(self.M, dtype=complex)
        idx = np.arange(self.K + 1) % self.M
        np.add.at(H, idx, w)
        # sum_k w_k e^{i u_k t} over u >= 0; the u < 0 half is the conjugate
        s = np.fft.ifft(H) * self.M
        return (self.du / math.pi) * s[j % self.M].real

    def at(self, t, convolved: bool = False, shift: float = 0.0) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        w = self._weights(convolved, shift)
        out = np.empty(t.size)
        for i, ti in enumerate(t):
            out[i] = (self.du / math.pi) * np.sum(w * np.exp(1j * self.u * ti)).real
        return out
