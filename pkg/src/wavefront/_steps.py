"""Method of steps for u'' - cu' - du - xi*u(t - ch) = 0, solved in closed form.

On the k-th delay interval the solution is an exponential polynomial
``P_a(tau) e^{a tau} + P_b(tau) e^{b tau}`` in the local variable
``tau = t - k ch``, where a > 0 > b are the zeros of z^2 - cz - d. The
forcing of each step is the previous piece, so every step is solved exactly
by undetermined coefficients. The arithmetic runs in mpmath because the
decaying solution is the difference of terms growing like e^{lambda0 t}.
"""
from __future__ import annotations

import math

import mpmath
import numpy as np
from mpmath.libmp import to_fixed

from .errors import HorizonExceeded

MAX_DPS = 400
HARD_DPS = 2 * MAX_DPS  # cap after the excess-digit rebuild
MAX_STEPS = 5000


def required_dps(gap: float, T: float) -> int:
    """Decimal digits needed to resolve a decay of e^{-gap T} against growth."""
    return int(math.ceil(gap * T / math.log(10.0))) + 25


def _poly_eval(coeffs, x):
    acc = coeffs[-1]
    for cf in reversed(coeffs[:-1]):
        acc = acc * x + cf
    return acc


def _fixed_horner(coeffs, x: int, bits: int) -> int:
    acc = coeffs[-1]
    for cf in reversed(coeffs[:-1]):
        acc = ((acc * x) >> bits) + cf
    return acc


def _poly_deriv(coeffs):
    return [j * coeffs[j] for j in range(1, len(coeffs))] or [0 * coeffs[0]]


class StepSolution:
    """Exact solution ``u = e^{lambda0 t} + W`` on ``[0, T]``.

    ``W`` vanishes on the history interval, so the growing mode enters only
    through the explicit exponential and the pieces of ``W`` stay exact.
    """

    def __init__(self, c: float, h: float, d: float, xi: float, lambda0_guess: float, T: float, gap: float):
        if not (c * h > 0 and xi > 0):
            raise ValueError("method of steps needs ch > 0 and xi > 0")
        dps = required_dps(gap, T)
        if dps > MAX_DPS:
            raise HorizonExceeded(f"horizon T={T:g} needs {dps} digits (cap {MAX_DPS})")
        n_steps = int(math.ceil(T / (c * h))) + 1
        if n_steps > MAX_STEPS:
            raise HorizonExceeded(f"horizon T={T:g} needs {n_steps} delay steps (cap {MAX_STEPS})")
        self.T = T
        self._set_precision(dps, c, d, xi, h, lambda0_guess)
        ctx = self.ctx
        # u'(0) = lambda0 - chi'(lambda0), the jump condition of the fundamental solution
        u1 = self.lambda0 - self.chi_prime0
        alt = -(self.lambda0 - self.c + self.xi * self.ch * ctx.exp(-self.lambda0 * self.ch))
        assert abs(u1 - alt) <= ctx.mpf(10) ** (-dps + 10) * (1 + abs(u1))
        self.pieces = self._build(n_steps, dps)
        # the pieces can be much larger than e^{lambda0 t}, which costs digits
        # beyond the gap estimate; rebuild once with those digits added
        extra = self._excess_digits()
        if extra > 0:
            dps += extra + 5
            if dps > HARD_DPS:
                raise HorizonExceeded(f"horizon T={T:g} needs {dps} digits (cap {HARD_DPS})")
            self._set_precision(dps, c, d, xi, h, lambda0_guess)
            self.pieces = self._build(n_steps, dps)
        self.dps = dps

    def _set_precision(self, dps, c, d, xi, h, lambda0_guess):
        self.ctx = ctx = mpmath.mp.clone()
        ctx.dps = dps
        self._fixbits = ctx.prec + 16
        self._fixed = {}
        mpf = ctx.mpf
        self.c, self.d, self.xi = mpf(c), mpf(d), mpf(xi)
        self.ch = mpf(c) * mpf(h)
        disc = ctx.sqrt(self.c**2 + 4 * self.d)
        self.a = (self.c + disc) / 2
        self.b = (self.c - disc) / 2
        chi = lambda z: z * z - self.c * z - self.d - self.xi * ctx.exp(-self.ch * z)
        self.lambda0 = ctx.findroot(chi, mpf(lambda0_guess))
        self.chi_prime0 = 2 * self.lambda0 - self.c + self.xi * self.ch * ctx.exp(-self.lambda0 * self.ch)

    def _excess_digits(self) -> int:
        """log10 of the largest piece term relative to e^{lambda0 t} at its step."""
        ctx, ch = self.ctx, self.ch
        worst = ctx.mpf(1)
        for k, (Pa, Pb) in enumerate(self.pieces):
            size = (sum(abs(q) * ch**j for j, q in enumerate(Pa)) * ctx.exp(self.a * ch)
                    + sum(abs(q) * ch**j for j, q in enumerate(Pb)))
            worst = max(worst, size / ctx.exp(self.lambda0 * k * ch))
        return int(math.ceil(float(ctx.log10(worst))))

    def _build(self, n_steps: int, dps: int):
        ctx, a, b, ch, xi = self.ctx, self.a, self.b, self.ch, self.xi
        ea, eb = ctx.exp(a * ch), ctx.exp(b * ch)
        w1 = -self.chi_prime0
        A = w1 / (a - b)
        pieces = [([A], [-A])]
        floor = ctx.mpf(10) ** (-dps)
        for _ in range(1, n_steps):
            Pa, Pb = pieces[-1]
            # value and slope of the previous piece at tau = ch
            w0 = _poly_eval(Pa, ch) * ea + _poly_eval(Pb, ch) * eb
            w1 = ((_poly_eval(_poly_deriv(Pa), ch) + a * _poly_eval(Pa, ch)) * ea
                  + (_poly_eval(_poly_deriv(Pb), ch) + b * _poly_eval(Pb, ch)) * eb)
            Qa = self._particular(Pa, 2 * a - self.c)
            Qb = self._particular(Pb, 2 * b - self.c)
            slope_p = (Qa[1] if len(Qa) > 1 else 0) + (Qb[1] if len(Qb) > 1 else 0)
            A = (w1 - slope_p - b * w0) / (a - b)
            B = w0 - A
            Qa[0] += A
            Qb[0] += B
            pieces.append((self._trim(Qa, floor), self._trim(Qb, floor)))
        return pieces

    def _particular(self, P, beta):
        """Q with Q(0) = 0 and Q'' + beta Q' = xi P."""
        n = len(P)
        R = [None] * n
        R[n - 1] = self.xi * P[n - 1] / beta
        for j in range(n - 2, -1, -1):
            R[j] = (self.xi * P[j] - (j + 1) * R[j + 1]) / beta
        return [self.ctx.mpf(0)] + [R[j] / (j + 1) for j in range(n)]

    def _trim(self, Q, floor):
        ch = self.ch
        mags = [abs(q) * ch**j for j, q in enumerate(Q)]
        top = max(mags)
        if top == 0:
            return Q[:1]
        k = len(Q)
        while k > 1 and mags[k - 1] < floor * top:
            k -= 1
        return Q[:k]

    def u(self, t) -> np.ndarray:
        """u on t >= 0 (history value e^{lambda0 t} for t < 0)."""
        ctx = self.ctx
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.size)
        for i, ti in enumerate(t):
            out[i] = float(self._u_mp(ctx.mpf(ti)))
        return out

    def _u_mp(self, t):
        ctx = self.ctx
        base = ctx.exp(self.lambda0 * t)
        if t <= 0:
            return base
        k = int(ctx.floor(t / self.ch))
        if k >= len(self.pieces):
            raise HorizonExceeded(f"t={float(t):g} lies beyond the solved horizon")
        tau = t - k * self.ch
        Pa, Pb = self._fixed_piece(k)
        x = to_fixed(tau._mpf_, self._fixbits)
        pa = ctx.ldexp(ctx.mpf(_fixed_horner(Pa, x, self._fixbits)), -self._fixbits)
        pb = ctx.ldexp(ctx.mpf(_fixed_horner(Pb, x, self._fixbits)), -self._fixbits)
        return base + pa * ctx.exp(self.a * tau) + pb * ctx.exp(self.b * tau)

    def _fixed_piece(self, k):
        # Horner in fixed-point integers is far cheaper than in mpf. The
        # absolute error 2^-bits is below |v| because u >= e^{lambda0 t} >= 1
        # carries the working digits.
        cache = self._fixed
        if k not in cache:
            cache[k] = tuple([to_fixed(q._mpf_, self._fixbits) for q in P] for P in self.pieces[k])
        return cache[k]

    def v(self, t) -> np.ndarray:
        """Fundamental solution -u / chi'(lambda0)."""
        scale = -1.0 / float(self.chi_prime0)
        return scale * self.u(t)
