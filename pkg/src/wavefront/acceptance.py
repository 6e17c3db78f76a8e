"""The acceptance suite run by ``wavefront verify`` and by the test suite.

Every criterion builds its own fixtures; criteria 8 to 10 share one front
solve through a small cache. Each check records the measured value next to
the tolerance it was compared against.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .charfun import CharParams, c_sharp, domain_map, xi_star, xi_star_bisection
from .errors import WavefrontError
from .frontsolve import SolverConfig, solve_front, uniqueness_probe
from .fundsol import apply_resolvent, check_fundsol, fundamental_solution, jump_estimates
from .grid import GridFunction, GridSpec, uniform_grid
from .model import KernelSpec, ModelSpec, NonlinearitySpec, build_nonlinearity
from .reduction import reduce_model

DIRAC = KernelSpec()
GAUSS = KernelSpec("gaussian", sigma=0.5)
NICHOLSON6 = NonlinearitySpec("nicholson", p=6.0, delta=1.0)
LOCAL_RUN = ModelSpec(DIRAC, NICHOLSON6, h=0.2, c=5.0)


@dataclass
class Check:
    name: str
    value: float
    tol: float
    kind: str = "<="  # "<=", ">=", "<", ">"

    @property
    def passed(self) -> bool:
        v, t = self.value, self.tol
        if isinstance(v, float) and math.isnan(v):
            return False
        return {"<=": v <= t, ">=": v >= t, "<": v < t, ">": v > t}[self.kind]

    def line(self) -> str:
        mark = "ok  " if self.passed else "FAIL"
        return f"    [{mark}] {self.name} = {self.value:.6g} ({self.kind} {self.tol:.3g})"


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list = field(default_factory=list)
    runtime: float = 0.0
    runtime_target: float = math.inf
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks) and self.runtime < self.runtime_target

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} criterion {self.number:2d}: {self.title} "
                f"[{self.runtime:.2f} s, target < {self.runtime_target:g} s]")

    def detail_lines(self) -> list[str]:
        out = [c.line() for c in self.checks]
        if self.error:
            out.append(f"    error: {self.error}")
        return out


class _Cache(dict):
    def front(self):
        if "front" not in self:
            self["front"] = solve_front(LOCAL_RUN, SolverConfig())
        return self["front"]


def _max_abs(a) -> float:
    return float(np.max(np.abs(a)))


def c01_closed_form(ctx) -> list:
    p = CharParams(c=0.0, h=0.0, d=1.0, xi=0.0, kernel=DIRAC)
    fs = fundamental_solution(p, GridSpec(10.0, 0.01))
    t = np.linspace(-10, 10, 4001)
    err = _max_abs(fs(t) + 0.5 * np.exp(-np.abs(t)))
    return [Check("sup |v + e^-|t|/2| on [-10, 10]", err, 1e-8)]


def c02_cross_method(ctx) -> list:
    p = CharParams(c=1.0, h=1.0, d=1.0, xi=0.5, kernel=DIRAC)
    grid = GridSpec(40.0, 0.01)
    a = fundamental_solution(p, grid, method="local_steps")
    b = fundamental_solution(p, grid, method="fourier_subtraction")
    t = np.linspace(0.0, 10.0, 1001)
    return [Check("sup |v_steps - v_fourier| on [0, 10]", _max_abs(a(t) - b(t)), 1e-5)]


JUMP_CASES = [
    ("dirac c=1 h=1 xi=0.5", CharParams(c=1.0, h=1.0, xi=0.5, kernel=DIRAC)),
    ("dirac c=3 h=0.5 xi=1", CharParams(c=3.0, h=0.5, xi=1.0, kernel=DIRAC)),
    ("gaussian sigma=0.5 c=2 h=0.5 xi=0.3", CharParams(c=2.0, h=0.5, xi=0.3, kernel=GAUSS)),
]


def c03_jumps(ctx) -> list:
    out = []
    for name, p in JUMP_CASES:
        fs = fundamental_solution(p, GridSpec(30.0, 0.01))
        d1, d2 = jump_estimates(fs, 1e-3)
        out.append(Check(f"{name}: |dv' - 1|", abs(d1 - 1.0), 1e-3))
        out.append(Check(f"{name}: |dv'' - c|", abs(d2 - p.c), 1e-2))
    return out


def c04_shape(ctx) -> list:
    out = []
    xs = xi_star(1.0, 1.0, DIRAC)
    cases = [(f"dirac xi={f}xi*", CharParams(c=1.0, h=1.0, xi=f * xs, kernel=DIRAC))
             for f in (0.0, 0.25, 0.5, 0.75, 1.0)]
    cases.append(("gaussian sigma=0.5 c=2 h=0.5 xi=0.3", JUMP_CASES[2][1]))
    grid = GridSpec(40.0, 0.01)
    for name, p in cases:
        rep = check_fundsol(fundamental_solution(p, grid))
        out.append(Check(f"{name}: max v", rep.max_value, 0.0, "<"))
        out.append(Check(f"{name}: |argmin|", abs(rep.argmin), grid.dt * (1 + 1e-9)))
        out.append(Check(f"{name}: monotonicity violation (t<=0)", rep.monotone_violation_left, 1e-12))
        out.append(Check(f"{name}: monotonicity violation (t>=0)", rep.monotone_violation_right, 1e-12))
        out.append(Check(f"{name}: min second difference (t<=0)", -rep.convexity_violation_left, -1e-10, ">="))
    p = CharParams(c=1.0, h=1.0, xi=1.5 * xs, kernel=DIRAC)
    v = fundamental_solution(p, grid).samples.values
    out.append(Check("dirac xi=1.5xi*: max v", float(v.max()), 0.0, ">"))
    return out


def c05_xi_star(ctx) -> list:
    z = (3.0 - math.sqrt(33.0)) / 2.0
    a = xi_star(1.0, 1.0, DIRAC)
    b = xi_star(5.0, 0.2, DIRAC)
    oracle_b = (5.0 - 2.0 * z) * math.exp(z)
    return [Check("|xi*(1, 1) - 5 e^-2|", abs(a - 5.0 * math.exp(-2.0)), 1e-8),
            Check("|xi*(5, 0.2) - (c - 2z) e^z|", abs(b - oracle_b), 1e-8),
            Check("|xi*(5, 0.2) - bisection|", abs(b - xi_star_bisection(5.0, 0.2, DIRAC)), 1e-8)]


def c06_c_sharp(ctx) -> list:
    out = []
    for p in (2.0, 6.0):
        m = ModelSpec(DIRAC, NonlinearitySpec("nicholson", p=p), 0.0, 0.0)
        out.append(Check(f"g'(0)={p:g}: |c#(0) - 2 sqrt(g'(0) - 1)|",
                         abs(c_sharp(0.0, m) - 2.0 * math.sqrt(p - 1.0)), 1e-8))
    m = ModelSpec(DIRAC, NICHOLSON6, 0.0, 0.0)
    vals = [c_sharp(h, m) for h in (0.0, 0.25, 0.5, 1.0, 2.0)]
    out.append(Check("min_k c#(h_k) - c#(h_k+1)", float(min(-np.diff(vals))), 1e-10, ">="))
    return out


def c07_kernel_n(ctx) -> list:
    red = reduce_model(LOCAL_RUN, dt=0.01)
    out = [Check("|int N - 1|", red.mass_error, 1e-6)]
    out += [Check(f"Laplace probe z={z:.4g}: relative error", e, 1e-5) for z, e in red.laplace_errors]
    out.append(Check("min N", float(red.N.values.min()), 0.0, ">"))
    return out


def _front_checks(sol, yp_tol: float) -> list:
    rep = sol.diagnostics
    k = sol.kappa
    fd = float(np.min(np.diff(sol.profile.values)))
    return [Check("iterations", sol.iterations, 5000),
            Check("min forward difference / kappa", fd / k, -1e-12, ">="),
            Check("residual_yp / kappa", rep.residual_yp / k, yp_tol),
            Check("residual_ftc", rep.residual_ftc, 1e-9),
            Check("phi(-L)", rep.left_boundary_gap, 1e-3),
            Check("kappa - phi(L)", rep.right_boundary_gap, 1e-3),
            Check("|slope / mu0 - 1|", abs(rep.decay_rate_left / sol.mu0 - 1.0), 0.02)]


def c08_front_local(ctx) -> list:
    return _front_checks(ctx.front(), 1e-4)


def c09_ordering(ctx) -> list:
    sol = ctx.front()
    return [Check("max_j max_t (phi_j+1 - phi_j) / kappa", sol.max_increase / sol.kappa, 1e-12)]


def c10_uniqueness(ctx) -> list:
    diff = uniqueness_probe(LOCAL_RUN, SolverConfig(), shift=2.0, first=ctx.front())
    return [Check("sup |phi - psi|", diff, 1e-4)]


def pick_dl_point(model: ModelSpec, h: float = 0.2, c_range=(3.0, 7.0, 0.5)) -> tuple[float, float]:
    """The D_L cell of a one-row domain map farthest from both domain edges."""
    dm = domain_map((h, h, 1.0), c_range, model)
    best, score = None, -math.inf
    for hh, c, mem in dm.cells:
        if mem is None or not mem.in_DL:
            continue
        s = min(c - mem.c_sharp_at_h, mem.margin_kappa)
        if s > score:
            best, score = (hh, c), s
    if best is None:
        raise WavefrontError("no D_L cell on the sampled row")
    return best


def c11_front_nonlocal(ctx) -> list:
    base = ModelSpec(GAUSS, NICHOLSON6, 0.0, 0.0)
    h, c = pick_dl_point(base)
    sol = solve_front(base.at(h=h, c=c), SolverConfig())
    out = _front_checks(sol, 5e-4)
    out.insert(0, Check(f"picked (h, c) = ({h:g}, {c:g}): c - c#(h)", c - c_sharp(h, base), 0.0, ">"))
    return out


def c12_resolvent(ctx) -> list:
    out = []
    dt = 0.01
    for name, p in (JUMP_CASES[0], JUMP_CASES[2]):
        fs = fundamental_solution(p, GridSpec(40.0, dt))
        t = uniform_grid(15.0, dt)
        f = GridFunction(t[0], dt, np.exp(-t**2))
        res = apply_resolvent(fs, f)
        out.append(Check(f"{name}: residual / sup|f|", res.residual / float(np.max(np.abs(f.values))), 1e-5))
    return out


CRITERIA = [
    (1, "closed-form fundamental solution", c01_closed_form, 1.0),
    (2, "method of steps vs Fourier subtraction", c02_cross_method, 5.0),
    (3, "derivative jumps at 0", c03_jumps, 10.0),
    (4, "negativity and shape of v", c04_shape, 30.0),
    (5, "xi* analytic oracle", c05_xi_star, 1.0),
    (6, "c# oracle and monotonicity", c06_c_sharp, 5.0),
    (7, "kernel N identities", c07_kernel_n, 5.0),
    (8, "local front end to end", c08_front_local, 60.0),
    (9, "monotone iteration ordering", c09_ordering, math.inf),
    (10, "uniqueness probe", c10_uniqueness, 120.0),
    (11, "non-local front end to end", c11_front_nonlocal, 120.0),
    (12, "resolvent identity", c12_resolvent, 10.0),
]


def run_criterion(number: int, ctx: _Cache | None = None) -> CriterionResult:
    ctx = _Cache() if ctx is None else ctx
    num, title, fn, target = next(c for c in CRITERIA if c[0] == number)
    res = CriterionResult(num, title, runtime_target=target)
    t0 = time.perf_counter()
    try:
        res.checks = fn(ctx)
    except WavefrontError as e:
        res.error = f"{type(e).__name__}: {e}"
    res.runtime = time.perf_counter() - t0
    return res


def run_all(numbers=None, echo=None) -> list[CriterionResult]:
    ctx = _Cache()
    out = []
    for num, *_ in CRITERIA:
        if numbers is not None and num not in numbers:
            continue
        r = run_criterion(num, ctx)
        out.append(r)
        if echo is not None:
            echo(r)
    return out


def format_table(results) -> str:
    lines = []
    for r in results:
        lines.append(r.summary())
        lines += r.detail_lines()
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} criteria passed")
    return "\n".join(lines) + "\n"
