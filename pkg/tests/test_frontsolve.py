import math

import numpy as np
import pytest

from wavefront.charfun import c_sharp, chi0_positive_roots
from wavefront.errors import CollapsedToZero, IterationLimitReached, NotInDL, RangeViolation
from wavefront.frontsolve import (FrontOperator, SolverConfig, apply_A, initial_upper, lower_barrier,
                                  profile_csv, report_csv, solve_front, uniqueness_probe, validate_front)
from wavefront.grid import GridFunction, Tail, uniform_grid
from wavefront.model import KernelSpec, ModelSpec, NonlinearitySpec
from wavefront.reduction import reduce_model

P6 = NonlinearitySpec("nicholson", p=6)
LOCAL = ModelSpec(KernelSpec(), P6, 0.2, 5.0)
GAUSS = ModelSpec(KernelSpec("gaussian", sigma=0.5), P6, 0.2, 4.0)
KAPPA = math.log(6)


@pytest.fixture(scope="module")
def local_front():
    return solve_front(LOCAL)


@pytest.fixture(scope="module")
def local_reduction(local_front):
    return local_front.reduction


def test_initial_upper_examples():
    v = initial_upper(KAPPA, 1.382, np.array([0.0, -5.0, 3.0]))
    assert v[0] == KAPPA and v[2] == KAPPA
    assert v[1] == pytest.approx(KAPPA * math.exp(-6.91), rel=1e-12)
    assert v[1] == pytest.approx(1.786e-3, rel=1e-3)


def test_lower_barrier_below_upper():
    t = uniform_grid(10.0, 0.1)
    lo = lower_barrier(KAPPA, 0.5, 0.05, t)
    assert np.all(lo <= initial_upper(KAPPA, 0.5, t))
    assert np.all(lo[t >= 0] == 0)


def test_solver_config_invariants():
    with pytest.raises(ValueError):
        SolverConfig(tol_iter=1e-3)
    L, dt = SolverConfig(L=40.0, dt=0.013).grid_for(1.0, dirac=True)
    assert abs(1.0 / dt - round(1.0 / dt)) < 1e-9
    assert abs(L / dt - round(L / dt)) < 1e-9


def test_apply_A_constants(local_reduction):
    t = uniform_grid(20.0, 0.01)
    for c in (KAPPA, 0.0):
        out = apply_A(GridFunction(t[0], 0.01, np.full(t.size, c)), local_reduction, LOCAL)
        assert np.max(np.abs(out.values - c)) <= 1e-8


def test_upper_solution_property(local_reduction):
    mu0 = chi0_positive_roots(LOCAL).mu0
    t = uniform_grid(20.0, 0.01)
    phi0 = initial_upper(KAPPA, mu0, t)
    out = apply_A(GridFunction(t[0], 0.01, phi0, Tail(mu0, KAPPA)), local_reduction, LOCAL)
    assert np.all(out.values <= phi0 + 1e-12 * KAPPA)


def test_operator_rejects_out_of_range(local_reduction):
    op = FrontOperator(LOCAL, local_reduction, KAPPA, 0.55, 10.0, 0.01)
    with pytest.raises(RangeViolation):
        op(np.full(op.n, 2 * KAPPA))


def test_local_front(local_front):
    sol = local_front
    phi = sol.profile.values
    rep = sol.diagnostics
    assert sol.iterations <= 5000
    assert sol.profile(0.0) == pytest.approx(KAPPA / 2, abs=1e-10)
    assert np.all(np.diff(phi) >= -1e-12 * KAPPA)
    assert 0 <= phi.min() and phi.max() <= KAPPA
    assert rep.residual_ftc <= 1e-9
    assert rep.residual_yp <= 1e-4 * KAPPA
    assert rep.left_boundary_gap <= 1e-3 and rep.right_boundary_gap <= 1e-3
    assert rep.decay_class == "pure_mu0"
    assert abs(rep.decay_rate_left / sol.mu0 - 1) <= 0.02
    assert sol.max_increase <= 1e-12 * KAPPA


def test_front_without_delay():
    m = LOCAL.at(h=0.0)
    sol = solve_front(m)
    mu0 = (5 - math.sqrt(5)) / 2
    assert sol.mu0 == pytest.approx(mu0, abs=1e-12)
    assert sol.diagnostics.monotone_violation == 0.0
    assert abs(sol.diagnostics.decay_rate_left / mu0 - 1) <= 0.02


def test_gaussian_front_and_uniqueness():
    sol = solve_front(GAUSS)
    rep = sol.diagnostics
    assert rep.residual_yp <= 5e-4 * KAPPA and rep.residual_ftc <= 1e-9
    assert rep.monotone_violation == 0.0
    assert uniqueness_probe(GAUSS, shift=2.0, first=sol) <= 1e-4


def test_uniqueness_probe(local_front):
    assert uniqueness_probe(LOCAL, shift=2.0, first=local_front) <= 1e-4
    assert uniqueness_probe(LOCAL, shift=0.0, first=local_front) == 0.0


def test_validator_flags_non_monotone(local_front):
    sol = local_front
    bumped = sol.profile.values.copy()
    i = bumped.size // 2
    bumped[i] += 0.05
    sol2 = type(sol)(**{**sol.__dict__, "profile": GridFunction(sol.profile.t0, sol.profile.dt, bumped)})
    expected = bumped[i] - bumped[i + 1]
    assert expected > 0
    assert validate_front(sol2, LOCAL).monotone_violation == pytest.approx(expected)


def test_not_in_dl():
    with pytest.raises(NotInDL):
        solve_front(LOCAL.at(h=0.0, c=4.0))


def test_iteration_limit():
    with pytest.raises(IterationLimitReached):
        solve_front(LOCAL, SolverConfig(max_iter=3))


def test_collapse_detected_by_barrier():
    # a barrier hugging the upper solution is crossed as soon as the iterates relax
    with pytest.raises(CollapsedToZero):
        solve_front(LOCAL, SolverConfig(eps_lower=50.0))


def test_front_at_c_sharp():
    cs = c_sharp(0.2, LOCAL)
    sol = solve_front(LOCAL.at(c=cs))
    rep = sol.diagnostics
    assert sol.iterations <= 5000
    assert rep.decay_class == "degenerate_t_exp"
    assert rep.residual_yp <= 1e-4 * KAPPA
    assert sol.max_increase <= 1e-12 * KAPPA


def test_csv_outputs(local_front):
    assert profile_csv(local_front).startswith("t,phi\n")
    head, row = report_csv(local_front.diagnostics).splitlines()
    assert head.split(",")[0] == "residual_ftc"
    assert len(row.split(",")) == len(head.split(","))
