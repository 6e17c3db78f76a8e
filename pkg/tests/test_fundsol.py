import math

import numpy as np
import pytest

from wavefront import _steps
from wavefront.charfun import CharParams, chi_prime, chi_second, real_root_set, xi_star
from wavefront.fundsol import (apply_resolvent, check_fundsol, fundamental_solution, fundsol_csv, jump_estimates,
                               laplace_identity_errors, tail_asymptotics)
from wavefront.grid import GridFunction, GridSpec, Tail, uniform_grid
from wavefront.model import KernelSpec

DIRAC = KernelSpec()
GAUSS = KernelSpec("gaussian", sigma=0.5)
FREE = CharParams(c=0.0, d=1.0, xi=0.0, kernel=DIRAC)
DELAYED = CharParams(c=1.0, h=1.0, d=1.0, xi=0.5, kernel=DIRAC)

V0_DELAYED = -0.41413852240607956061  # -1/chi'(lambda0), mpmath
RHO_PLUS_DELAYED = -0.57347813205133679901  # 1/chi'(lambda1), mpmath


@pytest.fixture(scope="module")
def delayed_pair():
    grid = GridSpec(40.0, 0.01)
    return (fundamental_solution(DELAYED, grid, "local_steps"),
            fundamental_solution(DELAYED, grid, "fourier_subtraction"))


def test_closed_form_values():
    fs = fundamental_solution(FREE, GridSpec(10.0, 0.01))
    assert fs.method == "closed_form_xi0"
    v = fs(np.array([-1.0, 0.0, 2.0]))
    assert np.allclose(v, [-math.exp(-1) / 2, -0.5, -math.exp(-2) / 2], atol=1e-15)


def test_closed_form_tails():
    tails = tail_asymptotics(FREE)
    assert tails.lambda_plus == pytest.approx(-1.0) and tails.rho_plus == pytest.approx(-0.5)
    assert tails.lambda_minus == pytest.approx(1.0) and tails.rho_minus == pytest.approx(-0.5)


def test_closed_form_jump():
    fs = fundamental_solution(FREE, GridSpec(10.0, 0.01))
    d1, d2 = jump_estimates(fs, 1e-3)
    assert abs(d1 - 1) <= 1e-3 and abs(d2) <= 1e-2


def test_steps_value_at_zero(delayed_pair):
    steps, fourier = delayed_pair
    assert steps(0.0) == pytest.approx(V0_DELAYED, abs=1e-13)
    assert abs(fourier(0.0) - V0_DELAYED) <= 1e-6


def test_cross_method_agreement(delayed_pair):
    steps, fourier = delayed_pair
    t = np.linspace(0.0, 10.0, 1001)
    assert np.max(np.abs(steps(t) - fourier(t))) <= 1e-5
    t = np.linspace(-10.0, 0.0, 101)
    assert np.max(np.abs(steps(t) - fourier(t))) <= 1e-5


def test_right_tail_coefficient(delayed_pair):
    steps, _ = delayed_pair
    assert steps.tails.rho_plus == pytest.approx(RHO_PLUS_DELAYED, rel=1e-12)
    lam = steps.tails.lambda_plus
    assert steps(30.0) * math.exp(-lam * 30.0) == pytest.approx(RHO_PLUS_DELAYED, rel=1e-9)


def test_step_solution_slope_identity():
    r = real_root_set(DELAYED)
    sol = _steps.StepSolution(1.0, 1.0, 1.0, 0.5, r.lambda0, 5.0, r.lambda0 - r.lambda1)
    e = 1e-7
    # u'(0+) from the pieces against lambda0 - chi'(lambda0)
    slope = (sol.u(e)[0] - sol.u(0.0)[0]) / e
    expected = r.lambda0 - chi_prime(DELAYED, r.lambda0)
    assert slope == pytest.approx(expected, abs=1e-5)


def test_step_solution_horizon():
    with pytest.raises(Exception):
        _steps.StepSolution(1.0, 1.0, 1.0, 0.5, 1.66, 1e4, 3.0)


def test_negativity_and_jumps(delayed_pair):
    rep = check_fundsol(delayed_pair[0])
    assert rep.negative and rep.max_value < 0
    assert abs(rep.argmin) <= 0.01
    assert rep.jump_error_1 <= 1e-3 and rep.jump_error_2 <= 1e-2
    assert rep.monotone_violation_left <= 1e-12 and rep.monotone_violation_right <= 1e-12
    assert rep.interior_residual <= 1e-6
    assert all(e <= 1e-6 for _, e in rep.laplace_errors)


def test_concave_on_negative_half_line(delayed_pair):
    # v = rho e^{lambda0 t} with rho < 0 on t < 0: second differences are negative
    rep = check_fundsol(delayed_pair[0])
    assert rep.convexity_violation_left > 0


def test_sign_change_beyond_xi_star():
    p = CharParams(c=1.0, h=1.0, xi=0.75, kernel=DIRAC)
    fs = fundamental_solution(p, GridSpec(40.0, 0.01))
    assert fs.beyond_xi_star
    assert fs.samples.values.max() > 0


def test_double_root_tail_at_xi_star():
    p = CharParams(c=1.0, h=1.0, xi=xi_star(1.0, 1.0, DIRAC), kernel=DIRAC)
    tails = tail_asymptotics(p)
    assert tails.double_root
    assert tails.double_slope == pytest.approx(2.0 / chi_second(p, -2.0), rel=1e-5)
    fs = fundamental_solution(p, GridSpec(40.0, 0.01))
    assert fs.samples.values.max() < 0
    t = 35.0
    assert fs(t) / (t * math.exp(-2.0 * t)) == pytest.approx(tails.double_slope, rel=0.05)


def test_gaussian_fundamental_solution():
    p = CharParams(c=2.0, h=0.5, xi=0.3, kernel=GAUSS)
    fs = fundamental_solution(p, GridSpec(30.0, 0.01))
    assert fs.method == "fourier_subtraction"
    assert fs.quadrature_error <= 1e-9
    rep = check_fundsol(fs)
    assert rep.negative
    assert rep.jump_error_1 <= 1e-3 and rep.jump_error_2 <= 1e-2
    assert rep.interior_residual <= 1e-6


def test_uniform_kernel_residual():
    p = CharParams(c=1.5, h=0.4, xi=0.3, kernel=KernelSpec("uniform", a=0.7))
    rep = check_fundsol(fundamental_solution(p, GridSpec(30.0, 0.01)))
    assert rep.negative and rep.jump_error_1 <= 1e-3
    assert rep.interior_residual <= 1e-5


def test_laplace_identity_local():
    fs = fundamental_solution(DELAYED, GridSpec(40.0, 0.01))
    assert max(e for _, e in laplace_identity_errors(fs)) <= 1e-6


def test_dispatch_errors():
    with pytest.raises(ValueError):
        fundamental_solution(CharParams(c=1.0, h=1.0, xi=0.3, kernel=GAUSS), method="local_steps")
    with pytest.raises(ValueError):
        fundamental_solution(CharParams(c=1.0, xi=-0.1, kernel=DIRAC))
    with pytest.raises(ValueError):
        fundamental_solution(DELAYED, method="closed_form_xi0")


def test_resolvent_constant_forcing():
    fs = fundamental_solution(FREE, GridSpec(30.0, 0.01))
    t = uniform_grid(5.0, 0.01)
    res = apply_resolvent(fs, GridFunction(t[0], 0.01, np.ones(t.size)))
    assert np.max(np.abs(res.u.values - 1.0)) <= 1e-9
    res0 = apply_resolvent(fs, GridFunction(t[0], 0.01, np.zeros(t.size)))
    assert np.max(np.abs(res0.u.values)) == 0.0


@pytest.mark.parametrize("params", [DELAYED, CharParams(c=2.0, h=0.5, xi=0.3, kernel=GAUSS)])
def test_resolvent_gaussian_bump(params):
    fs = fundamental_solution(params, GridSpec(40.0, 0.01))
    t = uniform_grid(15.0, 0.01)
    res = apply_resolvent(fs, GridFunction(t[0], 0.01, np.exp(-t**2)))
    assert res.residual <= 1e-5


def test_fundsol_csv_header():
    fs = fundamental_solution(FREE, GridSpec(1.0, 0.5))
    assert fundsol_csv(fs).splitlines()[:2] == ["t,v", "-1,-0.18393972058572117"]
