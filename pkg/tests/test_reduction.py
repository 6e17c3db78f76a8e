import math

import numpy as np
import pytest
from scipy.optimize import brentq

from wavefront.charfun import CharParams, chi, xi_star
from wavefront.errors import NegativeInput, NotInDkappa
from wavefront.fundsol import fundamental_solution
from wavefront.grid import GridSpec
from wavefront.model import KernelSpec, ModelSpec, NonlinearitySpec, build_nonlinearity
from wavefront.reduction import (G1, build_N, build_xi, check_interlacing, g1_tilde, kernel_n_csv, reduce_model,
                                 weighted_integral)

P6 = NonlinearitySpec("nicholson", p=6)
LOCAL = ModelSpec(KernelSpec(), P6, 0.2, 5.0)
XI_LOCAL = 0.89175946922805500081  # ln 6 - 1 + 0.1
G1_HALF = 1.19754744226356035134  # (3 e^-1/2 + xi/2) / (1 + xi), mpmath


@pytest.fixture(scope="module")
def local_reduction():
    return reduce_model(LOCAL, dt=0.01)


def test_build_xi_cap_binds():
    xi, delta = build_xi(LOCAL)
    assert delta == 0.1
    assert xi == pytest.approx(XI_LOCAL, abs=1e-12)


def test_build_xi_local_case():
    xi, delta = build_xi(LOCAL.at(h=0.0))
    assert delta == 0.1


def test_build_xi_half_margin():
    # choose h so that xi* exceeds |g'(kappa)| by 0.05
    const = build_nonlinearity(P6)
    target = abs(const.g_prime_kappa) + 0.05
    h = brentq(lambda h: xi_star(5.0, h, KernelSpec()) - target, 0.2, 2.0, xtol=1e-14)
    xi, delta = build_xi(LOCAL.at(h=h))
    assert delta == pytest.approx(0.025, abs=1e-9)


def test_build_xi_outside_dkappa():
    with pytest.raises(NotInDkappa):
        build_xi(LOCAL.at(h=3.0))


def test_interlacing_chain():
    chain = check_interlacing(LOCAL, XI_LOCAL, build_nonlinearity(P6))
    assert (chain["lambda1_xi"] < chain["lambda1_k"] < 0 < chain["mu0"] < chain["mu1"]
            < chain["lambda0_k"] < chain["lambda0_xi"])


def test_g1_examples():
    kappa = math.log(6)
    g1 = G1(LOCAL, XI_LOCAL, kappa)
    assert g1(kappa) == pytest.approx(kappa, abs=1e-14)
    assert g1(2 * kappa) == pytest.approx(kappa, abs=1e-14)
    assert g1_tilde(LOCAL, XI_LOCAL, 0.5) == pytest.approx(G1_HALF, abs=1e-12)
    with pytest.raises(NegativeInput):
        g1_tilde(LOCAL, XI_LOCAL, -0.1)


def test_g1_monotone_on_range():
    kappa = math.log(6)
    s = np.linspace(0.0, 1.5 * kappa, 20001)
    assert np.all(np.diff(G1(LOCAL, XI_LOCAL, kappa)(s)) >= 0)


def test_free_kernel_is_laplace_density():
    p = CharParams(c=0.0, d=1.0, xi=0.0, kernel=KernelSpec())
    fs = fundamental_solution(p, GridSpec(40.0, 0.01))
    red = build_N(LOCAL.at(h=0.0, c=0.0), fs, delta=0.0)
    assert np.allclose(red.N.values, 0.5 * np.exp(-np.abs(red.N.t)), atol=1e-15)
    assert red.mass_error <= 1e-8


def test_local_kernel_identities(local_reduction):
    red = local_reduction
    assert red.xi == pytest.approx(XI_LOCAL, abs=1e-12)
    assert red.mass_error <= 1e-6
    assert len(red.laplace_errors) == 3
    assert all(e <= 1e-5 for _, e in red.laplace_errors)
    assert red.linearization_error <= 1e-6
    assert red.N.values.min() > 0
    assert red.g1_prime_0 == pytest.approx((6 + XI_LOCAL) / (1 + XI_LOCAL))


@pytest.mark.parametrize("kernel", [KernelSpec("gaussian", sigma=0.5), KernelSpec("uniform", a=0.5)])
def test_nonlocal_kernel_identities(kernel):
    red = reduce_model(ModelSpec(kernel, P6, 0.2, 5.0), dt=0.01)
    assert red.mass_error <= 1e-6
    assert all(e <= 1e-5 for _, e in red.laplace_errors)
    assert red.N.values.min() > 0


def test_no_delay_kernel_closed_form():
    red = reduce_model(LOCAL.at(h=0.0), dt=0.01)
    assert red.fs.method == "closed_form_xi0"
    assert red.mass_error <= 1e-6


def test_weighted_integral_of_exponential_pair(local_reduction):
    # against the closed form -(1 + xi) / chi(z) at a strip point
    z = 0.1
    exact = -(1 + local_reduction.xi) / chi(local_reduction.fs.params, z)
    assert weighted_integral(local_reduction.N, z) == pytest.approx(exact, rel=1e-6)


def test_kernel_csv(local_reduction):
    text = kernel_n_csv(local_reduction)
    assert text.startswith("t,N\n")
    assert text.count("\n") == local_reduction.N.n + 1
