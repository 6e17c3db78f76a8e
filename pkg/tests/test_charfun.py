import math

import numpy as np
import pytest

from wavefront.charfun import (CharParams, c_sharp, chi, chi0_positive_roots, chi_prime, classify_point,
                               domain_map, domain_map_csv, real_root_set, xi_star, xi_star_bisection)
from wavefront.errors import NoNegativeRoot
from wavefront.model import KernelSpec, ModelSpec, NonlinearitySpec

DIRAC = KernelSpec()
P6 = ModelSpec(DIRAC, NonlinearitySpec("nicholson", p=6), 0.0, 0.0)

# independent high-precision values (mpmath findroot on the defining equations)
MU0_5_02 = 0.5519301294317542084
MU1_5_02 = 5.186344266247028625
C_SHARP = {0.2: 2.564739847664740666, 0.25: 2.384398820923806826, 0.5: 1.836803414941210748,
           1.0: 1.338566199045850328, 2.0: 0.915510229879773048}
LAMBDA0_11 = 1.659780314430331301
LAMBDA1_11 = -1.211515528113964490


@pytest.mark.parametrize("params, z, expected", [
    (CharParams(c=0.0, d=1.0, xi=0.0, kernel=DIRAC), 1.0, 0.0),
    (CharParams(c=1.0, h=1.0, d=1.0, xi=5 * math.exp(-2), kernel=DIRAC), -2.0, 0.0),
    (CharParams(c=0.0, d=1.0, xi=0.0, kernel=KernelSpec("gaussian", sigma=1.0)), 0.0, -1.0),
])
def test_chi_examples(params, z, expected):
    assert chi(params, z) == pytest.approx(expected, abs=1e-14)


def test_chi_prime_matches_difference():
    p = CharParams(c=1.3, h=0.7, xi=0.4, kernel=KernelSpec("gaussian", sigma=0.5))
    e = 1e-6
    assert chi_prime(p, 0.3) == pytest.approx((chi(p, 0.3 + e) - chi(p, 0.3 - e)) / (2 * e), rel=1e-8)


def test_roots_xi0():
    r = real_root_set(CharParams(c=0.0, d=1.0, xi=0.0, kernel=DIRAC))
    assert r.lambda1 == pytest.approx(-1.0, abs=1e-13)
    assert r.lambda0 == pytest.approx(1.0, abs=1e-13)
    assert r.lambda2 == -math.inf and r.lambda_m1 == math.inf


def test_roots_quadratic():
    r = real_root_set(CharParams(c=2.0, d=1.0, xi=0.0, kernel=DIRAC))
    assert r.lambda0 == pytest.approx(1 + math.sqrt(2), abs=1e-13)
    assert r.lambda1 == pytest.approx(1 - math.sqrt(2), abs=1e-13)


def test_roots_delayed_dirac():
    p = CharParams(c=1.0, h=1.0, d=1.0, xi=0.5, kernel=DIRAC)
    r = real_root_set(p)
    assert r.lambda2 < r.lambda1 < 0 < r.lambda0
    assert r.lambda_m1 == math.inf
    assert r.lambda0 == pytest.approx(LAMBDA0_11, abs=1e-12)
    assert r.lambda1 == pytest.approx(LAMBDA1_11, abs=1e-12)
    for z in r.finite_roots:
        assert abs(chi(p, z)) <= 1e-11 * (1 + z * z)
    assert len(r.finite_roots) <= 4


def test_no_negative_root_beyond_xi_star():
    with pytest.raises(NoNegativeRoot):
        real_root_set(CharParams(c=1.0, h=1.0, xi=0.75, kernel=DIRAC))


def test_xi_star_oracles():
    assert xi_star(1.0, 1.0, DIRAC) == pytest.approx(5 * math.exp(-2), abs=1e-12)
    z = (3 - math.sqrt(33)) / 2
    assert xi_star(5.0, 0.2, DIRAC) == pytest.approx((5 - 2 * z) * math.exp(z), abs=1e-12)
    assert xi_star(1.0, 0.0, DIRAC) == math.inf


@pytest.mark.parametrize("c, h", [(1.0, 1.0), (5.0, 0.2), (2.0, 0.5)])
def test_xi_star_agrees_with_bisection(c, h):
    assert xi_star(c, h, DIRAC) == pytest.approx(xi_star_bisection(c, h, DIRAC), abs=1e-9)


def test_xi_star_gaussian_agrees_with_bisection():
    k = KernelSpec("gaussian", sigma=0.5)
    assert xi_star(2.0, 0.5, k) == pytest.approx(xi_star_bisection(2.0, 0.5, k), abs=1e-9)


def test_mu_roots_local():
    mu = chi0_positive_roots(P6.at(h=0.0, c=5.0))
    assert mu.mu0 == pytest.approx((5 - math.sqrt(5)) / 2, abs=1e-12)
    assert mu.mu1 == pytest.approx((5 + math.sqrt(5)) / 2, abs=1e-12)
    assert not mu.degenerate


def test_mu_roots_degenerate_and_absent():
    mu = chi0_positive_roots(P6.at(h=0.0, c=2 * math.sqrt(5)))
    assert mu.degenerate
    assert mu.mu0 == pytest.approx(math.sqrt(5), abs=1e-6)
    assert chi0_positive_roots(P6.at(h=0.0, c=4.0)) is None


def test_mu_roots_delayed():
    mu = chi0_positive_roots(P6.at(h=0.2, c=5.0))
    assert mu.mu0 == pytest.approx(MU0_5_02, abs=1e-12)
    assert mu.mu1 == pytest.approx(MU1_5_02, abs=1e-11)


def test_c_sharp_closed_forms():
    assert c_sharp(0.0, P6) == pytest.approx(2 * math.sqrt(5), abs=1e-10)
    p2 = ModelSpec(DIRAC, NonlinearitySpec("nicholson", p=2), 0.0, 0.0)
    assert c_sharp(0.0, p2) == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("h", sorted(C_SHARP))
def test_c_sharp_delayed(h):
    assert c_sharp(h, P6) == pytest.approx(C_SHARP[h], abs=1e-9)


def test_c_sharp_strictly_decreasing():
    vals = [c_sharp(h, P6) for h in (0.0, 0.25, 0.5, 1.0, 2.0)]
    assert np.all(-np.diff(vals) >= 1e-10)


def test_c_sharp_is_the_d0_threshold():
    cs = c_sharp(0.3, P6)
    assert chi0_positive_roots(P6.at(h=0.3, c=cs + 1e-6)) is not None
    assert chi0_positive_roots(P6.at(h=0.3, c=cs - 1e-6)) is None


def test_mu_bracket_the_double_root():
    h = 0.2
    cs = c_sharp(h, P6)
    z_sharp = chi0_positive_roots(P6.at(h=h, c=cs + 1e-9)).mu0
    for c in (cs + 0.1, cs + 1.0, cs + 3.0):
        mu = chi0_positive_roots(P6.at(h=h, c=c))
        assert mu.mu0 < z_sharp < mu.mu1


def test_classify_examples():
    assert classify_point(0.2, 5.0, P6).in_DL
    m = classify_point(0.0, 4.0, P6)
    assert not m.in_D0 and not m.in_DL
    assert classify_point(0.0, 5.0, P6).in_Dkappa


def test_classify_boundary():
    cs = c_sharp(0.2, P6)
    m = classify_point(0.2, cs, P6)
    assert m.on_D0_boundary and not m.in_D0 and m.in_DL


def test_domain_map_single_cell_and_empty():
    dm = domain_map((0.0, 0.0, 1.0), (5.0, 5.0, 1.0), P6)
    assert len(dm.cells) == 1 and dm.cells[0][2].in_DL
    assert domain_map((1.0, 0.0, 0.5), (3.0, 4.0, 0.5), P6).cells == []


def test_domain_map_threshold_in_c():
    dm = domain_map((0.0, 0.5, 0.25), (1.0, 5.0, 2.0), P6)
    assert len(dm.cells) == 9
    for i in range(3):
        col = [m.in_D0 for _, _, m in dm.cells[3 * i:3 * i + 3]]
        assert col == sorted(col)
        assert col[0] is False and col[-1] is True


def test_domain_map_csv_format():
    text = domain_map_csv(domain_map((0.0, 0.25, 0.25), (5.0, 5.0, 1.0), P6))
    lines = text.split("\n")
    assert lines[0] == "h,c,in_D0,on_D0_boundary,in_Dkappa,in_DL,c_sharp,xi_star,margin_kappa"
    assert lines[1].startswith("0,5,true,false,true,true,4.4721359549995")
    assert lines[2].startswith("0.25,5,")
    assert text.endswith("\n") and "\r" not in text
