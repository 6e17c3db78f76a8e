import math

import numpy as np
import pytest

from wavefront.errors import GridMismatch
from wavefront.grid import GridFunction, GridSpec, Tail, simpson, uniform_grid


def test_uniform_grid_requires_integer_ratio():
    t = uniform_grid(1.0, 0.25)
    assert np.allclose(t, [-1, -0.75, -0.5, -0.25, 0, 0.25, 0.5, 0.75, 1])
    with pytest.raises(GridMismatch):
        uniform_grid(1.0, 0.3)


def test_snapped_rounds_up():
    g = GridSpec.snapped(1.01, 0.1)
    assert g.n_half == 11 and g.L == pytest.approx(1.1)


@pytest.mark.parametrize("n", [101, 100])
def test_simpson_exact_for_cubics(n):
    x = np.linspace(0.0, 2.0, n)
    y = x**3 - 2 * x + 1
    assert simpson(y, x[1] - x[0]) == pytest.approx(4.0 - 4.0 + 2.0, abs=1e-12)


def test_gridfunction_tails_and_interpolation():
    t = uniform_grid(2.0, 0.01)
    f = GridFunction(t[0], 0.01, np.exp(-t**2), Tail(0.0, 0.0), Tail(-1.0, 3.0))
    assert f(0.123) == pytest.approx(math.exp(-0.123**2), abs=1e-8)
    assert f(-5.0) == 0.0
    assert f(4.0) == pytest.approx(3.0 * math.exp(-4.0))
    assert f.index_of(0.0) == 200
    with pytest.raises(GridMismatch):
        f.index_of(0.005)


def test_tail_with_slope():
    tail = Tail(-2.0, 1.0, 0.5)
    assert tail(np.array([1.0]))[0] == pytest.approx(1.5 * math.exp(-2.0))


def test_gridfunction_rejects_nan():
    with pytest.raises(ValueError):
        GridFunction(0.0, 0.1, np.array([1.0, np.nan]))


def test_to_csv_format():
    f = GridFunction(-0.1, 0.1, np.array([1.0, 1.0 / 3.0, 2.0]))
    assert f.to_csv("v") == "t,v\n-0.10000000000000001,1\n0,0.33333333333333331\n0.10000000000000001,2\n"
