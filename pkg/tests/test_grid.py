import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prandtl_gevrey.grid import GridError, SpectralGrid, fornberg_weights


@pytest.fixture(scope="module")
def g():
    return SpectralGrid(16, 257)


def test_rejects_bad_sizes():
    with pytest.raises(GridError):
        SpectralGrid(12, 65)
    with pytest.raises(GridError):
        SpectralGrid(2, 65)
    with pytest.raises(GridError):
        SpectralGrid(8, 65, fd_accuracy=3)


def test_nodes_and_weights(g):
    y, w = g.y_nodes, g.y_weights
    assert y[0] == 0.0 and y[-1] == g.y_max
    assert np.all(np.diff(y) > 0)
    assert np.all(w > 0)
    assert abs(w.sum() - g.y_max) < 1e-12 * g.y_max


def test_wavenumbers_are_scaled_integers():
    g = SpectralGrid(8, 33, x_period=4 * np.pi)
    assert np.allclose(g.wavenumbers, np.arange(5) * 0.5)


def test_dx_sin(g):
    x, y = g.mesh()
    assert np.max(np.abs(g.dx(np.sin(x)) - np.cos(x))) < 1e-12


def test_dx_of_x_constant_is_zero(g):
    _, y = g.mesh()
    for order in (1, 2, 5):
        assert np.max(np.abs(g.dx(np.exp(-y), order))) < 1e-14


def test_dx_second_order(g):
    x, y = g.mesh()
    f = np.sin(3 * x) * np.exp(-y)
    assert np.max(np.abs(g.dx(f, 2) + 9 * f)) < 1e-10


def test_dy_polynomial_exact(g):
    _, y = g.mesh()
    assert np.max(np.abs(g.dy(y**2, 2) - 2.0)) < 1e-8
    assert np.max(np.abs(g.dy(np.full(g.shape, 3.0), 1))) < 1e-10
    assert np.max(np.abs(g.dy(np.full(g.shape, 3.0), 2))) < 1e-8


def test_dy_convergence_order():
    errs = []
    for ny in (65, 129, 257):
        gg = SpectralGrid(4, ny, fd_accuracy=4)
        y = gg.y_nodes
        errs.append(np.max(np.abs(gg.dy(np.exp(-y), 1) + np.exp(-y))))
    rates = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(rates) > 3.5


def test_dy_default_accuracy_is_higher():
    y4 = SpectralGrid(4, 129, fd_accuracy=4)
    y6 = SpectralGrid(4, 129)
    f = np.exp(-y6.y_nodes)
    e4 = np.max(np.abs(y4.dy(f, 1) + f))
    e6 = np.max(np.abs(y6.dy(f, 1) + f))
    assert e6 < e4 / 10


def test_fornberg_weights_reproduce_polynomials():
    x = np.array([0.0, 0.3, 0.7, 1.2, 2.0])
    w = fornberg_weights(0.5, x, 2)
    assert np.isclose(w[:, 0] @ x**3, 0.125)
    assert np.isclose(w[:, 1] @ x**3, 0.75)
    assert np.isclose(w[:, 2] @ x**3, 3.0)


def test_integrate_constant_exact(g):
    one = np.ones(g.ny)
    assert np.max(np.abs(g.integrate_y(one) - g.y_nodes)) < 1e-12


def test_integrate_exponential(g):
    assert abs(g.integrate_y(np.exp(-g.y_nodes), 0.0, g.y_max) - 1.0) < 1e-6


def test_integrate_orientation(g):
    f = np.exp(-g.y_nodes)
    assert np.isclose(g.integrate_y(f, 3.0, 1.0), -g.integrate_y(f, 1.0, 3.0), rtol=0, atol=1e-14)
    running = g.integrate_y(f, y_from=3.0)
    below = g.y_nodes < 3
    assert np.all(running[below] < 0)


def test_integrate_per_column_limits(g):
    _, y = g.mesh()
    f = np.ones(g.shape)
    tops = np.linspace(1.0, 2.0, g.nx)
    assert np.allclose(g.integrate_y(f, 0.0, tops), tops, atol=1e-12)


def test_integrate_limits_checked(g):
    with pytest.raises(GridError):
        g.integrate_y(np.ones(g.ny), 0.0, g.y_max + 1)


def test_dx_dy_commute():
    errs = []
    for ny in (129, 257):
        gg = SpectralGrid(16, ny)
        x, y = gg.mesh()
        f = np.sin(2 * x) * y * np.exp(-y)
        errs.append(np.max(np.abs(gg.dx(gg.dy(f, 1), 1) - gg.dy(gg.dx(f, 1), 1))))
    assert errs[1] < 1e-6


def test_integrate_inverts_dy(g):
    _, y = g.mesh()
    f = np.sin(y) * np.exp(-y / 3) + 2.0
    back = g.integrate_y(g.dy(f, 1))
    assert np.max(np.abs(back - (f - f[:, :1]))) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parseval(seed):
    g = SpectralGrid(16, 9)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    fh = np.fft.fft(f, axis=0)
    lhs = np.mean(f**2, axis=0)
    rhs = np.sum(np.abs(fh) ** 2, axis=0) / g.nx**2
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=0)


def test_project_keeps_low_modes(g):
    x, y = g.mesh()
    f = np.sin(x) + np.cos(5 * x)
    assert np.allclose(g.project(f, 3), np.sin(x), atol=1e-13)


def test_weighted_l2(g):
    f = np.exp(-g.y_nodes)
    # Gregory weights on the graded nodes: about 1e-7 at ny = 257
    assert abs(g.weighted_l2_sq(f) - 0.5) < 2e-7
    assert abs(g.weighted_l2_sq(np.tile(f, (g.nx, 1))) - np.pi) < 2 * np.pi * 2e-7
