
import numpy as np
import pytest
from scipy import integrate

from vldp import (ControlPath, Grid, compute_EFG, inner_objective, path_rate_integrand, phi_functional,
                  phi_m_functional, phi_m_terminal, solve_control_ode, terminal_noise)
from vldp.errors import DimensionError, ResolutionError
from vldp.functionals import path_objective, path_objective_target_grad, scalar_objective, target_slopes
from vldp.kernel import cached_weights

from conftest import brownian_square, flat_vol, heston_like, rough_cir


def square_model_limits(a, s0):
    """E, F, G for the control f = a t in the Brownian-square model, T = 1 (exact integrals)."""
    return a * a, s0 * s0 * (1 + a * a / 6 + a**4 / 63), s0 * a * (1 + a * a / 12)


def square_model_sums(a, s0, n):
    """The same quantities as left-endpoint sums, written out directly."""
    dt = 1.0 / n
    E = F = G = 0.0
    for i in range(n):
        vhat = dt * sum((a * j * dt) ** 2 for j in range(i))
        vol = s0 * (1 + vhat)
        E += dt * a * a
        F += dt * vol * vol
        G += dt * vol * a
    return E, F, G


@pytest.mark.parametrize("a, s0", [(0.8, 1.0), (2.0, 0.5)])
def test_square_model_discrete_sums(a, s0):
    spec = brownian_square(s0)
    grid = Grid(40, 1.0)
    vals = compute_EFG(spec, ControlPath.constant(grid, a))
    assert np.allclose([vals.E, vals.F, vals.G], square_model_sums(a, s0, 40), rtol=1e-12)


def test_square_model_first_order_convergence():
    a, s0 = 1.5, 1.0
    exact = np.array(square_model_limits(a, s0))
    errs = []
    for n in (200, 400, 800):
        v = compute_EFG(brownian_square(s0), ControlPath.constant(Grid(n, 1.0), a))
        errs.append(np.abs(np.array([v.E, v.F, v.G]) - exact)[1:])
    for e1, e2 in zip(errs, errs[1:]):
        assert np.all(1.8 < e1 / e2) and np.all(e1 / e2 < 2.2)


def test_constant_sigma_objective_closed_form():
    s0, rho, T, x = 0.3, -0.4, 2.0, 0.25
    spec = flat_vol(s0, rho, T)
    grid = Grid(50, T)
    for a in (-1.0, 0.0, 0.7):
        val = inner_objective(spec, ControlPath.constant(grid, a), x)
        expected = (x - rho * s0 * a * T) ** 2 / (2 * (1 - rho**2) * s0**2 * T) + a * a * T / 2
        assert val == pytest.approx(expected, rel=1e-12)


def test_phi_and_terminal_noise_are_inverse():
    spec = heston_like()
    ctrl = ControlPath(Grid(30, 1.0), np.linspace(-1, 2, 30))
    y = terminal_noise(spec, ctrl, 0.4)
    assert phi_functional(spec, y, ctrl) == pytest.approx(0.4, rel=1e-12)


def test_rho_one_rejected():
    from vldp.errors import DomainError
    spec = flat_vol(rho=1.0)
    with pytest.raises((DomainError, ValueError)):
        inner_objective(spec, ControlPath.zeros(Grid(4, 1.0)), 0.1)


def test_path_integrand_vanishes_off_the_energy_on_the_skeleton():
    # g = rho * sigma * f makes the orthogonal noise unnecessary
    s0, rho = 0.25, 0.6
    spec = flat_vol(s0, rho)
    grid = Grid(20, 1.0)
    ctrl = ControlPath(grid, np.cos(np.arange(20)))
    g = rho * s0 * ctrl.values
    assert path_rate_integrand(spec, ctrl, g) == pytest.approx(ctrl.energy / 2, rel=1e-12)


def test_target_slopes_checks():
    grid = Grid(4, 1.0)
    assert np.allclose(target_slopes(grid, [0, 1, 2, 3, 4]), 4.0)
    with pytest.raises((ValueError, DimensionError)):
        target_slopes(grid, [1, 1, 2, 3, 4])
    with pytest.raises(DimensionError):
        target_slopes(grid, [0, 1, 2])


def _central(fun, z, h=1e-6):
    return np.array([(fun(z + h * e) - fun(z - h * e)) / (2 * h) for e in np.eye(z.size)])


@pytest.mark.parametrize("make", [rough_cir, brownian_square, heston_like, flat_vol])
def test_adjoint_gradients_match_finite_differences(make):
    spec = make()
    grid = Grid(24, 1.0)
    w = cached_weights(spec.kernel, grid)
    rng = np.random.default_rng(5)
    fd = 0.3 + 0.5 * rng.normal(size=24)
    gd = rng.normal(size=24)
    _, g1 = scalar_objective(spec, w, fd, 0.7, grad=True)
    n1 = _central(lambda z: scalar_objective(spec, w, z, 0.7), fd)
    _, g2 = path_objective(spec, w, fd, gd, grad=True)
    n2 = _central(lambda z: path_objective(spec, w, z, gd), fd)
    assert np.allclose(g1, n1, rtol=1e-5, atol=1e-7 * np.max(np.abs(n1)))
    assert np.allclose(g2, n2, rtol=1e-5, atol=1e-7 * np.max(np.abs(n2)))
    n3 = _central(lambda z: path_objective(spec, w, fd, z), gd)
    assert np.allclose(path_objective_target_grad(spec, w, fd, gd), n3, rtol=1e-5,
                       atol=1e-7 * np.max(np.abs(n3)))


# discretised functional vs the continuous one


def _phi_setup():
    spec = flat_vol().replace(sigma_fn=brownian_square(0.5).sigma_fn, rho=0.4)
    r, h, l = np.sin, (lambda t: t * t), (lambda t: t)
    dr, dh = np.cos, (lambda t: 2 * t)

    def phi(t):
        sig = lambda s: 0.5 * (1 + l(s))
        a, _ = integrate.quad(lambda s: sig(s) * dr(s), 0, t, epsabs=1e-14)
        b, _ = integrate.quad(lambda s: sig(s) * dh(s), 0, t, epsabs=1e-14)
        return spec.rho_bar * a + spec.rho * b

    return spec, (r, h, l), phi


@pytest.mark.parametrize("t", [1.0, 0.77])
def test_phi_m_error_halves_as_m_doubles(t):
    spec, (r, h, l), phi = _phi_setup()
    grid = Grid(2048, 1.0)
    ts = grid.times
    exact = phi(t)
    errs = [abs(phi_m_functional(spec, grid, m, r(ts), h(ts), l(ts), t) - exact) for m in (16, 32, 64, 128)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(1.7 < q < 2.3 for q in ratios), ratios


def test_phi_m_requires_divisible_resolution():
    spec, (r, h, l), _ = _phi_setup()
    grid = Grid(100, 1.0)
    ts = grid.times
    with pytest.raises(ResolutionError):
        phi_m_functional(spec, grid, 7, r(ts), h(ts), l(ts), 1.0)


def test_phi_m_terminal_at_full_resolution_matches_phi():
    spec = heston_like()
    grid = Grid(32, 1.0)
    ctrl = ControlPath(grid, np.linspace(0.5, -0.5, 32))
    vhat = solve_control_ode(spec, ctrl).vhat
    y = 0.37
    assert phi_m_terminal(spec, grid, 32, y, ctrl.values, vhat) == pytest.approx(
        phi_functional(spec, y, ctrl), rel=1e-12)
