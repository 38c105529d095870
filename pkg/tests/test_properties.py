import math

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from vldp import (ControlPath, FunctionSpec, Grid, KernelSpec, ModelSpec, apply_kernel, build_weights,
                  compute_EFG, dump_config, inner_objective, inverse_control, minimize_scalar_rate,
                  parse_config, solve_control_ode, wilson_interval)
from vldp.montecarlo import fit_intercept

from conftest import brownian_square, flat_vol, heston_like

finite = dict(allow_nan=False, allow_infinity=False)
unit = st.floats(0.05, 0.95)

kernels = st.one_of(
    st.builds(lambda H: KernelSpec("fractional", {"H": H}), st.floats(0.02, 0.98)),
    st.builds(lambda H, d: KernelSpec("shifted-fractional", {"H": H, "delta": d}), unit, st.floats(0.01, 1.0)),
    st.builds(lambda lam, lev: KernelSpec("exponential", {"lambda": lam, "level": lev}),
              st.floats(0.1, 5.0), st.floats(0.1, 3.0)),
    st.builds(lambda lev: KernelSpec("constant", {"level": lev}), st.floats(0.1, 3.0)),
)

sigmas = st.one_of(
    st.builds(lambda s, b: FunctionSpec("sigma", "shifted-power", {"sigma0": s, "beta": b}),
              st.floats(0.05, 1.0), st.floats(0.05, 0.45)),
    st.builds(lambda s: FunctionSpec("sigma", "constant", {"sigma0": s}), st.floats(0.05, 1.0)),
    st.builds(lambda s, k: FunctionSpec("sigma", "affine", {"sigma0": s, "slope": k}),
              st.floats(0.05, 1.0), st.floats(0.0, 2.0)),
)


@st.composite
def models(draw):
    disp = draw(st.sampled_from([FunctionSpec("disp", "sqrt"), FunctionSpec("disp", "constant")]))
    drift = draw(st.sampled_from([FunctionSpec("drift", "zero"),
                                  FunctionSpec("drift", "mean-reverting", {"kappa": 1.0, "theta": 0.05})]))
    u = draw(st.sampled_from([FunctionSpec("u", "identity"), FunctionSpec("u", "square")]))
    return ModelSpec(draw(kernels), u, draw(sigmas), drift, disp, draw(st.floats(0.01, 0.2)),
                     draw(st.floats(-0.9, 0.9)), draw(st.floats(0.25, 2.0)))


@given(models())
def test_config_round_trip(spec):
    assert parse_config(dump_config(spec)) == spec


@given(kernels, arrays(float, 12, elements=st.floats(-5, 5, **finite)),
       arrays(float, 12, elements=st.floats(-5, 5, **finite)), st.floats(-3, 3, **finite))
def test_kernel_linearity(kspec, h1, h2, a):
    w = build_weights(kspec, Grid(12, 1.0))
    lhs = apply_kernel(w, a * h1 + h2)
    rhs = a * apply_kernel(w, h1) + apply_kernel(w, h2)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * (1 + np.max(np.abs(rhs))))


@given(kernels, arrays(float, 12, elements=st.floats(-5, 5, **finite)), st.integers(0, 11))
def test_kernel_causality(kspec, h, k):
    w = build_weights(kspec, Grid(12, 1.0))
    bumped = h.copy()
    bumped[k] += 1.0
    # cell k only reaches times after t_k
    assert np.array_equal(apply_kernel(w, h)[:k + 1], apply_kernel(w, bumped)[:k + 1])


@given(kernels)
def test_weights_nonnegative(kspec):
    assert np.all(build_weights(kspec, Grid(10, 1.5)).matrix >= 0.0)


@given(models(), arrays(float, 16, elements=st.floats(-3, 3, **finite)), st.floats(0.0, 3.0))
def test_energy_is_quadratic(spec, fdot, c):
    grid = Grid(16, spec.horizon)
    e1 = compute_EFG(spec, ControlPath(grid, fdot)).E
    e2 = compute_EFG(spec, ControlPath(grid, c * fdot)).E
    assert math.isclose(e2, c * c * e1, rel_tol=1e-12, abs_tol=1e-300)


@given(arrays(float, 20, elements=st.floats(-3, 3, **finite)))
def test_brownian_inverse_control_round_trip(fdot):
    spec = brownian_square()
    grid = Grid(20, 1.0)
    ctrl = ControlPath(grid, fdot)
    back = inverse_control(spec, grid, solve_control_ode(spec, ctrl).v)
    assert np.allclose(back.fdot, fdot, atol=1e-10)


@given(arrays(float, 20, elements=st.floats(-3, 3, **finite)), st.floats(0.01, 1.0), st.floats(-1, 1))
def test_uncorrelated_objective_is_even_in_target(fdot, x, sign):
    spec = heston_like(rho=0.0)
    ctrl = ControlPath(Grid(20, 1.0), fdot)
    assert math.isclose(inner_objective(spec, ctrl, x), inner_objective(spec, ctrl, -x), rel_tol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.8), st.floats(-0.9, 0.9), st.floats(0.25, 3.0), st.floats(-1.0, 1.0))
def test_flat_vol_rate_closed_form(s0, rho, T, x):
    res = minimize_scalar_rate(flat_vol(s0, rho, T), Grid(20, T), x)
    assert math.isclose(res.value, x * x / (2 * s0 * s0 * T), rel_tol=1e-6, abs_tol=1e-12)


@settings(max_examples=15, deadline=None)
@given(arrays(float, 30, elements=st.floats(-2, 2, **finite)), st.floats(0.1, 1.0))
def test_minimum_bounds_every_control(fdot, x):
    spec = heston_like()
    grid = Grid(30, 1.0)
    best = minimize_scalar_rate(spec, grid, x).value
    assert inner_objective(spec, ControlPath(grid, fdot), x) >= best * (1 - 1e-7)


@given(st.integers(1, 5000), st.data())
def test_wilson_interval_brackets_estimate(n, data):
    hits = data.draw(st.integers(0, n))
    lo, hi = wilson_interval(hits, n)
    assert 0.0 <= lo <= hits / n <= hi <= 1.0


@given(st.floats(-5, 0, **finite), st.floats(-3, 3, **finite))
def test_fit_intercept_exact_on_model_data(a, b):
    eps = np.array([0.4, 0.2, 0.1, 0.05])
    y = a + b * eps + 0.5 * eps * np.log(eps)
    a_hat, b_hat, _ = fit_intercept(eps, y)
    assert math.isclose(a_hat, a, abs_tol=1e-10) and math.isclose(b_hat, b, abs_tol=1e-9)
