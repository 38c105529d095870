"""Discretize-then-optimize solvers for the terminal and path rate functions."""
from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy import optimize

from .dynamics import ControlPath, solve_control_ode
from .errors import ConfigError
from .functionals import (
    _require_rho, inner_objective, path_objective, path_objective_target_grad,
    path_rate_integrand, scalar_objective, target_slopes,
)
from .grid import Grid
from .kernel import cached_weights
from .model import ModelSpec


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of the multi-start quasi-Newton solver.

    ``gtol`` bounds the L2 norm of the gradient of the normalised objective
    (objective divided by its scale at the first start) in the energy
    coordinates ``sqrt(dt) * fdot``.  ``ftol`` bounds the relative change
    of the objective over the last iteration.
    """

    n_starts: int = 8
    extra_starts: int = 0
    gtol: float = 1e-7
    ftol: float = 1e-10
    maxiter: int = 2000
    seed: int = 1
    gradient: str = "adjoint"  # or "fd" (central finite differences)

    def __post_init__(self):
        if self.gradient not in ("adjoint", "fd"):
            raise ConfigError(f"unknown gradient mode {self.gradient!r}")
        if self.n_starts < 1:
            raise ConfigError("n_starts must be at least 1")


@dataclass(eq=False)
class RateResult:
    target: object  # float x or the target path values
    value: float
    minimizer: ControlPath
    n_starts: int
    converged: bool
    gradient_norm: float
    objective_history: np.ndarray
    start_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    touches_zero: bool = False


def _fd_gradient(fun, z):
    h = 1e-6 * (1.0 + float(np.max(np.abs(z)))) if z.size else 1e-6
    g = np.empty_like(z)
    for k in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[k] += h
        zm[k] -= h
        g[k] = (fun(zp) - fun(zm)) / (2 * h)
    return g


class _Problem:
    """Objective in energy coordinates ``z = sqrt(dt) fdot``, normalised by ``scale``."""

    def __init__(self, value_grad, value, dt, gradient):
        self.value_grad = value_grad
        self.value = value
        self.sq = math.sqrt(dt)
        self.gradient = gradient
        self.scale = 1.0

    def raw(self, z):
        return self.value(z / self.sq)

    def __call__(self, z):
        if self.gradient == "fd":
            val = self.raw(z)
            grad = _fd_gradient(self.raw, z)
        else:
            val, g_fd = self.value_grad(z / self.sq)
            grad = g_fd / self.sq
        return val / self.scale, grad / self.scale


def _lbfgs(problem, z0, opts, maxiter):
    history = []

    def record(zk):
        history.append(problem(zk)[0])

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = optimize.minimize(
            problem, z0, jac=True, method="L-BFGS-B", callback=record,
            options={"maxiter": maxiter, "ftol": opts.ftol, "gtol": opts.gtol * 1e-2,
                     "maxcor": 30, "maxls": 50})
    return res.x, history


def _last_change(history):
    if len(history) < 2:
        return 0.0
    prev, last = history[-2], history[-1]
    return abs(prev - last) / max(abs(prev), abs(last), 1e-300)


def _run_starts(problem, starts, opts):
    """Minimise from each start; returns the best (value, z, history, grad_norm, converged)."""
    best = None
    start_values = []
    problem.scale = max(abs(problem.raw(starts[0])), 1e-300)
    for z0 in starts:
        history = [problem(z0)[0]]
        x, hist = _lbfgs(problem, z0, opts, opts.maxiter)
        history += hist
        val, grad = problem(x)
        gnorm = float(np.linalg.norm(grad))
        rel = _last_change(history)
        if gnorm <= opts.gtol and rel > opts.ftol:
            # the step that ended the run may be large even at a stationary point;
            # judge the objective change on a short restart from there instead
            x2, hist2 = _lbfgs(problem, x, opts, 5)
            val2, grad2 = problem(x2)
            rel = _last_change([val] + hist2) if hist2 else 0.0
            if val2 <= val:
                x, val, gnorm = x2, val2, float(np.linalg.norm(grad2))
                history += hist2
        conv = bool(gnorm <= opts.gtol and rel <= opts.ftol)
        start_values.append(val * problem.scale)
        if best is None or val < best[0]:
            best = (val, x, np.asarray(history) * problem.scale, gnorm * problem.scale, conv)
    return best, np.asarray(start_values)


def _start_multipliers(n_starts, anchor_coeff):
    """Deterministic start amplitudes (in units of the Black-Scholes scale); a prefix-stable list."""
    base = [0.0, anchor_coeff, 0.5, 1.0, -0.5, 2.0, -1.0, 0.25, 4.0, -2.0, 0.75, -0.25]
    k = 12
    while len(base) < n_starts + 2:
        base += [float(k), -float(k) / 2]
        k *= 2
    seen, out = set(), []
    for c in base:
        key = round(c, 12)
        if key not in seen:
            seen.add(key)
            out.append(c)
    return out[:n_starts]


def _zero_control_vol(spec, grid, weights):
    vhat = solve_control_ode(spec, ControlPath.zeros(grid), weights).vhat
    return float(spec.sigma_fn(vhat[-1]))


def _build_starts(shape_fdot, scale_amp, anchor_coeff, opts, grid, warm=None):
    sq = math.sqrt(grid.dt)
    starts = [] if warm is None else [np.asarray(warm, dtype=float) * sq]
    for c in _start_multipliers(opts.n_starts, anchor_coeff):
        starts.append(c * scale_amp * shape_fdot * sq)
    rng = np.random.default_rng(opts.seed)
    anchor = anchor_coeff * scale_amp * shape_fdot * sq
    spread = abs(scale_amp) * sq if scale_amp else sq
    for _ in range(opts.extra_starts):
        starts.append(anchor + spread * rng.standard_normal(grid.n_steps))
    return starts


def minimize_scalar_rate(spec: ModelSpec, grid: Grid, x: float, opts: SolverOptions = None,
                         warm_start=None) -> RateResult:
    """Terminal rate ``I_T(x)`` as the best value over several quasi-Newton runs.

    Starts: the zero control, the constant control that is optimal when
    sigma is constant (``rho x / (sigma T)``), scaled variants of the
    Black-Scholes amplitude ``x / (sigma T)``, then random perturbations.
    """
    opts = opts or SolverOptions()
    _require_rho(spec)
    if grid.horizon != spec.horizon:
        raise ConfigError("grid horizon differs from the model maturity")
    weights = cached_weights(spec.kernel, grid)
    x = float(x)
    if x == 0.0:
        ctrl = ControlPath.zeros(grid)
        return RateResult(x, inner_objective(spec, ctrl, x, weights), ctrl, 1, True, 0.0,
                          np.zeros(1), np.zeros(1))
    problem = _Problem(lambda fd: scalar_objective(spec, weights, fd, x, grad=True),
                       lambda fd: scalar_objective(spec, weights, fd, x), grid.dt, opts.gradient)
    amp = x / (_zero_control_vol(spec, grid, weights) * grid.horizon)
    starts = _build_starts(np.ones(grid.n_steps), amp, spec.rho, opts, grid, warm_start)
    (_, z, hist, gnorm, conv), start_values = _run_starts(problem, starts, opts)
    ctrl = ControlPath(grid, z / math.sqrt(grid.dt))
    value = inner_objective(spec, ctrl, x, weights)
    return RateResult(x, value, ctrl, len(starts), conv, gnorm, hist, start_values,
                      _touches_zero(spec, ctrl, weights))


def _touches_zero(spec, ctrl, weights):
    if not spec.nonneg_driver:
        return False
    return bool(np.min(solve_control_ode(spec, ctrl, weights).v) <= 0.0)


def minimize_path_rate(spec: ModelSpec, grid: Grid, g, opts: SolverOptions = None,
                       warm_start=None) -> RateResult:
    """Path rate ``Q(g)`` for a piecewise-linear target with ``g(0) = 0``."""
    opts = opts or SolverOptions()
    _require_rho(spec)
    weights = cached_weights(spec.kernel, grid)
    g = np.asarray(g, dtype=float)
    gdot = target_slopes(grid, g)
    if not np.any(gdot):
        ctrl = ControlPath.zeros(grid)
        return RateResult(g, 0.0, ctrl, 1, True, 0.0, np.zeros(1), np.zeros(1))
    problem = _Problem(lambda fd: path_objective(spec, weights, fd, gdot, grad=True),
                       lambda fd: path_objective(spec, weights, fd, gdot), grid.dt, opts.gradient)
    vol = _zero_control_vol(spec, grid, weights)
    rms = math.sqrt(float(np.mean(gdot**2)))
    starts = _build_starts(gdot / rms, rms / vol, spec.rho, opts, grid, warm_start)
    (_, z, hist, gnorm, conv), start_values = _run_starts(problem, starts, opts)
    ctrl = ControlPath(grid, z / math.sqrt(grid.dt))
    value = path_rate_integrand(spec, ctrl, g, weights)
    return RateResult(g, value, ctrl, len(starts), conv, gnorm, hist, start_values,
                      _touches_zero(spec, ctrl, weights))


@dataclass(eq=False)
class TerminalPathResult:
    value: float
    target: np.ndarray
    inner: RateResult
    outer_iterations: int


def minimize_terminal_path_rate(spec: ModelSpec, grid: Grid, x: float, opts: SolverOptions = None,
                                maxiter: int = 300) -> TerminalPathResult:
    """Nested problem ``min { Q(g) : g(T) = x }`` over piecewise-linear targets.

    The outer loop moves the target slopes (their mean is pinned to
    ``x / T``) using the envelope gradient of the inner path-rate solve.
    """
    opts = opts or SolverOptions()
    weights = cached_weights(spec.kernel, grid)
    inner_opts = SolverOptions(n_starts=min(opts.n_starts, 4), gtol=opts.gtol, ftol=opts.ftol,
                               maxiter=opts.maxiter, seed=opts.seed)
    mean_slope = x / grid.horizon
    state = {"warm": None, "res": None}

    def to_path(w):
        gdot = mean_slope + (w - w.mean())
        return np.concatenate([[0.0], np.cumsum(gdot) * grid.dt]), gdot

    def outer(w):
        g, gdot = to_path(w)
        res = minimize_path_rate(spec, grid, g, inner_opts, warm_start=state["warm"])
        state["warm"] = res.minimizer.fdot
        state["res"] = res
        dq = path_objective_target_grad(spec, weights, res.minimizer.fdot, gdot)
        return res.value, dq - dq.mean()

    w0 = np.zeros(grid.n_steps)
    sol = optimize.minimize(outer, w0, jac=True, method="L-BFGS-B",
                            options={"maxiter": maxiter, "ftol": 1e-12, "gtol": 1e-10})
    g, _ = to_path(sol.x)
    final = minimize_path_rate(spec, grid, g, opts, warm_start=state["warm"])
    return TerminalPathResult(final.value, g, final, int(sol.nit))


def rate_profile(spec: ModelSpec, grid: Grid, xs, opts: SolverOptions = None):
    """``I_T`` along ``xs`` with continuation from the nearest solved point on the same side.

    Returns ``(rows, monotone)`` where rows are ``(x, value, RateResult)`` in
    input order and ``monotone`` says whether the values grow with ``|x|``
    on each side of zero.
    """
    opts = opts or SolverOptions()
    xs = [float(x) for x in xs]
    order = sorted(range(len(xs)), key=lambda k: (xs[k] < 0, abs(xs[k])))
    results = {}
    prev = {True: None, False: None}
    for k in order:
        x = xs[k]
        side = x < 0
        warm = None
        if prev[side] is not None and prev[side][0] != 0.0:
            warm = prev[side][1].minimizer.fdot * (x / prev[side][0])
        res = minimize_scalar_rate(spec, grid, x, opts, warm_start=warm)
        results[k] = res
        prev[side] = (x, res)
        if x == 0.0:
            prev[not side] = prev[not side] or (x, res)
    rows = [(xs[k], results[k].value, results[k]) for k in range(len(xs))]
    monotone = True
    for side in (True, False):
        vals = [results[k].value for k in order if (xs[k] < 0) == side]
        monotone &= all(b >= a - 1e-12 * max(1.0, abs(a)) for a, b in zip(vals, vals[1:]))
    return rows, monotone
