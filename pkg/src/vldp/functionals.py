"""Variational building blocks: energy, variance and covariation integrals,
the scalar and path-space objectives, and the log-price functionals.

All time integrals are left-endpoint sums on the grid, matching the Euler
scheme used for simulation.  The objectives come with exact gradients of
the discrete maps (reverse sweep through sigma, the kernel, U and the Euler
recursion).
"""
from dataclasses import dataclass
import math

import numpy as np

from .dynamics import ControlPath, _euler_driver, _positive_part
from .errors import ConfigError, DimensionError, DomainError, ResolutionError
from .grid import Grid
from .kernel import KernelWeights, cached_weights
from .model import ModelSpec, scalar_pair


@dataclass(frozen=True)
class FunctionalValues:
    E: float  # int fdot^2
    F: float  # int sigma(check g)^2
    G: float  # int sigma(check g) fdot


def _require_rho(spec):
    if not abs(spec.rho) < 1:
        raise ConfigError(f"|rho| must be < 1, got {spec.rho}")


class _Forward:
    """Intermediate arrays of one control evaluation, kept for the reverse sweep."""

    __slots__ = ("fdot", "v", "p", "ghat", "S", "dt")

    def __init__(self, spec: ModelSpec, weights: KernelWeights, fdot):
        self.dt = weights.grid.dt
        self.fdot = np.asarray(fdot, dtype=float)
        self.v = _euler_driver(spec, self.dt, self.fdot)
        self.p = _positive_part(spec, self.v[:-1])
        n = self.fdot.shape[0]
        self.ghat = weights.matrix[:n] @ spec.u_fn(self.p)
        self.S = spec.sigma_fn(self.ghat)

    def efg(self):
        dt, fd, S = self.dt, self.fdot, self.S
        return FunctionalValues(dt * float(fd @ fd), dt * float(S @ S), dt * float(S @ fd))


def _reverse(spec, weights, fw, dS, dfd):
    """Gradient in ``fdot`` given sensitivities to ``S`` and the direct ``fdot`` term."""
    n, dt = fw.fdot.shape[0], fw.dt
    dghat = dS * spec.sigma_fn.derivative(fw.ghat)
    dp = (weights.matrix[:n].T @ dghat) * spec.u_fn.derivative(fw.p)
    grad = np.array(dfd, dtype=float)
    if spec.drift_fn.family == "zero" and spec.disp_fn.family == "constant":
        # v_k = v0 + dt c sum_{i<k} fdot_i, so fdot_i feeds every p_k with k > i
        tail = np.concatenate([np.cumsum(dp[::-1])[::-1][1:], [0.0]])
        grad += dt * spec.disp_fn["level"] * tail
        return grad
    _, db = scalar_pair(spec.drift_fn)
    s, ds = scalar_pair(spec.disp_fn)
    clamp = spec.nonneg_driver
    v, p, fd = fw.v.tolist(), fw.p.tolist(), fw.fdot.tolist()
    dp = dp.tolist()
    adj = 0.0  # dJ/dv_{i+1}
    for i in range(n - 1, -1, -1):
        pi = p[i]
        grad[i] += adj * dt * s(pi)
        dpi = dp[i] + adj * dt * (db(pi) + ds(pi) * fd[i])
        if not clamp or v[i] > 0.0:
            adj += dpi
    return grad


def _as_fdot(ctrl, grid):
    if isinstance(ctrl, ControlPath):
        return ctrl.fdot
    fdot = np.asarray(ctrl, dtype=float)
    if fdot.shape != (grid.n_steps,):
        raise DimensionError(f"control must have {grid.n_steps} cell values")
    return fdot


def compute_EFG(spec: ModelSpec, ctrl: ControlPath, weights: KernelWeights = None) -> FunctionalValues:
    weights = weights or cached_weights(spec.kernel, ctrl.grid)
    return _Forward(spec, weights, ctrl.fdot).efg()


def scalar_objective(spec: ModelSpec, weights: KernelWeights, fdot, x: float, grad: bool = False):
    """``(x - rho G)^2 / (2 rho_bar^2 F) + E / 2`` and optionally its gradient in ``fdot``."""
    fw = _Forward(spec, weights, fdot)
    vals = fw.efg()
    E, F, G = vals.E, vals.F, vals.G
    rb2 = 1.0 - spec.rho**2
    resid = x - spec.rho * G
    val = resid * resid / (2.0 * rb2 * F) + 0.5 * E
    if not grad:
        return val
    dG = -spec.rho * resid / (rb2 * F)
    dF = -resid * resid / (2.0 * rb2 * F * F)
    dt = fw.dt
    dS = dt * (2.0 * fw.S * dF + fw.fdot * dG)
    dfd = dt * (fw.fdot + fw.S * dG)
    return val, _reverse(spec, weights, fw, dS, dfd)


def path_objective(spec: ModelSpec, weights: KernelWeights, fdot, gdot, grad: bool = False):
    """Left-endpoint sum of the path-space integrand for a fixed target slope ``gdot``."""
    fw = _Forward(spec, weights, fdot)
    rb = spec.rho_bar
    dt, S, fd = fw.dt, fw.S, fw.fdot
    r = (gdot - spec.rho * S * fd) / (rb * S)
    val = 0.5 * dt * float(r @ r) + 0.5 * dt * float(fd @ fd)
    if not grad:
        return val
    dS = -dt * r * gdot / (rb * S * S)
    dfd = dt * (fd - (spec.rho / rb) * r)
    g_f = _reverse(spec, weights, fw, dS, dfd)
    return val, g_f


def path_objective_target_grad(spec: ModelSpec, weights: KernelWeights, fdot, gdot):
    """Partial derivative of :func:`path_objective` in ``gdot`` at fixed control."""
    fw = _Forward(spec, weights, fdot)
    rb = spec.rho_bar
    r = (gdot - spec.rho * fw.S * fw.fdot) / (rb * fw.S)
    return fw.dt * r / (rb * fw.S)


def inner_objective(spec: ModelSpec, ctrl: ControlPath, x: float, weights: KernelWeights = None) -> float:
    """Objective whose infimum over controls is the terminal rate ``I_T(x)``."""
    _require_rho(spec)
    weights = weights or cached_weights(spec.kernel, ctrl.grid)
    return float(scalar_objective(spec, weights, ctrl.fdot, float(x)))


def target_slopes(grid: Grid, g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (grid.n_steps + 1,):
        raise DimensionError(f"target path must have {grid.n_steps + 1} grid values")
    if g[0] != 0.0:
        raise DomainError("target path must start at 0")
    return np.diff(g) / grid.dt


def path_rate_integrand(spec: ModelSpec, ctrl: ControlPath, g, weights: KernelWeights = None) -> float:
    """Path-space objective at control ``ctrl`` for the piecewise-linear target ``g``."""
    _require_rho(spec)
    weights = weights or cached_weights(spec.kernel, ctrl.grid)
    return float(path_objective(spec, weights, ctrl.fdot, target_slopes(ctrl.grid, g)))


def phi_functional(spec: ModelSpec, y: float, ctrl: ControlPath, weights: KernelWeights = None) -> float:
    """Terminal log-price ``rho_bar sqrt(F) y + rho G`` for standardised terminal noise ``y``."""
    vals = compute_EFG(spec, ctrl, weights)
    return spec.rho_bar * math.sqrt(vals.F) * y + spec.rho * vals.G


def terminal_noise(spec: ModelSpec, ctrl: ControlPath, x: float, weights: KernelWeights = None) -> float:
    """The ``y`` solving ``phi_functional(spec, y, ctrl) == x``."""
    _require_rho(spec)
    vals = compute_EFG(spec, ctrl, weights)
    return (x - spec.rho * vals.G) / (spec.rho_bar * math.sqrt(vals.F))


def _coarse_step(grid, m):
    if m < 1 or grid.n_steps % m:
        raise ResolutionError(f"m = {m} does not divide the fine grid ({grid.n_steps} steps)")
    return grid.n_steps // m


def phi_m_functional(spec: ModelSpec, grid: Grid, m: int, r, h, l, t: float) -> float:
    """Discretised path functional at time ``t`` with ``m`` coarse cells.

    ``r``, ``h`` and ``l`` are sampled on ``grid``, which must refine the
    coarse grid.  Coefficients are frozen at coarse left endpoints, with a
    stub term from the snapped time to ``t``.
    """
    step = _coarse_step(grid, m)
    r, h, l = (np.asarray(a, dtype=float) for a in (r, h, l))
    for a in (r, h, l):
        if a.shape != (grid.n_steps + 1,):
            raise DimensionError("paths must be sampled on the fine grid")
    T = grid.horizon
    if not 0.0 <= t <= T:
        raise ValueError("t must lie in [0, T]")
    k_snap = min(int(math.floor(m * t / T + 1e-12)), m)
    idx = np.arange(k_snap + 1) * step
    vol = spec.sigma_fn(l[idx])
    snap = idx[-1]
    times = grid.times
    r_t, h_t = np.interp(t, times, r), np.interp(t, times, h)
    sum_r = float(vol[:-1] @ np.diff(r[idx])) + float(vol[-1]) * (r_t - r[snap])
    sum_h = float(vol[:-1] @ np.diff(h[idx])) + float(vol[-1]) * (h_t - h[snap])
    return spec.rho_bar * sum_r + spec.rho * sum_h


def phi_m_terminal(spec: ModelSpec, grid: Grid, m: int, y: float, h, l) -> float:
    """Terminal discretised functional: exact variance term, frozen-coefficient covariation."""
    step = _coarse_step(grid, m)
    h, l = np.asarray(h, dtype=float), np.asarray(l, dtype=float)
    vol_fine = spec.sigma_fn(l[:-1])
    var = grid.dt * float(vol_fine @ vol_fine)
    idx = np.arange(m + 1) * step
    return spec.rho_bar * math.sqrt(var) * y + spec.rho * float(spec.sigma_fn(l[idx[:-1]]) @ np.diff(h[idx]))
