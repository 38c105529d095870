"""Control ODE, hat/check operators and Monte Carlo paths of the scaled model."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
import os

import numpy as np

from .errors import DimensionError, DivergenceError, SingularControlError
from .grid import Grid
from .kernel import KernelWeights, apply_kernel, cached_weights
from .model import ModelSpec, scalar_pair

BLOCK_SIZE = 4096


@dataclass(frozen=True, eq=False)
class ControlPath:
    """Element of H^1_0 stored through its cellwise-constant derivative."""

    grid: Grid
    fdot: np.ndarray

    def __post_init__(self):
        fdot = np.array(self.fdot, dtype=float)
        if fdot.shape != (self.grid.n_steps,):
            raise DimensionError(f"fdot must have shape ({self.grid.n_steps},), got {fdot.shape}")
        fdot.setflags(write=False)
        object.__setattr__(self, "fdot", fdot)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n_steps))

    @classmethod
    def constant(cls, grid, rate):
        return cls(grid, np.full(grid.n_steps, float(rate)))

    @property
    def values(self) -> np.ndarray:
        """``f(t_i)`` for ``i = 0..n`` with ``f(0) = 0``."""
        return np.concatenate([[0.0], np.cumsum(self.fdot) * self.grid.dt])

    @property
    def energy(self) -> float:
        return float(self.grid.dt * np.dot(self.fdot, self.fdot))


@dataclass(frozen=True, eq=False)
class DriverPath:
    grid: Grid
    v: np.ndarray
    vhat: np.ndarray


def _positive_part(spec, v):
    return np.maximum(v, 0.0) if spec.nonneg_driver else v


def _euler_driver(spec: ModelSpec, dt: float, fdot: np.ndarray) -> np.ndarray:
    n = fdot.shape[0]
    v = np.empty(n + 1)
    v[0] = spec.v0
    if spec.drift_fn.family == "zero" and spec.disp_fn.family == "constant":
        v[1:] = spec.v0 + np.cumsum(dt * spec.disp_fn["level"] * fdot)
    else:
        b, _ = scalar_pair(spec.drift_fn)
        s, _ = scalar_pair(spec.disp_fn)
        clamp = spec.nonneg_driver
        x = spec.v0
        fd = fdot.tolist()
        for i in range(n):
            p = x if (x > 0.0 or not clamp) else 0.0
            try:
                x = x + dt * (b(p) + s(p) * fd[i])
            except OverflowError:
                raise DivergenceError(i + 1, "driver") from None
            v[i + 1] = x
    bad = np.flatnonzero(~np.isfinite(v))
    if bad.size:
        raise DivergenceError(bad[0], "driver")
    return v


def solve_control_ode(spec: ModelSpec, ctrl: ControlPath, weights: KernelWeights = None) -> DriverPath:
    """Explicit Euler for ``v' = b(v) + s(v) f'`` and the transform ``K(U(v))``.

    Coefficients see the positive part of ``v`` when the dispersion needs it.
    """
    grid = ctrl.grid
    if weights is None:
        weights = cached_weights(spec.kernel, grid)
    elif weights.grid != grid:
        raise DimensionError("weights and control live on different grids")
    v = _euler_driver(spec, grid.dt, ctrl.fdot)
    vp = _positive_part(spec, v)
    vhat = apply_kernel(weights, spec.u_fn(vp[:-1]))
    return DriverPath(grid, v, vhat)


def check_operator(spec: ModelSpec, ctrl: ControlPath, weights: KernelWeights = None) -> np.ndarray:
    """``K(U(Gamma(f)))`` on the grid."""
    return solve_control_ode(spec, ctrl, weights).vhat


def hat_operator(spec: ModelSpec, grid: Grid, path, weights: KernelWeights = None) -> np.ndarray:
    """``K(U(path))`` for a path given by its ``n + 1`` grid values (left endpoints used)."""
    path = np.asarray(path, dtype=float)
    if path.shape[0] != grid.n_steps + 1:
        raise DimensionError("path must hold n + 1 grid values")
    if weights is None:
        weights = cached_weights(spec.kernel, grid)
    return apply_kernel(weights, spec.u_fn(path[:-1]))


def inverse_control(spec: ModelSpec, grid: Grid, phi2) -> ControlPath:
    """Control that steers the driver through the grid values ``phi2``."""
    phi2 = np.asarray(phi2, dtype=float)
    if phi2.shape != (grid.n_steps + 1,):
        raise DimensionError(f"phi2 must have shape ({grid.n_steps + 1},)")
    p = _positive_part(spec, phi2[:-1])
    disp = np.asarray(spec.disp_fn(p), dtype=float)
    zero = np.flatnonzero(disp <= 0.0)
    if zero.size:
        raise SingularControlError(zero[0])
    slope = np.diff(phi2) / grid.dt
    return ControlPath(grid, (slope - spec.drift_fn(p)) / disp)


@dataclass(frozen=True, eq=False)
class PathBatch:
    epsilon: float
    n_paths: int
    terminal_logprice: np.ndarray
    terminal_driver: np.ndarray
    terminal_vhat: np.ndarray
    paths: np.ndarray = None  # (n_paths, n + 1) log-price paths when requested

    def to_csv(self, path):
        cols = [np.arange(self.n_paths), self.terminal_logprice]
        header = "path_id,x_T"
        fmt = ["%d", "%.17g"]
        if self.paths is not None:
            k = self.paths.shape[1]
            cols.append(self.paths)
            header += "," + ",".join(f"x_{i}" for i in range(k))
            fmt += ["%.17g"] * k
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
                   comments="", fmt=fmt, encoding="utf-8")


def block_generators(seed: int, block: int):
    """Independent (B, W) Philox streams of one path block."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block),))
    sb, sw = ss.spawn(2)
    return np.random.Generator(np.random.Philox(sb)), np.random.Generator(np.random.Philox(sw))


def _simulate_block(spec, weights, epsilon, m, seed, block, full_paths, v_start):
    grid = weights.grid
    n, dt = grid.n_steps, grid.dt
    gen_b, gen_w = block_generators(seed, block)
    dB = gen_b.standard_normal((m, n)) * math.sqrt(dt)
    dW = gen_w.standard_normal((m, n)) * math.sqrt(dt)
    se = math.sqrt(epsilon)
    v = np.empty((m, n + 1))
    v[:, 0] = spec.v0 if v_start is None else v_start
    clamp = spec.nonneg_driver
    drift_zero = spec.drift_fn.family == "zero"
    for i in range(n):
        p = np.maximum(v[:, i], 0.0) if clamp else v[:, i]
        step = se * spec.disp_fn(p) * dB[:, i]
        if not drift_zero:
            step += dt * spec.drift_fn(p)
        v[:, i + 1] = v[:, i] + step
    vp = np.maximum(v, 0.0) if clamp else v
    vhat = spec.u_fn(vp[:, :-1]) @ weights.matrix.T
    vol = spec.sigma_fn(vhat[:, :-1])
    incr = -0.5 * epsilon * vol * vol * dt + se * vol * (spec.rho_bar * dW + spec.rho * dB)
    if full_paths:
        x = np.zeros((m, n + 1))
        np.cumsum(incr, axis=1, out=x[:, 1:])
        xT = x[:, -1].copy()
    else:
        x = None
        xT = incr.sum(axis=1)
    bad = ~np.isfinite(v).all(axis=0)
    if bad.any():
        raise DivergenceError(np.flatnonzero(bad)[0], "simulated driver")
    if not np.isfinite(xT).all():
        raise DivergenceError(n, "log-price")
    return xT, v[:, -1].copy(), vhat[:, -1].copy(), x


def default_threads():
    try:
        return max(1, int(os.environ.get("VLDP_THREADS", "1")))
    except ValueError:
        return 1


def simulate_batch(spec: ModelSpec, grid: Grid, epsilon: float, n_paths: int, seed: int, *,
                   full_paths: bool = False, threads: int = None, v_start: float = None,
                   weights: KernelWeights = None) -> PathBatch:
    """Simulate ``n_paths`` terminal log-prices of the small-noise model.

    Paths are generated in fixed blocks of :data:`BLOCK_SIZE`, each with its
    own counter-based stream keyed by ``(seed, block)``, so the output does
    not depend on ``threads``.  ``v_start`` overrides the initial driver value.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if weights is None:
        weights = cached_weights(spec.kernel, grid)
    threads = threads or default_threads()
    sizes = [min(BLOCK_SIZE, n_paths - k) for k in range(0, n_paths, BLOCK_SIZE)]

    def run(block):
        return _simulate_block(spec, weights, float(epsilon), sizes[block], seed, block, full_paths, v_start)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    xT, vT, vhatT, xs = zip(*parts)
    return PathBatch(float(epsilon), int(n_paths), np.concatenate(xT), np.concatenate(vT),
                     np.concatenate(vhatT), np.concatenate(xs) if full_paths else None)
