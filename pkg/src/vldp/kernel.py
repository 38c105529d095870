"""Volterra kernels and the discretised integral operator.

The operator acts on step functions that are constant on each grid cell
``[t_j, t_{j+1})``; the cell integrals of the kernel are collected once in a
lower-triangular weight matrix and reused by the optimizer and the simulator.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate
from scipy.special import gamma

from .errors import ConfigError, DimensionError
from .grid import Grid

KERNEL_FAMILIES = {
    "fractional": ("H",),
    "shifted-fractional": ("H", "delta"),
    "exponential": ("lambda", "level"),
    "constant": ("level",),
}
_DEFAULTS = {"level": 1.0, "lambda": 1.0, "delta": 0.1}
_GAUSS_POINTS = 16


@dataclass(frozen=True)
class KernelSpec:
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}")
        names = KERNEL_FAMILIES[self.family]
        unknown = set(self.params) - set(names)
        if unknown:
            raise ConfigError(f"kernel {self.family!r} has no parameter(s) {sorted(unknown)}")
        full = {}
        for name in names:
            if name in self.params:
                full[name] = float(self.params[name])
            elif name in _DEFAULTS:
                full[name] = _DEFAULTS[name]
            else:
                raise ConfigError(f"kernel {self.family!r} requires parameter {name!r}")
        object.__setattr__(self, "params", full)

    def __getitem__(self, name):
        return self.params[name]

    @property
    def is_power(self) -> bool:
        return self.family in ("fractional", "shifted-fractional")


def fractional(H: float) -> KernelSpec:
    return KernelSpec("fractional", {"H": H})


def kernel_eval(spec: KernelSpec, t, s):
    """Pointwise kernel value, zero for ``s > t``.

    The fractional family with ``H < 1/2`` is singular on the diagonal and
    returns ``inf`` there; the quadrature never evaluates that point.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    lag = t - s
    causal = lag >= 0
    lag_pos = np.where(causal, lag, 1.0)
    p = spec.params
    with np.errstate(divide="ignore"):
        if spec.family == "fractional":
            a = p["H"] - 0.5
            if a == 0.0:
                val = np.ones_like(lag_pos)
            else:
                val = np.where(lag_pos > 0, lag_pos**a, np.inf if a < 0 else 0.0)
            val = val / gamma(p["H"] + 0.5)
        elif spec.family == "shifted-fractional":
            val = (lag_pos + p["delta"]) ** (p["H"] - 0.5) / gamma(p["H"] + 0.5)
        elif spec.family == "exponential":
            val = p["level"] * np.exp(-p["lambda"] * lag_pos)
        else:
            val = np.full_like(lag_pos, p["level"])
    out = np.where(causal, val, 0.0)
    return out[()] if out.ndim == 0 else out


def _power_cell_integrals(spec, lags_hi, lags_lo):
    # antiderivative of (u + shift)^(H - 1/2) is (u + shift)^(H + 1/2) / (H + 1/2)
    a = spec["H"] + 0.5
    shift = spec.params.get("delta", 0.0)
    return ((lags_hi + shift) ** a - (lags_lo + shift) ** a) / (a * gamma(a))


@dataclass(frozen=True, eq=False)
class KernelWeights:
    """``matrix[i, j]`` is the integral of ``K(t_i, .)`` over cell ``j``; shape ``(n+1, n)``."""

    spec: KernelSpec
    grid: Grid
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix.setflags(write=False)

    def to_csv(self, path):
        n = self.grid.n_steps
        header = "i," + ",".join(f"w{j}" for j in range(n))
        rows = np.column_stack([np.arange(n + 1), self.matrix])
        np.savetxt(path, rows, delimiter=",", header=header, comments="",
                   fmt=["%d"] + ["%.17g"] * n, encoding="utf-8")


def build_weights(spec: KernelSpec, grid: Grid) -> KernelWeights:
    n, dt = grid.n_steps, grid.dt
    t = grid.times
    W = np.zeros((n + 1, n))
    i_idx, j_idx = np.tril_indices(n + 1, k=-1, m=n)
    if spec.family == "constant":
        W[i_idx, j_idx] = spec["level"] * dt
    elif spec.is_power:
        W[i_idx, j_idx] = _power_cell_integrals(spec, t[i_idx] - t[j_idx], t[i_idx] - t[j_idx + 1])
    else:
        nodes, wts = np.polynomial.legendre.leggauss(_GAUSS_POINTS)
        # s = t_j + dt * (node + 1) / 2 inside each cell
        s = t[j_idx][:, None] + 0.5 * dt * (nodes[None, :] + 1.0)
        vals = kernel_eval(spec, t[i_idx][:, None], s)
        W[i_idx, j_idx] = 0.5 * dt * vals @ wts
    return KernelWeights(spec, grid, W)


def apply_kernel(weights: KernelWeights, h) -> np.ndarray:
    """Values ``(K h)(t_i)`` for ``i = 0..n`` of a step function ``h``.

    ``h`` holds the left-endpoint cell values, shape ``(n,)``, or ``(n, m)``
    for ``m`` step functions at once.
    """
    h = np.asarray(h, dtype=float)
    n = weights.grid.n_steps
    if h.shape[0] != n or h.ndim > 2:
        raise DimensionError(f"expected {n} cell values on the leading axis, got shape {h.shape}")
    return weights.matrix @ h


def l2_sup_norm(spec: KernelSpec, horizon: float) -> float:
    """``sup_t int_0^T K(t,s)^2 ds`` (attained at ``t = T`` for these families)."""
    p = spec.params
    T = horizon
    if spec.family == "fractional":
        H = p["H"]
        if not 0.0 < H < 1.0:
            return math.inf
        return T ** (2 * H) / (2 * H * gamma(H + 0.5) ** 2)
    if spec.family == "shifted-fractional":
        H, d = p["H"], p["delta"]
        if d <= 0 or not 0.0 < H < 1.0:
            return math.inf
        return ((T + d) ** (2 * H) - d ** (2 * H)) / (2 * H * gamma(H + 0.5) ** 2)
    if spec.family == "exponential":
        lam, c = p["lambda"], p["level"]
        if lam == 0:
            return c * c * T
        return c * c * (1.0 - math.exp(-2 * lam * T)) / (2 * lam)
    return p["level"] ** 2 * T


def _l2_gap(spec, t1, t2):
    """``int_0^T |K(t1,s) - K(t2,s)|^2 ds`` for ``t1 < t2``."""
    if t2 <= t1:
        return 0.0

    def diff2(s):
        return float(kernel_eval(spec, t2, s) - kernel_eval(spec, t1, s)) ** 2

    def tail2(s):
        return float(kernel_eval(spec, t2, s)) ** 2

    # weight-free singular endpoints are handled by QUADPACK's extrapolation
    head, _ = integrate.quad(diff2, 0.0, t1, limit=200) if t1 > 0 else (0.0, 0.0)
    if spec.family == "fractional":
        H = spec["H"]
        tail = (t2 - t1) ** (2 * H) / (2 * H * gamma(H + 0.5) ** 2)
    else:
        tail, _ = integrate.quad(tail2, t1, t2, limit=200)
    return head + tail


def modulus_estimate(spec: KernelSpec, grid: Grid, h: float, max_pairs: int = 64) -> float:
    """Estimate of the L2 modulus of continuity ``M(h)`` over grid-point pairs.

    Pairs are ``(t_i, t_i + h)`` with ``t_i`` on the grid; at most ``max_pairs``
    left points are probed (evenly spread).
    """
    if not 0.0 < h <= grid.horizon:
        raise ValueError("h must lie in (0, T]")
    if spec.family == "constant":
        return 0.0
    starts = grid.times[grid.times + h <= grid.horizon + 1e-12]
    if starts.size > max_pairs:
        starts = starts[np.linspace(0, starts.size - 1, max_pairs).round().astype(int)]
    return max(_l2_gap(spec, float(t1), min(float(t1) + h, grid.horizon)) for t1 in starts)


_WEIGHTS_CACHE = {}


def cached_weights(spec: KernelSpec, grid: Grid) -> KernelWeights:
    """Memoised :func:`build_weights`; the result is read-only so sharing is safe."""
    key = (spec.family, tuple(sorted(spec.params.items())), grid.n_steps, grid.horizon)
    w = _WEIGHTS_CACHE.get(key)
    if w is None:
        if len(_WEIGHTS_CACHE) > 32:
            _WEIGHTS_CACHE.clear()
        w = _WEIGHTS_CACHE[key] = build_weights(spec, grid)
    return w
