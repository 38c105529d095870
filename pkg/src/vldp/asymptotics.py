"""Large-strike scaling of the drift-less CIR model and the small-x Taylor check."""
from dataclasses import dataclass
import math

import numpy as np

from .errors import ConfigError, DomainError
from .grid import Grid
from .model import ModelSpec, is_driftless_cir, is_brownian_square
from .rate import SolverOptions, minimize_scalar_rate


def strike_exponent(beta: float) -> float:
    """``gamma = 1 / (beta + 1/2)`` for ``beta`` in the open interval (0, 1/2)."""
    if not 0.0 < beta < 0.5:
        raise DomainError(f"beta must lie in (0, 1/2), got {beta}")
    return 1.0 / (beta + 0.5)


@dataclass(frozen=True)
class StrikeAsymptotics:
    beta: float
    I1: float

    @property
    def gamma(self) -> float:
        return strike_exponent(self.beta)

    def __call__(self, K):
        return call_price_asymptote(self, K)


def call_price_asymptote(sa: StrikeAsymptotics, K: float) -> float:
    """Leading-order ``exp(-I_T(1) (log K)^gamma)`` shared by digital and vanilla calls."""
    if not K > 1.0:
        raise DomainError("the large-strike formula needs K > 1")
    return math.exp(-sa.I1 * math.log(K) ** sa.gamma)


def strike_mc_table(study, beta: float):
    """Read an LDP study of ``X^eps >= 1`` as large-strike data for the unscaled price.

    With ``k = eps^-(beta + 1/2)`` and ``log K = k``, the quantity
    ``-log P(S_T >= K) / (log K)^gamma`` equals ``-eps log p``.
    Rows: ``(eps, log K, -log p / (log K)^gamma)``.
    """
    gamma = strike_exponent(beta)
    out = []
    for r in study.rows:
        log_k = r.epsilon ** -(beta + 0.5)
        ratio = -math.log(r.p_hat) / log_k**gamma if r.p_hat > 0 else math.inf
        out.append((r.epsilon, log_k, ratio))
    return out


@dataclass(frozen=True)
class ScalingRow:
    c: float
    rate: float
    predicted: float
    deviation: float
    converged: bool


@dataclass(frozen=True)
class ScalingReport:
    beta: float
    gamma: float
    I1: float
    rows: tuple

    def to_csv(self):
        lines = ["c,rate,c_pow_gamma_I1,rel_deviation,converged"]
        lines += [f"{r.c!r},{r.rate!r},{r.predicted!r},{r.deviation!r},{int(r.converged)}" for r in self.rows]
        return "\n".join(lines) + "\n"


def scaling_check(spec: ModelSpec, grid: Grid, cs, opts: SolverOptions = None) -> ScalingReport:
    """Compare ``I_T(c)`` with ``c^gamma I_T(1)`` for the drift-less CIR model."""
    if not is_driftless_cir(spec):
        raise ConfigError("scaling_check needs the drift-less CIR model with shifted-power sigma")
    beta = spec.sigma_fn["beta"]
    gamma = strike_exponent(beta)
    res1 = minimize_scalar_rate(spec, grid, 1.0, opts)
    rows = []
    for c in cs:
        c = float(c)
        if c <= 0:
            raise DomainError("scaling is stated for c > 0")
        res = res1 if c == 1.0 else minimize_scalar_rate(spec, grid, c, opts)
        pred = c**gamma * res1.value
        rows.append(ScalingRow(c, res.value, pred, abs(res.value - pred) / pred,
                               res.converged and res1.converged))
    return ScalingReport(beta, gamma, res1.value, tuple(rows))


@dataclass(frozen=True)
class TaylorReport:
    q: float                 # fitted coefficient of x^2
    r: float                 # fitted coefficient of x^3
    q_target: float          # 1 / (2 sigma0^2 T)
    q_rel_error: float
    residuals: tuple
    xs: tuple
    rates: tuple
    slope_x: float           # |x| used for the minimiser comparison
    slope_target: float      # rho / (sigma0 T)
    slope_max_dev: float     # max_t |f(t)/x - slope_target * t|
    slope_rel_dev: float     # slope_max_dev / (|slope_target| T), nan when rho = 0
    energy_ratio: float      # E(f^x) / x^2 at slope_x
    converged: bool

    def to_csv(self):
        lines = ["x,rate,fit,residual"]
        for x, v, res in zip(self.xs, self.rates, self.residuals):
            lines.append(f"{x!r},{v!r},{v - res!r},{res!r}")
        lines.append("")
        lines.append("quantity,value")
        for name in ("q", "r", "q_target", "q_rel_error", "slope_x", "slope_target",
                     "slope_max_dev", "slope_rel_dev", "energy_ratio"):
            lines.append(f"{name},{getattr(self, name)!r}")
        lines.append(f"converged,{int(self.converged)}")
        return "\n".join(lines) + "\n"


def taylor_check(spec: ModelSpec, grid: Grid, xs, opts: SolverOptions = None) -> TaylorReport:
    """Fit ``I(x) = q x^2 + r x^3`` near zero and compare the minimiser with ``rho t / sigma0``."""
    if not is_brownian_square(spec) or spec.v0 != 0.0:
        raise ConfigError("taylor_check needs U(x) = x^2, unit dispersion, zero drift and v0 = 0")
    xs = tuple(float(x) for x in xs)
    if not xs or any(x == 0 for x in xs):
        raise ValueError("xs must be nonzero")
    results = [minimize_scalar_rate(spec, grid, x, opts) for x in xs]
    rates = np.array([r.value for r in results])
    xa = np.array(xs)
    A = np.column_stack([xa**2, xa**3])
    (q, r), *_ = np.linalg.lstsq(A, rates, rcond=None)
    resid = rates - A @ np.array([q, r])
    sigma0 = spec.sigma0
    T = spec.horizon
    q_target = 1.0 / (2.0 * sigma0**2 * T)
    k = int(np.argmin(np.abs(xa)))
    x_small = xs[k]
    f = results[k].minimizer.values / x_small
    slope = spec.rho / (sigma0 * T)
    dev = float(np.max(np.abs(f - slope * grid.times)))
    rel = dev / (abs(slope) * T) if slope != 0 else math.nan
    energy = results[k].minimizer.energy / x_small**2
    return TaylorReport(float(q), float(r), q_target, abs(q - q_target) / q_target, tuple(resid),
                        xs, tuple(rates), abs(x_small), slope, dev, rel, energy,
                        all(res.converged for res in results))
