"""Plain Monte Carlo tail probabilities and the empirical small-noise limit."""
from dataclasses import dataclass
import math

import numpy as np
from scipy.stats import norm

from .dynamics import PathBatch, simulate_batch
from .grid import Grid
from .model import ModelSpec

Z95 = float(norm.ppf(0.975))


def wilson_interval(hits: int, n: int, z: float = Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    p = hits / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if hits == 0 else max(0.0, centre - half)
    hi = 1.0 if hits == n else min(1.0, centre + half)
    return lo, hi


def _eps_log(eps, p):
    return eps * math.log(p) if p > 0 else -math.inf


@dataclass(frozen=True)
class TailEstimate:
    epsilon: float
    threshold: float
    n_paths: int
    hits: int
    p_hat: float
    wilson_ci: tuple
    eps_log_p: float
    eps_log_ci: tuple
    no_hits: bool


def tail_from_batch(batch: PathBatch, c: float) -> TailEstimate:
    hits = int(np.count_nonzero(batch.terminal_logprice >= c))
    n = batch.n_paths
    eps = batch.epsilon
    lo, hi = wilson_interval(hits, n)
    p = hits / n
    return TailEstimate(eps, float(c), n, hits, p, (lo, hi), _eps_log(eps, p),
                        (_eps_log(eps, lo), _eps_log(eps, hi)), hits == 0)


def estimate_tail(spec: ModelSpec, grid: Grid, epsilon: float, c: float, n_paths: int, seed: int,
                  threads: int = None) -> TailEstimate:
    """Estimate ``P(X_T^eps >= c)`` with a 95% Wilson interval."""
    batch = simulate_batch(spec, grid, epsilon, n_paths, seed, threads=threads)
    return tail_from_batch(batch, c)


@dataclass(frozen=True)
class LdpSummary:
    intercept: float        # extrapolated limit of eps log p (prefactor-corrected)
    slope: float
    residuals: tuple
    intercept_plain: float  # plain linear fit of eps log p, no prefactor term
    prefactor: float
    n_points: int
    rate: float = None      # solver value I_T(c), when supplied
    rel_error: float = None


@dataclass(frozen=True)
class LdpStudy:
    rows: tuple
    usable: tuple           # per row: enough tail hits to enter the fit
    summary: LdpSummary = None


def fit_intercept(eps, eps_log_p, prefactor=0.5):
    """Fit ``eps log p - prefactor * eps log eps = a + b eps``; returns ``(a, b, residuals)``.

    ``prefactor = 0.5`` removes the ``sqrt(eps)`` Laplace prefactor of a
    one-dimensional tail, which a linear fit cannot absorb.
    """
    e = np.asarray(eps, dtype=float)
    y = np.asarray(eps_log_p, dtype=float) - prefactor * e * np.log(e)
    A = np.column_stack([np.ones_like(e), e])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0]), float(coef[1]), tuple(y - A @ coef)


def ldp_convergence_study(spec: ModelSpec, grid: Grid, c: float, eps_ladder, n_paths: int, seed: int, *,
                          rate: float = None, prefactor: float = 0.5, min_hits: int = 10,
                          threads: int = None) -> LdpStudy:
    """``eps log P(X_T^eps >= c)`` along a decreasing ladder and its extrapolation to ``eps = 0``.

    Every rung reuses ``seed`` (common random numbers).  Rungs with at most
    ``min_hits`` exceedances are reported but left out of the fit; the
    summary is withheld when fewer than two rungs remain.
    """
    eps_ladder = [float(e) for e in eps_ladder]
    if any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise ValueError("eps_ladder must be strictly decreasing")
    if any(e <= 0 for e in eps_ladder):
        raise ValueError("eps_ladder entries must be positive")
    rows = tuple(estimate_tail(spec, grid, e, c, n_paths, seed, threads) for e in eps_ladder)
    usable = tuple(r.hits > min_hits for r in rows)
    good = [r for r, ok in zip(rows, usable) if ok]
    summary = None
    if len(good) >= 2:
        e = [r.epsilon for r in good]
        y = [r.eps_log_p for r in good]
        a, b, resid = fit_intercept(e, y, prefactor)
        a_plain, _, _ = fit_intercept(e, y, 0.0)
        rel = None if rate is None or rate == 0 else abs(a + rate) / abs(rate)
        summary = LdpSummary(a, b, resid, a_plain, prefactor, len(good), rate, rel)
    return LdpStudy(rows, usable, summary)


def study_rows_csv(study: LdpStudy) -> str:
    lines = ["epsilon,n_paths,hits,p_hat,ci_lo,ci_hi,eps_log_p,eps_log_lo,eps_log_hi,used_in_fit"]
    for r, ok in zip(study.rows, study.usable):
        lines.append(",".join([
            repr(r.epsilon), str(r.n_paths), str(r.hits), repr(r.p_hat), repr(r.wilson_ci[0]),
            repr(r.wilson_ci[1]), repr(r.eps_log_p), repr(r.eps_log_ci[0]), repr(r.eps_log_ci[1]),
            str(int(ok))]))
    return "\n".join(lines) + "\n"
