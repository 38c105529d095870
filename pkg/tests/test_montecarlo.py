import math

import numpy as np
import pytest
from scipy.stats import norm

from vldp import Grid, estimate_tail, ldp_convergence_study, wilson_interval
from vldp.montecarlo import fit_intercept, study_rows_csv

from conftest import flat_vol, rough_cir


def test_wilson_known_values():
    z2 = norm.ppf(0.975) ** 2
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and hi == pytest.approx(z2 / (100 + z2))
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(1 - hi) and 0.40 < lo < 0.41
    with pytest.raises(ValueError):
        wilson_interval(1, 0)


def test_fit_intercept_recovers_synthetic_limit():
    a, b = -1.3, 0.7
    eps = np.array([0.4, 0.2, 0.1, 0.05])
    y = a + b * eps + 0.5 * eps * np.log(eps)
    a_hat, b_hat, resid = fit_intercept(eps, y)
    assert a_hat == pytest.approx(a) and b_hat == pytest.approx(b)
    assert np.allclose(resid, 0.0, atol=1e-12)
    a_plain, _, _ = fit_intercept(eps, y, prefactor=0.0)
    assert a_plain != pytest.approx(a, rel=1e-3)


def test_gaussian_tail_interval_covers_exact_tail():
    s0, c = 0.4, 0.3
    spec = flat_vol(s0, 0.0)
    for eps in (0.4, 0.2):
        est = estimate_tail(spec, Grid(16, 1.0), eps, c, 20000, seed=9)
        sd = s0 * math.sqrt(eps)
        exact = norm.sf(c, loc=-0.5 * eps * s0 * s0, scale=sd)
        assert est.wilson_ci[0] <= exact <= est.wilson_ci[1]
        assert est.eps_log_p == pytest.approx(eps * math.log(est.p_hat))


def test_no_hits_sentinel():
    est = estimate_tail(rough_cir(), Grid(8, 1.0), 0.01, 5.0, 1000, seed=1)
    assert est.no_hits and est.hits == 0
    assert est.eps_log_p == -math.inf and est.wilson_ci[0] == 0.0


def test_study_withholds_summary_without_hits():
    study = ldp_convergence_study(rough_cir(), Grid(8, 1.0), 5.0, [0.2, 0.1], 500, seed=1)
    assert study.summary is None and study.usable == (False, False)


def test_study_ladder_validation():
    with pytest.raises(ValueError):
        ldp_convergence_study(rough_cir(), Grid(8, 1.0), 1.0, [0.1, 0.2], 10, seed=1)
    with pytest.raises(ValueError):
        ldp_convergence_study(rough_cir(), Grid(8, 1.0), 1.0, [0.1, 0.0], 10, seed=1)


def test_study_csv_columns():
    study = ldp_convergence_study(flat_vol(0.4, 0.0), Grid(8, 1.0), 0.3, [0.4, 0.2], 5000, seed=2,
                                  rate=0.3**2 / (2 * 0.16))
    text = study_rows_csv(study)
    assert text.splitlines()[0].split(",")[:3] == ["epsilon", "n_paths", "hits"]
    assert len(text.splitlines()) == 3
    assert study.summary is not None and study.summary.n_points == 2
