import json

import numpy as np
import pytest
from scipy import stats

from sabha import InvalidInputError, RejectionResult, make_dependent_scenario, make_grid_scenario, run_trials
from sabha.simulation import (
    SummaryTable,
    apply_method,
    ar1_covariance,
    condition_number,
    fdp_of,
    grid_q_true,
    grid_region,
    power_of,
)

KS_CRIT_1PCT = 1.628  # asymptotic Kolmogorov critical value at the 1% level, times 1/sqrt(N)


def _result(rej):
    return RejectionResult(len(rej), np.asarray(rej, dtype=int), np.zeros(4), "x")


def test_region_and_null_mean():
    assert grid_region().size == 70
    assert grid_q_true().mean() == pytest.approx(0.6511, abs=1e-4)


def test_region_is_two_corner_disks():
    r, c = np.divmod(grid_region(), 15)
    tr = r**2 + (14 - c) ** 2 <= 36
    bl = (14 - r) ** 2 + c**2 <= 36
    assert np.all(tr | bl)
    assert tr.sum() == 35 and bl.sum() == 35


def test_mu_zero_is_uniform():
    p = np.concatenate([make_grid_scenario(0.0, seed=3, trial=t).p for t in range(45)])
    d = stats.kstest(p, "uniform").statistic
    assert d < KS_CRIT_1PCT / np.sqrt(p.size)


def test_grid_scenario_deterministic_and_common_noise():
    a = make_grid_scenario(1.5, seed=11, trial=2)
    b = make_grid_scenario(1.5, seed=11, trial=2)
    np.testing.assert_array_equal(a.p, b.p)
    c = make_grid_scenario(3.0, seed=11, trial=2)
    np.testing.assert_array_equal(a.is_signal, c.is_signal)
    np.testing.assert_allclose(c.z - a.z, 1.5 * a.is_signal)
    with pytest.raises(InvalidInputError):
        make_grid_scenario(-1.0, seed=0)


def test_dependent_uniform_limit():
    p = np.concatenate([make_dependent_scenario(100, 0.0, 0.0, seed=s)[1] for s in range(100)])
    assert stats.kstest(p, "uniform").statistic < KS_CRIT_1PCT / np.sqrt(p.size)


def test_dependent_nulls_superuniform():
    mu = np.where(np.arange(50) % 2 == 0, -0.5, 0.0)
    draws = np.array([make_dependent_scenario(50, 0.6, mu, seed=s)[1] for s in range(400)])
    null = draws[:, mu <= 0].ravel()
    for t in np.arange(0.05, 0.55, 0.05):
        frac = np.mean(null <= t)
        se = np.sqrt(t * (1 - t) / null.size)
        # draws within a row are correlated; 5 standard errors covers the design effect
        assert frac <= t + 5 * se


def test_ar1_condition_number_regression():
    sigma = ar1_covariance(50, 0.5)
    w = np.linalg.eigvalsh(sigma)
    assert condition_number(sigma) == pytest.approx(w[-1] / w[0], rel=1e-12)
    assert condition_number(sigma) == pytest.approx(FROZEN_KAPPA, rel=1e-10)
    with pytest.raises(InvalidInputError):
        ar1_covariance(5, 1.0)


FROZEN_KAPPA = 8.929464404337157


@pytest.mark.parametrize(
    "rej, nulls, fdp, power",
    [([], [0, 1], 0.0, 0.0), ([0, 1], [1], 0.5, 1 / 3), ([2, 3], [0, 1], 0.0, 1.0)],
)
def test_fdp_power(rej, nulls, fdp, power):
    res = _result(rej)
    assert fdp_of(res, nulls) == fdp
    assert power_of(res, nulls, 4) == power


def test_power_with_no_signals_is_zero():
    assert power_of(_result([0]), [0, 1, 2, 3], 4) == 0.0


def test_oracle_and_bh_on_one_scenario():
    from sabha import MethodConfig

    scen = make_grid_scenario(3.0, seed=5)
    cfg = MethodConfig(0.1, 0.5)
    bh = apply_method("bh", scen, cfg)
    oracle = apply_method("oracle", scen, cfg)
    assert oracle.k_hat >= 1 and bh.k_hat >= 1
    with pytest.raises(InvalidInputError):
        apply_method("magic", scen, cfg)


def test_run_trials_deterministic_and_worker_independent():
    kw = dict(mu_sigs=(0.5, 2.0), methods=("bh", "storey-bh", "sabha-m10"), n_trials=4, seed=3)
    a = run_trials(workers=1, **kw)
    b = run_trials(workers=2, **kw)
    assert a.to_csv() == b.to_csv()
    assert a.to_json() == b.to_json()
    assert a.to_csv().splitlines()[0] == "method,mu_sig,mean_fdp,mean_power,stderr_fdp,stderr_power,trials,failures"


def test_summary_table_cells():
    t = run_trials(mu_sigs=(0.0,), methods=("bh",), n_trials=3, seed=1)
    assert isinstance(t, SummaryTable)
    row = t.cell("bh", 0.0)
    assert row.trials == 3 and row.failures == 0
    # no signal at mu_sig = 0 is still a defined power
    assert 0.0 <= row.mean_power <= 1.0
    data = json.loads(t.to_json())
    assert data["rows"][0]["method"] == "bh"
    with pytest.raises(InvalidInputError):
        run_trials(mu_sigs=(1.0,), methods=("bh",), n_trials=0)
