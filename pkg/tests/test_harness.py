import numpy as np
import pytest

from rscqt.design import SequenceSet
from rscqt.estimator import RegularizationConfig
from rscqt.harness import CSV_HEADER, StudyConfig, fit_rate, lnln_rate, rows_from_csv, rows_to_csv, run_study


def test_fit_rate_recovers_exact_power_law():
    n = np.repeat([1e2, 1e3, 1e4, 1e5], 3)
    fit = fit_rate(n, n ** -0.5)
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.residual <= 1e-12
    assert np.allclose(fit.ratios, np.array([1e2, 1e3, 1e4, 1e5]) ** -0.5 / lnln_rate([1e2, 1e3, 1e4, 1e5]))


def test_fit_rate_constant_rows():
    assert fit_rate([10, 100, 1000], [0.3, 0.3, 0.3]).slope == pytest.approx(0.0, abs=1e-12)


def test_fit_rate_uses_medians():
    n = [10, 10, 10, 100, 100, 100, 1000, 1000, 1000]
    vals = [1.0, 1.0, 50.0, 0.1, 0.1, 1e-9, 0.01, 0.01, 0.01]
    assert fit_rate(n, vals).slope == pytest.approx(-1.0, abs=1e-12)


def test_fit_rate_needs_three_points():
    with pytest.raises(ValueError):
        fit_rate([10, 10, 100], [1.0, 1.0, 0.5])


def test_study_config_invariants(target, true_set, scic, fiducials):
    with pytest.raises(ValueError):
        StudyConfig(true_set, target, scic, fiducials, n_grid=(100, 100), seeds=(0,))
    with pytest.raises(ValueError):
        StudyConfig(true_set, target, scic, fiducials, n_grid=(100,), seeds=())


def _small_config(target, true_set, design, fiducials):
    return StudyConfig(true_set, target, design, fiducials, n_grid=(10 ** 4, 10 ** 5), seeds=(0, 1),
                       r_schedule=RegularizationConfig("c_over_N", c=1.0))


def test_study_rows_and_determinism(target, true_set, scic, fiducials):
    cfg = _small_config(target, true_set, scic, fiducials)
    a, b = run_study(cfg), run_study(cfg)
    text = rows_to_csv(a.rows)
    assert text == rows_to_csv(b.rows)
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert [(r.n, r.seed) for r in a.rows] == [(10 ** 4, 0), (10 ** 4, 1), (10 ** 5, 0), (10 ** 5, 1)]
    for r in a.rows:
        assert r.physical and r.dominance_ok
        assert min(r.sqrt_loss_est_true, r.sqrt_loss_true_emp, r.gauge_dist, r.reg_to_target) >= 0
    assert a.summary["design"]["is_scic"]
    assert a.summary["physical_fraction"] == 1.0
    parsed = rows_from_csv(text)
    assert parsed[0]["n"] == 10 ** 4 and parsed[0]["runtime_s"] is None
    assert parsed[0]["sqrt_loss_est_true"] == a.rows[0].sqrt_loss_est_true


def test_runtime_column_when_requested(target, true_set, scic, fiducials):
    rows = run_study(StudyConfig(true_set, target, scic, fiducials, n_grid=(10 ** 5,), seeds=(0,))).rows
    line = rows_to_csv(rows, record_runtime=True).splitlines()[1]
    assert float(line.rsplit(",", 1)[1]) > 0


def test_non_scic_design_is_flagged(target, true_set, scic, fiducials):
    partial = SequenceSet([q for q in scic if q != (2, 1, 3)])
    res = run_study(StudyConfig(true_set, target, partial, fiducials, n_grid=(10 ** 5,), seeds=(0,)))
    assert not res.summary["design"]["is_scic"]
    assert "warning" in res.summary
    assert len(res.rows) == 1
