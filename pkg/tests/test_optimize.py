import numpy as np
import pytest

from rscqt.optimize import OptimizerConfig, levenberg_marquardt


def rosenbrock(x):
    r = np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])
    j = np.array([[-20 * x[0], 10.0], [-1.0, 0.0]])
    return r, j


def test_rosenbrock_minimum():
    res = levenberg_marquardt(rosenbrock, np.array([-1.2, 1.0]))
    assert res.converged
    assert np.allclose(res.x, [1, 1], atol=1e-6)
    assert res.fun <= 1e-12


def test_history_is_monotone():
    res = levenberg_marquardt(rosenbrock, np.array([-1.2, 1.0]))
    h = np.array(res.history)
    assert np.all(np.diff(h) < 0)
    assert h[-1] == pytest.approx(res.fun)


def test_linear_least_squares_matches_lstsq(rng):
    a = rng.normal(size=(30, 5))
    b = rng.normal(size=30)
    res = levenberg_marquardt(lambda x: (a @ x - b, a), np.zeros(5))
    assert np.allclose(res.x, np.linalg.lstsq(a, b, rcond=None)[0], atol=1e-8)


def test_iteration_cap_reports_non_convergence():
    res = levenberg_marquardt(rosenbrock, np.array([-1.2, 1.0]), OptimizerConfig(max_iter=2))
    assert not res.converged
    assert res.iterations == 2


def test_failed_trial_steps_are_rejected():
    # residual undefined for x < 0; the solver must back off instead of crashing
    def res(x):
        if x[0] < 0:
            raise FloatingPointError
        return np.array([np.sqrt(x[0]) - 0.1]), np.array([[0.5 / np.sqrt(x[0])]])

    out = levenberg_marquardt(res, np.array([4.0]))
    assert out.x[0] > 0
    assert abs(np.sqrt(out.x[0]) - 0.1) < 1e-6
