# Finite difference oracle and the end to end gradient check
# Run with: python3 -m pytest -v

import numpy as np
import pytest

import filters
import verify


def test_fd_linear(verbose=False):
    a = np.array([1.0, -2.0, 0.5, 3.0])
    gradient = verify.fd_gradient(lambda x: float(a @ x), np.array([0.2, 0.5, 0.7, 0.9]))
    assert np.allclose(gradient, a, rtol=1e-8)
    assert np.allclose(verify.fd_gradient(lambda x: 4.0, np.full(3, 0.5)), 0.0)


def test_fd_bounds(verbose=False):
    calls = []

    def quadratic(x):
        calls.append(x.copy())
        return float(np.sum(x ** 2))

    rho = np.array([0.0, 1.0, 0.5])
    gradient = verify.fd_gradient(quadratic, rho, h=1e-6)
    # one-sided at 0 and 1, central inside
    assert gradient[0] == pytest.approx(1e-6, abs=1e-9)
    assert gradient[1] == pytest.approx(2.0, abs=1e-5)
    assert gradient[2] == pytest.approx(1.0, rel=1e-8)
    assert all(np.all((x >= 0.0) & (x <= 1.0)) for x in calls)
    # the unperturbed value is evaluated once and reused
    assert sum(np.array_equal(x, rho) for x in calls) == 1
    subset = verify.fd_gradient(quadratic, rho, h=1e-6, indices=[2])
    assert subset[0] == 0.0 and subset[2] == pytest.approx(1.0, rel=1e-8)
    with pytest.raises(ValueError):
        verify.fd_gradient(quadratic, rho, h=0.0)


def test_relative_errors(verbose=False):
    errors = verify.relative_errors([1.0, 2.2, 0.0], [1.0, 2.0, 0.0])
    assert errors[0] == 0.0
    assert errors[1] == pytest.approx(0.1)
    assert errors[2] == 0.0


def test_gradcheck_unfiltered(verbose=False):
    report = verify.check_sensitivity_chain("cantilever2d", (8, 5), filters.NONE)
    assert report.passed
    assert report.n_checked == 40
    assert report.max_rel_err < 1e-5
    assert report.lines()[-1] == "verdict = PASS"
    if verbose:
        print("\n".join(report.lines()))


def test_gradcheck_filters(verbose=False):
    for kind in (filters.DENSITY, filters.HEAVISIDE):
        report = verify.check_sensitivity_chain("mbb2d", (8, 4), kind)
        assert report.passed, report.lines()
        assert report.max_rel_err < verify.THRESHOLDS[kind]


def test_gradcheck_3d(verbose=False):
    for kind in (filters.NONE, filters.DENSITY):
        report = verify.check_sensitivity_chain("cantilever3d", (4, 2, 2), kind, r_min=1.5)
        assert report.passed, report.lines()
        assert report.n_checked == 16


def test_gradcheck_detects_errors(verbose=False):
    report = verify.check_sensitivity_chain("cantilever2d", (8, 5), filters.NONE, corrupt=1.01)
    assert not report.passed
    assert report.max_rel_err == pytest.approx(0.01, rel=1e-2)
    assert report.lines()[-1] == "verdict = FAIL"


if __name__ == "__main__":
    test_fd_bounds(True)
    test_gradcheck_unfiltered(True)
