# Method of moving asymptotes on small analytic problems

import numpy as np
import pytest

from essentials import SolverError
from mma import MmaOptions, MmaState, kkt_norm, kktcheck, mma_update


def _solve_square(iterations=30):
    """min x^2 s.t. 0.5 - x <= 0 on [0, 1]."""
    opts = MmaOptions(1, m=1, xmin=0.0, xmax=1.0)
    state = MmaState([1.0], opts)
    x = np.array([1.0])
    for _ in range(iterations):
        x = mma_update(state, opts, float(x[0] ** 2), 2 * x, [0.5 - x[0]], [[-1.0]])
    return x, state, opts


def test_constrained_minimum(verbose=False):
    x, state, _ = _solve_square()
    assert x[0] == pytest.approx(0.5, abs=1e-4)
    assert state.iteration == 30
    if verbose:
        print(x, state.kkt_residual)


def test_asymptotes_and_bounds(verbose=False):
    opts = MmaOptions(1, m=1, xmin=0.0, xmax=1.0)
    state = MmaState([1.0], opts)
    x = np.array([1.0])
    for _ in range(10):
        x = mma_update(state, opts, float(x[0] ** 2), 2 * x, [0.5 - x[0]], [[-1.0]])
        assert np.all(state.low < state.alfa)
        assert np.all(state.alfa <= state.x) and np.all(state.x <= state.beta)
        assert np.all(state.beta < state.upp)
        assert 0.0 <= x[0] <= 1.0


def test_subproblem_residual(verbose=False):
    _, state, _ = _solve_square()
    assert state.kkt_residual <= 1e-7


def test_kkt_at_optimum(verbose=False):
    # x = 0.5 and lam = 1 satisfy 2x - lam = 0, mu and zet absorb c and a0
    zero, one = np.zeros((1, 1)), np.ones((1, 1))
    x = np.array([[0.5]])
    lam = one
    mu = np.array([[1e4 - 1.0]])
    _, _, norm_max = kktcheck(x, zero, zero, lam, zero, zero, mu, one, zero, zero, one,
                              2 * x, zero, -one, 1.0, zero, np.array([[1e4]]), zero)
    assert norm_max < 1e-12
    _, _, off_optimum = kktcheck(x + 0.1, zero, zero, lam, zero, zero, mu, one, zero, zero, one,
                                 2 * (x + 0.1), zero, -one, 1.0, zero, np.array([[1e4]]), zero)
    assert off_optimum == pytest.approx(0.2)


def test_kkt_norm_after_updates(verbose=False):
    opts = MmaOptions(1, m=1, xmin=0.0, xmax=1.0)
    state = MmaState([1.0], opts)
    assert kkt_norm(state, opts, [2.0], [-0.5], [[-1.0]]) is None
    x, state, opts = _solve_square()
    norm = kkt_norm(state, opts, 2 * x, [0.5 - x[0]], [[-1.0]])
    assert 0.0 <= norm < 1e-2
    if verbose:
        print(norm)


def test_volume_constrained_design(verbose=False):
    # min sum(w / x) s.t. mean(x) <= 0.5: the optimum puts x proportional to sqrt(w)
    w = np.array([1.0, 4.0])
    opts = MmaOptions(2, m=1, xmin=1e-3, xmax=1.0)
    state = MmaState([0.5, 0.5], opts)
    x = np.array([0.5, 0.5])
    for _ in range(60):
        x = mma_update(state, opts, float(np.sum(w / x)), -w / x ** 2, [x.mean() - 0.5], [[0.5, 0.5]])
    assert x == pytest.approx([1.0 / 3.0, 2.0 / 3.0], abs=1e-3)


def test_invalid_input(verbose=False):
    with pytest.raises(ValueError):
        MmaOptions(2, xmin=1.0, xmax=1.0)
    with pytest.raises(ValueError):
        MmaOptions(2, c=0.0)
    opts = MmaOptions(1)
    with pytest.raises(ValueError):
        mma_update(MmaState([0.5], opts), opts, 1.0, [np.nan], [0.0], [[1.0]])
    assert issubclass(SolverError, RuntimeError)


if __name__ == "__main__":
    test_constrained_minimum(True)
