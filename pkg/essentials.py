"""
Common helpers for densopt
Error classes shared by all modules, thread settings, small timing helpers.
"""
import os
import time
from typing import Optional

__version__ = "0.1.2"

"""
0.1.0 : error classes, thread_count
0.1.1 : OptimizationError keeps the failing iteration
0.1.2 : export_thread_env for BLAS pools
"""

# Env var capping the worker threads. 0 or unset means all cores.
THREADS_ENV = "TOPO_THREADS"

THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class ConfigError(ValueError):
    """Invalid configuration. The message names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SolverError(RuntimeError):
    """A linear or subproblem solver did not reach its tolerance."""

    def __init__(self, message: str, residual: Optional[float] = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class MatrixError(SolverError):
    """The system matrix is not symmetric positive definite."""


class OptimizationError(RuntimeError):
    """A component failed inside the optimization loop."""

    def __init__(self, iteration: int, error: Exception):
        self.iteration = iteration
        self.error = error
        super().__init__(f"Iteration {iteration}: {type(error).__name__}: {error}")


def thread_count() -> int:
    """Worker threads to use, from TOPO_THREADS. Returns -1 for 'all cores'."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return -1
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(THREADS_ENV, f"not an integer: {raw!r}")
    if threads < 0:
        raise ConfigError(THREADS_ENV, f"must be >= 0, got {threads}")
    return threads if threads > 0 else -1


def export_thread_env() -> None:
    """Propagates TOPO_THREADS to the BLAS/OpenMP pools. Must run before numpy is imported."""
    threads = thread_count()
    if threads > 0:
        for name in THREAD_ENV_VARS:
            os.environ[name] = str(threads)


class Stopwatch:
    """Accumulates wall time of repeated sections, keeps the first one apart."""

    __slots__ = ('count', 'first', 'last', 'total', '_start')

    def __init__(self):
        self.count = 0
        self.first = 0.0
        self.last = 0.0
        self.total = 0.0
        self._start = None

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        elapsed = time.perf_counter() - self._start
        if self.count == 0:
            self.first = elapsed
        self.total += elapsed
        self.count += 1
        self.last = elapsed
        return False

    @property
    def average(self) -> float:
        return self.total / self.count if self.count else 0.0
