"""
Minimum compliance under a volume constraint
Objective, constraint and their sensitivities, the optimality criteria update and the outer loop
dispatching to OC or MMA with sensitivity, density or Heaviside filtering.
"""

import time

import numpy as np

import fem
import filters
from essentials import OptimizationError, SolverError, Stopwatch
from libs.history import OptimizationHistory
from libs.logger import Logger
from material import modulus_derivative
from mesh import build_dof_map, element_geometry
from mma import MmaOptions, MmaState, kkt_norm, mma_update

__version__ = "0.2.0"

"""
0.1.0 : OC with sensitivity filter
0.1.1 : density filter chain rule, bisection re-filters candidates
0.1.2 : heaviside continuation
0.2.0 : MMA, finite difference sensitivity mode
"""

OC = "oc"
MMA = "mma"
ANALYTIC = "analytic"
FD = "fd"

CONVERGED = "converged"
MAX_ITER = "max_iter"


class OcOptions:
    __slots__ = ('move', 'eta', 'lambda_lo', 'lambda_hi', 'bisection_rtol')

    def __init__(self, move=0.2, eta=0.5, lambda_lo=0.0, lambda_hi=1e9, bisection_rtol=1e-3):
        if not 0 < move <= 1:
            raise ValueError(f"OC move limit must lie in (0, 1], got {move}")
        if not 0 < eta <= 1:
            raise ValueError(f"OC damping exponent must lie in (0, 1], got {eta}")
        self.move = move
        self.eta = eta
        self.lambda_lo = lambda_lo
        self.lambda_hi = lambda_hi
        self.bisection_rtol = bisection_rtol


class OcResult:
    __slots__ = ('rho', 'lmbda', 'bracket_ok')

    def __init__(self, rho, lmbda, bracket_ok=True):
        self.rho = rho
        self.lmbda = lmbda
        self.bracket_ok = bracket_ok


class DensityField:
    """Design variables and the physical density they map to."""

    __slots__ = ('values', 'filtered', 'physical')

    def __init__(self, values, filter_op=None):
        self.values = np.asarray(values, dtype=float)
        self.filtered, self.physical = filters.physical_density(filter_op, self.values)


class ComplianceModel:
    """Discrete state equation K(rho) U = F of one problem, with the last solution cached."""

    def __init__(self, problem, mesh, mat, assembly=fem.FAST, solver=fem.DIRECT, app_log=None):
        self.problem = problem
        self.mesh = mesh
        self.mat = mat
        self.solver = solver
        self.logger = Logger(app_log)
        self.dofmap = build_dof_map(mesh)
        self.assembler = fem.Assembler(mesh, self.dofmap, mat, assembly, app_log=self.logger.app_log)
        self.F = fem.assemble_load(problem, mesh, self.dofmap)
        self.fixed_dofs = problem.fixed_dofs(mesh.node_coords, self.dofmap)
        if len(self.fixed_dofs) == 0:
            raise ValueError(f"{problem.name} fixes no dof on this mesh, the structure is not supported")
        self.solve_stopwatch = Stopwatch()
        self.U = None
        self.rho = None

    def solve(self, rho_physical):
        K = self.assembler.assemble(rho_physical)
        system = fem.apply_dirichlet(K, self.F, self.fixed_dofs)
        with self.solve_stopwatch:
            self.U = fem.solve(system, self.solver, x0=self.U, app_log=self.logger.app_log)
        self.rho = np.array(rho_physical, dtype=float)
        return self.U


def compliance(model, rho_physical):
    """c = F^T U, solving K(rho) U = F. U stays cached on the model."""
    U = model.solve(rho_physical)
    return float(model.F @ U)


def compliance_sensitivity(model, rho_physical, U=None):
    """dc_e = -E'(rho_e) u_e^T K_e^0 u_e."""
    U = model.U if U is None else U
    return -modulus_derivative(model.mat, rho_physical) * model.assembler.element_energies(U)


def volume_fraction(mesh, rho_physical):
    _, volumes = element_geometry(mesh)
    # clipped: rounding can put a solid design a few ulp above 1
    fraction = volumes @ np.asarray(rho_physical, dtype=float) / volumes.sum()
    return float(np.clip(fraction, 0.0, 1.0))


def volume_sensitivity(mesh):
    _, volumes = element_geometry(mesh)
    return volumes / volumes.sum()


def _oc_candidate(rho, dc, dg, lmbda, opts):
    B = np.maximum(-dc, 0.0) / (lmbda * dg)
    lower = np.maximum(rho - opts.move, 0.0)
    upper = np.minimum(rho + opts.move, 1.0)
    return np.clip(rho * B ** opts.eta, lower, upper)


def oc_update(rho, dc, dg, target_vf, opts=None, volume_fn=None):
    """Optimality criteria step rho * (-dc / (lambda dg))^eta inside the move limits.

    lambda is bisected on a normalised scale (dc divided by the mean of -dc/dg) until the
    volume fraction returned by volume_fn meets target_vf. volume_fn defaults to the dg weighted sum.
    """
    opts = opts or OcOptions()
    rho = np.asarray(rho, dtype=float)
    dc = np.asarray(dc, dtype=float)
    dg = np.asarray(dg, dtype=float)
    if np.any(dg <= 0):
        raise ValueError("Volume sensitivities must be positive")
    if volume_fn is None:
        total = dg.sum()
        volume_fn = lambda x: float(dg @ x / total)

    scale = float(np.mean(np.maximum(-dc, 0.0) / dg))
    if scale <= 0.0:
        scale = 1.0
    dcn = dc / scale

    lower = np.maximum(rho - opts.move, 0.0)
    upper = np.minimum(rho + opts.move, 1.0)
    # lambda -> 0 pushes every element with a descent direction up, lambda -> inf pushes all down
    vf_max = volume_fn(np.where(dcn < 0, upper, lower))
    vf_min = volume_fn(lower)
    if target_vf > vf_max:
        return OcResult(np.where(dcn < 0, upper, lower), opts.lambda_lo * scale, bracket_ok=False)
    if target_vf < vf_min:
        return OcResult(lower, opts.lambda_hi * scale, bracket_ok=False)

    lo, hi = opts.lambda_lo, opts.lambda_hi
    while (hi - lo) / (hi + lo) > opts.bisection_rtol:
        mid = 0.5 * (lo + hi)
        candidate = _oc_candidate(rho, dcn, dg, mid, opts)
        if volume_fn(candidate) > target_vf:
            lo = mid
        else:
            hi = mid
    lmbda = 0.5 * (lo + hi)
    return OcResult(_oc_candidate(rho, dcn, dg, lmbda, opts), lmbda * scale)


class OptimizationSettings:
    """Everything run_optimization needs besides the problem objects."""

    def __init__(self, volfrac=0.4, optimizer=OC, max_iter=200, tol=0.01, initial_density=None,
                 oc=None, mma_move=0.5, mma_a0=1.0, mma_c=1e4, mma_d=0.0, sensitivity=ANALYTIC,
                 timing=True):
        if optimizer not in (OC, MMA):
            raise ValueError(f"Unknown optimizer {optimizer!r}")
        if sensitivity not in (ANALYTIC, FD):
            raise ValueError(f"Unknown sensitivity mode {sensitivity!r}")
        self.volfrac = volfrac
        self.optimizer = optimizer
        self.max_iter = max_iter
        self.tol = tol
        self.initial_density = volfrac if initial_density is None else initial_density
        self.oc = oc or OcOptions()
        self.mma_move = mma_move
        self.mma_a0 = mma_a0
        self.mma_c = mma_c
        self.mma_d = mma_d
        self.sensitivity = sensitivity
        self.timing = timing

    @classmethod
    def from_config(cls, config):
        return cls(volfrac=config.volfrac, optimizer=config.optimizer, max_iter=config.max_iter, tol=config.tol,
                   initial_density=config.initial_density, oc=OcOptions(config.oc_move, config.oc_eta),
                   mma_move=config.mma_move, mma_a0=config.mma_a0, mma_c=config.mma_c, mma_d=config.mma_d,
                   sensitivity=config.sensitivity, timing=config.timing)


def physical_compliance_gradient(model, rho_physical, mode=ANALYTIC):
    if mode == ANALYTIC:
        return compliance_sensitivity(model, rho_physical)
    import verify
    U = model.U
    gradient = verify.fd_gradient(lambda x: compliance(model, x), rho_physical)
    # restore the state of rho_physical for the caller
    model.U = U
    model.rho = np.array(rho_physical, dtype=float)
    return gradient


def run_optimization(problem, mesh, mat, filter_op, settings, model=None, app_log=None, callback=None):
    """Outer loop: assemble, solve, objective, sensitivities, filter, update.

    Stops when the max density change is <= tol (at the final beta for Heaviside) or after max_iter.
    callback(iteration, field) runs after every update. Returns (rho, history, model).
    """
    logger = Logger(app_log)
    if model is None:
        model = ComplianceModel(problem, mesh, mat, app_log=logger.app_log)
    history = OptimizationHistory(timing=settings.timing)
    n = mesh.n_elements
    rho = np.full(n, float(settings.initial_density))
    dg_physical = volume_sensitivity(mesh)
    volume_fn = lambda x: volume_fraction(mesh, filters.physical_density(filter_op, x)[1])
    mma_state = None
    if settings.optimizer == MMA:
        mma_opts = MmaOptions(n, m=1, xmin=0.0, xmax=1.0, a0=settings.mma_a0, a=0.0, c=settings.mma_c,
                              d=settings.mma_d, move=settings.mma_move)
        mma_state = MmaState(rho, mma_opts)
    kind = filter_op.kind if filter_op is not None else filters.NONE
    logger.app_log.info(f"Optimizing {problem.name} on {mesh}, {settings.optimizer}, {kind} filter, "
                        f"target volume fraction {settings.volfrac}")
    history.stop_reason = MAX_ITER

    for iteration in range(1, settings.max_iter + 1):
        start = time.perf_counter()
        assembly_before = model.assembler.stopwatch.total
        solve_before = model.solve_stopwatch.total
        try:
            field = DensityField(rho, filter_op)
            c = compliance(model, field.physical)
            dc_physical = physical_compliance_gradient(model, field.physical, settings.sensitivity)
            vf = volume_fraction(mesh, field.physical)

            if kind == filters.SENSITIVITY:
                dc = filters.filter_sensitivities(filter_op, rho, dc_physical)
                dg = dg_physical
            else:
                dc = filters.design_gradient(filter_op, field.filtered, dc_physical)
                dg = filters.design_gradient(filter_op, field.filtered, dg_physical)

            if settings.optimizer == OC:
                result = oc_update(rho, dc, dg, settings.volfrac, settings.oc, volume_fn)
                if not result.bracket_ok:
                    logger.app_log.warning(f"OC bracket failed at iteration {iteration}, "
                                           f"target {settings.volfrac} not reachable within the move limit")
                rho_new = result.rho
            else:
                kkt = kkt_norm(mma_state, mma_opts, dc, [vf - settings.volfrac], dg[None, :])
                if kkt is not None:
                    logger.app_log.debug(f"MMA KKT residual norm {kkt:.3e} at iteration {iteration}")
                rho_new = mma_update(mma_state, mma_opts, c, dc, [vf - settings.volfrac], dg[None, :])
                rho_new = np.clip(rho_new, 0.0, 1.0)
        except Exception as e:
            raise OptimizationError(iteration, e) from e

        if not np.isfinite(c) or c <= 0:
            raise OptimizationError(iteration, SolverError(f"compliance {c} is not finite and positive"))
        change = float(np.max(np.abs(rho_new - rho)))
        rho = rho_new
        beta = filter_op.beta if kind == filters.HEAVISIDE else None
        history.record(iteration, c, vf, change, time.perf_counter() - start,
                       model.assembler.stopwatch.total - assembly_before,
                       model.solve_stopwatch.total - solve_before, beta)
        logger.app_log.info(f"Status: it {iteration:4d} c {c:.4f} vf {vf:.4f} ch {change:.4f}"
                            + (f" beta {beta:g}" if beta is not None else ""))
        if callback is not None:
            callback(iteration, field)

        converged = change <= settings.tol
        if kind == filters.HEAVISIDE:
            new_beta, changed = filters.continuation_step(filter_op, iteration, change, settings.tol)
            if changed:
                logger.app_log.warning(f"Heaviside beta raised to {new_beta:g} at iteration {iteration}")
                converged = False
            elif filter_op.beta < filter_op.beta_max:
                converged = False
        if converged:
            history.stop_reason = CONVERGED
            break

    history.first_assembly = model.assembler.stopwatch.first
    history.average_assembly = model.assembler.stopwatch.average
    logger.app_log.info(f"Status: {history.stop_reason} after {len(history)} iterations, "
                        f"c {history.final_compliance:.4f} vf {history.final_volume_fraction:.4f}")
    return rho, history, model
