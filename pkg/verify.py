"""
Oracles for the optimizer: finite difference gradients, the end to end sensitivity check,
the O(N^2) filter matrix and a brute force lambda sweep for the OC step.
"""

import numpy as np

import filters
import optimize
from libs.logger import Logger
from material import SimpMaterial
from mesh import build_uniform_grid
from problems import problem_by_name

__version__ = "0.1.1"

DEFAULT_H = 1e-6
THRESHOLDS = {
    filters.NONE: 1e-5,
    filters.SENSITIVITY: 1e-5,
    filters.DENSITY: 1e-5,
    filters.HEAVISIDE: 1e-4,
}


class GradCheckReport:
    __slots__ = ('max_rel_err', 'worst_element', 'h', 'n_checked', 'threshold')

    def __init__(self, max_rel_err, worst_element, h, n_checked, threshold=None):
        self.max_rel_err = float(max_rel_err)
        self.worst_element = int(worst_element)
        self.h = h
        self.n_checked = n_checked
        self.threshold = threshold

    @property
    def passed(self):
        return self.threshold is None or self.max_rel_err < self.threshold

    def lines(self):
        verdict = "PASS" if self.passed else "FAIL"
        return [
            f"max_rel_err = {self.max_rel_err:.3e}",
            f"worst_element = {self.worst_element}",
            f"h = {self.h:g}",
            f"n_checked = {self.n_checked}",
            f"threshold = {self.threshold:g}" if self.threshold is not None else "threshold = none",
            f"verdict = {verdict}",
        ]


def fd_gradient(fn, rho, h=DEFAULT_H, indices=None):
    """Central differences of a scalar function of the densities, one-sided where rho -+ h leaves [0, 1]."""
    if h <= 0:
        raise ValueError(f"Finite difference step must be positive, got {h}")
    base = np.array(rho, dtype=float)
    rho = base.copy()
    indices = range(len(rho)) if indices is None else indices
    gradient = np.zeros(len(rho))
    f0 = []

    def at_base():
        if not f0:
            f0.append(fn(base.copy()))
        return f0[0]

    def shifted(i, value):
        rho[i] = value
        result = fn(rho.copy())
        rho[i] = base[i]
        return result

    for i in indices:
        up = min(base[i] + h, 1.0)
        down = max(base[i] - h, 0.0)
        f_up = shifted(i, up) if up > base[i] else at_base()
        f_down = shifted(i, down) if down < base[i] else at_base()
        gradient[i] = (f_up - f_down) / (up - down)
    return gradient


def relative_errors(analytic, reference):
    analytic = np.asarray(analytic, dtype=float)
    reference = np.asarray(reference, dtype=float)
    # entries far below the gradient scale are compared against that scale
    floor = 1e-8 * max(np.max(np.abs(reference)), 1e-300)
    return np.abs(analytic - reference) / np.maximum(np.abs(reference), floor)


def end_to_end_compliance(model, filter_op, rho):
    _, physical = filters.physical_density(filter_op, rho)
    return optimize.compliance(model, physical)


def design_compliance_gradient(model, filter_op, rho):
    """Analytic dc/drho through the density and projection chain rules."""
    filtered, physical = filters.physical_density(filter_op, rho)
    optimize.compliance(model, physical)
    dc = optimize.compliance_sensitivity(model, physical)
    return filters.design_gradient(filter_op, filtered, dc)


def check_sensitivity_chain(problem="cantilever2d", cells=(8, 5), filter_kind=filters.NONE, r_min=2.0,
                            beta=8.0, h=DEFAULT_H, seed=0, corrupt=1.0, assembly="fast", app_log=None):
    """Compares the analytic design gradient of the compliance with central differences of the whole chain.

    The sensitivity filter modifies the gradient on purpose, for it the raw gradient is checked.
    corrupt scales the analytic gradient, a value other than 1 must make the check fail.
    """
    logger = Logger(app_log)
    cells = [int(n) for n in cells]
    dim = len(cells)
    mesh = build_uniform_grid(dim, cells, [1.0] * dim, [0.0] * dim)
    definition = problem_by_name(problem, cells)
    mat = SimpMaterial.for_dim(dim)
    model = optimize.ComplianceModel(definition, mesh, mat, assembly=assembly, app_log=logger.app_log)
    filter_op = None
    if filter_kind in (filters.DENSITY, filters.HEAVISIDE):
        filter_op = filters.build_filter(mesh, r_min, filter_kind, beta=beta, beta_max=max(beta, 512.0))
    rng = np.random.default_rng(seed)
    rho = rng.uniform(0.3, 0.9, mesh.n_elements)

    analytic = corrupt * design_compliance_gradient(model, filter_op, rho)
    reference = fd_gradient(lambda x: end_to_end_compliance(model, filter_op, x), rho, h)
    errors = relative_errors(analytic, reference)
    worst = int(np.argmax(errors))
    report = GradCheckReport(errors[worst], worst, h, mesh.n_elements, THRESHOLDS.get(filter_kind))
    logger.app_log.info(f"Status: gradcheck {problem} {cells} {filter_kind}: max_rel_err {report.max_rel_err:.3e} "
                        f"at element {worst}")
    return report


def brute_force_filter_matrix(mesh, r_min):
    """H from every element pair, O(N^2)."""
    centroids = mesh._centroids
    n = mesh.n_elements
    rows, cols = np.divmod(np.arange(n * n), n)
    weights = filters.pair_weights(centroids, rows, cols, r_min)
    return filters.weights_to_matrix(rows, cols, weights, n)


def oc_lambda_sweep(rho, dc, dg, target_vf, opts=None, samples=200001, span=1e6):
    """Smallest lambda of a geometric sweep whose OC design meets the volume target.

    Returns (lambda, rho_new). Vectorised over the sweep, meant for small designs.
    """
    opts = opts or optimize.OcOptions()
    rho = np.asarray(rho, dtype=float)
    dc = np.asarray(dc, dtype=float)
    dg = np.asarray(dg, dtype=float)
    center = float(np.mean(np.maximum(-dc, 0.0) / dg)) or 1.0
    lambdas = center * np.geomspace(1.0 / span, span, samples)
    B = np.maximum(-dc, 0.0)[None, :] / (lambdas[:, None] * dg[None, :])
    lower = np.maximum(rho - opts.move, 0.0)
    upper = np.minimum(rho + opts.move, 1.0)
    designs = np.clip(rho[None, :] * B ** opts.eta, lower, upper)
    volumes = designs @ dg / dg.sum()
    feasible = np.flatnonzero(volumes <= target_vf)
    if len(feasible) == 0:
        raise ValueError("No lambda in the sweep meets the volume target")
    best = feasible[0]
    return lambdas[best], designs[best]
