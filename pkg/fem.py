"""
Linear elasticity finite elements for density based topology optimization
Unit modulus element matrices, global assembly (standard / fast / symbolic), Dirichlet elimination,
nodal loads and the K U = F solvers.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

import log
from essentials import ConfigError, MatrixError, SolverError, Stopwatch
from material import VOIGT_PAIRS, elasticity_matrix, elasticity_tensor, interpolate_modulus
from mesh import HEX8, QUAD4, REFERENCE_NODES, TRI3, reference_gradients, tensor_gauss_rule

__version__ = "0.2.1"

"""
0.1.0 : quadrature element matrices, coo assembly
0.2.0 : fast and symbolic assembly, cached csr pattern
0.2.1 : splu pivots checked for definiteness
"""

STANDARD = "standard"
FAST = "fast"
SYMBOLIC = "symbolic"
ASSEMBLY_METHODS = (STANDARD, FAST, SYMBOLIC)

CG = "cg"
DIRECT = "direct"

CG_RTOL = 1e-8
DIRECT_RTOL = 1e-10
DIRECT_REFINEMENTS = 2

# Reference triangle (0,0),(1,0),(0,1): constant gradients, 1-point rule at the centroid
TRI_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
TRI_WEIGHT = 0.5


class SparseSystem:
    """K U = F after Dirichlet elimination. Immutable once built."""

    __slots__ = ('K', 'F', 'fixed_dofs')

    def __init__(self, K, F, fixed_dofs):
        self.K = K
        self.F = F
        self.fixed_dofs = fixed_dofs
        self.F.flags.writeable = False

    @property
    def n_dofs(self):
        return self.K.shape[0]


def strain_displacement(grads, dim):
    """B matrices from physical shape function gradients (..., nodes, dim) -> (..., n_strain, nodes * dim)."""
    pairs = VOIGT_PAIRS[dim]
    n_nodes = grads.shape[-2]
    B = np.zeros(grads.shape[:-2] + (len(pairs), n_nodes * dim))
    for I, (i, j) in enumerate(pairs):
        if i == j:
            B[..., I, i::dim] = grads[..., :, i]
        else:
            B[..., I, i::dim] = grads[..., :, j]
            B[..., I, j::dim] = grads[..., :, i]
    return B


def _symmetrize(K):
    return 0.5 * (K + np.swapaxes(K, -1, -2))


def quadrature_element_stiffness(element_type, mat, coords):
    """K_e^0 = sum_q w_q B^T D B det J for every element of coords (n_elements, nodes, dim)."""
    coords = np.asarray(coords, dtype=float)
    D = elasticity_matrix(mat)
    dim = coords.shape[-1]
    if element_type == TRI3:
        rule = [(TRI_GRADIENTS, TRI_WEIGHT)]
    elif element_type in (QUAD4, HEX8):
        points, weights = tensor_gauss_rule(dim)
        rule = [(reference_gradients(element_type, point), weight) for point, weight in zip(points, weights)]
    else:
        raise ValueError(f"Unsupported element type {element_type!r}")
    n_dof = coords.shape[1] * dim
    K = np.zeros((len(coords), n_dof, n_dof))
    for ref_grads, weight in rule:
        jac = np.einsum("ak,eai->eik", ref_grads, coords)
        det = np.linalg.det(jac)
        # dN/dx = dN/dxi J^-1
        grads = np.einsum("ak,eki->eai", ref_grads, np.linalg.inv(jac))
        B = strain_displacement(grads, dim)
        K += np.einsum("e,eIa,IJ,eJb->eab", weight * det, B, D, B)
    return _symmetrize(K)


def _axis_integrals():
    """Exact 1D integrals on [0,1] of products of phi_s (phi_0 = 1 - x, phi_1 = x) and their derivatives.

    Indexed [derivative_a, derivative_b, s_a, s_b].
    """
    table = np.zeros((2, 2, 2, 2))
    sign = np.array([-1.0, 1.0])
    for sa in range(2):
        for sb in range(2):
            table[0, 0, sa, sb] = 1.0 / 3.0 if sa == sb else 1.0 / 6.0
            table[1, 0, sa, sb] = sign[sa] / 2.0
            table[0, 1, sa, sb] = sign[sb] / 2.0
            table[1, 1, sa, sb] = sign[sa] * sign[sb]
    return table


def closed_form_box_stiffness(element_type, mat, spacing):
    """Analytically integrated K_e^0 of a box shaped quad4/hex8 element.

    K_(a i)(b j) = V sum_kl C_ikjl G^kl_ab / (h_k h_l), with G^kl_ab the exact reference integral of
    dN_a/dxi_k dN_b/dxi_l, a product of per-axis polynomial integrals.
    """
    if element_type not in (QUAD4, HEX8):
        raise ValueError(f"No closed form for {element_type!r} boxes")
    spacing = np.asarray(spacing, dtype=float)
    ref = REFERENCE_NODES[element_type].astype(int)
    dim = ref.shape[1]
    table = _axis_integrals()
    C = elasticity_tensor(mat)
    volume = float(np.prod(spacing))
    n = len(ref)
    G = np.ones((dim, dim, n, n))
    for k in range(dim):
        for l in range(dim):
            for m in range(dim):
                da = 1 if m == k else 0
                db = 1 if m == l else 0
                G[k, l] *= table[da, db][np.ix_(ref[:, m], ref[:, m])]
    scale = volume / np.outer(spacing, spacing)
    # (a, i, b, j) then flattened node-major like the dof map
    K = np.einsum("ikjl,klab,kl->aibj", C, G, scale).reshape(n * dim, n * dim)
    return _symmetrize(K)


def closed_form_triangle_stiffness(mat, coords):
    """Constant strain triangle: K = A B^T D B, B from the edge coefficients b_i = y_j - y_k, c_i = x_k - x_j."""
    coords = np.asarray(coords, dtype=float)
    x, y = coords[..., 0], coords[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    grads = np.stack([b, c], axis=2) / (2.0 * area)[:, None, None]
    B = strain_displacement(grads, 2)
    K = np.einsum("e,eIa,IJ,eJb->eab", area, B, elasticity_matrix(mat), B)
    return _symmetrize(K)


def unit_element_stiffness(element_type, mat, spacing=None, method="quadrature", coords=None):
    """K_e^0 for unit Young's modulus.

    Grid elements use `spacing` and return one (k, k) matrix; triangles need `coords` (n, 3, 2)
    and return one matrix per element. method is 'quadrature' or 'closed_form'.
    """
    if element_type not in (QUAD4, HEX8, TRI3):
        raise ValueError(f"Unsupported element type {element_type!r}")
    if method not in ("quadrature", "closed_form"):
        raise ValueError(f"Unknown element matrix method {method!r}")
    if element_type == TRI3:
        if coords is None:
            raise ValueError("Triangle element matrices need element coordinates")
        if method == "quadrature":
            return quadrature_element_stiffness(TRI3, mat, coords)
        return closed_form_triangle_stiffness(mat, coords)
    if spacing is None:
        raise ValueError("Grid element matrices need the element spacing")
    if method == "quadrature":
        box = REFERENCE_NODES[element_type] * np.asarray(spacing, dtype=float)
        return quadrature_element_stiffness(element_type, mat, box[None])[0]
    return closed_form_box_stiffness(element_type, mat, spacing)


class CsrPattern:
    """Precomputed scatter from element matrix entries to the CSR data of K."""

    __slots__ = ('shape', 'indices', 'indptr', 'inverse', 'nnz')

    def __init__(self, cell_to_dof, n_dofs):
        k = cell_to_dof.shape[1]
        rows = np.repeat(cell_to_dof, k, axis=1).ravel()
        cols = np.tile(cell_to_dof, (1, k)).ravel()
        keys = rows * n_dofs + cols
        unique, self.inverse = np.unique(keys, return_inverse=True)
        self.inverse = self.inverse.ravel()
        self.nnz = len(unique)
        unique_rows = unique // n_dofs
        self.indices = (unique % n_dofs).astype(np.int32)
        self.indptr = np.searchsorted(unique_rows, np.arange(n_dofs + 1)).astype(np.int32)
        self.shape = (n_dofs, n_dofs)

    def build(self, values):
        data = np.bincount(self.inverse, weights=values, minlength=self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)


class Assembler:
    """Global stiffness K(rho) = sum_e E(rho_e) scatter(K_e^0).

    standard: element matrices by quadrature on every call, coo -> csr every call.
    fast: quadrature once, cached element matrices and csr pattern, later calls only rescale.
    symbolic: closed form element matrices, cached like fast.
    """

    def __init__(self, mesh, dofmap, mat, method=FAST, app_log=None):
        if method not in ASSEMBLY_METHODS:
            raise ValueError(f"Unknown assembly method {method!r}, expected one of {ASSEMBLY_METHODS}")
        self.mesh = mesh
        self.dofmap = dofmap
        self.mat = mat
        self.method = method
        self.app_log = log.get_app_log(app_log)
        # element-evaluations done by numerical quadrature
        self.quadrature_evaluations = 0
        self.stopwatch = Stopwatch()
        self._ke = None
        self._pattern = None

    def _quadrature_ke(self):
        mesh = self.mesh
        self.quadrature_evaluations += mesh.n_elements
        return quadrature_element_stiffness(mesh.element_type, self.mat, mesh.node_coords[mesh.elements])

    def _cached_ke(self):
        if self._ke is None:
            mesh = self.mesh
            if self.method == FAST:
                if mesh.is_grid:
                    # every grid element is congruent, one quadrature evaluation
                    self.quadrature_evaluations += 1
                    self._ke = unit_element_stiffness(mesh.element_type, self.mat, mesh.spacing, "quadrature")
                else:
                    self._ke = self._quadrature_ke()
            else:
                if mesh.is_grid:
                    self._ke = closed_form_box_stiffness(mesh.element_type, self.mat, mesh.spacing)
                else:
                    self._ke = closed_form_triangle_stiffness(self.mat, mesh.node_coords[mesh.elements])
            self.app_log.debug(f"Cached {self.method} element matrices, shape {self._ke.shape}")
        return self._ke

    def element_matrices(self):
        """K_e^0 as (k, k) for congruent grids or (n_elements, k, k)."""
        if self.method == STANDARD:
            if self._ke is None:
                self._ke = self._quadrature_ke()
            return self._ke
        return self._cached_ke()

    def assemble(self, rho):
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (self.mesh.n_elements,):
            raise ValueError(f"Density needs {self.mesh.n_elements} entries, got shape {rho.shape}")
        moduli = interpolate_modulus(self.mat, rho)
        with self.stopwatch:
            K = self.assemble_moduli(moduli)
        return K

    def assemble_moduli(self, moduli):
        """K for given element moduli, without the SIMP map. Linear in moduli."""
        cell_to_dof = self.dofmap.cell_to_dof
        n_dofs = self.dofmap.n_dofs
        if self.method == STANDARD:
            ke = self._quadrature_ke()
            self._ke = ke
            k = cell_to_dof.shape[1]
            rows = np.repeat(cell_to_dof, k, axis=1).ravel()
            cols = np.tile(cell_to_dof, (1, k)).ravel()
            values = (moduli[:, None, None] * ke).ravel()
            return sp.coo_matrix((values, (rows, cols)), shape=(n_dofs, n_dofs)).tocsr()

        ke = self._cached_ke()
        if self._pattern is None:
            self._pattern = CsrPattern(cell_to_dof, n_dofs)
        if ke.ndim == 2:
            values = np.multiply.outer(moduli, ke).ravel()
        else:
            values = (moduli[:, None, None] * ke).ravel()
        return self._pattern.build(values)

    def element_energies(self, U):
        """u_e^T K_e^0 u_e per element."""
        ue = np.asarray(U)[self.dofmap.cell_to_dof]
        ke = self.element_matrices()
        if ke.ndim == 2:
            return np.einsum("ea,ab,eb->e", ue, ke, ue)
        return np.einsum("ea,eab,eb->e", ue, ke, ue)


def assemble_stiffness(mesh, dofmap, mat, rho, method=STANDARD):
    """One shot assembly. Reuse an Assembler to benefit from the fast/symbolic caches."""
    return Assembler(mesh, dofmap, mat, method).assemble(rho)


def assemble_load(problem, mesh, dofmap):
    """Nodal load vector: value T on the load axis of every node selected by the problem's load mask."""
    if not problem.matches_box(mesh.box):
        raise ConfigError("box", f"{problem.name} domain {problem.box} does not match mesh box {mesh.box}")
    nodes = np.flatnonzero(problem.load_mask(mesh.node_coords))
    if len(nodes) == 0:
        raise ConfigError("load", f"no node matches the load mask of {problem.name}: {problem.load_description}")
    F = np.zeros(dofmap.n_dofs)
    F[dofmap.node_dof(nodes, problem.load_axis)] = problem.load_magnitude
    return F


def apply_dirichlet(K, F, fixed_dofs):
    """Symmetric elimination: fixed rows/columns zeroed, unit diagonal, zero right hand side."""
    fixed_dofs = np.unique(np.asarray(fixed_dofs, dtype=np.int64))
    n = K.shape[0]
    if len(fixed_dofs) and (fixed_dofs[0] < 0 or fixed_dofs[-1] >= n):
        raise ValueError(f"Fixed dofs outside [0, {n})")
    free = np.ones(n)
    free[fixed_dofs] = 0.0
    keep = sp.diags(free)
    K = (keep @ K @ keep + sp.diags(1.0 - free)).tocsr()
    K.eliminate_zeros()
    K.sort_indices()
    F = np.asarray(F, dtype=float) * free
    return SparseSystem(K, F, fixed_dofs)


def relative_residual(K, U, F):
    norm_f = np.linalg.norm(F)
    residual = np.linalg.norm(K @ U - F)
    return residual / norm_f if norm_f > 0 else residual


def solve_direct(system, app_log=None):
    """Sparse LDL^T class factorization: SuperLU, symmetric ordering, no pivoting."""
    app_log = log.get_app_log(app_log)
    K, F = system.K, system.F
    if not np.any(F):
        return np.zeros_like(F)
    lu = splu(K.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
              options={"SymmetricMode": True})
    pivots = lu.U.diagonal()
    if np.any(pivots <= 0):
        raise MatrixError(f"Matrix is not positive definite, {int(np.sum(pivots <= 0))} non positive pivots")
    U = lu.solve(F)
    residual = relative_residual(K, U, F)
    for _ in range(DIRECT_REFINEMENTS):
        if residual <= DIRECT_RTOL:
            break
        U = U + lu.solve(F - K @ U)
        residual = relative_residual(K, U, F)
    if residual > DIRECT_RTOL:
        app_log.warning(f"Direct solve residual {residual:.3e} above {DIRECT_RTOL:.0e}")
    return U


def solve_cg(system, x0=None, rtol=CG_RTOL, max_iter=None, app_log=None):
    """Jacobi preconditioned conjugate gradient."""
    app_log = log.get_app_log(app_log)
    K, F = system.K, system.F
    n = len(F)
    if max_iter is None:
        max_iter = 10 * n
    norm_f = np.linalg.norm(F)
    if norm_f == 0:
        return np.zeros_like(F)
    diag = K.diagonal()
    if np.any(diag <= 0):
        raise MatrixError("Non positive diagonal entry, matrix is not positive definite")
    inv_diag = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = F - K @ x
    z = inv_diag * r
    p = z.copy()
    gamma = r @ z
    tol = rtol * norm_f
    normr = np.linalg.norm(r)
    for i in range(1, max_iter + 1):
        if normr <= tol:
            break
        Kp = K @ p
        curvature = p @ Kp
        if curvature <= 0:
            raise MatrixError(f"Negative curvature {curvature:.3e} at CG iteration {i}")
        alpha = gamma / curvature
        x += alpha * p
        r -= alpha * Kp
        normr = np.linalg.norm(r)
        z = inv_diag * r
        gamma_old = gamma
        gamma = r @ z
        p = z + (gamma / gamma_old) * p
    else:
        if normr > tol:
            raise SolverError(f"CG did not converge in {max_iter} iterations", residual=normr / norm_f)
    app_log.debug(f"CG converged, relative residual {normr / norm_f:.3e}")
    return x


def solve(system, method=DIRECT, x0=None, app_log=None):
    if method == DIRECT:
        return solve_direct(system, app_log=app_log)
    if method == CG:
        return solve_cg(system, x0=x0, app_log=app_log)
    raise ValueError(f"Unknown solver {method!r}")
