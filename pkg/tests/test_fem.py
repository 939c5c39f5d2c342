# Element matrices, assembly methods and linear solvers
# Run with: python3 -m pytest -v

import numpy as np
import pytest
import scipy.sparse as sp

import fem
from common import grid, random_density, setup
from essentials import ConfigError, MatrixError, SolverError
from material import SimpMaterial
from mesh import HEX8, QUAD4, TRI3, build_dof_map, triangulate_box
from problems import ProblemDefinition, problem_by_name


def _rigid_modes(coords):
    """Translations and infinitesimal rotations of the element nodes, node-major."""
    coords = np.asarray(coords, dtype=float)
    n, dim = coords.shape
    modes = []
    for axis in range(dim):
        u = np.zeros((n, dim))
        u[:, axis] = 1.0
        modes.append(u.ravel())
    for i, j in ((0, 1), (1, 2), (0, 2))[:1 if dim == 2 else 3]:
        u = np.zeros((n, dim))
        u[:, i] = -coords[:, j]
        u[:, j] = coords[:, i]
        modes.append(u.ravel())
    return modes


def test_quad_reference_entry(verbose=False):
    ke = fem.unit_element_stiffness(QUAD4, SimpMaterial.for_dim(2), [1.0, 1.0])
    # (1/2 - nu/6) / (1 - nu^2)
    assert ke[0, 0] == pytest.approx(0.494505, abs=1e-6)
    assert ke.shape == (8, 8)
    if verbose:
        print(ke)


def test_closed_form_matches_quadrature(verbose=False):
    for element_type, spacing in ((QUAD4, [1.0, 1.0]), (QUAD4, [0.5, 2.0]), (HEX8, [1.0, 1.0, 1.0]),
                                  (HEX8, [1.0, 0.5, 2.0])):
        mat = SimpMaterial.for_dim(len(spacing))
        quadrature = fem.unit_element_stiffness(element_type, mat, spacing, "quadrature")
        closed = fem.unit_element_stiffness(element_type, mat, spacing, "closed_form")
        assert np.allclose(closed, quadrature, rtol=1e-12, atol=1e-13)

    coords = np.array([[[0.0, 0.0], [2.0, 0.3], [0.4, 1.5]]])
    mat = SimpMaterial.for_dim(2)
    quadrature = fem.unit_element_stiffness(TRI3, mat, method="quadrature", coords=coords)
    closed = fem.unit_element_stiffness(TRI3, mat, method="closed_form", coords=coords)
    assert np.allclose(closed, quadrature, rtol=1e-12, atol=1e-13)


def test_rigid_body_modes(verbose=False):
    cases = (
        (QUAD4, SimpMaterial.for_dim(2), fem.unit_element_stiffness(QUAD4, SimpMaterial.for_dim(2), [1.0, 2.0]),
         [[0, 0], [1, 0], [1, 2], [0, 2]], 3),
        (HEX8, SimpMaterial.for_dim(3), fem.unit_element_stiffness(HEX8, SimpMaterial.for_dim(3), [1.0, 1.0, 1.0]),
         [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], 6),
    )
    for element_type, mat, ke, coords, n_modes in cases:
        assert np.allclose(ke, ke.T)
        for mode in _rigid_modes(coords):
            assert np.allclose(ke @ mode, 0.0, atol=1e-12)
        eigenvalues = np.linalg.eigvalsh(ke)
        assert eigenvalues.min() > -1e-12
        assert np.sum(eigenvalues < 1e-10) == n_modes
        if verbose:
            print(element_type, eigenvalues)
    triangle = np.array([[0.0, 0.0], [2.0, 0.3], [0.4, 1.5]])
    ke = fem.unit_element_stiffness(TRI3, SimpMaterial.for_dim(2), coords=triangle[None])[0]
    assert np.allclose(ke, ke.T)
    for mode in _rigid_modes(triangle):
        assert np.allclose(ke @ mode, 0.0, atol=1e-12)
    eigenvalues = np.linalg.eigvalsh(ke)
    assert np.sum(eigenvalues < 1e-10) == 3
    assert eigenvalues.min() > -1e-12


def test_assembly_methods_agree(verbose=False):
    meshes = [grid([6, 4]), grid([3, 2, 2]), triangulate_box(5, 3, [0.0, 5.0, 0.0, 3.0])]
    for mesh in meshes:
        dofmap = build_dof_map(mesh)
        mat = SimpMaterial.for_dim(mesh.dim)
        rho = random_density(mesh.n_elements, seed=3, low=0.0, high=1.0)
        reference = fem.assemble_stiffness(mesh, dofmap, mat, rho, fem.STANDARD)
        scale = abs(reference).max()
        for method in (fem.FAST, fem.SYMBOLIC):
            K = fem.assemble_stiffness(mesh, dofmap, mat, rho, method)
            assert abs(K - reference).max() / scale <= 1e-12
        assert abs(reference - reference.T).max() <= 1e-12 * scale


def test_quadrature_counters(verbose=False):
    mesh = grid([4, 3])
    dofmap = build_dof_map(mesh)
    mat = SimpMaterial.for_dim(2)
    rho = np.full(mesh.n_elements, 0.5)
    counts = {}
    for method in fem.ASSEMBLY_METHODS:
        assembler = fem.Assembler(mesh, dofmap, mat, method)
        for _ in range(3):
            assembler.assemble(rho)
        counts[method] = assembler.quadrature_evaluations
        assert assembler.stopwatch.count == 3
    assert counts == {fem.STANDARD: 3 * mesh.n_elements, fem.FAST: 1, fem.SYMBOLIC: 0}

    tri = triangulate_box(2, 2, [0.0, 2.0, 0.0, 2.0])
    assembler = fem.Assembler(tri, build_dof_map(tri), mat, fem.FAST)
    assembler.assemble(np.ones(tri.n_elements))
    assembler.assemble(np.ones(tri.n_elements))
    assert assembler.quadrature_evaluations == tri.n_elements


def test_assembly_linear_in_moduli(verbose=False):
    mesh = grid([3, 3])
    assembler = fem.Assembler(mesh, build_dof_map(mesh), SimpMaterial.for_dim(2), fem.FAST)
    m1 = random_density(mesh.n_elements, seed=1)
    m2 = random_density(mesh.n_elements, seed=2)
    combined = assembler.assemble_moduli(2.0 * m1 - 0.5 * m2)
    separate = 2.0 * assembler.assemble_moduli(m1) - 0.5 * assembler.assemble_moduli(m2)
    assert abs(combined - separate).max() < 1e-12


def test_invalid_density_shape(verbose=False):
    mesh = grid([2, 2])
    assembler = fem.Assembler(mesh, build_dof_map(mesh), SimpMaterial.for_dim(2))
    with pytest.raises(ValueError):
        assembler.assemble(np.ones(3))
    with pytest.raises(ValueError):
        fem.Assembler(mesh, build_dof_map(mesh), SimpMaterial.for_dim(2), "lazy")


def test_load_vector(verbose=False):
    mesh, dofmap, problem, _ = setup("cantilever2d", [4, 2])
    F = fem.assemble_load(problem, mesh, dofmap)
    assert F.sum() == pytest.approx(-1.0)
    # node (4, 0) is node 4, y dof
    assert F[dofmap.node_dof(4, 1)] == -1.0
    assert np.count_nonzero(F) == 1

    with pytest.raises(ConfigError) as error:
        fem.assemble_load(problem_by_name("cantilever2d", [5, 2]), mesh, dofmap)
    assert error.value.field == "box"
    off_grid = ProblemDefinition("off_grid", (0.0, 4.0, 0.0, 2.0), -1.0, load_axis=1, load_at={0: 0.5},
                                 supports={0: {0: 0.0}})
    with pytest.raises(ConfigError) as error:
        fem.assemble_load(off_grid, mesh, dofmap)
    assert error.value.field == "load"


def test_dirichlet(verbose=False):
    mesh, dofmap, problem, mat = setup("cantilever2d", [3, 2])
    K = fem.assemble_stiffness(mesh, dofmap, mat, np.ones(mesh.n_elements))
    F = fem.assemble_load(problem, mesh, dofmap)
    fixed = problem.fixed_dofs(mesh.node_coords, dofmap)
    system = fem.apply_dirichlet(K, F, fixed)
    dense = system.K.toarray()
    for dof in fixed:
        expected = np.zeros(dofmap.n_dofs)
        expected[dof] = 1.0
        assert np.array_equal(dense[dof], expected)
        assert np.array_equal(dense[:, dof], expected)
        assert system.F[dof] == 0.0
    assert np.allclose(dense, dense.T)
    with pytest.raises(ValueError):
        fem.apply_dirichlet(K, F, [dofmap.n_dofs])


def test_single_element_oracle(verbose=False):
    mesh, dofmap, problem, mat = setup("cantilever2d", [1, 1])
    ke = fem.unit_element_stiffness(QUAD4, mat, [1.0, 1.0])
    K = fem.assemble_stiffness(mesh, dofmap, mat, np.ones(1))
    F = fem.assemble_load(problem, mesh, dofmap)
    fixed = problem.fixed_dofs(mesh.node_coords, dofmap)
    U = fem.solve(fem.apply_dirichlet(K, F, fixed))

    # same problem with a dense reduced solve
    global_ke = np.zeros((8, 8))
    c2d = dofmap.cell_to_dof[0]
    global_ke[np.ix_(c2d, c2d)] = ke
    free = np.setdiff1d(np.arange(8), fixed)
    expected = np.zeros(8)
    expected[free] = np.linalg.solve(global_ke[np.ix_(free, free)], F[free])
    assert np.allclose(U, expected, rtol=1e-10)
    assert np.all(U[fixed] == 0.0)
    # compliance is positive for a loaded structure
    assert F @ U > 0


def test_direct_and_cg_agree(verbose=False):
    for problem, cells in (("cantilever2d", [12, 8]), ("cantilever3d", [6, 3, 2])):
        mesh, dofmap, definition, mat = setup(problem, cells)
        rho = random_density(mesh.n_elements, seed=5)
        K = fem.assemble_stiffness(mesh, dofmap, mat, rho, fem.FAST)
        system = fem.apply_dirichlet(K, fem.assemble_load(definition, mesh, dofmap),
                                     definition.fixed_dofs(mesh.node_coords, dofmap))
        direct = fem.solve(system, fem.DIRECT)
        cg = fem.solve(system, fem.CG)
        assert fem.relative_residual(system.K, direct, system.F) <= fem.DIRECT_RTOL
        assert fem.relative_residual(system.K, cg, system.F) <= fem.CG_RTOL
        assert np.linalg.norm(cg - direct) / np.linalg.norm(direct) < 1e-6
        # warm start from the solution converges immediately
        assert np.allclose(fem.solve_cg(system, x0=direct), direct)


def test_random_spd_system(verbose=False):
    rng = np.random.default_rng(21)
    A = rng.normal(size=(50, 50))
    K = sp.csr_matrix(A @ A.T + 50.0 * np.eye(50))
    system = fem.SparseSystem(K, rng.normal(size=50), np.array([], dtype=np.int64))
    direct = fem.solve(system, fem.DIRECT)
    cg = fem.solve(system, fem.CG)
    assert np.linalg.norm(cg - direct) / np.linalg.norm(direct) < 1e-7


def test_zero_load(verbose=False):
    K = sp.identity(4, format="csr")
    system = fem.SparseSystem(K, np.zeros(4), np.array([], dtype=np.int64))
    assert np.array_equal(fem.solve(system, fem.DIRECT), np.zeros(4))
    assert np.array_equal(fem.solve(system, fem.CG), np.zeros(4))


def test_indefinite_matrix(verbose=False):
    K = sp.csr_matrix(np.diag([1.0, -1.0]))
    system = fem.SparseSystem(K, np.array([1.0, 1.0]), np.array([], dtype=np.int64))
    with pytest.raises(MatrixError):
        fem.solve(system, fem.DIRECT)
    with pytest.raises(MatrixError):
        fem.solve(system, fem.CG)


def test_cg_iteration_cap(verbose=False):
    mesh, dofmap, definition, mat = setup("cantilever2d", [8, 5])
    K = fem.assemble_stiffness(mesh, dofmap, mat, np.ones(mesh.n_elements), fem.FAST)
    system = fem.apply_dirichlet(K, fem.assemble_load(definition, mesh, dofmap),
                                 definition.fixed_dofs(mesh.node_coords, dofmap))
    with pytest.raises(SolverError) as error:
        fem.solve_cg(system, max_iter=1)
    assert error.value.residual > fem.CG_RTOL
    with pytest.raises(ValueError):
        fem.solve(system, "gmres")


# compliance of the 160x100 cantilever at uniform density 0.4, from the direct solver
CANTILEVER_BASELINE = 483.86690570498


def test_cantilever_baseline(verbose=False):
    mesh, dofmap, definition, mat = setup("cantilever2d", [160, 100])
    K = fem.assemble_stiffness(mesh, dofmap, mat, np.full(mesh.n_elements, 0.4), fem.FAST)
    system = fem.apply_dirichlet(K, fem.assemble_load(definition, mesh, dofmap),
                                 definition.fixed_dofs(mesh.node_coords, dofmap))
    for method in (fem.DIRECT, fem.CG):
        U = fem.solve(system, method)
        c = float(system.F @ U)
        assert c == pytest.approx(CANTILEVER_BASELINE, rel=1e-8)
        if verbose:
            print(method, c)


if __name__ == "__main__":
    test_quad_reference_entry(True)
    test_rigid_body_modes(True)
    test_single_element_oracle(True)
