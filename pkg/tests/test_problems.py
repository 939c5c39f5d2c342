# Benchmark problem loads and supports on the reference domains
# Run with: python3 -m pytest -v

import numpy as np
import pytest

import fem
from common import setup
from problems import DEFAULT_DOMAINS, ProblemDefinition, cantilever_2d, problem_by_name, problem_dim


def _loads_and_supports(name):
    cells = DEFAULT_DOMAINS[name][1]
    mesh, dofmap, problem, _ = setup(name, cells)
    F = fem.assemble_load(problem, mesh, dofmap)
    fixed = problem.fixed_dofs(mesh.node_coords, dofmap)
    return mesh, dofmap, problem, F, fixed


def test_cantilever_2d(verbose=False):
    mesh, dofmap, problem, F, fixed = _loads_and_supports("cantilever2d")
    assert problem.box == (0.0, 160.0, 0.0, 100.0)
    loaded = np.flatnonzero(problem.load_mask(mesh.node_coords))
    assert len(loaded) == 1
    assert mesh.node_coords[loaded[0]].tolist() == [160.0, 0.0]
    assert len(fixed) == 202
    assert F.sum() == pytest.approx(-1.0)
    assert not np.intersect1d(fixed, np.flatnonzero(F)).size
    if verbose:
        print(problem)


def test_mbb_2d(verbose=False):
    mesh, dofmap, problem, F, fixed = _loads_and_supports("mbb2d")
    assert len(fixed) == 52
    hinge = int(np.flatnonzero(np.all(mesh.node_coords == [150.0, 0.0], axis=1))[0])
    assert dofmap.node_dof(hinge, 1) in fixed
    assert dofmap.node_dof(hinge, 0) not in fixed
    corner = int(np.flatnonzero(np.all(mesh.node_coords == [0.0, 50.0], axis=1))[0])
    assert F[dofmap.node_dof(corner, 1)] == -1.0
    # the loaded corner is on the symmetry edge, only x is held there
    assert dofmap.node_dof(corner, 0) in fixed
    assert dofmap.node_dof(corner, 1) not in fixed


def test_cantilever_3d(verbose=False):
    mesh, dofmap, problem, F, fixed = _loads_and_supports("cantilever3d")
    loaded = np.flatnonzero(problem.load_mask(mesh.node_coords))
    assert len(loaded) == 5
    assert np.allclose(mesh.node_coords[loaded][:, :2], [60.0, 0.0])
    assert len(fixed) == 315
    assert F.sum() == pytest.approx(-5.0)
    assert np.all(F[0::3] == 0.0) and np.all(F[2::3] == 0.0)
    assert not np.intersect1d(fixed, np.flatnonzero(F)).size


def test_scaled_domain(verbose=False):
    problem = problem_by_name("cantilever2d", [16, 10], spacing=[10.0, 10.0], T=-2.0)
    assert problem.box == (0.0, 160.0, 0.0, 100.0)
    assert problem.load_magnitude == -2.0
    assert "y" in problem.load_description
    assert problem.matches_box([0.0, 160.0, 0.0, 100.0])
    assert not problem.matches_box([0.0, 150.0, 0.0, 100.0])


def test_union_supports(verbose=False):
    mesh, dofmap, _, _ = setup("cantilever2d", [4, 2])
    clamped = ProblemDefinition("clamped", (0.0, 4.0, 0.0, 2.0), -1.0, load_axis=1, load_at={0: 2.0, 1: 2.0},
                                supports={0: [{0: 0.0}, {0: 4.0}], 1: [{0: 0.0}, {0: 4.0}]})
    assert len(clamped.fixed_dofs(mesh.node_coords, dofmap)) == 12
    assert clamped.dirichlet_mask(mesh.node_coords, 1).sum() == 6


def test_invalid_problems(verbose=False):
    with pytest.raises(ValueError):
        cantilever_2d(T=0.0)
    with pytest.raises(ValueError):
        cantilever_2d(xmin=5.0, xmax=1.0)
    with pytest.raises(ValueError):
        problem_dim("bridge")
    with pytest.raises(ValueError):
        problem_by_name("cantilever3d", [4, 2])
    assert problem_dim("cantilever3d") == 3


if __name__ == "__main__":
    test_cantilever_2d(True)
    test_mbb_2d(True)
    test_cantilever_3d(True)
