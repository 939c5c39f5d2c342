# Common helpers used in tests

from os import path

import numpy as np

from material import SimpMaterial
from mesh import build_dof_map, build_uniform_grid
from problems import problem_by_name

ROOT = path.dirname(path.dirname(path.abspath(__file__)))
PRESETS = path.join(ROOT, "presets")
SMALL_CONFIG = path.join(path.dirname(path.abspath(__file__)), "config_custom.txt")


def grid(cells, spacing=None):
    dim = len(cells)
    return build_uniform_grid(dim, cells, spacing or [1.0] * dim, [0.0] * dim)


def setup(problem, cells):
    """mesh, dofmap, problem definition and default material of a unit spacing grid."""
    mesh = grid(cells)
    return mesh, build_dof_map(mesh), problem_by_name(problem, cells), SimpMaterial.for_dim(len(cells))


def random_density(n, seed=0, low=0.2, high=0.9):
    return np.random.default_rng(seed).uniform(low, high, n)


def preset(name):
    return path.join(PRESETS, f"{name}.txt")


def rel_diff(a, b):
    return abs(a - b) / abs(b)
