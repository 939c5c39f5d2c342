"""
Benchmark problems: design domain, nodal point load and Dirichlet supports.
Masks are evaluated on node coordinates with an absolute tolerance, body forces are zero.
"""

import numpy as np

__version__ = "0.1.0"

EPS = 1e-12

CANTILEVER_2D = "cantilever2d"
MBB_2D = "mbb2d"
CANTILEVER_3D = "cantilever3d"

# name: (dim, reference cells at unit spacing)
DEFAULT_DOMAINS = {
    CANTILEVER_2D: (2, (160, 100)),
    MBB_2D: (2, (150, 50)),
    CANTILEVER_3D: (3, (60, 20, 4)),
}


def _on(coords, axis, value, eps):
    return np.abs(coords[:, axis] - value) < eps


class ProblemDefinition:
    """Immutable problem description.

    load_at: {axis: coordinate} conditions, all must hold for a node to be loaded.
    supports: {dof axis: {axis: coordinate}} conditions selecting fixed dofs per displacement component,
    or {dof axis: [conditions, ...]} for a union of such selections.
    """

    __slots__ = ('name', 'box', 'load_magnitude', 'load_axis', 'load_at', 'supports', 'eps')

    def __init__(self, name, box, load_magnitude, load_axis, load_at, supports, eps=EPS):
        box = tuple(float(v) for v in box)
        if len(box) not in (4, 6):
            raise ValueError(f"Box needs 4 or 6 bounds, got {len(box)}")
        for axis in range(len(box) // 2):
            if not box[2 * axis] < box[2 * axis + 1]:
                raise ValueError(f"Box is not ordered on axis {axis}: {box}")
        if load_magnitude == 0:
            raise ValueError("Load magnitude T must be non zero")
        self.name = name
        self.box = box
        self.load_magnitude = float(load_magnitude)
        self.load_axis = load_axis
        self.load_at = dict(load_at)
        # one conditions dict, or a list of them whose selections are united
        self.supports = {axis: [dict(c) for c in (at if isinstance(at, (list, tuple)) else [at])]
                         for axis, at in supports.items()}
        self.eps = eps

    @property
    def dim(self):
        return len(self.box) // 2

    def _select(self, coords, conditions):
        coords = np.asarray(coords, dtype=float)
        mask = np.ones(len(coords), dtype=bool)
        for axis, value in conditions.items():
            mask &= _on(coords, axis, value, self.eps)
        return mask

    def load_mask(self, coords):
        return self._select(coords, self.load_at)

    def dirichlet_mask(self, coords, axis):
        """Nodes whose displacement component `axis` is fixed."""
        mask = np.zeros(len(coords), dtype=bool)
        for conditions in self.supports.get(axis, []):
            mask |= self._select(coords, conditions)
        return mask

    def fixed_dofs(self, coords, dofmap):
        dofs = [dofmap.node_dof(np.flatnonzero(self.dirichlet_mask(coords, axis)), axis)
                for axis in range(self.dim)]
        return np.unique(np.concatenate(dofs)).astype(np.int64)

    def matches_box(self, box, rtol=1e-9):
        return len(box) == len(self.box) and np.allclose(box, self.box, rtol=rtol, atol=self.eps)

    @property
    def load_description(self):
        where = " and ".join(f"{'xyz'[axis]} = {value:g}" for axis, value in self.load_at.items())
        return f"T = {self.load_magnitude:g} along {'xyz'[self.load_axis]} where {where}"

    def __repr__(self):
        return f"ProblemDefinition({self.name}, box={list(self.box)}, {self.load_description})"


def cantilever_2d(xmin=0.0, xmax=160.0, ymin=0.0, ymax=100.0, T=-1.0):
    """Left edge clamped, vertical point load at the bottom right corner."""
    return ProblemDefinition(
        CANTILEVER_2D, (xmin, xmax, ymin, ymax), T, load_axis=1,
        load_at={0: xmax, 1: ymin},
        supports={0: {0: xmin}, 1: {0: xmin}})


def mbb_2d(xmin=0.0, xmax=150.0, ymin=0.0, ymax=50.0, T=-1.0):
    """Half MBB beam: symmetry rollers on the left edge, vertical hinge at the bottom right, load at the top left."""
    return ProblemDefinition(
        MBB_2D, (xmin, xmax, ymin, ymax), T, load_axis=1,
        load_at={0: xmin, 1: ymax},
        supports={0: {0: xmin}, 1: {0: xmax, 1: ymin}})


def cantilever_3d(xmin=0.0, xmax=60.0, ymin=0.0, ymax=20.0, zmin=0.0, zmax=4.0, T=-1.0):
    """Left face clamped, T on every node of the bottom edge of the right face (through the thickness)."""
    return ProblemDefinition(
        CANTILEVER_3D, (xmin, xmax, ymin, ymax, zmin, zmax), T, load_axis=1,
        load_at={0: xmax, 1: ymin},
        supports={0: {0: xmin}, 1: {0: xmin}, 2: {0: xmin}})


FACTORIES = {
    CANTILEVER_2D: cantilever_2d,
    MBB_2D: mbb_2d,
    CANTILEVER_3D: cantilever_3d,
}


def problem_dim(name):
    if name not in DEFAULT_DOMAINS:
        raise ValueError(f"Unknown problem {name!r}, expected one of {', '.join(FACTORIES)}")
    return DEFAULT_DOMAINS[name][0]


def problem_by_name(name, cells, spacing=None, T=-1.0, origin=None):
    """Problem on the box covered by `cells` elements of size `spacing` starting at `origin`."""
    dim = problem_dim(name)
    if len(cells) != dim:
        raise ValueError(f"{name} needs {dim} cell counts, got {list(cells)}")
    spacing = [1.0] * dim if spacing is None else [float(h) for h in spacing]
    origin = [0.0] * dim if origin is None else [float(o) for o in origin]
    box = []
    for n, h, o in zip(cells, spacing, origin):
        box += [o, o + n * h]
    return FACTORIES[name](*box, T=T)
