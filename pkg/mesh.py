"""
Meshes for density based topology optimization
Uniform quad/hex grids, triangulated boxes, element geometry and displacement dof maps.

Node numbering is lexicographic with x fastest, elements follow the same order.
The density lives on elements, the displacement on nodes.
"""

import numpy as np

__version__ = "0.1.1"

QUAD4 = "quad4"
TRI3 = "tri3"
HEX8 = "hex8"

NODES_PER_ELEMENT = {QUAD4: 4, TRI3: 3, HEX8: 8}

# Local node positions on the unit reference cell, counter-clockwise (2D), bottom face then top (3D).
REFERENCE_NODES = {
    QUAD4: np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float),
    HEX8: np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                    [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float),
}

# 2-point Gauss rule on [0, 1]
GAUSS_POINTS_1D = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
GAUSS_WEIGHTS_1D = np.array([0.5, 0.5])


class Mesh:
    """Immutable mesh: node coordinates, element connectivity and grid metadata."""

    __slots__ = ('dim', 'element_type', 'node_coords', 'elements', 'spacing', 'origin', 'cells_per_axis',
                 '_centroids', '_volumes')

    def __init__(self, dim, element_type, node_coords, elements, spacing, origin, cells_per_axis):
        node_coords = np.ascontiguousarray(node_coords, dtype=float)
        elements = np.ascontiguousarray(elements, dtype=np.int64)
        if element_type not in NODES_PER_ELEMENT:
            raise ValueError(f"Unsupported element type {element_type!r}")
        if node_coords.ndim != 2 or node_coords.shape[1] != dim:
            raise ValueError(f"node_coords must be (n, {dim}), got {node_coords.shape}")
        if elements.ndim != 2 or elements.shape[1] != NODES_PER_ELEMENT[element_type]:
            raise ValueError(f"{element_type} elements need {NODES_PER_ELEMENT[element_type]} nodes each")
        if elements.size and (elements.min() < 0 or elements.max() >= len(node_coords)):
            raise ValueError("Element connectivity references a node outside the mesh")
        self.dim = dim
        self.element_type = element_type
        self.node_coords = node_coords
        self.elements = elements
        self.spacing = np.asarray(spacing, dtype=float)
        self.origin = np.asarray(origin, dtype=float)
        self.cells_per_axis = tuple(int(n) for n in cells_per_axis)
        for array in (self.node_coords, self.elements, self.spacing, self.origin):
            array.flags.writeable = False
        self._centroids, self._volumes = _compute_geometry(self)
        if np.any(self._volumes <= 0):
            bad = int(np.argmin(self._volumes))
            raise ValueError(f"Element {bad} has non positive measure {self._volumes[bad]}")

    @property
    def n_nodes(self):
        return len(self.node_coords)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def box(self):
        """[xmin, xmax, ymin, ymax(, zmin, zmax)] of the meshed domain."""
        lo = self.node_coords.min(axis=0)
        hi = self.node_coords.max(axis=0)
        return [float(v) for pair in zip(lo, hi) for v in pair]

    @property
    def is_grid(self):
        return self.element_type in (QUAD4, HEX8)

    def __repr__(self):
        return f"Mesh({self.element_type}, cells={self.cells_per_axis}, nodes={self.n_nodes}, elements={self.n_elements})"


class DofMap:
    """Displacement dofs, node-major: dof(node, axis) = node * dim + axis."""

    __slots__ = ('dofs_per_node', 'cell_to_dof', 'n_dofs')

    def __init__(self, dofs_per_node, cell_to_dof, n_dofs):
        self.dofs_per_node = dofs_per_node
        self.cell_to_dof = cell_to_dof
        self.cell_to_dof.flags.writeable = False
        self.n_dofs = n_dofs

    def node_dof(self, node, axis):
        return node * self.dofs_per_node + axis


def _check_vector(name, values, dim):
    values = np.asarray(values, dtype=float)
    if values.shape != (dim,):
        raise ValueError(f"{name} must have {dim} entries, got {values.tolist()}")
    return values


def grid_node_index(indices, cells_per_axis):
    """Lexicographic node number of integer grid coordinates, x fastest."""
    index = np.zeros_like(np.asarray(indices[0]))
    stride = 1
    for axis, n in enumerate(cells_per_axis):
        index = index + np.asarray(indices[axis]) * stride
        stride *= n + 1
    return index


def _grid_nodes(cells_per_axis, spacing, origin):
    axes = [origin[a] + spacing[a] * np.arange(n + 1) for a, n in enumerate(cells_per_axis)]
    # meshgrid with ij indexing puts axis 0 first, ravel in Fortran order keeps x fastest
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel(order="F") for g in grids], axis=1)


def build_uniform_grid(dim, cells_per_axis, spacing, origin):
    """quad4 grid in 2D, hex8 grid in 3D."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if len(cells_per_axis) != dim:
        raise ValueError(f"cells_per_axis must have {dim} entries, got {list(cells_per_axis)}")
    cells = [int(n) for n in cells_per_axis]
    if any(n < 1 for n in cells):
        raise ValueError(f"Cell counts must be positive, got {cells}")
    spacing = _check_vector("spacing", spacing, dim)
    origin = _check_vector("origin", origin, dim)
    if np.any(spacing <= 0):
        raise ValueError(f"Spacing must be positive, got {spacing.tolist()}")

    nodes = _grid_nodes(cells, spacing, origin)
    # lower corner grid indices of every element, x fastest
    corner = np.meshgrid(*[np.arange(n) for n in cells], indexing="ij")
    corner = [c.ravel(order="F") for c in corner]
    element_type = QUAD4 if dim == 2 else HEX8
    offsets = REFERENCE_NODES[element_type].astype(np.int64)
    elements = np.stack(
        [grid_node_index([corner[a] + offsets[k, a] for a in range(dim)], cells) for k in range(len(offsets))],
        axis=1)
    return Mesh(dim, element_type, nodes, elements, spacing, origin, cells)


def triangulate_box(cells_x, cells_y, box):
    """Each grid cell split along its (low-x, low-y) -> (high-x, high-y) diagonal, both halves counter-clockwise."""
    if cells_x < 1 or cells_y < 1:
        raise ValueError(f"Cell counts must be positive, got {cells_x}, {cells_y}")
    xmin, xmax, ymin, ymax = [float(v) for v in box]
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"Degenerate box {list(box)}")
    cells = [int(cells_x), int(cells_y)]
    spacing = np.array([(xmax - xmin) / cells_x, (ymax - ymin) / cells_y])
    origin = np.array([xmin, ymin])
    nodes = _grid_nodes(cells, spacing, origin)

    i, j = np.meshgrid(np.arange(cells_x), np.arange(cells_y), indexing="ij")
    i, j = i.ravel(order="F"), j.ravel(order="F")
    n00 = grid_node_index([i, j], cells)
    n10 = grid_node_index([i + 1, j], cells)
    n11 = grid_node_index([i + 1, j + 1], cells)
    n01 = grid_node_index([i, j + 1], cells)
    lower = np.stack([n00, n10, n11], axis=1)
    upper = np.stack([n00, n11, n01], axis=1)
    elements = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh(2, TRI3, nodes, elements, spacing, origin, cells)


def _compute_geometry(mesh):
    coords = mesh.node_coords[mesh.elements]
    centroids = coords.mean(axis=1)
    if mesh.element_type == TRI3:
        e1 = coords[:, 1] - coords[:, 0]
        e2 = coords[:, 2] - coords[:, 0]
        volumes = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    elif mesh.element_type == QUAD4:
        # shoelace
        x, y = coords[..., 0], coords[..., 1]
        volumes = 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)
    else:
        # det J of a trilinear map has degree <= 2 per axis, the 2-point rule integrates it exactly
        volumes = np.zeros(len(coords))
        for point, weight in zip(*tensor_gauss_rule(3)):
            jac = np.einsum("ak,eai->eik", reference_gradients(HEX8, point), coords)
            volumes += weight * np.linalg.det(jac)
    return centroids, volumes


def element_geometry(mesh):
    """(centroids, volumes): arithmetic mean of element nodes and exact element measure."""
    return mesh._centroids, mesh._volumes


def build_dof_map(mesh):
    dim = mesh.dim
    cell_to_dof = (mesh.elements[:, :, None] * dim + np.arange(dim)[None, None, :]).reshape(mesh.n_elements, -1)
    return DofMap(dim, np.ascontiguousarray(cell_to_dof), dim * mesh.n_nodes)


def tensor_gauss_rule(dim):
    """2-point-per-axis Gauss points and weights on the unit cell."""
    grids = np.meshgrid(*[GAUSS_POINTS_1D] * dim, indexing="ij")
    weights = np.meshgrid(*[GAUSS_WEIGHTS_1D] * dim, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([w.ravel() for w in weights], axis=1), axis=1)
    return points, weights


def reference_gradients(element_type, point):
    """d N_a / d xi_k of the (multi)linear shape functions at a point of the unit reference cell, shape (nodes, dim)."""
    ref = REFERENCE_NODES[element_type]
    point = np.asarray(point, dtype=float)
    # 1D factors: phi_0 = 1 - xi, phi_1 = xi ; derivatives -1, +1
    values = np.where(ref == 1, point, 1.0 - point)
    slopes = np.where(ref == 1, 1.0, -1.0)
    dim = ref.shape[1]
    grads = np.empty_like(ref)
    for k in range(dim):
        factors = values.copy()
        factors[:, k] = slopes[:, k]
        grads[:, k] = np.prod(factors, axis=1)
    return grads
