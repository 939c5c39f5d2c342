"""
VTK legacy 3.0 ASCII files for element fields
STRUCTURED_POINTS for quad/hex grids, UNSTRUCTURED_GRID for any mesh, and a reader for both.
"""

import numpy as np

from mesh import HEX8, QUAD4, TRI3

__version__ = "0.1.0"

VTK_CELL_TYPES = {TRI3: 5, QUAD4: 9, HEX8: 12}
FLOAT_FORMAT = "%.9g"
TITLE = "densopt element field"


def _header(fp, dataset):
    fp.write("# vtk DataFile Version 3.0\n")
    fp.write(TITLE + "\n")
    fp.write("ASCII\n")
    fp.write(f"DATASET {dataset}\n")


def _cell_scalars(fp, name, values):
    fp.write(f"CELL_DATA {len(values)}\n")
    fp.write(f"SCALARS {name} float 1\n")
    fp.write("LOOKUP_TABLE default\n")
    np.savetxt(fp, np.asarray(values, dtype=float).reshape(-1, 1), fmt=FLOAT_FORMAT)


def _check_values(mesh, values):
    values = np.asarray(values, dtype=float).ravel()
    if len(values) != mesh.n_elements:
        raise ValueError(f"Need one value per element ({mesh.n_elements}), got {len(values)}")
    return values


def write_structured_points(path, mesh, cell_values, name="density"):
    if not mesh.is_grid:
        raise ValueError(f"STRUCTURED_POINTS needs a quad/hex grid, got {mesh.element_type}")
    values = _check_values(mesh, cell_values)
    dims = [n + 1 for n in mesh.cells_per_axis] + [1] * (3 - mesh.dim)
    origin = list(mesh.origin) + [0.0] * (3 - mesh.dim)
    spacing = list(mesh.spacing) + [1.0] * (3 - mesh.dim)
    with open(path, "w", newline="\n") as fp:
        _header(fp, "STRUCTURED_POINTS")
        fp.write("DIMENSIONS {} {} {}\n".format(*dims))
        fp.write("ORIGIN {} {} {}\n".format(*[FLOAT_FORMAT % v for v in origin]))
        fp.write("SPACING {} {} {}\n".format(*[FLOAT_FORMAT % v for v in spacing]))
        _cell_scalars(fp, name, values)


def write_unstructured_grid(path, mesh, cell_values, name="density"):
    values = _check_values(mesh, cell_values)
    points = np.zeros((mesh.n_nodes, 3))
    points[:, :mesh.dim] = mesh.node_coords
    k = mesh.elements.shape[1]
    with open(path, "w", newline="\n") as fp:
        _header(fp, "UNSTRUCTURED_GRID")
        fp.write(f"POINTS {mesh.n_nodes} double\n")
        np.savetxt(fp, points, fmt="%.17g")
        fp.write(f"CELLS {mesh.n_elements} {mesh.n_elements * (k + 1)}\n")
        cells = np.hstack([np.full((mesh.n_elements, 1), k), mesh.elements])
        np.savetxt(fp, cells, fmt="%d")
        fp.write(f"CELL_TYPES {mesh.n_elements}\n")
        np.savetxt(fp, np.full((mesh.n_elements, 1), VTK_CELL_TYPES[mesh.element_type]), fmt="%d")
        _cell_scalars(fp, name, values)


def write_density(path, mesh, values):
    if mesh.is_grid:
        write_structured_points(path, mesh, values)
    else:
        write_unstructured_grid(path, mesh, values)


class _Lines:
    """Non empty lines with their 1-based line numbers."""

    def __init__(self, path):
        with open(path) as fp:
            self.lines = [(number, line.strip()) for number, line in enumerate(fp, 1)]
        self.position = 0

    def next(self):
        while self.position < len(self.lines):
            number, line = self.lines[self.position]
            self.position += 1
            if line:
                return number, line
        raise ValueError("Unexpected end of file")

    def numbers(self, count, cast=float):
        values = []
        number = self.lines[self.position - 1][0] if self.position else 0
        while len(values) < count:
            number, line = self.next()
            try:
                values.extend(cast(token) for token in line.split())
            except ValueError:
                raise ValueError(f"Line {number}: expected numbers, got {line!r}")
        if len(values) != count:
            raise ValueError(f"Line {number}: expected {count} values, got {len(values)}")
        return values


def _expect(lines, keyword):
    number, line = lines.next()
    tokens = line.split()
    if tokens[0].upper() != keyword:
        raise ValueError(f"Line {number}: expected {keyword}, got {line!r}")
    return number, tokens


def read_legacy(path):
    """Reads files written by this module. Returns a dict with the dataset kind, its geometry and cell_data."""
    lines = _Lines(path)
    number, line = lines.next()
    if not line.startswith("# vtk DataFile Version"):
        raise ValueError(f"Line {number}: not a VTK legacy file")
    lines.next()  # title
    number, line = lines.next()
    if line.upper() != "ASCII":
        raise ValueError(f"Line {number}: only ASCII files are supported, got {line!r}")
    number, tokens = _expect(lines, "DATASET")
    dataset = tokens[1].upper()
    result = {"dataset": dataset, "cell_data": {}}

    if dataset == "STRUCTURED_POINTS":
        for keyword, cast in (("DIMENSIONS", int), ("ORIGIN", float), ("SPACING", float)):
            number, tokens = _expect(lines, keyword)
            try:
                result[keyword.lower()] = [cast(v) for v in tokens[1:4]]
            except ValueError:
                raise ValueError(f"Line {number}: bad {keyword} values")
    elif dataset == "UNSTRUCTURED_GRID":
        number, tokens = _expect(lines, "POINTS")
        n_points = int(tokens[1])
        result["points"] = np.array(lines.numbers(3 * n_points)).reshape(n_points, 3)
        number, tokens = _expect(lines, "CELLS")
        n_cells, size = int(tokens[1]), int(tokens[2])
        flat = lines.numbers(size, int)
        cells, i = [], 0
        while i < len(flat):
            k = flat[i]
            cells.append(flat[i + 1:i + 1 + k])
            i += k + 1
        if len(cells) != n_cells:
            raise ValueError(f"Line {number}: expected {n_cells} cells, got {len(cells)}")
        result["cells"] = cells
        number, tokens = _expect(lines, "CELL_TYPES")
        result["cell_types"] = np.array(lines.numbers(int(tokens[1]), int))
    else:
        raise ValueError(f"Line {number}: unsupported dataset {dataset}")

    number, tokens = _expect(lines, "CELL_DATA")
    n_values = int(tokens[1])
    while lines.position < len(lines.lines):
        try:
            number, tokens = _expect(lines, "SCALARS")
        except ValueError as e:
            if "end of file" in str(e):
                break
            raise
        name = tokens[1]
        _expect(lines, "LOOKUP_TABLE")
        result["cell_data"][name] = np.array(lines.numbers(n_values))
    return result
