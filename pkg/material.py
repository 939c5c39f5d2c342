"""
Modified SIMP material: E(rho) = Emin + rho^p (E0 - Emin)
The constitutive matrix is built for unit modulus, density scaling happens during assembly.
"""

import numpy as np

__version__ = "0.1.0"

PLANE_STRESS = "plane_stress"
SOLID_3D = "solid_3d"

# Voigt ordering of the strain components, engineering shear strains last.
VOIGT_PAIRS = {
    2: [(0, 0), (1, 1), (0, 1)],
    3: [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)],
}


class SimpMaterial:
    __slots__ = ('E0', 'Emin', 'p', 'nu', 'assumption')

    def __init__(self, E0=1.0, Emin=None, p=3.0, nu=0.3, assumption=PLANE_STRESS):
        if Emin is None:
            Emin = 1e-9 * E0
        if not 0 < Emin < E0:
            raise ValueError(f"Need 0 < Emin < E0, got Emin={Emin}, E0={E0}")
        if p < 1:
            raise ValueError(f"Penalization must be >= 1, got {p}")
        if not 0 <= nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {nu}")
        if assumption not in (PLANE_STRESS, SOLID_3D):
            raise ValueError(f"Unsupported assumption {assumption!r}, plane strain is not available")
        self.E0 = float(E0)
        self.Emin = float(Emin)
        self.p = float(p)
        self.nu = float(nu)
        self.assumption = assumption

    @classmethod
    def for_dim(cls, dim, **kwargs):
        return cls(assumption=PLANE_STRESS if dim == 2 else SOLID_3D, **kwargs)

    @property
    def dim(self):
        return 2 if self.assumption == PLANE_STRESS else 3

    def __repr__(self):
        return f"SimpMaterial(E0={self.E0}, Emin={self.Emin}, p={self.p}, nu={self.nu}, {self.assumption})"


def _check_density(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(rho > 1) or np.any(np.isnan(rho)):
        raise ValueError(f"Density outside [0, 1]: min {np.nanmin(rho)}, max {np.nanmax(rho)}")
    return rho


def interpolate_modulus(mat, rho):
    rho = _check_density(rho)
    return mat.Emin + rho ** mat.p * (mat.E0 - mat.Emin)


def modulus_derivative(mat, rho):
    rho = _check_density(rho)
    return mat.p * rho ** (mat.p - 1.0) * (mat.E0 - mat.Emin)


def elasticity_matrix(mat):
    """Unit modulus D: 3x3 plane stress or 6x6 isotropic, Voigt order of VOIGT_PAIRS."""
    nu = mat.nu
    if not 0 <= nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {nu}")
    if mat.assumption == PLANE_STRESS:
        return 1.0 / (1.0 - nu ** 2) * np.array([
            [1.0, nu, 0.0],
            [nu, 1.0, 0.0],
            [0.0, 0.0, (1.0 - nu) / 2.0]])
    # Lame constants for E = 1
    lam = nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = 1.0 / (2.0 * (1.0 + nu))
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[np.arange(3), np.arange(3)] = lam + 2.0 * mu
    D[np.arange(3, 6), np.arange(3, 6)] = mu
    return D


def elasticity_tensor(mat):
    """The 4th order tensor C_ijkl matching elasticity_matrix, for the closed form element integrals."""
    D = elasticity_matrix(mat)
    dim = mat.dim
    pairs = VOIGT_PAIRS[dim]
    C = np.zeros((dim, dim, dim, dim))
    for I, (i, j) in enumerate(pairs):
        for J, (k, l) in enumerate(pairs):
            for a, b in {(i, j), (j, i)}:
                for c, d in {(k, l), (l, k)}:
                    C[a, b, c, d] = D[I, J]
    return C
