"""
Filters for density based topology optimization
Linear decay neighbourhood matrix H_ij = max(0, r_min - |c_i - c_j|) built with a KD-tree,
sensitivity filtering, density filtering with its chain rule and Heaviside projection with beta continuation.
"""

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

import log
from mesh import element_geometry

__version__ = "0.1.2"

"""
0.1.0 : sensitivity and density filters
0.1.1 : heaviside projection, beta continuation
0.1.2 : cKDTree neighbourhood search, brute force builder shares the weight kernel
"""

SENSITIVITY = "sensitivity"
DENSITY = "density"
HEAVISIDE = "heaviside"
NONE = "none"
KINDS = (SENSITIVITY, DENSITY, HEAVISIDE, NONE)

GAMMA = 1e-3


class FilterOperator:
    __slots__ = ('kind', 'H', 'Hs', 'Hv', 'volumes', 'r_min', 'beta', 'beta_max', 'continuation_iter',
                 'gamma', 'last_increase')

    def __init__(self, kind, H, volumes, r_min, beta=1.0, beta_max=512.0, continuation_iter=50, gamma=GAMMA):
        if kind not in KINDS:
            raise ValueError(f"Unknown filter kind {kind!r}, expected one of {KINDS}")
        if kind == HEAVISIDE and not 1.0 <= beta <= beta_max:
            raise ValueError(f"Need 1 <= beta <= beta_max, got {beta}, {beta_max}")
        self.kind = kind
        self.H = H
        self.volumes = np.asarray(volumes, dtype=float)
        self.r_min = float(r_min)
        # row sums, and the volume weighted normalisation of the density filter
        self.Hs = np.asarray(H.sum(axis=1)).ravel()
        self.Hv = H @ self.volumes
        self.beta = float(beta)
        self.beta_max = float(beta_max)
        self.continuation_iter = int(continuation_iter)
        self.gamma = gamma
        self.last_increase = 0

    @property
    def filters_density(self):
        return self.kind in (DENSITY, HEAVISIDE)

    def __repr__(self):
        return f"FilterOperator({self.kind}, r_min={self.r_min}, nnz={self.H.nnz}, beta={self.beta})"


def pair_weights(centroids, rows, cols, r_min):
    """r_min - distance for the given element pairs, the same kernel for every builder."""
    diff = centroids[rows] - centroids[cols]
    return r_min - np.sqrt(np.sum(diff * diff, axis=1))


def weights_to_matrix(rows, cols, weights, n):
    keep = weights > 0
    H = sp.coo_matrix((weights[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    H.sort_indices()
    return H


def filter_matrix(centroids, r_min, workers=-1):
    """H from a KD-tree ball query, O(N k)."""
    centroids = np.asarray(centroids, dtype=float)
    if r_min <= 0:
        raise ValueError(f"Filter radius must be positive, got {r_min}")
    tree = cKDTree(centroids)
    neighbours = tree.query_ball_point(centroids, r_min, workers=workers, return_sorted=True)
    counts = np.fromiter((len(item) for item in neighbours), dtype=np.int64, count=len(neighbours))
    rows = np.repeat(np.arange(len(centroids)), counts)
    cols = np.fromiter((j for item in neighbours for j in item), dtype=np.int64, count=int(counts.sum()))
    return weights_to_matrix(rows, cols, pair_weights(centroids, rows, cols, r_min), len(centroids))


def build_filter(mesh, r_min, kind=SENSITIVITY, beta=1.0, beta_max=512.0, continuation_iter=50, workers=-1):
    if r_min <= 0:
        raise ValueError(f"Filter radius must be positive, got {r_min}")
    centroids, volumes = element_geometry(mesh)
    H = filter_matrix(centroids, r_min, workers=workers)
    op = FilterOperator(kind, H, volumes, r_min, beta=beta, beta_max=beta_max, continuation_iter=continuation_iter)
    log.get_app_log().debug(f"Built {op}")
    return op


def filter_sensitivities(op, rho, dc):
    rho = np.asarray(rho, dtype=float)
    return op.H @ (rho * dc) / (np.maximum(op.gamma, rho) * op.Hs)


def filter_density_forward(op, rho):
    rho = np.asarray(rho, dtype=float)
    rho_tilde = op.H @ (op.volumes * rho) / op.Hv
    # a weighted average never leaves the input range, clip the round-off
    return np.clip(rho_tilde, rho.min(), rho.max())


def filter_density_backward(op, dpsi_drho_tilde):
    return op.volumes * (op.H.T @ (np.asarray(dpsi_drho_tilde, dtype=float) / op.Hv))


def heaviside_forward(op, rho_tilde):
    rho_tilde = np.asarray(rho_tilde, dtype=float)
    beta = op.beta
    return np.clip(1.0 - np.exp(-beta * rho_tilde) + rho_tilde * np.exp(-beta), 0.0, 1.0)


def heaviside_backward(op, dpsi_drho_bar, rho_tilde):
    beta = op.beta
    return np.asarray(dpsi_drho_bar, dtype=float) * (beta * np.exp(-beta * np.asarray(rho_tilde)) + np.exp(-beta))


def physical_density(op, rho):
    """(rho_tilde, rho_physical) for the design rho. Without density filtering both are rho."""
    rho = np.asarray(rho, dtype=float)
    if op is None or not op.filters_density:
        return rho, rho
    rho_tilde = filter_density_forward(op, rho)
    if op.kind == HEAVISIDE:
        return rho_tilde, heaviside_forward(op, rho_tilde)
    return rho_tilde, rho_tilde


def design_gradient(op, rho_tilde, dpsi_dphysical):
    """Pulls a gradient with respect to the physical density back to the design variables."""
    if op is None or not op.filters_density:
        return np.asarray(dpsi_dphysical, dtype=float)
    if op.kind == HEAVISIDE:
        dpsi_dphysical = heaviside_backward(op, dpsi_dphysical, rho_tilde)
    return filter_density_backward(op, dpsi_dphysical)


def continuation_step(op, iteration, max_change, tol=0.01):
    """Doubles beta after continuation_iter iterations at the current beta, or once converged at it.

    Returns (beta, changed). A change restarts the outer convergence test.
    """
    if op.kind != HEAVISIDE or op.beta >= op.beta_max:
        return op.beta, False
    if iteration - op.last_increase >= op.continuation_iter or max_change <= tol:
        op.beta = min(2.0 * op.beta, op.beta_max)
        op.last_increase = iteration
        return op.beta, True
    return op.beta, False
