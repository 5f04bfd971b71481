"""Hot numeric kernels: batched forward kinematics, its adjoint, KDE weights.

Each kernel has a pure-numpy implementation (``*_numpy``) vectorized over the
batch, and a numba ``@njit`` build of an equivalent loop nest. The module
aliases (``fk_forward`` etc.) point at the variant picked by
:mod:`shapeik.backend`. Both variants agree to float rounding; bitwise
determinism holds within one backend, not across backends.

Array conventions (all float64, C-contiguous):
    parents    (J,)  int64, parents[0] == -1, parents[j] < j
    offsets    (B, J, 3)   per-sample local bone offsets
    rotations  (B, J, 3, 3) local joint rotations, index 0 = root orientation
    roots      (B, 3)      root world positions
    positions  (B, J, 3)   world joint positions
    globals    (B, J, 3, 3) world joint rotations
"""

from __future__ import annotations

import numpy as np

from .backend import ACTIVE_BACKEND


# ---------------------------------------------------------------------------
# pure-numpy variants
# ---------------------------------------------------------------------------

def fk_forward_numpy(parents, offsets, rotations, roots):
    """World positions and rotations along the hierarchy.

    root: p_0 = roots, G_0 = R_0; child j: G_j = G_parent R_j,
    p_j = p_parent + G_parent o_j.
    """
    B, J = offsets.shape[0], offsets.shape[1]
    positions = np.empty((B, J, 3), dtype=np.float64)
    globals_ = np.empty((B, J, 3, 3), dtype=np.float64)
    positions[:, 0] = roots
    globals_[:, 0] = rotations[:, 0]
    for j in range(1, J):
        p = parents[j]
        gp = globals_[:, p]
        positions[:, j] = positions[:, p] + np.einsum("bik,bk->bi", gp, offsets[:, j])
        globals_[:, j] = gp @ rotations[:, j]
    return positions, globals_


def fk_backward_numpy(parents, offsets, rotations, globals_, d_positions, d_globals):
    """Adjoint of :func:`fk_forward_numpy`.

    Accumulates upstream gradients on positions and world rotations back to
    local rotations and the root position. Children are processed before
    their parents (descending index order is enough because parents[j] < j).
    """
    B, J = offsets.shape[0], offsets.shape[1]
    dpos = d_positions.astype(np.float64, copy=True)
    dglob = d_globals.astype(np.float64, copy=True)
    d_rotations = np.empty((B, J, 3, 3), dtype=np.float64)
    for j in range(J - 1, 0, -1):
        p = parents[j]
        gp = globals_[:, p]
        # G_j = G_p R_j
        d_rotations[:, j] = np.einsum("bki,bkl->bil", gp, dglob[:, j])
        dglob[:, p] += np.einsum("bil,bkl->bik", dglob[:, j], rotations[:, j])
        # p_j = p_p + G_p o_j
        dglob[:, p] += np.einsum("bi,bk->bik", dpos[:, j], offsets[:, j])
        dpos[:, p] += dpos[:, j]
    d_rotations[:, 0] = dglob[:, 0]
    return d_rotations, dpos[:, 0].copy()


def kde_weights_numpy(bank_features, query, h):
    """Shift-stabilized Gaussian kernel weights against a feature bank.

    Returns (weights, d2min, argmin) where
    weights[i] = exp(-(d2_i - d2_min) / (2 h^2)), d2_i = ||query - f_i||^2.
    The unshifted weight sum is weights.sum() * exp(-d2min / (2 h^2)).
    """
    diff = bank_features - query
    d2 = np.einsum("ij,ij->i", diff, diff)
    idx = int(np.argmin(d2))
    d2min = d2[idx]
    weights = np.exp(-(d2 - d2min) / (2.0 * h * h))
    return weights, d2min, idx


# ---------------------------------------------------------------------------
# numba variants (compiled only when the numba backend is active)
# ---------------------------------------------------------------------------

def _fk_forward_loops(parents, offsets, rotations, roots):
    B, J = offsets.shape[0], offsets.shape[1]
    positions = np.empty((B, J, 3), dtype=np.float64)
    globals_ = np.empty((B, J, 3, 3), dtype=np.float64)
    for b in range(B):
        for i in range(3):
            positions[b, 0, i] = roots[b, i]
            for k in range(3):
                globals_[b, 0, i, k] = rotations[b, 0, i, k]
        for j in range(1, J):
            p = parents[j]
            for i in range(3):
                acc = positions[b, p, i]
                for k in range(3):
                    acc += globals_[b, p, i, k] * offsets[b, j, k]
                positions[b, j, i] = acc
            for i in range(3):
                for k in range(3):
                    acc = 0.0
                    for l in range(3):
                        acc += globals_[b, p, i, l] * rotations[b, j, l, k]
                    globals_[b, j, i, k] = acc
    return positions, globals_


def _fk_backward_loops(parents, offsets, rotations, globals_, d_positions, d_globals):
    B, J = offsets.shape[0], offsets.shape[1]
    dpos = d_positions.copy()
    dglob = d_globals.copy()
    d_rotations = np.empty((B, J, 3, 3), dtype=np.float64)
    d_roots = np.empty((B, 3), dtype=np.float64)
    for b in range(B):
        for j in range(J - 1, 0, -1):
            p = parents[j]
            for i in range(3):
                for l in range(3):
                    acc = 0.0
                    for k in range(3):
                        acc += globals_[b, p, k, i] * dglob[b, j, k, l]
                    d_rotations[b, j, i, l] = acc
            for i in range(3):
                for k in range(3):
                    acc = 0.0
                    for l in range(3):
                        acc += dglob[b, j, i, l] * rotations[b, j, k, l]
                    dglob[b, p, i, k] += acc + dpos[b, j, i] * offsets[b, j, k]
            for i in range(3):
                dpos[b, p, i] += dpos[b, j, i]
        for i in range(3):
            d_roots[b, i] = dpos[b, 0, i]
            for k in range(3):
                d_rotations[b, 0, i, k] = dglob[b, 0, i, k]
    return d_rotations, d_roots


def _kde_weights_loops(bank_features, query, h):
    n = bank_features.shape[0]
    m = bank_features.shape[1]
    d2 = np.empty(n, dtype=np.float64)
    d2min = np.inf
    idx = 0
    for i in range(n):
        acc = 0.0
        for k in range(m):
            diff = query[k] - bank_features[i, k]
            acc += diff * diff
        d2[i] = acc
        if acc < d2min:
            d2min = acc
            idx = i
    inv = 1.0 / (2.0 * h * h)
    weights = np.empty(n, dtype=np.float64)
    for i in range(n):
        weights[i] = np.exp(-(d2[i] - d2min) * inv)
    return weights, d2min, idx


fk_forward_numba = None
fk_backward_numba = None
kde_weights_numba = None

if ACTIVE_BACKEND == "numba":
    from numba import njit

    fk_forward_numba = njit(cache=True)(_fk_forward_loops)
    fk_backward_numba = njit(cache=True)(_fk_backward_loops)
    kde_weights_numba = njit(cache=True)(_kde_weights_loops)

    fk_forward = fk_forward_numba
    fk_backward = fk_backward_numba
    kde_weights = kde_weights_numba
else:
    fk_forward = fk_forward_numpy
    fk_backward = fk_backward_numpy
    kde_weights = kde_weights_numpy
