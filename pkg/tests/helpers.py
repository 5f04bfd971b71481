"""Shared test oracles, written independently of the package kernels."""

import numpy as np


def naive_fk(parents, offsets, rotations, root):
    """Single-sample FK by walking each joint's ancestor chain.

    Deliberately structured differently from the package implementation:
    for every joint the chain root..joint is collected, then world transforms
    are composed along it from scratch with plain dot products.
    """
    J = len(parents)
    positions = np.zeros((J, 3))
    globals_ = np.zeros((J, 3, 3))
    for j in range(J):
        chain = []
        k = j
        while k != -1:
            chain.append(k)
            k = parents[k]
        chain.reverse()
        G = np.eye(3)
        p = np.asarray(root, dtype=float).copy()
        for idx, node in enumerate(chain):
            if idx > 0:
                p = p + G.dot(offsets[node])
            G = G.dot(rotations[node])
        positions[j] = p
        globals_[j] = G
    return positions, globals_


def central_diff(f, x, eps=1e-6):
    """Central finite-difference gradient of scalar f at flat array x."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.ravel()
    g = grad.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = f(x)
        flat[i] = old - eps
        lo = f(x)
        flat[i] = old
        g[i] = (hi - lo) / (2 * eps)
    return grad


def random_rotations(rng, *shape):
    """Uniformly random rotation matrices of the given leading shape."""
    from scipy.spatial.transform import Rotation

    n = int(np.prod(shape)) if shape else 1
    mats = Rotation.random(n, random_state=np.random.RandomState(rng.integers(2**31))).as_matrix()
    return mats.reshape(*shape, 3, 3) if shape else mats[0]
