"""Side-by-side timing of the numba and pure-numpy kernel variants.

Measures the three hot kernels (forward kinematics, its adjoint, the
kernel-density query) on interactive (B=1), training-batch (B=64), and bulk
(B=512) workloads, checks that both variants agree to float rounding, and
prints median per-call times with the speedup.

Run with the numba backend active (the default when numba is installed):

    python benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import statistics
import time

import numpy as np

from shapeik import kernels
from shapeik.backend import ACTIVE_BACKEND
from shapeik.skeleton import ShapeParams, default_template, shaped_offsets


def median_call_us(fn, args, repeats):
    fn(*args)  # warmup: triggers JIT compilation, touches caches
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        samples.append((time.perf_counter() - start) * 1e6)
    return statistics.median(samples)


def max_abs_diff(a, b):
    if isinstance(a, tuple):
        return max(max_abs_diff(x, y) for x, y in zip(a, b))
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


def fk_args(template, rng, batch):
    shape = ShapeParams(betas=rng.normal(size=10), gender="neutral", scale=1.0)
    offsets = np.broadcast_to(shaped_offsets(template, shape),
                              (batch, template.n_joints, 3)).copy()
    quats = rng.normal(size=(batch, template.n_joints, 4))
    quats /= np.linalg.norm(quats, axis=2, keepdims=True)
    w, x, y, z = quats[..., 0], quats[..., 1], quats[..., 2], quats[..., 3]
    rotations = np.empty((batch, template.n_joints, 3, 3))
    rotations[..., 0, 0] = 1 - 2 * (y * y + z * z)
    rotations[..., 0, 1] = 2 * (x * y - w * z)
    rotations[..., 0, 2] = 2 * (x * z + w * y)
    rotations[..., 1, 0] = 2 * (x * y + w * z)
    rotations[..., 1, 1] = 1 - 2 * (x * x + z * z)
    rotations[..., 1, 2] = 2 * (y * z - w * x)
    rotations[..., 2, 0] = 2 * (x * z - w * y)
    rotations[..., 2, 1] = 2 * (y * z + w * x)
    rotations[..., 2, 2] = 1 - 2 * (x * x + y * y)
    roots = rng.normal(size=(batch, 3))
    return offsets, rotations, roots


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=200,
                        help="timed calls per measurement (median reported)")
    parser.add_argument("--bank", type=int, default=20_000,
                        help="feature bank rows for the kde workload")
    args = parser.parse_args()

    template = default_template()
    parents = template.parents
    rng = np.random.default_rng(0)

    have_numba = ACTIVE_BACKEND == "numba"
    if not have_numba:
        print("numba backend inactive (SHAPEIK_BACKEND=numpy or numba missing); "
              "timing the numpy variants only")

    rows = []
    for batch in (1, 64, 512):
        offsets, rotations, roots = fk_args(template, rng, batch)
        fwd = (parents, offsets, rotations, roots)
        rows.append((f"fk_forward   B={batch:<4}", kernels.fk_forward_numpy,
                     kernels.fk_forward_numba, fwd))

        positions, globals_ = kernels.fk_forward_numpy(*fwd)
        d_pos = rng.normal(size=positions.shape)
        d_glob = rng.normal(size=globals_.shape)
        bwd = (parents, offsets, rotations, globals_, d_pos, d_glob)
        rows.append((f"fk_backward  B={batch:<4}", kernels.fk_backward_numpy,
                     kernels.fk_backward_numba, bwd))

    for n in (2_000, args.bank):
        bank = rng.normal(size=(n, 6))
        query = rng.normal(size=6)
        rows.append((f"kde_weights  n={n:<6}", kernels.kde_weights_numpy,
                     kernels.kde_weights_numba, (bank, query, 0.02)))

    print(f"{'kernel':<22} {'numpy us':>10} {'numba us':>10} {'speedup':>8} "
          f"{'max |diff|':>11}")
    for label, np_fn, nb_fn, call_args in rows:
        t_np = median_call_us(np_fn, call_args, args.repeats)
        if have_numba:
            t_nb = median_call_us(nb_fn, call_args, args.repeats)
            diff = max_abs_diff(np_fn(*call_args), nb_fn(*call_args))
            print(f"{label:<22} {t_np:>10.1f} {t_nb:>10.1f} "
                  f"{t_np / t_nb:>7.1f}x {diff:>11.2e}")
        else:
            print(f"{label:<22} {t_np:>10.1f} {'-':>10} {'-':>8} {'-':>11}")


if __name__ == "__main__":
    main()
