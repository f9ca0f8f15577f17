"""Numba kernels against their numpy twins, then whole-sequence tracking under each backend.

    python benchmarks/bench_kernels.py [--repeat N] [--frames N]

Kernel timings run in this process with numba enabled (the numpy twins are
plain functions either way). End-to-end timings start a fresh interpreter per
backend because the backend is fixed at import time.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dpmot import USE_NUMBA, kernels
from dpmot.kalman import build_matrices

E2E = """
import sys
from dpmot import synth, tracker, backend_name
sc = synth.pacing_scene(0, n_frames={frames})
frames = synth.detections_by_frame(synth.render(sc))
cfg = tracker.TrackerConfig()
tracker.run_sequence({{1: frames[1], 2: frames[2]}}, cfg, sc.camera)  # warm-up / compile
res = tracker.run_sequence(frames, cfg, sc.camera)
print(backend_name(), res.fps)
"""


def kernel_cases(rng):
    cost = rng.random((200, 200))

    lengths = rng.integers(1, 30, size=40)
    vecs = np.sort(rng.random((40, 30)) * 100, axis=1)
    dvecs = np.sort(rng.random((40, 30)) * 100, axis=1)
    dlen = rng.integers(1, 30, size=40)

    a = rng.permutation(200)
    b = rng.permutation(200)

    mats = build_matrices(use_depth=True)
    n = 20
    means = rng.random((n, mats.dim)) * 100
    covs = np.stack([np.eye(mats.dim) * 10.0 for _ in range(n)])
    ctl = rng.standard_normal((n, mats.n_control))
    meas = means @ mats.H.T + rng.standard_normal((n, mats.H.shape[0]))

    return [
        ("hungarian 200x200", kernels._hungarian_nb, kernels._hungarian_np, (cost,)),
        ("align_matrix 40x40", kernels._align_matrix_nb, kernels._align_matrix_np, (vecs, lengths, dvecs, dlen)),
        ("lcs n=200", kernels._lcs_nb, kernels._lcs_np, (a, b)),
        ("kf_predict x20", kernels._kf_predict_nb, kernels._kf_predict_np, (means, covs, mats.F, mats.G, mats.Q, ctl)),
        ("kf_update x20", kernels._kf_update_nb, kernels._kf_update_np, (means, covs, mats.H, mats.R, meas)),
    ]


def best_of(fn, args, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(lambda: fn(*args), number=1), 1e-7)))
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def agree(x, y):
    if isinstance(x, tuple):
        return all(agree(p, q) for p, q in zip(x, y))
    return np.allclose(np.asarray(x, dtype=float), np.asarray(y, dtype=float), rtol=1e-9, atol=1e-9)


def end_to_end(frames, disable):
    env = dict(os.environ)
    if disable:
        env["DPMOT_DISABLE_NUMBA"] = "1"
    else:
        env.pop("DPMOT_DISABLE_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", E2E.format(frames=frames)], env=env, capture_output=True, text=True, check=True)
    name, fps = out.stdout.split()
    return name, float(fps)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--frames", type=int, default=1000, help="length of the end-to-end sequence (20 agents)")
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args()
    if not USE_NUMBA:
        sys.exit("numba is disabled or missing; unset DPMOT_DISABLE_NUMBA to compare backends")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'numba (us)':>12}{'numpy (us)':>12}{'speed-up':>10}  agree")
    for name, nb, npf, fargs in kernel_cases(rng):
        r_nb, r_np = nb(*fargs), npf(*fargs)  # also compiles
        t_nb = best_of(nb, fargs, args.repeat)
        t_np = best_of(npf, fargs, args.repeat)
        print(f"{name:<22}{t_nb * 1e6:>12.1f}{t_np * 1e6:>12.1f}{t_np / t_nb:>9.1f}x  {agree(r_nb, r_np)}")

    if args.skip_e2e:
        return
    print(f"\nend-to-end, {args.frames} frames, 20 agents, default configuration")
    for disable in (False, True):
        name, fps = end_to_end(args.frames, disable)
        print(f"  {name:<8}{fps:>10.1f} frames/s")


if __name__ == "__main__":
    main()
