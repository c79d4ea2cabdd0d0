"""Time the numba kernels against their numpy twins on pipeline-sized inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is warmed up once (that call includes JIT compilation and is
reported separately), then timed ``--repeat`` times; the best time is kept.
The outputs of both variants are compared for exact equality as well.
"""
import argparse
import json
import time

import numpy as np

from drmanifold import kernels
from drmanifold._accel import HAVE_NUMBA


def _best(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(rng):
    photo = rng.integers(0, 256, (1024, 1536, 3), dtype=np.uint8)
    canvas = rng.integers(0, 256, (256, 388), dtype=np.uint8)
    t = np.deg2rad(45.0)
    feats = rng.normal(size=(100, 160))
    train = rng.normal(size=(420, 160))
    d2 = kernels.sq_distances_np(feats, train)
    labels = rng.integers(0, 5, 420)
    return [
        ("resize 1024x1536x3 -> 256x388", "resize_bilinear", (photo, 256, 388)),
        ("rotate 45 deg, 256x388", "rotate_bilinear", (canvas, float(np.cos(t)), float(np.sin(t)))),
        ("histogram 256x388", "histogram256", (canvas,)),
        ("distances 100x420, 160 dims", "sq_distances", (feats, train)),
        ("kNN vote k=5, 100x420", "knn_vote", (d2, labels, 5, 5)),
    ]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="also write the rows to this file")
    args = p.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rows = []
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s} {'jit s':>7s}  equal")
    for label, name, a in cases(np.random.default_rng(args.seed)):
        np_fn = getattr(kernels, name + "_np")
        nb_fn = getattr(kernels, name + "_nb")
        t0 = time.perf_counter()
        nb_fn(*a)
        jit = time.perf_counter() - t0
        t_np, out_np = _best(np_fn, a, args.repeat)
        t_nb, out_nb = _best(nb_fn, a, args.repeat)
        equal = bool(np.array_equal(out_np, out_nb))
        rows.append(dict(kernel=label, numpy_s=t_np, numba_s=t_nb, speedup=t_np / t_nb, first_call_s=jit,
                         equal=equal))
        print(f"{label:32s} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:7.1f}x {jit:7.2f}  {equal}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["equal"] for r in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())
