"""Compare the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py            # per-kernel timings
    python3 benchmarks/bench_kernels.py --epochs 5 # plus end-to-end training under each path

The end-to-end part runs training in subprocesses, once with
HYPERTRUST_DISABLE_NUMBA=1, since the flag is read at import time.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hypertrust import kernels
from hypertrust.augment import clean_view
from hypertrust.data import generate_synthetic
from hypertrust.model import one_hot_features
from hypertrust.relations import build_all


def best_of(fn, repeat=5, number=3):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_cases(dim):
    g = build_all(generate_synthetic(76, seed=7))
    view = clean_view(g, one_hot_features(g.num_devices))
    to_e, to_a = view.to_hyperedges(), view.to_devices()
    rng = np.random.default_rng(0)
    xa = rng.normal(size=(g.num_devices, dim))
    xe = rng.normal(size=(g.num_hyperedges, dim))
    pts = rng.normal(size=(g.num_devices, dim))
    pos = rng.random((g.num_devices, 2))
    cents = pos[:9].copy()
    ie, je, de = to_e._fwd
    ia, ja, da = to_a._fwd
    return [
        ("csr_spmm (device side)", lambda k: getattr(kernels, f"csr_spmm_{k}")(ia, ja, da, xe, to_a.shape[0])),
        ("csr_spmm_sorted (edge side)", lambda k: getattr(kernels, f"csr_spmm_sorted_{k}")(ie, je, de, xa, to_e.shape[0])),
        ("pairwise_distances cosine", lambda k: getattr(kernels, f"pairwise_distances_{k}")(pts, "cosine")),
        ("kmeans_assign", lambda k: getattr(kernels, f"kmeans_assign_{k}")(pos, cents)),
    ]


def run_kernels(dim):
    print(f"{'kernel':32s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}  max |diff|")
    for name, call in kernel_cases(dim):
        a, b = call("jit"), call("np")  # first call also triggers compilation
        diff = max(float(np.max(np.abs(np.asarray(x, float) - np.asarray(y, float)))) for x, y in
                   zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)))
        t_jit, t_np = best_of(lambda: call("jit")), best_of(lambda: call("np"))
        print(f"{name:32s} {t_jit * 1e3:10.3f} {t_np * 1e3:10.3f} {t_np / t_jit:8.2f}  {diff:.1e}")


SNIPPET = """
import time
from hypertrust._accel import USING_NUMBA
from hypertrust.data import generate_synthetic
from hypertrust.relations import build_all
from hypertrust.trainer import TrainConfig, train
g = build_all(generate_synthetic(76, seed=7))
train(g, TrainConfig(epochs=1))  # warm-up / compilation
r = train(g, TrainConfig(epochs={epochs}))
print(USING_NUMBA, r.duration / {epochs}, r.history[-1].total)
"""


def run_end_to_end(epochs):
    print(f"\nend-to-end training, {epochs} epochs, 76 devices, d=512")
    for disable in ("0", "1"):
        env = dict(os.environ, HYPERTRUST_DISABLE_NUMBA=disable)
        out = subprocess.run([sys.executable, "-c", SNIPPET.format(epochs=epochs)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        label = "numba" if out[0] == "True" else "numpy"
        print(f"  {label:6s} {float(out[1]) * 1e3:8.1f} ms/epoch   final loss {float(out[2]):.10g}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=512)
    ap.add_argument("--epochs", type=int, default=0, help="also time end-to-end training (0: skip)")
    args = ap.parse_args()
    run_kernels(args.dim)
    if args.epochs:
        run_end_to_end(args.epochs)


if __name__ == "__main__":
    main()
