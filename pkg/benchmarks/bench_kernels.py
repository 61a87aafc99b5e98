"""Time the compiled kernels against the numpy reference.

    python benchmarks/bench_kernels.py [--repeat 20]

Also times one full RK4 step under each backend (subprocess with
MD2TFD_PURE set for the numpy run).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from md2tfd import _kernels_py

try:
    from md2tfd import _ckernels
except ImportError:
    _ckernels = None

STEP_SNIPPET = """
import timeit, numpy as np
from md2tfd import BACKEND
from md2tfd.dynamics import _Flow
from md2tfd.tfd import EffectiveHamiltonian, initial_state_spec
rng = np.random.default_rng(0)
N = {N}
h = EffectiveHamiltonian.from_modes(1.0, rng.uniform(0.1, 3, N), rng.uniform(0.01, 0.05, N),
    rng.uniform(0, 1, N), rng.uniform(0.1, 3, N), rng.uniform(0.01, 0.05, N), rng.uniform(0, 1, N))
st = initial_state_spec("up", {M}, (N, N), noise=0.05, seed=1)
fl = _Flow(h)
t = min(timeit.repeat(lambda: fl.step(st.A, st.B, st.displacements, 0.01), number=1, repeat={r}))
print(BACKEND, t)
"""


def inputs(M, K, seed=0):
    rng = np.random.default_rng(seed)
    c = lambda *s: rng.normal(size=s) + 1j * rng.normal(size=s)
    Z = 0.3 * c(M, K)
    S = np.exp(-0.5 * np.abs(Z[:, None, :] - Z[None, :, :]) ** 2).prod(axis=2) + 0j
    w, g = rng.uniform(-2, 2, K), rng.uniform(0, 0.5, K)
    return Z, w, g, S, c(M), c(M), c(M, M)


def bench(mod, M, K, repeat):
    Z, w, g, S, A, B, W = inputs(M, K)
    Q = _kernels_py.pair_sums(Z, w, g)[0]
    out = {}
    for name, fn in (("pair_sums", lambda: mod.pair_sums(Z, w, g)),
                     ("pair_sums_sq", lambda: mod.pair_sums_sq(Z, w, g)),
                     ("reduced_matrix", lambda: mod.reduced_matrix(S, W, Q, A, B, 1e-9))):
        out[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
    return out


def step_time(M, N, repeat, pure):
    env = dict(os.environ)
    env.pop("MD2TFD_PURE", None)
    if pure:
        env["MD2TFD_PURE"] = "1"
    code = STEP_SNIPPET.format(M=M, N=N, r=repeat)
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    backend, t = res.stdout.split()
    return backend, float(t)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the numpy backend is available")
    print(f"{'kernel':16s} {'M':>3s} {'K':>4s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speedup':>8s}")
    for M, K in ((4, 64), (8, 128), (16, 128), (16, 256)):
        ref = bench(_kernels_py, M, K, args.repeat)
        fast = bench(_ckernels, M, K, args.repeat) if _ckernels else None
        for name, t in ref.items():
            if fast:
                print(f"{name:16s} {M:3d} {K:4d} {1e3 * t:11.3f} {1e3 * fast[name]:12.3f} "
                      f"{t / fast[name]:8.1f}")
            else:
                print(f"{name:16s} {M:3d} {K:4d} {1e3 * t:11.3f}")
    print()
    print("full RK4 step (4 assemblies + solves)")
    for M, N in ((4, 32), (8, 32), (16, 32)):
        _, tp = step_time(M, N, 5, pure=True)
        line = f"M={M:2d} N={N}  numpy {1e3 * tp:8.2f} ms"
        if _ckernels:
            _, tc = step_time(M, N, 5, pure=False)
            line += f"  cython {1e3 * tc:8.2f} ms  speedup {tp / tc:5.2f}"
        print(line)


if __name__ == "__main__":
    main()
