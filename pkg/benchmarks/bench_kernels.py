"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--ring-degree 8192] [--levels 4] [--repeat 5]

Times the raw NTT / pointwise kernels on one RNS limb stack and a full
ciphertext multiplication (tensor + relinearize + rescale) with each
implementation, then prints a small table with the speedup.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from encgnn.ckks import kernels
from encgnn.ckks.backend import CkksBackend
from encgnn.he import HEParams


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times) * 1e3


def bench(name: str, params: HEParams, repeat: int) -> dict[str, float]:
    kernels.use(name)
    be = CkksBackend(params, seed=1)
    ctx = be.ctx
    rows = ctx.ct_rows(params.levels)
    q = be._q(rows)
    rng = np.random.default_rng(0)
    a = np.stack([rng.integers(0, int(qi), params.ring_degree, dtype=np.uint64) for qi in q])
    b = np.stack([rng.integers(0, int(qi), params.ring_degree, dtype=np.uint64) for qi in q])
    keys = be.keygen([1])
    x = be.encrypt(rng.uniform(-1, 1, 64), keys)
    y = be.encrypt(rng.uniform(-1, 1, 64), keys)
    be.mult(x, y, keys)  # warm caches (relin key)
    be.rotate(x, 1, keys)
    return {
        "ntt_forward": best_of(lambda: be._ntt(a.copy(), rows), repeat),
        "ntt_inverse": best_of(lambda: be._intt(a.copy(), rows), repeat),
        "mulmod": best_of(lambda: kernels.impl.mulmod(a, b, q), repeat),
        "ct_mult": best_of(lambda: be.mult(x, y, keys), repeat),
        "ct_rotate": best_of(lambda: be.rotate(x, 1, keys), repeat),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ring-degree", type=int, default=8192)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    params = HEParams.for_depth(args.levels, ring_degree=args.ring_degree)
    impls = kernels.available()
    prev = kernels.impl
    results = {name: bench(name, params, args.repeat) for name in impls}
    kernels.impl = prev
    print(f"N={args.ring_degree}, {args.levels} levels ({args.levels + 1} limbs), best of {args.repeat}, ms")
    head = f"{'op':<12}" + "".join(f"{n:>10}" for n in impls)
    if len(impls) == 2:
        head += f"{'speedup':>10}"
    print(head)
    for op in results[impls[0]]:
        line = f"{op:<12}" + "".join(f"{results[n][op]:>10.2f}" for n in impls)
        if len(impls) == 2:
            line += f"{results['numpy'][op] / results['cython'][op]:>9.1f}x"
        print(line)
    if len(impls) == 1:
        print("compiled extension not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
