"""Compare the compiled and numpy CSR kernels on random SBM-like graphs.

Usage::

    python3 benchmarks/bench_kernels.py [--nodes 2000 5000] [--repeat 5]

Prints the best-of-N wall time per kernel and backend, plus the speedup of
the compiled kernels, and checks that both backends agree.
"""

import argparse
import time

import numpy as np

from lopgpn import datasets as D
from lopgpn.kernels import available_backends
from lopgpn.propagation import PprConfig, a_eps, normalize


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def csr(m):
    return m.row_offsets, m.col_indices, m.values


def workloads(n_nodes, seed=0):
    d = D.synth_sbm(n_nodes=n_nodes, n_classes=5, intra_p=min(1.0, 20.0 / n_nodes), inter_p=0.5 / n_nodes,
                    seed=seed)
    op = a_eps(normalize(d.adjacency, "random_walk"), PprConfig())
    payload = np.random.default_rng(seed).random((n_nodes, 5))
    # a partially filled PPR iterate, as seen mid power iteration
    ref = available_backends()["python"]
    pi = csr(op)
    for _ in range(3):
        pi = ref.spspmm(*pi, *csr(op), n_nodes)
    return {
        "spmm": lambda k: k.spmm(*csr(op), payload),
        "spspmm": lambda k: k.spspmm(*pi, *csr(op), n_nodes),
        "sparsify": lambda k: k.sparsify_to_diagonal(*pi, 1e-3),
    }, op.nnz, len(pi[2])


def agree(a, b):
    if isinstance(a, np.ndarray):
        return np.allclose(a, b, rtol=1e-12, atol=1e-14)
    return all(np.array_equal(x, y) if x.dtype.kind == "i" else np.allclose(x, y, rtol=1e-12, atol=1e-14)
               for x, y in zip(a, b))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, nargs="+", default=[1000, 4000])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the numpy fallback is available")
    print(f"{'nodes':>6} {'kernel':>9} {'nnz':>9} " + " ".join(f"{b:>10}" for b in backends) + "  speedup")
    for n in args.nodes:
        loads, op_nnz, pi_nnz = workloads(n)
        for name, fn in loads.items():
            outputs = {b: fn(k) for b, k in backends.items()}
            if len(outputs) == 2 and not agree(outputs["python"], outputs["cython"]):
                raise SystemExit(f"backends disagree on {name} at n={n}")
            times = {b: best_time(lambda k=k: fn(k), args.repeat) for b, k in backends.items()}
            speed = f"{times['python'] / times['cython']:7.1f}x" if "cython" in times else "      -"
            nnz = op_nnz if name == "spmm" else pi_nnz
            cells = " ".join(f"{times[b] * 1e3:8.2f}ms" for b in backends)
            print(f"{n:>6} {name:>9} {nnz:>9} {cells}  {speed}")


if __name__ == "__main__":
    main()
